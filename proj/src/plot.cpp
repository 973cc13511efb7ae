#include "mro/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

namespace mro::plot {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

/// Roughly `target` round tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

struct Frame {
  double left = 64, right = 160, top = 40, bottom = 52;
  double x0, x1, y0, y1;
  int width, height;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

void axes(std::ostream& o, const Frame& f, const FigureOptions& opt) {
  const double xb = f.height - f.bottom, xr = f.width - f.right;
  o << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << xr - f.left
    << "\" height=\"" << xb - f.top << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double t : ticks(f.x0, f.x1)) {
    const double x = f.px(t);
    o << "<line x1=\"" << x << "\" y1=\"" << xb << "\" x2=\"" << x << "\" y2=\"" << xb + 5
      << "\" stroke=\"#444\"/>\n<text x=\"" << x << "\" y=\"" << xb + 18
      << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  for (double t : ticks(f.y0, f.y1)) {
    const double y = f.py(t);
    o << "<line x1=\"" << f.left - 5 << "\" y1=\"" << y << "\" x2=\"" << xr << "\" y2=\"" << y
      << "\" stroke=\"#ddd\"/>\n<text x=\"" << f.left - 8 << "\" y=\"" << y + 4
      << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  o << "<text x=\"" << (f.left + xr) / 2 << "\" y=\"" << f.height - 12
    << "\" text-anchor=\"middle\">" << escape(opt.x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << (f.top + xb) / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(opt.y_label) << "</text>\n";
  if (!opt.title.empty()) {
    o << "<text x=\"" << (f.left + xr) / 2 << "\" y=\"24\" text-anchor=\"middle\" font-weight=\"bold\">"
      << escape(opt.title) << "</text>\n";
  }
}

void header(std::ostream& o, int w, int h) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << ' ' << h
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

json read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open manifest " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DomainError("manifest " + path.string() + ": " + e.what());
  }
}

/// Successful runs grouped by algorithm, in order of first appearance.
std::vector<std::pair<std::string, std::vector<json>>> ok_runs(const json& manifest) {
  std::vector<std::pair<std::string, std::vector<json>>> out;
  if (!manifest.contains("runs") || !manifest["runs"].is_array()) {
    throw DomainError("manifest has no runs array");
  }
  for (const auto& r : manifest["runs"]) {
    const auto alg = r.at("algorithm").get<std::string>();
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == alg; });
    if (it == out.end()) {
      out.emplace_back(alg, std::vector<json>{});
      it = std::prev(out.end());
    }
    if (r.value("status", "") == "ok") it->second.push_back(r);
  }
  return out;
}

}  // namespace

Curve read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "checkpoint,performance") {
    throw DomainError("curve CSV: unexpected header");
  }
  Curve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DomainError("curve CSV: malformed row '" + line + "'");
    try {
      c.checkpoints.push_back(static_cast<Index>(std::stoull(line.substr(0, comma))));
      c.values.push_back(line.compare(comma + 1, std::string::npos, "nan") == 0
                             ? std::nan("")
                             : std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw DomainError("curve CSV: malformed row '" + line + "'");
    }
  }
  return c;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Series summarize(std::string label, const std::vector<Curve>& curves) {
  if (curves.empty()) throw DomainError("series '" + label + "' has no runs");
  Series s;
  s.label = std::move(label);
  s.checkpoints = curves.front().checkpoints;
  s.runs = curves.size();
  for (std::size_t r = 0; r < curves.size(); ++r) {
    if (curves[r].checkpoints != s.checkpoints || curves[r].values.size() != s.checkpoints.size()) {
      throw DomainError("series '" + s.label + "': run " + std::to_string(r) +
                        " has a different checkpoint grid");
    }
  }
  for (std::size_t i = 0; i < s.checkpoints.size(); ++i) {
    std::vector<double> column;
    for (const auto& c : curves) column.push_back(c.values[i]);
    s.median.push_back(quantile(column, 0.5));
    s.q25.push_back(quantile(column, 0.25));
    s.q75.push_back(quantile(column, 0.75));
  }
  return s;
}

std::vector<Series> series_from_manifest(const fs::path& manifest) {
  const auto doc = read_manifest(manifest);
  const auto base = manifest.parent_path();
  std::vector<Series> out;
  for (const auto& [alg, runs] : ok_runs(doc)) {
    if (runs.empty()) continue;
    std::vector<Curve> curves;
    for (const auto& r : runs) {
      const auto path = base / r.at("curve").get<std::string>();
      std::ifstream in(path);
      if (!in) throw DomainError("cannot open curve " + path.string());
      curves.push_back(read_curve_csv(in));
    }
    out.push_back(summarize(alg, curves));
  }
  return out;
}

std::vector<Support> supports_from_manifest(const fs::path& manifest) {
  const auto doc = read_manifest(manifest);
  const auto base = manifest.parent_path();
  std::vector<Support> out;
  for (const auto& [alg, runs] : ok_runs(doc)) {
    if (runs.empty()) continue;
    const auto path = base / fs::path(runs.front().at("curve").get<std::string>()).parent_path() /
                      "strategy.csv";
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open strategy " + path.string());
    out.push_back({alg, read_strategy_csv(in)});
  }
  return out;
}

std::string performance_svg(const std::vector<Series>& series, const FigureOptions& options) {
  Frame f;
  f.width = options.width;
  f.height = options.height;
  f.x0 = 0.0;
  f.x1 = 1.0;
  f.y0 = 0.0;
  f.y1 = 1.0;
  bool any = false;
  double ylo = 0.0, yhi = 1.0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.checkpoints.size(); ++i) {
      const double lo = s.q25[i], hi = s.q75[i];
      if (!std::isfinite(lo) || !std::isfinite(hi)) continue;
      if (!any) ylo = lo, yhi = hi;
      ylo = std::min(ylo, lo);
      yhi = std::max(yhi, hi);
      f.x1 = std::max(f.x1, static_cast<double>(s.checkpoints[i]));
      any = true;
    }
  }
  if (any) {
    const double pad = std::max(0.05 * (yhi - ylo), 1e-3);
    f.y0 = ylo - pad;
    f.y1 = yhi + pad;
  }

  std::ostringstream o;
  header(o, f.width, f.height);
  axes(o, f, options);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = color(k);
    o << "<g class=\"series\" data-label=\"" << escape(s.label) << "\">\n";
    if (s.runs > 1) {
      o << "<polygon fill=\"" << c << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.checkpoints.size(); ++i) {
        o << f.px(static_cast<double>(s.checkpoints[i])) << ',' << f.py(s.q75[i]) << ' ';
      }
      for (std::size_t i = s.checkpoints.size(); i-- > 0;) {
        o << f.px(static_cast<double>(s.checkpoints[i])) << ',' << f.py(s.q25[i]) << ' ';
      }
      o << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.checkpoints.size(); ++i) {
      if (std::isfinite(s.median[i])) {
        o << f.px(static_cast<double>(s.checkpoints[i])) << ',' << f.py(s.median[i]) << ' ';
      }
    }
    o << "\"/>\n</g>\n";
    const double ly = f.top + 10 + 20.0 * static_cast<double>(k);
    const double lx = f.width - f.right + 14;
    o << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 22 << "\" y2=\"" << ly
      << "\" stroke=\"" << c << "\" stroke-width=\"3\"/>\n<text x=\"" << lx + 28 << "\" y=\""
      << ly + 4 << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string support_svg(const std::vector<Support>& supports, Index num_points,
                        const FigureOptions& options) {
  if (num_points == 0) {
    for (const auto& s : supports) num_points = std::max(num_points, s.strategy.max_index() + 1);
  }
  const int panel_h = 140;
  const int height = 40 + panel_h * static_cast<int>(std::max<std::size_t>(supports.size(), 1)) + 20;
  std::ostringstream o;
  header(o, options.width, height);
  if (!options.title.empty()) {
    o << "<text x=\"" << options.width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-weight=\"bold\">"
      << escape(options.title) << "</text>\n";
  }
  for (std::size_t k = 0; k < supports.size(); ++k) {
    Frame f;
    f.width = options.width;
    f.height = 40 + panel_h * static_cast<int>(k + 1);
    f.top = 40 + panel_h * static_cast<double>(k) + 12;
    f.bottom = 30;
    f.right = 24;
    f.x0 = -0.5;
    f.x1 = static_cast<double>(std::max<Index>(num_points, 1)) - 0.5;
    f.y0 = 0.0;
    f.y1 = 1.0;
    FigureOptions panel = options;
    panel.title.clear();
    panel.x_label = k + 1 == supports.size() ? "decision point" : "";
    panel.y_label = supports[k].label;
    axes(o, f, panel);
    o << "<g class=\"support\" data-label=\"" << escape(supports[k].label) << "\">\n";
    for (const auto& a : supports[k].strategy.support()) {
      const double x = f.px(static_cast<double>(a.index));
      o << "<line x1=\"" << x << "\" y1=\"" << f.py(0.0) << "\" x2=\"" << x << "\" y2=\""
        << f.py(a.probability) << "\" stroke=\"" << color(k) << "\" stroke-width=\"2\"/>\n"
        << "<circle cx=\"" << x << "\" cy=\"" << f.py(a.probability) << "\" r=\"3\" fill=\""
        << color(k) << "\"/>\n";
    }
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace mro::plot
