// Command-line front end: one subcommand per experiment protocol.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mro/experiment.hpp"
#include "mro/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::string profile;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment file")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seeds", f.seeds, "comma-separated seeds")->delimiter(',');
  cmd->add_option("--profile", f.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
}

/// Flags override the file; everything then goes through the same validation.
mro::ExperimentConfig resolve(const CommonFlags& f, mro::BenchmarkKind bench) {
  json doc = json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw mro::ConfigError("<file>", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw mro::ConfigError("<file>", "expected a JSON object");
  }
  const std::string name(mro::to_string(bench));
  if (doc.contains("benchmark") && doc["benchmark"] != name) {
    throw mro::ConfigError("benchmark", "file declares " + doc["benchmark"].dump() +
                                            " but the subcommand runs " + name);
  }
  doc["benchmark"] = name;
  if (!f.profile.empty()) doc["profile"] = f.profile;
  if (!f.seeds.empty()) doc["seeds"] = f.seeds;
  if (!f.out.empty()) doc["output_dir"] = f.out;
  auto config = mro::parse_experiment_config(doc);
  config.validate();
  return config;
}

int report_synthetic(const mro::ExperimentReport& r, const mro::ExperimentConfig& c) {
  std::cout << "algorithm,seed,status,final_performance\n";
  for (const auto& run : r.runs) {
    std::cout << run.algorithm << ',' << run.seed << ',' << (run.ok ? "ok" : "failed") << ','
              << (run.ok && !run.curve.empty() ? mro::format_double(run.curve.back()) : "nan") << '\n';
    if (!run.ok) std::cerr << run.algorithm << " seed " << run.seed << ": " << run.error << '\n';
  }
  std::cerr << "results in " << c.output_dir << '\n';
  return r.all_ok() ? 0 : 1;
}

int cmd_plot(const std::vector<std::string>& inputs, const std::string& out_dir,
             const std::string& title) {
  std::vector<mro::plot::Series> series;
  std::vector<mro::plot::Support> supports;
  std::map<std::string, std::vector<mro::plot::Curve>> loose;
  std::vector<std::string> loose_order;
  for (const auto& input : inputs) {
    const fs::path p(input);
    if (p.extension() == ".json") {
      for (auto& s : mro::plot::series_from_manifest(p)) series.push_back(std::move(s));
      for (auto& s : mro::plot::supports_from_manifest(p)) supports.push_back(std::move(s));
      continue;
    }
    // <algorithm>/seed_<s>/curve.csv: group by the algorithm directory.
    std::ifstream in(p);
    if (!in) throw mro::DomainError("cannot open " + input);
    const auto label = p.parent_path().parent_path().filename().string();
    if (!loose.count(label)) loose_order.push_back(label);
    loose[label].push_back(mro::plot::read_curve_csv(in));
  }
  for (const auto& label : loose_order) {
    series.push_back(mro::plot::summarize(label.empty() ? "series" : label, loose[label]));
  }
  fs::create_directories(out_dir);
  mro::plot::FigureOptions opt;
  opt.title = title;
  const auto perf = fs::path(out_dir) / "performance.svg";
  std::ofstream(perf) << mro::plot::performance_svg(series, opt);
  std::cout << perf.string() << '\n';
  if (!supports.empty()) {
    const auto sup = fs::path(out_dir) / "support.svg";
    std::ofstream(sup) << mro::plot::support_svg(supports, 0, opt);
    std::cout << sup.string() << '\n';
  }
  return 0;
}

int cmd_oracle(const std::string& table_path, double epsilon) {
  std::ifstream in(table_path);
  if (!in) throw mro::DomainError("cannot open " + table_path);
  const auto table = mro::read_table_csv(in);
  const auto r = mro::maximin_value(table, epsilon);
  const auto [pure_x, pure_v] = mro::pure_maximin(table);
  std::cout << "tau_star," << mro::format_double(r.value) << '\n'
            << "upper_bound," << mro::format_double(r.upper_bound) << '\n'
            << "iterations," << r.iterations << '\n'
            << "pure_maximin_index," << pure_x << '\n'
            << "pure_maximin_value," << mro::format_double(pure_v) << '\n';
  mro::write_strategy_csv(std::cout, r.strategy);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Max-min robust optimization experiments"};
  app.require_subcommand(1);

  CommonFlags synth_flags, poly_flags, pre_flags, loop_flags;
  auto* synth = app.add_subcommand("synth-1d", "one-dimensional synthetic benchmark");
  add_common(synth, synth_flags);
  auto* poly = app.add_subcommand("synth-poly", "robust polynomial benchmark");
  add_common(poly, poly_flags);
  auto* pre = app.add_subcommand("drive-precompute", "precompute the driving policy");
  add_common(pre, pre_flags);
  auto* loop = app.add_subcommand("drive-closed-loop", "closed-loop driving episodes");
  add_common(loop, loop_flags);

  std::vector<std::string> plot_inputs;
  std::string plot_out = ".", plot_title;
  auto* plot = app.add_subcommand("plot", "SVG figures from manifests or curve CSVs");
  plot->add_option("inputs", plot_inputs, "manifest.json or curve.csv files")->required();
  plot->add_option("--out", plot_out, "output directory");
  plot->add_option("--title", plot_title, "figure title");

  std::string table_path;
  double epsilon = 1e-3;
  auto* oracle = app.add_subcommand("oracle-tau", "maximin value of a payoff table CSV");
  oracle->add_option("--table", table_path, "payoff table CSV")->required()->check(CLI::ExistingFile);
  oracle->add_option("--epsilon", epsilon, "duality gap tolerance")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto c = resolve(synth_flags, mro::BenchmarkKind::Synth1d);
      return report_synthetic(mro::run_experiment(c), c);
    }
    if (poly->parsed()) {
      const auto c = resolve(poly_flags, mro::BenchmarkKind::SynthPoly);
      return report_synthetic(mro::run_experiment(c), c);
    }
    if (pre->parsed()) {
      const auto c = resolve(pre_flags, mro::BenchmarkKind::Drive);
      const auto r = mro::run_drive_precompute(c);
      std::cerr << r.policy.scenarios.size() << " scenarios, " << r.policy.total_queries
                << " queries, " << r.precompute_seconds << " s; results in " << c.output_dir << '\n';
      return 0;
    }
    if (loop->parsed()) {
      const auto c = resolve(loop_flags, mro::BenchmarkKind::Drive);
      const auto r = mro::run_drive_closed_loop(c);
      mro::write_drive_summary_csv(std::cout, c, r);
      return 0;
    }
    if (plot->parsed()) return cmd_plot(plot_inputs, plot_out, plot_title);
    if (oracle->parsed()) return cmd_oracle(table_path, epsilon);
  } catch (const mro::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
