#include "mro/domain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace mro {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw DomainError(std::string(what) + ": non-finite entry");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw DomainError("bad number: '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw DomainError("bad number: '" + s + "'");
  }
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- grids

DecisionGrid::DecisionGrid(Eigen::MatrixXd points) : points_(std::move(points)) {
  if (points_.cols() == 0 || points_.rows() == 0) throw DomainError("DecisionGrid: empty");
  require_finite(points_, "DecisionGrid");
}

DecisionGrid DecisionGrid::uniform_1d(Index n, double lo, double hi) {
  if (n == 0) throw DomainError("uniform_1d: n must be >= 1");
  Eigen::MatrixXd pts(1, static_cast<Eigen::Index>(n));
  for (Index i = 0; i < n; ++i) {
    pts(0, static_cast<Eigen::Index>(i)) =
        n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return DecisionGrid(std::move(pts));
}

DecisionGrid DecisionGrid::uniform_2d(Index nx, double lo_x, double hi_x, Index ny, double lo_y,
                                      double hi_y) {
  auto gx = uniform_1d(nx, lo_x, hi_x);
  auto gy = uniform_1d(ny, lo_y, hi_y);
  Eigen::MatrixXd pts(2, static_cast<Eigen::Index>(nx * ny));
  Eigen::Index c = 0;
  for (Index i = 0; i < nx; ++i) {
    for (Index j = 0; j < ny; ++j, ++c) {
      pts(0, c) = gx.point(i)(0);
      pts(1, c) = gy.point(j)(0);
    }
  }
  return DecisionGrid(std::move(pts));
}

ParamSet::ParamSet(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.cols() == 0 || values_.rows() == 0) throw DomainError("ParamSet: empty");
  require_finite(values_, "ParamSet");
  for (Eigen::Index i = 0; i < values_.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < values_.cols(); ++j) {
      if (values_.col(i) == values_.col(j)) throw DomainError("ParamSet: duplicate entry");
    }
  }
}

// --------------------------------------------------------------- oracle

ObjectiveOracle::ObjectiveOracle(PayoffTable exact, double noise_sigma)
    : exact_(std::move(exact)), noise_sigma_(noise_sigma) {
  if (exact_.size() == 0) throw DomainError("ObjectiveOracle: empty table");
  require_finite(exact_, "ObjectiveOracle");
  if (!(noise_sigma_ >= 0.0)) throw DomainError("ObjectiveOracle: noise_sigma must be >= 0");
}

double ObjectiveOracle::eval_exact(Index x, Index theta) const {
  if (x >= num_x() || theta >= num_theta()) throw DomainError("eval_exact: index out of range");
  return exact_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(theta));
}

double ObjectiveOracle::eval_noisy(Index x, Index theta, Rng& rng) const {
  const double f = eval_exact(x, theta);
  if (noise_sigma_ == 0.0) return f;
  std::normal_distribution<double> noise(0.0, noise_sigma_);
  return f + noise(rng);
}

// ------------------------------------------------------------- strategy

MixedStrategy MixedStrategy::from_masses(std::vector<Atom> masses) {
  if (masses.empty()) throw DomainError("MixedStrategy: empty support");
  std::map<Index, double> merged;
  for (const auto& a : masses) {
    if (!(a.probability >= 0.0) || !std::isfinite(a.probability)) {
      throw DomainError("MixedStrategy: negative or non-finite mass");
    }
    merged[a.index] += a.probability;
  }
  double total = 0.0;
  for (const auto& [idx, p] : merged) total += p;
  if (!(total > 0.0)) throw DomainError("MixedStrategy: zero total mass");

  // Already-normalized input (e.g. read back from CSV) is kept bit-exact.
  const double scale = std::abs(total - 1.0) <= 1e-12 ? 1.0 : total;
  MixedStrategy s;
  s.support_.reserve(merged.size());
  for (const auto& [idx, p] : merged) {
    if (p > 0.0) s.support_.push_back({idx, p / scale});
  }
  return s;
}

MixedStrategy MixedStrategy::dirac(Index index) {
  MixedStrategy s;
  s.support_.push_back({index, 1.0});
  return s;
}

MixedStrategy MixedStrategy::uniform_over(std::span<const Index> picks) {
  if (picks.empty()) throw DomainError("MixedStrategy: empty support");
  std::map<Index, std::size_t> counts;
  for (Index i : picks) ++counts[i];
  MixedStrategy s;
  const double n = static_cast<double>(picks.size());
  for (const auto& [idx, c] : counts) s.support_.push_back({idx, static_cast<double>(c) / n});
  return s;
}

double MixedStrategy::probability(Index index) const {
  auto it = std::lower_bound(support_.begin(), support_.end(), index,
                             [](const Atom& a, Index i) { return a.index < i; });
  return (it != support_.end() && it->index == index) ? it->probability : 0.0;
}

Index MixedStrategy::max_index() const { return support_.back().index; }

PriorQ::PriorQ(Eigen::VectorXd weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0) throw DomainError("PriorQ: empty");
  if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
    throw DomainError("PriorQ: weights must be finite and nonnegative");
  }
  if (std::abs(weights_.sum() - 1.0) > 1e-12) throw DomainError("PriorQ: weights must sum to 1");
}

PriorQ PriorQ::uniform(Index m) {
  if (m == 0) throw DomainError("PriorQ: empty");
  return PriorQ(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m)));
}

PriorQ PriorQ::dirac(Index m, Index j) {
  if (j >= m) throw DomainError("PriorQ::dirac: index out of range");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  w(static_cast<Eigen::Index>(j)) = 1.0;
  return PriorQ(std::move(w));
}

// -------------------------------------------------------------- metrics

Eigen::VectorXd expected_per_theta(const MixedStrategy& strategy, const PayoffTable& table) {
  if (table.size() == 0) throw DomainError("empty payoff table");
  if (strategy.support().empty()) throw DomainError("empty strategy");
  if (strategy.max_index() >= static_cast<Index>(table.rows())) {
    throw DomainError("strategy index outside the payoff table");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(table.cols());
  for (const auto& a : strategy.support()) {
    acc += a.probability * table.row(static_cast<Eigen::Index>(a.index)).transpose();
  }
  return acc;
}

double performance(const MixedStrategy& strategy, const PayoffTable& table) {
  return expected_per_theta(strategy, table).minCoeff();
}

double performance(const MixedStrategy& strategy, const ObjectiveOracle& oracle) {
  return performance(strategy, oracle.table());
}

double tradeoff_value(const MixedStrategy& strategy, const PayoffTable& table, const PriorQ& q,
                      double chi) {
  if (!(chi >= 0.0 && chi <= 1.0)) throw DomainError("tradeoff_value: chi must lie in [0,1]");
  if (q.size() != static_cast<Index>(table.cols())) {
    throw DomainError("tradeoff_value: Q size does not match the parameter count");
  }
  const Eigen::VectorXd per_theta = expected_per_theta(strategy, table);
  const double worst = per_theta.minCoeff();
  if (chi == 1.0) return worst;
  return (1.0 - chi) * q.weights().dot(per_theta) + chi * worst;
}

std::pair<Index, double> pure_maximin(const PayoffTable& table) {
  if (table.size() == 0) throw DomainError("pure_maximin: empty table");
  Index best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (Eigen::Index x = 0; x < table.rows(); ++x) {
    const double v = table.row(x).minCoeff();
    if (v > best_val) {
      best_val = v;
      best = static_cast<Index>(x);
    }
  }
  return {best, best_val};
}

MaximinResult maximin_value(const PayoffTable& table, double epsilon) {
  if (table.size() == 0) throw DomainError("maximin_value: empty table");
  if (!(epsilon > 0.0)) throw DomainError("maximin_value: epsilon must be positive");
  if (table.minCoeff() < 0.0 || table.maxCoeff() > 1.0) {
    throw DomainError("maximin_value: table entries must lie in [0,1]");
  }
  const Eigen::Index nx = table.rows();
  const Eigen::Index m = table.cols();

  if (m == 1) {
    Eigen::Index best = 0;
    table.col(0).maxCoeff(&best);
    return {table(best, 0), table(best, 0), MixedStrategy::dirac(static_cast<Index>(best)), 1};
  }

  const double log_m = std::log(static_cast<double>(m));
  const auto horizon =
      static_cast<Index>(std::ceil(log_m / (2.0 * epsilon * epsilon)));
  const double eta = std::sqrt(8.0 * log_m / static_cast<double>(horizon));

  Eigen::VectorXd cum_loss = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd weight_sum = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd w(m);
  std::vector<Index> counts(static_cast<Index>(nx), 0);

  auto lower_upper = [&](Index t) {
    const double lower = cum_loss.minCoeff() / static_cast<double>(t);
    const double upper = (table * (weight_sum / static_cast<double>(t))).maxCoeff();
    return std::pair{lower, upper};
  };

  Index t = 0;
  double lower = 0.0, upper = 1.0;
  while (t < horizon) {
    const double shift = cum_loss.minCoeff();
    w = (-eta * (cum_loss.array() - shift)).exp().matrix();
    w /= w.sum();
    weight_sum += w;

    const Eigen::VectorXd scores = table * w;
    Eigen::Index x = 0;
    double best = scores(0);
    for (Eigen::Index i = 1; i < nx; ++i) {
      if (scores(i) > best) {
        best = scores(i);
        x = i;
      }
    }
    ++counts[static_cast<Index>(x)];
    cum_loss += table.row(x).transpose();
    ++t;

    if (t % 16 == 0 || t == horizon) {
      std::tie(lower, upper) = lower_upper(t);
      if (upper - lower <= epsilon) break;
    }
  }

  std::vector<MixedStrategy::Atom> masses;
  for (Index i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) masses.push_back({i, static_cast<double>(counts[i])});
  }
  auto strategy = MixedStrategy::from_masses(std::move(masses));
  return {performance(strategy, table), upper, std::move(strategy), t};
}

// ------------------------------------------------------------------ CSV

void write_table_csv(std::ostream& out, const PayoffTable& table) {
  for (Eigen::Index j = 0; j < table.cols(); ++j) {
    out << (j ? "," : "") << "theta_" << (j + 1);
  }
  out << '\n';
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      out << (j ? "," : "") << format_double(table(i, j));
    }
    out << '\n';
  }
}

PayoffTable read_table_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("payoff CSV: missing header");
  const auto header = split_csv_line(line);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] != "theta_" + std::to_string(j + 1)) {
      throw DomainError("payoff CSV: unexpected header column '" + header[j] + "'");
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw DomainError("payoff CSV: ragged row");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DomainError("payoff CSV: no rows");
  PayoffTable t(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return t;
}

void write_strategy_csv(std::ostream& out, const MixedStrategy& strategy) {
  out << "point_index,probability\n";
  for (const auto& a : strategy.support()) {
    out << a.index << ',' << format_double(a.probability) << '\n';
  }
}

MixedStrategy read_strategy_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "point_index,probability") {
    throw DomainError("strategy CSV: expected header 'point_index,probability'");
  }
  std::vector<MixedStrategy::Atom> atoms;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw DomainError("strategy CSV: expected two columns");
    const double idx = parse_double(cells[0]);
    if (idx < 0 || idx != std::floor(idx)) throw DomainError("strategy CSV: bad index");
    atoms.push_back({static_cast<Index>(idx), parse_double(cells[1])});
  }
  return MixedStrategy::from_masses(std::move(atoms));
}

}  // namespace mro
