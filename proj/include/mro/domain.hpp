#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mro {

using Index = std::size_t;
using Rng = std::mt19937_64;

inline constexpr Index kNoIndex = std::numeric_limits<Index>::max();

/// Raised when an argument violates a documented precondition.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a linear-algebra step cannot be completed (failed
/// factorization, variance far below zero, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Point sets are stored column-wise: column i is point i. This keeps every
// point contiguous so kernels can read it without a copy.

/// Finite discretization of the decision set X.
class DecisionGrid {
 public:
  explicit DecisionGrid(Eigen::MatrixXd points);

  Index size() const { return static_cast<Index>(points_.cols()); }
  Eigen::Index dim() const { return points_.rows(); }
  auto point(Index i) const { return points_.col(static_cast<Eigen::Index>(i)); }
  const Eigen::MatrixXd& points() const { return points_; }

  /// Uniform 1-D grid of n points on [lo, hi] (inclusive).
  static DecisionGrid uniform_1d(Index n, double lo, double hi);
  /// Tensor grid nx * ny on a box; index = i * ny + j with i along the first axis.
  static DecisionGrid uniform_2d(Index nx, double lo_x, double hi_x, Index ny, double lo_y,
                                 double hi_y);

 private:
  Eigen::MatrixXd points_;
};

/// Finite adversarial parameter set Theta = {theta_1 .. theta_m}.
class ParamSet {
 public:
  explicit ParamSet(Eigen::MatrixXd values);

  Index size() const { return static_cast<Index>(values_.cols()); }
  Eigen::Index dim() const { return values_.rows(); }
  auto value(Index i) const { return values_.col(static_cast<Eigen::Index>(i)); }
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

/// Rows are decision points, columns are parameter values.
using PayoffTable = Eigen::MatrixXd;

/// Noisy point-query access to an objective tabulated on X x Theta.
class ObjectiveOracle {
 public:
  ObjectiveOracle(PayoffTable exact, double noise_sigma);

  Index num_x() const { return static_cast<Index>(exact_.rows()); }
  Index num_theta() const { return static_cast<Index>(exact_.cols()); }
  double noise_sigma() const { return noise_sigma_; }
  const PayoffTable& table() const { return exact_; }

  double eval_exact(Index x, Index theta) const;
  double eval_noisy(Index x, Index theta, Rng& rng) const;

 private:
  PayoffTable exact_;
  double noise_sigma_;
};

/// Finite-support distribution over decision-grid indices. The support is
/// kept sorted by index with duplicates merged.
class MixedStrategy {
 public:
  struct Atom {
    Index index;
    double probability;
    bool operator==(const Atom&) const = default;
  };

  /// Normalizes nonnegative masses and merges repeated indices. Masses that
  /// already sum to 1 within 1e-12 are kept unchanged.
  static MixedStrategy from_masses(std::vector<Atom> masses);
  static MixedStrategy dirac(Index index);
  /// Each listed index receives (multiplicity) / (list length).
  static MixedStrategy uniform_over(std::span<const Index> picks);

  const std::vector<Atom>& support() const { return support_; }
  double probability(Index index) const;
  Index max_index() const;
  bool operator==(const MixedStrategy&) const = default;

 private:
  MixedStrategy() = default;
  std::vector<Atom> support_;
};

/// Reference distribution Q over parameter indices.
class PriorQ {
 public:
  explicit PriorQ(Eigen::VectorXd weights);
  static PriorQ uniform(Index m);
  static PriorQ dirac(Index m, Index j);

  const Eigen::VectorXd& weights() const { return weights_; }
  Index size() const { return static_cast<Index>(weights_.size()); }

 private:
  Eigen::VectorXd weights_;
};

/// E_{x~P}[f(x, theta_i)] for every column i.
Eigen::VectorXd expected_per_theta(const MixedStrategy& strategy, const PayoffTable& table);

/// Worst-case expected reward min_theta E_{x~P}[f(x, theta)].
double performance(const MixedStrategy& strategy, const PayoffTable& table);
double performance(const MixedStrategy& strategy, const ObjectiveOracle& oracle);

/// (1 - chi) * E_{theta~Q, x~P}[f] + chi * min_theta E_{x~P}[f].
double tradeoff_value(const MixedStrategy& strategy, const PayoffTable& table, const PriorQ& q,
                      double chi);

struct MaximinResult {
  double value;        // certified lower bound: performance of `strategy`
  double upper_bound;  // best-response value against the averaged adversary
  MixedStrategy strategy;
  Index iterations;
};

/// Maximin value over mixed strategies of a [0,1] payoff table, by
/// multiplicative-weights self-play with exact best responses. Stops once
/// upper_bound - value <= epsilon, or after ceil(log(m) / (2 epsilon^2))
/// rounds, at which point the gap is within epsilon by the Hedge regret bound.
MaximinResult maximin_value(const PayoffTable& table, double epsilon = 1e-3);

/// max_x min_theta f(x, theta) over pure strategies; ties to the lowest index.
std::pair<Index, double> pure_maximin(const PayoffTable& table);

// CSV interchange.
void write_table_csv(std::ostream& out, const PayoffTable& table);
PayoffTable read_table_csv(std::istream& in);
void write_strategy_csv(std::ostream& out, const MixedStrategy& strategy);
MixedStrategy read_strategy_csv(std::istream& in);

/// Shortest round-trip decimal representation used by every CSV writer.
std::string format_double(double v);

}  // namespace mro
