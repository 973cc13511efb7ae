#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mro/domain.hpp"
#include "mro/kernels.hpp"

namespace mro {

struct Posterior {
  double mean;
  double variance;
};

/// Gaussian-process posterior with Gaussian likelihood of variance lambda.
///
/// Holds the lower Cholesky factor L of (K_t + lambda I) and the whitened
/// targets c = L^{-1} y, so that mu(z) = (L^{-1} k_t(z))^T c. Observations are
/// appended by extending L by one row; a fresh factorization (with jitter
/// escalation) is used whenever the appended pivot drops below 1e-10.
class GpState {
 public:
  GpState(Kernel kernel, double lambda);

  /// Batch construction from observations stored column-wise.
  static GpState fit(Kernel kernel, double lambda, const Eigen::MatrixXd& inputs,
                     const Eigen::VectorXd& targets);

  Index size() const { return static_cast<Index>(targets_.size()); }
  const Kernel& kernel() const { return kernel_; }
  double lambda() const { return lambda_; }
  Eigen::Index dim() const { return kernel_.input_dim(); }

  Eigen::Ref<const Eigen::MatrixXd> inputs() const { return inputs_.leftCols(targets_.size()); }
  const Eigen::VectorXd& targets() const { return targets_; }
  const Eigen::MatrixXd& cholesky() const { return chol_; }
  const Eigen::VectorXd& whitened_targets() const { return whitened_; }
  /// alpha = (K_t + lambda I)^{-1} y
  Eigen::VectorXd alpha() const;
  /// Incremented whenever the factor is rebuilt rather than extended.
  std::uint64_t factor_epoch() const { return epoch_; }

  Posterior posterior(const Eigen::Ref<const Eigen::VectorXd>& z) const;

  GpState update(const Eigen::Ref<const Eigen::VectorXd>& z, double y) const&;
  GpState update(const Eigen::Ref<const Eigen::VectorXd>& z, double y) &&;

  /// 1/2 log det(I + K_t / lambda) of the observed inputs.
  double info_gain_observed() const;
  double log_marginal_likelihood() const;

 private:
  void append(const Eigen::Ref<const Eigen::VectorXd>& z, double y);
  void refactor();

  Kernel kernel_;
  double lambda_;
  Eigen::MatrixXd inputs_;  // dim x capacity, first size() columns used
  Eigen::VectorXd targets_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd whitened_;
  std::uint64_t epoch_ = 0;
};

/// Clamp a raw posterior variance to [0, prior]; values below -1e-6 are
/// treated as a numeric failure.
double clamp_variance(double raw, double prior);

/// Posterior mean and variance maintained on a fixed candidate set.
///
/// Keeps V = L^{-1} K(X_t, candidates) row by row, so syncing after one new
/// observation costs O(t * N) instead of a fresh O(t^2 * N) solve.
class GridPosterior {
 public:
  GridPosterior(const GpState& state, Eigen::MatrixXd candidates);

  /// Bring the cache up to date with `state`: incremental if `state` extends
  /// the previously synced one by exactly one observation with an unchanged
  /// factor, otherwise rebuilt.
  void sync(const GpState& state);

  Index size() const { return static_cast<Index>(means_.size()); }
  const Eigen::MatrixXd& candidates() const { return candidates_; }
  const Eigen::VectorXd& means() const { return means_; }
  const Eigen::VectorXd& variances() const { return variances_; }
  const Eigen::VectorXd& prior_variances() const { return prior_; }
  double mean(Index i) const { return means_(static_cast<Eigen::Index>(i)); }
  double variance(Index i) const { return variances_(static_cast<Eigen::Index>(i)); }
  double stddev(Index i) const { return std::sqrt(variance(i)); }

 private:
  void rebuild(const GpState& state);
  void extend(const GpState& state);

  Eigen::MatrixXd candidates_;
  Eigen::VectorXd prior_;
  std::vector<Eigen::VectorXd> v_rows_;
  Eigen::VectorXd means_;
  Eigen::VectorXd raw_variances_;
  Eigen::VectorXd variances_;
  Index synced_size_ = 0;
  std::uint64_t synced_epoch_ = 0;
};

// ------------------------------------------------------------- beta

struct TheoreticalBeta {
  double rkhs_bound;   // B
  double noise_sigma;  // sigma
  double delta;
};

struct ConstantBeta {
  double beta;
};

using BetaSchedule = std::variant<TheoreticalBeta, ConstantBeta>;

void validate(const BetaSchedule& schedule);

/// beta_t = B + sigma lambda^{-1/2} sqrt(2 (gamma_{t-1} + ln(1/delta))), or the
/// constant. `gamma_prev` is the information gain after t - 1 observations.
double beta(const BetaSchedule& schedule, Index t, double gamma_prev, double lambda);

// ------------------------------------------------------------ bounds

struct ConfidenceBounds {
  double ucb;
  double lcb;
  double oucb;  // ucb clamped to [0,1]
  double olcb;  // lcb clamped to [0,1]
};

ConfidenceBounds conf_bounds(double mean, double stddev, double beta);
ConfidenceBounds conf_bounds(const GpState& state, const Eigen::Ref<const Eigen::VectorXd>& z,
                             double beta);

/// Information gain after t rounds of greedy max-variance selection over
/// `candidates` (columns). Lower-bounds the maximum information gain.
double info_gain_greedy(const Kernel& kernel, double lambda, const Eigen::MatrixXd& candidates,
                        Index t);

}  // namespace mro
