#include "mro/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mro {

namespace {

constexpr double kMinPivot = 1e-10;
constexpr double kNegativeVarianceTolerance = 1e-6;

Eigen::VectorXd kernel_column(const Kernel& kernel, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                              const Eigen::Ref<const Eigen::VectorXd>& z) {
  Eigen::VectorXd k(inputs.cols());
  for (Eigen::Index i = 0; i < inputs.cols(); ++i) k(i) = kernel(inputs.col(i), z);
  return k;
}

}  // namespace

double clamp_variance(double raw, double prior) {
  if (raw < -kNegativeVarianceTolerance) {
    throw NumericError("posterior variance " + std::to_string(raw) + " is negative");
  }
  return std::clamp(raw, 0.0, prior);
}

// ------------------------------------------------------------- GpState

GpState::GpState(Kernel kernel, double lambda)
    : kernel_(std::move(kernel)),
      lambda_(lambda),
      inputs_(kernel_.input_dim(), 0),
      targets_(0),
      chol_(0, 0),
      whitened_(0) {
  if (!(lambda_ > 0.0)) throw DomainError("GpState: lambda must be positive");
}

GpState GpState::fit(Kernel kernel, double lambda, const Eigen::MatrixXd& inputs,
                     const Eigen::VectorXd& targets) {
  GpState s(std::move(kernel), lambda);
  if (inputs.rows() != s.dim()) throw DomainError("GpState::fit: dimension mismatch");
  if (inputs.cols() != targets.size()) throw DomainError("GpState::fit: inputs/targets mismatch");
  s.inputs_ = inputs;
  s.targets_ = targets;
  if (targets.size() > 0) s.refactor();
  return s;
}

Eigen::VectorXd GpState::alpha() const {
  if (size() == 0) return {};
  return chol_.triangularView<Eigen::Lower>().transpose().solve(whitened_);
}

void GpState::refactor() {
  const Eigen::Index t = targets_.size();
  const Eigen::MatrixXd k = gram(kernel_, inputs_.leftCols(t));
  for (double jitter : {0.0, 1e-10, 1e-8, 1e-6, 1e-4}) {
    Eigen::MatrixXd a = k;
    a.diagonal().array() += lambda_ + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd l = llt.matrixL();
    if (l.diagonal().minCoeff() <= 0.0) continue;
    chol_ = std::move(l);
    whitened_ = chol_.triangularView<Eigen::Lower>().solve(targets_);
    ++epoch_;
    return;
  }
  throw NumericError("GpState: Cholesky factorization failed after jitter escalation");
}

void GpState::append(const Eigen::Ref<const Eigen::VectorXd>& z, double y) {
  if (z.size() != dim()) throw DomainError("GpState::update: dimension mismatch");
  if (!z.allFinite() || !std::isfinite(y)) throw DomainError("GpState::update: non-finite input");
  const Eigen::Index t = targets_.size();

  Eigen::VectorXd l;
  double pivot2 = kernel_(z, z) + lambda_;
  if (t > 0) {
    const Eigen::VectorXd k = kernel_column(kernel_, inputs_.leftCols(t), z);
    l = chol_.triangularView<Eigen::Lower>().solve(k);
    pivot2 -= l.squaredNorm();
  }

  if (inputs_.cols() <= t) inputs_.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(4, 2 * t));
  inputs_.col(t) = z;
  targets_.conservativeResize(t + 1);
  targets_(t) = y;

  if (pivot2 < kMinPivot) {
    refactor();
    return;
  }
  const double d = std::sqrt(pivot2);
  chol_.conservativeResize(t + 1, t + 1);
  chol_.col(t).head(t).setZero();
  if (t > 0) chol_.row(t).head(t) = l.transpose();
  chol_(t, t) = d;

  const double c = (y - (t > 0 ? l.dot(whitened_) : 0.0)) / d;
  whitened_.conservativeResize(t + 1);
  whitened_(t) = c;
}

GpState GpState::update(const Eigen::Ref<const Eigen::VectorXd>& z, double y) const& {
  GpState next = *this;
  next.append(z, y);
  return next;
}

GpState GpState::update(const Eigen::Ref<const Eigen::VectorXd>& z, double y) && {
  append(z, y);
  return std::move(*this);
}

Posterior GpState::posterior(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (z.size() != dim()) throw DomainError("GpState::posterior: dimension mismatch");
  const double prior = kernel_(z, z);
  if (size() == 0) return {0.0, prior};
  const Eigen::VectorXd k = kernel_column(kernel_, inputs(), z);
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
  return {v.dot(whitened_), clamp_variance(prior - v.squaredNorm(), prior)};
}

double GpState::info_gain_observed() const {
  if (size() == 0) return 0.0;
  return chol_.diagonal().array().log().sum() -
         0.5 * static_cast<double>(size()) * std::log(lambda_);
}

double GpState::log_marginal_likelihood() const {
  if (size() == 0) throw DomainError("log_marginal_likelihood: no observations");
  return -0.5 * whitened_.squaredNorm() - chol_.diagonal().array().log().sum() -
         0.5 * static_cast<double>(size()) * std::log(2.0 * std::numbers::pi);
}

// ------------------------------------------------------- GridPosterior

GridPosterior::GridPosterior(const GpState& state, Eigen::MatrixXd candidates)
    : candidates_(std::move(candidates)) {
  if (candidates_.rows() != state.dim()) throw DomainError("GridPosterior: dimension mismatch");
  prior_ = prior_variance(state.kernel(), candidates_);
  rebuild(state);
}

void GridPosterior::rebuild(const GpState& state) {
  const Eigen::Index t = static_cast<Eigen::Index>(state.size());
  const Eigen::Index n = candidates_.cols();
  v_rows_.clear();
  means_ = Eigen::VectorXd::Zero(n);
  raw_variances_ = prior_;
  if (t > 0) {
    Eigen::MatrixXd v = cross_covariance(state.kernel(), Eigen::MatrixXd(state.inputs()), candidates_);
    state.cholesky().triangularView<Eigen::Lower>().solveInPlace(v);
    means_ = v.transpose() * state.whitened_targets();
    raw_variances_ -= v.colwise().squaredNorm().transpose();
    v_rows_.reserve(static_cast<std::size_t>(t));
    for (Eigen::Index r = 0; r < t; ++r) v_rows_.emplace_back(v.row(r).transpose());
  }
  variances_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) variances_(i) = clamp_variance(raw_variances_(i), prior_(i));
  synced_size_ = state.size();
  synced_epoch_ = state.factor_epoch();
}

void GridPosterior::extend(const GpState& state) {
  const Eigen::Index t = static_cast<Eigen::Index>(state.size()) - 1;  // new row index
  const auto& chol = state.cholesky();
  const double d = chol(t, t);
  const double c = state.whitened_targets()(t);
  const auto z = state.inputs().col(t);
  const Eigen::Index n = candidates_.cols();

  Eigen::VectorXd v_new(n);
  for (Eigen::Index i = 0; i < n; ++i) v_new(i) = state.kernel()(z, candidates_.col(i));
  for (Eigen::Index j = 0; j < t; ++j) v_new -= chol(t, j) * v_rows_[static_cast<std::size_t>(j)];
  v_new /= d;

  means_ += c * v_new;
  raw_variances_ -= v_new.cwiseAbs2();
  for (Eigen::Index i = 0; i < n; ++i) variances_(i) = clamp_variance(raw_variances_(i), prior_(i));
  v_rows_.push_back(std::move(v_new));
  synced_size_ = state.size();
}

void GridPosterior::sync(const GpState& state) {
  if (state.factor_epoch() == synced_epoch_) {
    if (state.size() == synced_size_) return;
    if (state.size() == synced_size_ + 1) {
      extend(state);
      return;
    }
  }
  rebuild(state);
}

// ---------------------------------------------------------------- beta

void validate(const BetaSchedule& schedule) {
  if (const auto* th = std::get_if<TheoreticalBeta>(&schedule)) {
    if (!(th->rkhs_bound > 0.0)) throw DomainError("beta: B must be positive");
    if (!(th->noise_sigma >= 0.0)) throw DomainError("beta: noise_sigma must be >= 0");
    if (!(th->delta > 0.0 && th->delta < 1.0)) throw DomainError("beta: delta must lie in (0,1)");
  } else if (!(std::get<ConstantBeta>(schedule).beta > 0.0)) {
    throw DomainError("beta: constant must be positive");
  }
}

double beta(const BetaSchedule& schedule, Index t, double gamma_prev, double lambda) {
  if (t < 1) throw DomainError("beta: t must be >= 1");
  if (const auto* th = std::get_if<TheoreticalBeta>(&schedule)) {
    return th->rkhs_bound + th->noise_sigma / std::sqrt(lambda) *
                                std::sqrt(2.0 * (gamma_prev + std::log(1.0 / th->delta)));
  }
  return std::get<ConstantBeta>(schedule).beta;
}

// -------------------------------------------------------------- bounds

ConfidenceBounds conf_bounds(double mean, double stddev, double beta) {
  const double ucb = mean + beta * stddev;
  const double lcb = mean - beta * stddev;
  // f lies in [0,1], so both truncated bounds are clamped to that interval;
  // this keeps 1 >= oucb >= olcb >= 0 even when ucb < 0 or lcb > 1.
  return {ucb, lcb, std::clamp(ucb, 0.0, 1.0), std::clamp(lcb, 0.0, 1.0)};
}

ConfidenceBounds conf_bounds(const GpState& state, const Eigen::Ref<const Eigen::VectorXd>& z,
                             double beta) {
  if (!(beta > 0.0)) throw DomainError("conf_bounds: beta must be positive");
  const auto p = state.posterior(z);
  return conf_bounds(p.mean, std::sqrt(p.variance), beta);
}

double info_gain_greedy(const Kernel& kernel, double lambda, const Eigen::MatrixXd& candidates,
                        Index t) {
  if (t > static_cast<Index>(candidates.cols())) {
    throw DomainError("info_gain_greedy: t exceeds the candidate count");
  }
  GpState state(kernel, lambda);
  if (t == 0) return 0.0;
  GridPosterior cache(state, candidates);
  for (Index step = 0; step < t; ++step) {
    Eigen::Index best = 0;
    cache.variances().maxCoeff(&best);
    state = std::move(state).update(candidates.col(best), 0.0);
    cache.sync(state);
  }
  return state.info_gain_observed();
}

}  // namespace mro
