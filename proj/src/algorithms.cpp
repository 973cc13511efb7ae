#include "mro/algorithms.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace mro {

namespace {

template <typename Vec>
Index argmax_lowest(const Vec& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<Index>(best);
}

template <typename Vec>
Index argmin_lowest(const Vec& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) < v(best)) best = i;
  }
  return static_cast<Index>(best);
}

Rng stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
  return Rng(seq);
}

constexpr std::uint32_t kNoiseStream = 1;
constexpr std::uint32_t kCoinStream = 2;

/// Joint argmax over (x, theta) of a num_x by m table, x-major tie-breaking.
std::pair<Index, Index> joint_argmax(const Eigen::MatrixXd& table) {
  Index bx = 0, bt = 0;
  double best = table(0, 0);
  for (Eigen::Index x = 0; x < table.rows(); ++x) {
    for (Eigen::Index t = 0; t < table.cols(); ++t) {
      if (table(x, t) > best) {
        best = table(x, t);
        bx = static_cast<Index>(x);
        bt = static_cast<Index>(t);
      }
    }
  }
  return {bx, bt};
}

/// Shared machinery of the GP-driven loops: posterior on the grid, beta
/// bookkeeping, optional query gate, and trace recording.
class GpLoop {
 public:
  GpLoop(const Problem& problem, const AlgorithmConfig& config, GpState& gp)
      : problem_(problem),
        config_(config),
        gp_(gp),
        cache_(gp, problem.joint_inputs),
        noise_rng_(stream(config.seed, kNoiseStream)) {}

  /// Bounds for round t (1-based), computed from the posterior after t - 1 rounds.
  const BoundTables& begin_round(Index t) {
    gamma_prev_ = gp_.info_gain_observed();
    beta_ = beta(config_.beta, t, gamma_prev_, gp_.lambda());
    bounds_ = bound_tables(cache_, problem_, beta_);
    return bounds_;
  }

  /// Query (x, theta) unless gated, update the GP, and fill the record.
  TraceRecord finish_round(Index t, Index x, Index theta) {
    TraceRecord rec;
    rec.t = t;
    rec.x = x;
    rec.theta = theta;
    rec.beta = beta_;
    rec.gamma_prev = gamma_prev_;
    rec.sigma = bounds_.sigma(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(theta));
    rec.queried = !(config_.variance_gate && rec.sigma <= *config_.variance_gate);
    rec.y = std::numeric_limits<double>::quiet_NaN();
    if (rec.queried) {
      rec.y = problem_.oracle.eval_noisy(x, theta, noise_rng_);
      const auto j = static_cast<Eigen::Index>(problem_.joint_index(x, theta));
      gp_ = std::move(gp_).update(problem_.joint_inputs.col(j), problem_.prior.output.to_model(rec.y));
      cache_.sync(gp_);
    }
    return rec;
  }

  double info_gain() const { return gp_.info_gain_observed(); }

 private:
  const Problem& problem_;
  const AlgorithmConfig& config_;
  GpState& gp_;
  GridPosterior cache_;
  Rng noise_rng_;
  BoundTables bounds_;
  double beta_ = 0.0;
  double gamma_prev_ = 0.0;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

GpState fresh_gp(const Problem& problem) {
  return GpState(problem.prior.kernel, problem.prior.lambda);
}

Index stable_report(const BoundTables& b) { return argmax_lowest(b.olcb.rowwise().minCoeff()); }

}  // namespace

// ------------------------------------------------------------------ MWU

MwuState MwuState::uniform(Index m, double eta) {
  if (m == 0) throw DomainError("MwuState: m must be >= 1");
  if (!(eta >= 0.0)) throw DomainError("MwuState: eta must be >= 0");
  const auto n = static_cast<Eigen::Index>(m);
  return {Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(m)), eta,
          Eigen::VectorXd::Zero(n)};
}

MwuState mwu_update(const MwuState& state, const Eigen::Ref<const Eigen::VectorXd>& losses) {
  if (losses.size() != state.weights.size()) throw DomainError("mwu_update: size mismatch");
  if (!losses.allFinite() || (losses.array() < 0.0).any() || (losses.array() > 1.0).any()) {
    throw DomainError("mwu_update: losses must lie in [0,1]");
  }
  MwuState next = state;
  next.cumulative_losses += losses;
  const double shift = next.cumulative_losses.minCoeff();
  next.weights = (-state.eta * (next.cumulative_losses.array() - shift)).exp().matrix();
  next.weights /= next.weights.sum();
  return next;
}

double default_eta(Index m, Index horizon) {
  if (m == 0 || horizon == 0) throw DomainError("default_eta: m and T must be >= 1");
  return std::sqrt(8.0 * std::log(static_cast<double>(m)) / static_cast<double>(horizon));
}

// -------------------------------------------------------------- problem

void Problem::validate() const {
  if (joint_inputs.cols() != static_cast<Eigen::Index>(num_x() * num_theta())) {
    throw DomainError("Problem: joint_inputs must have num_x * num_theta columns");
  }
  if (joint_inputs.rows() != prior.kernel.input_dim()) {
    throw DomainError("Problem: joint input dimension does not match the kernel");
  }
  if (!(prior.lambda > 0.0)) throw DomainError("Problem: lambda must be positive");
  if (!(prior.output.scale > 0.0)) throw DomainError("Problem: output scale must be positive");
}

Eigen::MatrixXd concat_joint_inputs(const DecisionGrid& grid, const ParamSet& params) {
  const Eigen::Index dx = grid.dim();
  const Eigen::Index dt = params.dim();
  Eigen::MatrixXd z(dx + dt, static_cast<Eigen::Index>(grid.size() * params.size()));
  Eigen::Index c = 0;
  for (Index x = 0; x < grid.size(); ++x) {
    for (Index t = 0; t < params.size(); ++t, ++c) {
      z.col(c).head(dx) = grid.point(x);
      z.col(c).tail(dt) = params.value(t);
    }
  }
  return z;
}

BoundTables bound_tables(const GridPosterior& posterior, const Problem& problem, double beta) {
  const auto nx = static_cast<Eigen::Index>(problem.num_x());
  const auto m = static_cast<Eigen::Index>(problem.num_theta());
  const auto& out = problem.prior.output;
  BoundTables b{Eigen::MatrixXd(nx, m), Eigen::MatrixXd(nx, m), Eigen::MatrixXd(nx, m)};
  for (Eigen::Index x = 0; x < nx; ++x) {
    for (Eigen::Index t = 0; t < m; ++t) {
      const auto j = static_cast<Index>(x * m + t);
      const double sd = posterior.stddev(j);
      const auto cb = conf_bounds(out.to_payoff(posterior.mean(j)), sd / out.scale, beta);
      b.oucb(x, t) = cb.oucb;
      b.olcb(x, t) = cb.olcb;
      b.sigma(x, t) = sd;
    }
  }
  return b;
}

// ------------------------------------------------------------ selection

Index best_response(const Eigen::MatrixXd& oucb, const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (oucb.cols() != weights.size()) throw DomainError("best_response: size mismatch");
  return argmax_lowest(oucb * weights);
}

Index best_response_tradeoff(const Eigen::MatrixXd& oucb,
                             const Eigen::Ref<const Eigen::VectorXd>& weights, const PriorQ& q,
                             double chi) {
  if (!(chi >= 0.0 && chi <= 1.0)) throw DomainError("best_response_tradeoff: chi must lie in [0,1]");
  if (chi == 1.0) return best_response(oucb, weights);
  if (q.size() != static_cast<Index>(oucb.cols())) {
    throw DomainError("best_response_tradeoff: Q size mismatch");
  }
  if (oucb.cols() != weights.size()) throw DomainError("best_response_tradeoff: size mismatch");
  const Eigen::VectorXd score = (1.0 - chi) * (oucb * q.weights()) + chi * (oucb * weights);
  return argmax_lowest(score);
}

Index select_theta(const Eigen::MatrixXd& sigma, Index x) {
  if (x >= static_cast<Index>(sigma.rows())) throw DomainError("select_theta: x out of range");
  return argmax_lowest(sigma.row(static_cast<Eigen::Index>(x)));
}

Index best_response(const GpState& gp, const Eigen::Ref<const Eigen::VectorXd>& weights,
                    const Problem& problem, double beta) {
  GridPosterior cache(gp, problem.joint_inputs);
  return best_response(bound_tables(cache, problem, beta).oucb, weights);
}

Index select_theta(const GpState& gp, Index x, const Problem& problem) {
  Eigen::VectorXd sd(static_cast<Eigen::Index>(problem.num_theta()));
  for (Index t = 0; t < problem.num_theta(); ++t) {
    const auto j = static_cast<Eigen::Index>(problem.joint_index(x, t));
    sd(static_cast<Eigen::Index>(t)) = std::sqrt(gp.posterior(problem.joint_inputs.col(j)).variance);
  }
  return argmax_lowest(sd);
}

// ------------------------------------------------------------ run setup

void AlgorithmConfig::validate(Index num_theta, double lambda) const {
  if (horizon == 0) throw DomainError("config.horizon: must be >= 1");
  mro::validate(beta);
  if (std::holds_alternative<TheoreticalBeta>(beta) && lambda < 1.0) {
    throw DomainError("config.beta: the theoretical schedule requires lambda >= 1");
  }
  if (eta && !(*eta >= 0.0)) throw DomainError("config.eta: must be >= 0");
  if (!(chi >= 0.0 && chi <= 1.0)) throw DomainError("config.chi: must lie in [0,1]");
  if (chi < 1.0 && !prior_q) throw DomainError("config.prior_q: required when chi < 1");
  if (prior_q && prior_q->size() != num_theta) {
    throw DomainError("config.prior_q: size does not match the parameter count");
  }
  if (variance_gate && !(*variance_gate >= 0.0)) {
    throw DomainError("config.variance_gate: must be >= 0");
  }
}

double AlgorithmConfig::eta_for(Index num_theta) const {
  return eta.value_or(default_eta(num_theta, horizon));
}

MixedStrategy RunTrace::strategy_at(Index t) const {
  if (t == 0 || t > records.size()) throw DomainError("strategy_at: t out of range");
  if (rule == ReportRule::UniformOverReported) {
    return MixedStrategy::uniform_over(records[t - 1].reported);
  }
  std::vector<Index> picks;
  picks.reserve(t);
  for (Index i = 0; i < t; ++i) picks.push_back(records[i].x);
  return MixedStrategy::uniform_over(picks);
}

Index RunTrace::queries() const {
  Index n = 0;
  for (const auto& r : records) n += r.queried ? 1 : 0;
  return n;
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << "t";
  for (Index i = 0; i < trace.num_theta; ++i) out << ",w_" << (i + 1);
  out << ",x_index,theta_index,y,beta,sigma,queried\n";
  auto index_str = [](Index i) { return i == kNoIndex ? std::string("-1") : std::to_string(i); };
  for (const auto& r : trace.records) {
    out << r.t;
    for (Index i = 0; i < trace.num_theta; ++i) {
      out << ','
          << (r.weights.size() ? format_double(r.weights(static_cast<Eigen::Index>(i))) : "nan");
    }
    out << ',' << index_str(r.x) << ',' << index_str(r.theta) << ',' << format_double(r.y) << ','
        << format_double(r.beta) << ',' << format_double(r.sigma) << ',' << (r.queried ? 1 : 0)
        << '\n';
  }
}

// ------------------------------------------------------------ algorithms

RunResult run_gp_mro(const Problem& problem, const AlgorithmConfig& config, GpState& gp) {
  problem.validate();
  config.validate(problem.num_theta(), problem.prior.lambda);
  Stopwatch clock;

  const Index m = problem.num_theta();
  MwuState mwu = MwuState::uniform(m, config.eta_for(m));
  GpLoop loop(problem, config, gp);
  RunTrace trace{"gp-mro", ReportRule::UniformOverSelections, m, {}, {}, 0.0};
  trace.records.reserve(config.horizon);

  for (Index t = 1; t <= config.horizon; ++t) {
    const auto& b = loop.begin_round(t);
    const Index x = config.chi < 1.0
                        ? best_response_tradeoff(b.oucb, mwu.weights, *config.prior_q, config.chi)
                        : best_response(b.oucb, mwu.weights);
    const Index theta = select_theta(b.sigma, x);
    const Eigen::VectorXd losses = b.oucb.row(static_cast<Eigen::Index>(x)).transpose();
    const Eigen::VectorXd weights = mwu.weights;
    mwu = mwu_update(mwu, losses);

    TraceRecord rec = loop.finish_round(t, x, theta);
    rec.weights = weights;
    trace.records.push_back(std::move(rec));
    trace.info_gain.push_back(loop.info_gain());
  }
  trace.wall_seconds = clock.seconds();
  auto strategy = trace.strategy_at(config.horizon);
  return {std::move(strategy), std::move(trace)};
}

RunResult run_gp_mro(const Problem& problem, const AlgorithmConfig& config) {
  GpState gp = fresh_gp(problem);
  return run_gp_mro(problem, config, gp);
}

RunResult run_gp_ucb(const Problem& problem, const AlgorithmConfig& config) {
  problem.validate();
  config.validate(problem.num_theta(), problem.prior.lambda);
  Stopwatch clock;
  GpState gp = fresh_gp(problem);
  GpLoop loop(problem, config, gp);
  RunTrace trace{"gp-ucb", ReportRule::UniformOverReported, problem.num_theta(), {}, {}, 0.0};

  for (Index t = 1; t <= config.horizon; ++t) {
    const auto& b = loop.begin_round(t);
    const auto [x, theta] = joint_argmax(b.oucb);
    TraceRecord rec = loop.finish_round(t, x, theta);
    rec.reported = {x};
    trace.records.push_back(std::move(rec));
    trace.info_gain.push_back(loop.info_gain());
  }
  trace.wall_seconds = clock.seconds();
  auto strategy = trace.strategy_at(config.horizon);
  return {std::move(strategy), std::move(trace)};
}

RunResult run_stableopt(const Problem& problem, const AlgorithmConfig& config) {
  problem.validate();
  config.validate(problem.num_theta(), problem.prior.lambda);
  Stopwatch clock;
  GpState gp = fresh_gp(problem);
  GpLoop loop(problem, config, gp);
  RunTrace trace{"stableopt", ReportRule::UniformOverReported, problem.num_theta(), {}, {}, 0.0};

  for (Index t = 1; t <= config.horizon; ++t) {
    const auto& b = loop.begin_round(t);
    const Index x = argmax_lowest(b.oucb.rowwise().minCoeff());
    const Index theta = argmin_lowest(b.olcb.row(static_cast<Eigen::Index>(x)));
    const Index report = stable_report(b);
    TraceRecord rec = loop.finish_round(t, x, theta);
    rec.reported = {report};
    trace.records.push_back(std::move(rec));
    trace.info_gain.push_back(loop.info_gain());
  }
  trace.wall_seconds = clock.seconds();
  auto strategy = trace.strategy_at(config.horizon);
  return {std::move(strategy), std::move(trace)};
}

RunResult run_randmaxmin(const Problem& problem, const AlgorithmConfig& config) {
  problem.validate();
  config.validate(problem.num_theta(), problem.prior.lambda);
  Stopwatch clock;
  GpState gp = fresh_gp(problem);
  GpLoop loop(problem, config, gp);
  Rng coin_rng = stream(config.seed, kCoinStream);
  std::bernoulli_distribution coin(0.5);
  RunTrace trace{"randmaxmin", ReportRule::UniformOverReported, problem.num_theta(), {}, {}, 0.0};

  for (Index t = 1; t <= config.horizon; ++t) {
    const auto& b = loop.begin_round(t);
    const Index stable_x = stable_report(b);
    const auto [ucb_x, ucb_theta] = joint_argmax(b.oucb);
    Index x = ucb_x, theta = ucb_theta;
    if (coin(coin_rng)) {
      x = argmax_lowest(b.oucb.rowwise().minCoeff());
      theta = argmin_lowest(b.olcb.row(static_cast<Eigen::Index>(x)));
    }
    TraceRecord rec = loop.finish_round(t, x, theta);
    rec.reported = {stable_x, ucb_x};
    trace.records.push_back(std::move(rec));
    trace.info_gain.push_back(loop.info_gain());
  }
  trace.wall_seconds = clock.seconds();
  auto strategy = trace.strategy_at(config.horizon);
  return {std::move(strategy), std::move(trace)};
}

RunResult run_clss(const PayoffTable& table, Index horizon, std::optional<double> eta) {
  if (table.size() == 0) throw DomainError("run_clss: empty table");
  if (horizon == 0) throw DomainError("run_clss: horizon must be >= 1");
  if (!table.allFinite() || table.minCoeff() < 0.0 || table.maxCoeff() > 1.0) {
    throw DomainError("run_clss: table entries must lie in [0,1]");
  }
  Stopwatch clock;
  const auto m = static_cast<Index>(table.cols());
  MwuState mwu = MwuState::uniform(m, eta.value_or(default_eta(m, horizon)));
  RunTrace trace{"clss", ReportRule::UniformOverSelections, m, {}, {}, 0.0};
  trace.records.reserve(horizon);

  for (Index t = 1; t <= horizon; ++t) {
    TraceRecord rec;
    rec.t = t;
    rec.weights = mwu.weights;
    rec.x = best_response(table, mwu.weights);
    rec.y = std::numeric_limits<double>::quiet_NaN();
    mwu = mwu_update(mwu, table.row(static_cast<Eigen::Index>(rec.x)).transpose());
    trace.records.push_back(std::move(rec));
  }
  trace.wall_seconds = clock.seconds();
  auto strategy = trace.strategy_at(horizon);
  return {std::move(strategy), std::move(trace)};
}

}  // namespace mro
