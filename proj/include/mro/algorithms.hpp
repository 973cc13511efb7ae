#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mro/domain.hpp"
#include "mro/gp.hpp"
#include "mro/kernels.hpp"

namespace mro {

// ------------------------------------------------------------------ MWU

/// Hedge state of the simulated adversary over the m parameter values.
struct MwuState {
  Eigen::VectorXd weights;
  double eta;
  Eigen::VectorXd cumulative_losses;

  static MwuState uniform(Index m, double eta);
};

/// w'[i] proportional to exp(-eta * cumulative_loss[i]). Losses must lie in [0,1].
MwuState mwu_update(const MwuState& state, const Eigen::Ref<const Eigen::VectorXd>& losses);

/// sqrt(8 log m / T), the learning rate behind the sqrt(log m / (2T)) regret bound.
double default_eta(Index m, Index horizon);

// -------------------------------------------------------------- problem

/// Affine map between the [0,1] payoff scale and the scale the GP models.
/// Lets a benchmark run the GP under its native prior while bounds are
/// reported (and truncated) on the payoff scale.
struct OutputMap {
  double offset = 0.0;
  double scale = 1.0;
  double to_model(double payoff) const { return payoff * scale + offset; }
  double to_payoff(double model) const { return (model - offset) / scale; }
};

struct GpPrior {
  Kernel kernel;
  double lambda = 1.0;
  OutputMap output;
};

/// A finite robust-optimization instance: oracle on X x Theta plus the joint
/// inputs the GP sees for each pair. Column x * m + theta of `joint_inputs`
/// is the input for (x, theta).
struct Problem {
  ObjectiveOracle oracle;
  Eigen::MatrixXd joint_inputs;
  GpPrior prior;

  Index num_x() const { return oracle.num_x(); }
  Index num_theta() const { return oracle.num_theta(); }
  Index joint_index(Index x, Index theta) const { return x * num_theta() + theta; }
  void validate() const;
};

/// Concatenate each grid point with each parameter value, x-major.
Eigen::MatrixXd concat_joint_inputs(const DecisionGrid& grid, const ParamSet& params);

/// Truncated confidence bounds and posterior deviation on the whole grid,
/// each num_x by num_theta, on the payoff scale.
struct BoundTables {
  Eigen::MatrixXd oucb;
  Eigen::MatrixXd olcb;
  Eigen::MatrixXd sigma;  // posterior standard deviation on the model scale
};

BoundTables bound_tables(const GridPosterior& posterior, const Problem& problem, double beta);

// ------------------------------------------------------------ selection

/// argmax_x sum_i w[i] * oucb(x, theta_i); ties go to the lowest index.
Index best_response(const Eigen::MatrixXd& oucb, const Eigen::Ref<const Eigen::VectorXd>& weights);

/// argmax_x (1 - chi) E_{theta~Q}[oucb] + chi sum_i w[i] oucb. chi == 1
/// evaluates exactly the best_response objective.
Index best_response_tradeoff(const Eigen::MatrixXd& oucb,
                             const Eigen::Ref<const Eigen::VectorXd>& weights, const PriorQ& q,
                             double chi);

/// argmax_theta sigma(x, theta); ties go to the lowest index.
Index select_theta(const Eigen::MatrixXd& sigma, Index x);

/// Convenience forms evaluating the bounds from a GP state directly.
Index best_response(const GpState& gp, const Eigen::Ref<const Eigen::VectorXd>& weights,
                    const Problem& problem, double beta);
Index select_theta(const GpState& gp, Index x, const Problem& problem);

// ------------------------------------------------------------ run setup

struct AlgorithmConfig {
  Index horizon = 40;
  BetaSchedule beta = ConstantBeta{2.0};
  std::optional<double> eta;
  double chi = 1.0;
  std::optional<PriorQ> prior_q;
  std::uint64_t seed = 0;
  std::optional<double> variance_gate;
  double epsilon = 0.05;  // reporting only

  void validate(Index num_theta, double lambda) const;
  double eta_for(Index num_theta) const;
};

/// How the strategy reported at iteration t is formed from the trace.
enum class ReportRule {
  UniformOverSelections,  // uniform over x_1..x_t (GP-MRO, CLSS)
  UniformOverReported,    // uniform over the record's `reported` indices
};

struct TraceRecord {
  Index t = 0;
  Eigen::VectorXd weights;  // adversary weights; empty for non-MWU algorithms
  Index x = kNoIndex;
  Index theta = kNoIndex;
  double y = 0.0;           // NaN when the query was skipped
  double beta = 0.0;        // beta_t used for the bounds of round t
  double gamma_prev = 0.0;  // information gain fed to beta_t
  double sigma = 0.0;       // sigma_{t-1}(x_t, theta_t)
  bool queried = false;
  std::vector<Index> reported;
};

struct RunTrace {
  std::string algorithm;
  ReportRule rule = ReportRule::UniformOverSelections;
  Index num_theta = 0;
  std::vector<TraceRecord> records;
  std::vector<double> info_gain;  // gamma after each round
  double wall_seconds = 0.0;

  /// Strategy the algorithm would report after the first t rounds.
  MixedStrategy strategy_at(Index t) const;
  Index queries() const;
};

struct RunResult {
  MixedStrategy strategy;
  RunTrace trace;
};

/// Header `t,w_1..w_m,x_index,theta_index,y,beta,sigma,queried`.
void write_trace_csv(std::ostream& out, const RunTrace& trace);

// ------------------------------------------------------------ algorithms

/// GP-MRO. Uses the trade-off best response whenever chi < 1.
RunResult run_gp_mro(const Problem& problem, const AlgorithmConfig& config);

/// GP-MRO on a caller-owned GP that persists across runs; queries extend
/// `gp` in place.
RunResult run_gp_mro(const Problem& problem, const AlgorithmConfig& config, GpState& gp);

/// GP-UCB on the joint domain; reports the last selected x.
RunResult run_gp_ucb(const Problem& problem, const AlgorithmConfig& config);

/// StableOpt: x_t maximizes min_theta oucb, theta_t minimizes olcb at x_t;
/// reports argmax_x min_theta olcb with the final round's posterior.
RunResult run_stableopt(const Problem& problem, const AlgorithmConfig& config);

/// Fair coin each round between the StableOpt and GP-UCB selection rules on
/// one shared GP; reports the 50/50 mixture of the two rules' reported points.
RunResult run_randmaxmin(const Problem& problem, const AlgorithmConfig& config);

/// MWU self-play with exact best responses on the true table.
RunResult run_clss(const PayoffTable& table, Index horizon, std::optional<double> eta = {});

}  // namespace mro
