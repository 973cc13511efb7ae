#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "mro/algorithms.hpp"
#include "mro/domain.hpp"
#include "mro/kernels.hpp"

namespace mro::driving {

struct VehicleState {
  double x = 0.0;        // longitudinal position, m
  double y = 0.0;        // lateral position, m (road centered at 0, left positive)
  double heading = 0.0;  // rad
  double speed = 0.0;    // m/s, never negative
};

using Trajectory = std::vector<VehicleState>;

struct VehicleParams {
  double wheelbase = 2.7;
  /// Handwheel-to-road-wheel ratio: actions are handwheel angles.
  double steering_ratio = 15.0;
};

/// One forward-Euler step of the kinematic bicycle model.
VehicleState bicycle_step(const VehicleState& s, double steering, double accel, double dt,
                          const VehicleParams& params = {});

/// `steps` constant-input steps; the result holds steps + 1 states.
Trajectory rollout(const VehicleState& init, double steering, double accel, double dt, Index steps,
                   const VehicleParams& params = {});

struct AvAction {
  double steering;
  double accel;
};

struct HvAction {
  double steering;
};

/// Relative initial configuration. The AV starts at x = 0, the HV at x = gap.
struct Scenario {
  double gap = 40.0;
  double av_y = -1.75;
  double hv_y = -1.75;
  double av_speed = 20.0;
  double hv_speed = 10.0;

  Eigen::Matrix<double, 5, 1> vec() const { return {gap, av_y, hv_y, av_speed, hv_speed}; }
  bool operator==(const Scenario&) const = default;
};

struct SimConfig {
  double dt = 0.04;
  Index steps = 200;  // 8 s
  VehicleParams vehicle;
  Index steering_points = 11;
  Index accel_points = 11;
  Index theta_points = 11;
  double max_av_steering = 0.05235987755982988;  // pi / 60
  double min_accel = -10.0;
  double max_accel = 1.0;
  double max_hv_steering = 0.10471975511965977;  // pi / 30

  void validate() const;
};

/// AV and HV rollouts over the planning horizon.
std::pair<Trajectory, Trajectory> simulate_pair(const Scenario& s, AvAction av, HvAction hv,
                                                const SimConfig& config = {});

struct FeatureVector {
  double progress;      // z1
  double max_lateral;   // z2
  double min_distance;  // z3
};

/// Features of `ego` against `other`; trajectories must be time-aligned.
FeatureVector extract_features(const Trajectory& ego, const Trajectory& other);

/// Progress reward, road-limit penalty and proximity penalty, shifted and
/// clamped to [0,1].
struct ScoreModel {
  double progress_scale = 160.0;
  double progress_weight = 0.5;
  double road_threshold = 2.8;
  double road_ramp = 0.7;
  double road_weight = 0.4;
  double proximity_distance = 3.0;
  double proximity_weight = 0.3;
  double offset = 0.5;

  /// The HV's own score: same shapes, progress scaled to its nominal 8 s
  /// distance at 10 m/s.
  static ScoreModel human();
  void validate() const;
};

double progress_term(double z1, const ScoreModel& m);
double road_term(double z2, const ScoreModel& m);
double proximity_term(double z3, const ScoreModel& m);
double score(const FeatureVector& z, const ScoreModel& m);

/// Sum of Matern kernels, one per feature coordinate.
Kernel driving_kernel(const std::array<double, 3>& lengthscales = {40.0, 1.0, 2.0}, double nu = 2.5);

struct ActionGrids {
  DecisionGrid av;  // rows (steering, accel); index = i * accel_points + j
  ParamSet hv;      // HV steering angles
};
ActionGrids make_action_grids(const SimConfig& config = {});

/// Everything GP-MRO and the closed loop need about one scenario.
struct ScenarioTables {
  Eigen::MatrixXd features;  // 3 x (num_x * num_theta), x-major
  PayoffTable av;            // f(x, theta)
  PayoffTable hv;            // f_H(theta, x), stored num_x by num_theta
};

ScenarioTables tabulate(const Scenario& s, const ActionGrids& grids, const SimConfig& config,
                        const ScoreModel& av_model, const ScoreModel& hv_model);

/// Per-coordinate value lists; the scenario set is their product in
/// lexicographic order (gap slowest).
struct ScenarioBox {
  std::vector<double> gap{-30.0, -15.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 80.0};
  std::vector<double> av_y{-1.75, 1.75};
  std::vector<double> hv_y{-1.75, 0.0, 1.75};
  std::vector<double> av_speed{0.0, 5.0, 10.0, 15.0, 20.0};
  std::vector<double> hv_speed{10.0};
};
std::vector<Scenario> scenario_grid(const ScenarioBox& box);

struct DrivingPolicy {
  std::vector<Scenario> scenarios;
  std::vector<MixedStrategy> strategies;
  std::vector<PayoffTable> hv_tables;  // for the Boltzmann HV model
  Index total_queries = 0;
  std::vector<RunTrace> traces;
};

struct PolicyConfig {
  SimConfig sim;
  ScoreModel av_model;
  ScoreModel hv_model = ScoreModel::human();
  AlgorithmConfig algorithm = default_algorithm();
  std::array<double, 3> lengthscales{40.0, 1.0, 2.0};
  double nu = 2.5;
  double lambda = 1e-6;

  static AlgorithmConfig default_algorithm();
};

/// GP-MRO for every scenario in order, on one GP shared across scenarios.
DrivingPolicy precompute_policy(const std::vector<Scenario>& scenarios, const PolicyConfig& config);

/// Deterministic comparator: the pure max-min action of the true table.
DrivingPolicy maximin_policy(const std::vector<Scenario>& scenarios, const PolicyConfig& config);

/// Index of the closest scenario in R^5 (Euclidean); ties to the lowest index.
Index nearest_scenario(const std::vector<Scenario>& scenarios, const Scenario& query);

/// P[theta_i] proportional to exp(E_{x ~ strategy} f_H(theta_i, x)).
Eigen::VectorXd hv_boltzmann_probabilities(const MixedStrategy& strategy, const PayoffTable& hv_table);
Index hv_boltzmann_sample(const MixedStrategy& strategy, const PayoffTable& hv_table, Rng& rng);

struct ClosedLoopConfig {
  /// HV in the right lane, drifted 1.25 m toward the divider.
  Scenario initial{40.0, -1.75, -0.5, 20.0, 10.0};
  double duration = 10.0;
  double replan_every = 2.0;
  /// Zero both headings at each replanning event, as the scenario vector
  /// carries no heading.
  bool realign_headings = true;
  /// The AV brakes at sim.min_accel while the HV is ahead by less than
  /// `emergency_brake_gap` m and laterally within `emergency_brake_lateral` m.
  /// A zero gap disables the layer.
  double emergency_brake_gap = 6.0;
  double emergency_brake_lateral = 2.2;
};

struct PlanRecord {
  Scenario observed;
  Index scenario_id;
  Index av_action;
  Index hv_action;
};

struct EpisodeStats {
  bool overtake = false;
  double av_final_x = 0.0;
  double hv_final_x = 0.0;
  double min_separation = 0.0;
  Index plans = 0;
  Index emergency_brake_steps = 0;
  std::vector<PlanRecord> log;
};

EpisodeStats closed_loop(const DrivingPolicy& policy, const PolicyConfig& config,
                         const ClosedLoopConfig& loop, std::uint64_t seed);

struct BatchStats {
  std::vector<EpisodeStats> episodes;
  Index overtakes = 0;
  double mean_av_final_x = 0.0;
  double mean_hv_final_x = 0.0;
};

/// Episode i uses seed stream (seed, i); episodes run on a thread pool and the
/// result does not depend on scheduling.
BatchStats run_episodes(const DrivingPolicy& policy, const PolicyConfig& config,
                        const ClosedLoopConfig& loop, Index count, std::uint64_t seed);

/// Header `scenario_id,gap,av_y,hv_y,av_speed,hv_speed,point_index,probability`.
void write_policy_csv(std::ostream& out, const DrivingPolicy& policy);
/// Inverse of write_policy_csv; HV tables are rebuilt from `config`.
DrivingPolicy read_policy_csv(std::istream& in, const PolicyConfig& config);
/// Header `episode,overtake,av_final_x,hv_final_x,min_separation,emergency_brake_steps`.
void write_episodes_csv(std::ostream& out, const BatchStats& stats);

}  // namespace mro::driving
