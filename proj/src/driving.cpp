#include "mro/driving.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

namespace mro::driving {

namespace {

Index sample_index(const MixedStrategy& strategy, Rng& rng) {
  std::uniform_real_distribution<double> unif;
  const double u = unif(rng);
  double acc = 0.0;
  for (const auto& a : strategy.support()) {
    acc += a.probability;
    if (u < acc) return a.index;
  }
  return strategy.support().back().index;
}

void check_values(const std::vector<double>& v, const char* name) {
  if (v.empty()) throw DomainError(std::string("scenario box: '") + name + "' is empty");
}

DrivingPolicy tabulated_policy(const std::vector<Scenario>& scenarios, const PolicyConfig& config,
                               std::vector<PayoffTable>* av_tables,
                               std::vector<Eigen::MatrixXd>* features) {
  config.sim.validate();
  config.av_model.validate();
  config.hv_model.validate();
  const auto grids = make_action_grids(config.sim);
  DrivingPolicy policy;
  policy.scenarios = scenarios;
  for (const auto& s : scenarios) {
    auto t = tabulate(s, grids, config.sim, config.av_model, config.hv_model);
    policy.hv_tables.push_back(std::move(t.hv));
    av_tables->push_back(std::move(t.av));
    if (features) features->push_back(std::move(t.features));
  }
  return policy;
}

}  // namespace

// ------------------------------------------------------------- dynamics

VehicleState bicycle_step(const VehicleState& s, double steering, double accel, double dt,
                          const VehicleParams& p) {
  if (!(dt > 0.0)) throw DomainError("bicycle_step: dt must be positive");
  VehicleState n;
  n.x = s.x + s.speed * std::cos(s.heading) * dt;
  n.y = s.y + s.speed * std::sin(s.heading) * dt;
  n.heading = s.heading + s.speed / p.wheelbase * std::tan(steering / p.steering_ratio) * dt;
  n.speed = std::max(0.0, s.speed + accel * dt);
  return n;
}

Trajectory rollout(const VehicleState& init, double steering, double accel, double dt, Index steps,
                   const VehicleParams& params) {
  Trajectory tr;
  tr.reserve(steps + 1);
  tr.push_back(init);
  for (Index k = 0; k < steps; ++k) tr.push_back(bicycle_step(tr.back(), steering, accel, dt, params));
  return tr;
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw DomainError("sim.dt: must be positive");
  if (steps == 0) throw DomainError("sim.steps: must be >= 1");
  if (!(vehicle.wheelbase > 0.0)) throw DomainError("sim.vehicle.wheelbase: must be positive");
  if (!(vehicle.steering_ratio > 0.0)) throw DomainError("sim.vehicle.steering_ratio: must be positive");
  if (steering_points < 2 || accel_points < 2 || theta_points < 2) {
    throw DomainError("sim: action grids need at least two points per axis");
  }
  if (!(min_accel < max_accel)) throw DomainError("sim: min_accel must be below max_accel");
}

std::pair<Trajectory, Trajectory> simulate_pair(const Scenario& s, AvAction av, HvAction hv,
                                                const SimConfig& c) {
  return {rollout({0.0, s.av_y, 0.0, s.av_speed}, av.steering, av.accel, c.dt, c.steps, c.vehicle),
          rollout({s.gap, s.hv_y, 0.0, s.hv_speed}, hv.steering, 0.0, c.dt, c.steps, c.vehicle)};
}

FeatureVector extract_features(const Trajectory& ego, const Trajectory& other) {
  if (ego.empty() || ego.size() != other.size()) {
    throw DomainError("extract_features: trajectories must be nonempty and time-aligned");
  }
  FeatureVector z{ego.back().x - ego.front().x, 0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < ego.size(); ++k) {
    z.max_lateral = std::max(z.max_lateral, std::abs(ego[k].y));
    z.min_distance = std::min(z.min_distance, std::hypot(ego[k].x - other[k].x, ego[k].y - other[k].y));
  }
  return z;
}

// ---------------------------------------------------------------- score

ScoreModel ScoreModel::human() {
  ScoreModel m;
  m.progress_scale = 80.0;
  return m;
}

void ScoreModel::validate() const {
  if (!(progress_scale > 0.0 && road_ramp > 0.0 && proximity_distance > 0.0)) {
    throw DomainError("score model: scales must be positive");
  }
  if (progress_weight < 0.0 || road_weight < 0.0 || proximity_weight < 0.0) {
    throw DomainError("score model: weights must be nonnegative");
  }
}

double progress_term(double z1, const ScoreModel& m) {
  return m.progress_weight * std::min(std::max(z1, 0.0) / m.progress_scale, 1.0);
}

double road_term(double z2, const ScoreModel& m) {
  return -m.road_weight * std::clamp((z2 - m.road_threshold) / m.road_ramp, 0.0, 1.0);
}

double proximity_term(double z3, const ScoreModel& m) {
  return -m.proximity_weight * std::max(0.0, (m.proximity_distance - z3) / m.proximity_distance);
}

double score(const FeatureVector& z, const ScoreModel& m) {
  const double total = progress_term(z.progress, m) + road_term(z.max_lateral, m) +
                       proximity_term(z.min_distance, m) + m.offset;
  return std::clamp(total, 0.0, 1.0);
}

Kernel driving_kernel(const std::array<double, 3>& l, double nu) {
  return Kernel::sum({Kernel::matern(nu, l[0], {0, 1}), Kernel::matern(nu, l[1], {1, 1}),
                      Kernel::matern(nu, l[2], {2, 1})});
}

// --------------------------------------------------------------- tables

ActionGrids make_action_grids(const SimConfig& c) {
  return {DecisionGrid::uniform_2d(c.steering_points, -c.max_av_steering, c.max_av_steering,
                                   c.accel_points, c.min_accel, c.max_accel),
          ParamSet(DecisionGrid::uniform_1d(c.theta_points, -c.max_hv_steering, c.max_hv_steering)
                       .points())};
}

ScenarioTables tabulate(const Scenario& s, const ActionGrids& grids, const SimConfig& c,
                        const ScoreModel& av_model, const ScoreModel& hv_model) {
  const Index nx = grids.av.size();
  const Index m = grids.hv.size();
  std::vector<Trajectory> av(nx), hv(m);
  for (Index x = 0; x < nx; ++x) {
    const auto a = grids.av.point(x);
    av[x] = rollout({0.0, s.av_y, 0.0, s.av_speed}, a(0), a(1), c.dt, c.steps, c.vehicle);
  }
  for (Index t = 0; t < m; ++t) {
    hv[t] = rollout({s.gap, s.hv_y, 0.0, s.hv_speed}, grids.hv.value(t)(0), 0.0, c.dt, c.steps, c.vehicle);
  }
  ScenarioTables out{Eigen::MatrixXd(3, static_cast<Eigen::Index>(nx * m)),
                     PayoffTable(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(m)),
                     PayoffTable(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(m))};
  for (Index x = 0; x < nx; ++x) {
    for (Index t = 0; t < m; ++t) {
      const auto z = extract_features(av[x], hv[t]);
      const auto zh = extract_features(hv[t], av[x]);
      const auto r = static_cast<Eigen::Index>(x), col = static_cast<Eigen::Index>(t);
      out.features.col(r * static_cast<Eigen::Index>(m) + col) << z.progress, z.max_lateral, z.min_distance;
      out.av(r, col) = score(z, av_model);
      out.hv(r, col) = score(zh, hv_model);
    }
  }
  return out;
}

std::vector<Scenario> scenario_grid(const ScenarioBox& b) {
  check_values(b.gap, "gap");
  check_values(b.av_y, "av_y");
  check_values(b.hv_y, "hv_y");
  check_values(b.av_speed, "av_speed");
  check_values(b.hv_speed, "hv_speed");
  std::vector<Scenario> out;
  for (double g : b.gap)
    for (double ay : b.av_y)
      for (double hy : b.hv_y)
        for (double av : b.av_speed)
          for (double hv : b.hv_speed) out.push_back({g, ay, hy, av, hv});
  return out;
}

// --------------------------------------------------------------- policy

AlgorithmConfig PolicyConfig::default_algorithm() {
  AlgorithmConfig a;
  a.horizon = 100;
  a.beta = ConstantBeta{0.5};
  a.eta = 0.5;
  a.variance_gate = 0.005;
  return a;
}

DrivingPolicy precompute_policy(const std::vector<Scenario>& scenarios, const PolicyConfig& config) {
  std::vector<PayoffTable> av_tables;
  std::vector<Eigen::MatrixXd> features;
  DrivingPolicy policy = tabulated_policy(scenarios, config, &av_tables, &features);
  if (scenarios.empty()) return policy;

  const GpPrior prior{driving_kernel(config.lengthscales, config.nu), config.lambda, {-0.5, 1.0}};
  GpState gp(prior.kernel, prior.lambda);
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    Problem problem{ObjectiveOracle(std::move(av_tables[i]), 0.0), std::move(features[i]), prior};
    auto run = run_gp_mro(problem, config.algorithm, gp);
    policy.total_queries += run.trace.queries();
    policy.strategies.push_back(std::move(run.strategy));
    policy.traces.push_back(std::move(run.trace));
  }
  return policy;
}

DrivingPolicy maximin_policy(const std::vector<Scenario>& scenarios, const PolicyConfig& config) {
  std::vector<PayoffTable> av_tables;
  DrivingPolicy policy = tabulated_policy(scenarios, config, &av_tables, nullptr);
  for (const auto& t : av_tables) policy.strategies.push_back(MixedStrategy::dirac(pure_maximin(t).first));
  return policy;
}

Index nearest_scenario(const std::vector<Scenario>& scenarios, const Scenario& q) {
  if (scenarios.empty()) throw DomainError("nearest_scenario: empty scenario set");
  const auto v = q.vec();
  Index best = 0;
  double best_d = (scenarios[0].vec() - v).squaredNorm();
  for (Index i = 1; i < scenarios.size(); ++i) {
    const double d = (scenarios[i].vec() - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Eigen::VectorXd hv_boltzmann_probabilities(const MixedStrategy& strategy, const PayoffTable& hv_table) {
  const Eigen::VectorXd u = expected_per_theta(strategy, hv_table);
  Eigen::VectorXd p = (u.array() - u.maxCoeff()).exp().matrix();
  return p / p.sum();
}

Index hv_boltzmann_sample(const MixedStrategy& strategy, const PayoffTable& hv_table, Rng& rng) {
  const Eigen::VectorXd p = hv_boltzmann_probabilities(strategy, hv_table);
  std::discrete_distribution<Index> pick(p.data(), p.data() + p.size());
  return pick(rng);
}

// ---------------------------------------------------------- closed loop

EpisodeStats closed_loop(const DrivingPolicy& policy, const PolicyConfig& config,
                         const ClosedLoopConfig& loop, std::uint64_t seed) {
  if (policy.scenarios.empty()) throw DomainError("closed_loop: empty policy");
  if (!(loop.replan_every > 0.0 && loop.duration >= loop.replan_every)) {
    throw DomainError("closed_loop: need duration >= replan_every > 0");
  }
  const auto& c = config.sim;
  const auto grids = make_action_grids(c);
  const auto plans = static_cast<Index>(std::llround(loop.duration / loop.replan_every));
  const auto steps = static_cast<Index>(std::llround(loop.replan_every / c.dt));

  Rng rng(seed);
  VehicleState av{0.0, loop.initial.av_y, 0.0, loop.initial.av_speed};
  VehicleState hv{loop.initial.gap, loop.initial.hv_y, 0.0, loop.initial.hv_speed};
  EpisodeStats st;
  st.min_separation = std::hypot(av.x - hv.x, av.y - hv.y);
  for (Index p = 0; p < plans; ++p) {
    if (loop.realign_headings) av.heading = hv.heading = 0.0;
    const Scenario now{hv.x - av.x, av.y, hv.y, av.speed, hv.speed};
    const Index k = nearest_scenario(policy.scenarios, now);
    const auto& strategy = policy.strategies[k];
    const Index xi = sample_index(strategy, rng);
    const Index ti = hv_boltzmann_sample(strategy, policy.hv_tables[k], rng);
    st.log.push_back({now, k, xi, ti});
    const auto a = grids.av.point(xi);
    const double theta = grids.hv.value(ti)(0);
    for (Index s = 0; s < steps; ++s) {
      const double ahead = hv.x - av.x;
      double accel = a(1);
      if (ahead > 0.0 && ahead < loop.emergency_brake_gap &&
          std::abs(hv.y - av.y) < loop.emergency_brake_lateral) {
        accel = c.min_accel;
        ++st.emergency_brake_steps;
      }
      av = bicycle_step(av, a(0), accel, c.dt, c.vehicle);
      hv = bicycle_step(hv, theta, 0.0, c.dt, c.vehicle);
      st.min_separation = std::min(st.min_separation, std::hypot(av.x - hv.x, av.y - hv.y));
    }
    ++st.plans;
  }
  st.av_final_x = av.x;
  st.hv_final_x = hv.x;
  st.overtake = av.x > hv.x;
  return st;
}

BatchStats run_episodes(const DrivingPolicy& policy, const PolicyConfig& config,
                        const ClosedLoopConfig& loop, Index count, std::uint64_t seed) {
  BatchStats out;
  out.episodes.resize(count);
  const Index workers = std::max<Index>(1, std::min<Index>(count, std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](Index w) {
    try {
      for (Index i = w; i < count; i += workers) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(i)};
        out.episodes[i] = closed_loop(policy, config, loop, Rng(seq)());
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (Index w = 1; w < workers; ++w) pool.emplace_back(work, w);
  if (count > 0) work(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& e : out.episodes) {
    out.overtakes += e.overtake ? 1 : 0;
    out.mean_av_final_x += e.av_final_x;
    out.mean_hv_final_x += e.hv_final_x;
  }
  if (count > 0) {
    out.mean_av_final_x /= static_cast<double>(count);
    out.mean_hv_final_x /= static_cast<double>(count);
  }
  return out;
}

void write_policy_csv(std::ostream& out, const DrivingPolicy& policy) {
  out << "scenario_id,gap,av_y,hv_y,av_speed,hv_speed,point_index,probability\n";
  for (std::size_t i = 0; i < policy.strategies.size(); ++i) {
    const auto& s = policy.scenarios[i];
    for (const auto& a : policy.strategies[i].support()) {
      out << i << ',' << format_double(s.gap) << ',' << format_double(s.av_y) << ','
          << format_double(s.hv_y) << ',' << format_double(s.av_speed) << ','
          << format_double(s.hv_speed) << ',' << a.index << ',' << format_double(a.probability)
          << '\n';
    }
  }
}

DrivingPolicy read_policy_csv(std::istream& in, const PolicyConfig& config) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "scenario_id,gap,av_y,hv_y,av_speed,hv_speed,point_index,probability") {
    throw DomainError("read_policy_csv: unexpected header");
  }
  struct Entry {
    Scenario scenario;
    std::vector<MixedStrategy::Atom> atoms;
  };
  std::map<Index, Entry> rows;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) {
      throw DomainError("read_policy_csv: line " + std::to_string(lineno) + ": expected 8 fields");
    }
    auto index_cell = [](const std::string& c) {
      const long long v = std::stoll(c);
      if (v < 0) throw DomainError("negative index");
      return static_cast<Index>(v);
    };
    try {
      const Index id = index_cell(cells[0]);
      const Scenario s{std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                       std::stod(cells[4]), std::stod(cells[5])};
      auto [it, fresh] = rows.try_emplace(id, Entry{s, {}});
      if (!fresh && !(it->second.scenario == s)) {
        throw DomainError("scenario fields differ between rows of one id");
      }
      it->second.atoms.push_back({index_cell(cells[6]), std::stod(cells[7])});
    } catch (const std::logic_error& e) {
      throw DomainError("read_policy_csv: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  const auto grids = make_action_grids(config.sim);
  DrivingPolicy policy;
  Index expected = 0;
  for (auto& [id, entry] : rows) {
    if (id != expected++) throw DomainError("read_policy_csv: scenario ids must be 0..n-1");
    for (const auto& a : entry.atoms) {
      if (a.index >= grids.av.size()) {
        throw DomainError("read_policy_csv: point_index out of range");
      }
    }
    policy.scenarios.push_back(entry.scenario);
    policy.strategies.push_back(MixedStrategy::from_masses(std::move(entry.atoms)));
    policy.hv_tables.push_back(
        tabulate(entry.scenario, grids, config.sim, config.av_model, config.hv_model).hv);
  }
  if (policy.scenarios.empty()) throw DomainError("read_policy_csv: no rows");
  return policy;
}

void write_episodes_csv(std::ostream& out, const BatchStats& stats) {
  out << "episode,overtake,av_final_x,hv_final_x,min_separation,emergency_brake_steps\n";
  for (std::size_t i = 0; i < stats.episodes.size(); ++i) {
    const auto& e = stats.episodes[i];
    out << i << ',' << (e.overtake ? 1 : 0) << ',' << format_double(e.av_final_x) << ','
        << format_double(e.hv_final_x) << ',' << format_double(e.min_separation) << ','
        << e.emergency_brake_steps << '\n';
  }
}

}  // namespace mro::driving
