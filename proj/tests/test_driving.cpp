#include "mro/driving.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

namespace mro::driving {
namespace {

TEST(Bicycle, StraightStep) {
  const auto n = bicycle_step({0.0, -1.75, 0.0, 20.0}, 0.0, 0.0, 0.04);
  EXPECT_DOUBLE_EQ(n.x, 0.8);
  EXPECT_DOUBLE_EQ(n.y, -1.75);
  EXPECT_EQ(n.heading, 0.0);
}

TEST(Bicycle, ConstantAcceleration) {
  const auto tr = rollout({0.0, 0.0, 0.0, 20.0}, 0.0, 1.0, 0.04, 200);
  EXPECT_NEAR(tr.back().speed, 28.0, 1e-9);
}

TEST(Bicycle, SpeedNeverNegative) {
  const auto tr = rollout({0.0, 0.0, 0.0, 3.0}, 0.0, -10.0, 0.04, 50);
  EXPECT_EQ(tr.back().speed, 0.0);
  EXPECT_NEAR(tr.back().x, tr[8].x, 1e-12);
}

TEST(Bicycle, EulerAgreesWithRefinedAndExactArc) {
  const double steer = std::numbers::pi / 60.0;
  const auto coarse = rollout({0.0, 0.0, 0.0, 20.0}, steer, 0.0, 0.04, 200).back();
  const auto fine = rollout({0.0, 0.0, 0.0, 20.0}, steer, 0.0, 0.004, 2000).back();
  EXPECT_LE(std::hypot(coarse.x - fine.x, coarse.y - fine.y), 0.1);
  // Circular arc at constant speed (tests/oracles/frozen_values.py).
  EXPECT_LE(std::hypot(coarse.x - 158.86140249425293, coarse.y - 16.48945112272973), 0.1);
  EXPECT_NEAR(coarse.heading, 0.2068546774279259, 1e-9);
}

TEST(Simulate, StraightPairGeometry) {
  const Scenario s{40.0, -1.75, -1.75, 20.0, 10.0};
  const auto [av, hv] = simulate_pair(s, {0.0, 0.0}, {0.0});
  ASSERT_EQ(av.size(), 201u);
  ASSERT_EQ(hv.size(), 201u);
  for (std::size_t k = 0; k < av.size(); ++k) {
    EXPECT_EQ(av[k].y, -1.75);
    EXPECT_EQ(hv[k].y, -1.75);
  }
  const double gap0 = hv.front().x - av.front().x, gap1 = hv.back().x - av.back().x;
  EXPECT_NEAR(gap0 - gap1, 80.0, 1e-9);
}

TEST(Features, StraightRuns) {
  const auto [av, hv] = simulate_pair({40.0, 1.5, -1.5, 20.0, 10.0}, {0.0, 0.0}, {0.0});
  const auto z = extract_features(av, hv);
  EXPECT_NEAR(z.progress, 160.0, 1e-9);
  EXPECT_DOUBLE_EQ(z.max_lateral, 1.5);
  // Parallel lanes 3 m apart; the AV passes the HV after 4 s, at a sample.
  EXPECT_NEAR(z.min_distance, 3.0, 1e-9);
}

TEST(Features, TranslationInvariant) {
  auto [av, hv] = simulate_pair({25.0, -1.75, 1.0, 15.0, 10.0}, {0.02, -1.0}, {-0.05});
  const auto z = extract_features(av, hv);
  for (auto& s : av) s.x += 123.0;
  for (auto& s : hv) s.x += 123.0;
  const auto shifted = extract_features(av, hv);
  EXPECT_NEAR(shifted.progress, z.progress, 1e-9);
  EXPECT_EQ(shifted.max_lateral, z.max_lateral);
  EXPECT_NEAR(shifted.min_distance, z.min_distance, 1e-9);
}

TEST(Score, Components) {
  const ScoreModel m;
  EXPECT_DOUBLE_EQ(score({0.0, 1.0, 50.0}, m), m.offset);
  EXPECT_LT(score({100.0, 3.6, 50.0}, m), score({100.0, 1.0, 50.0}, m));
  EXPECT_LT(score({100.0, 1.0, 0.5}, m), score({100.0, 1.0, 50.0}, m));
  EXPECT_DOUBLE_EQ(road_term(10.0, m), -m.road_weight);
  EXPECT_DOUBLE_EQ(progress_term(1000.0, m), m.progress_weight);
}

TEST(Score, UnitIntervalOverFullActionGrid) {
  const SimConfig sim;
  const auto grids = make_action_grids(sim);
  ASSERT_EQ(grids.av.size(), 121u);
  ASSERT_EQ(grids.hv.size(), 11u);
  const auto t = tabulate(ClosedLoopConfig{}.initial, grids, sim, ScoreModel{}, ScoreModel::human());
  EXPECT_GE(t.av.minCoeff(), 0.0);
  EXPECT_LE(t.av.maxCoeff(), 1.0);
  EXPECT_GE(t.hv.minCoeff(), 0.0);
  EXPECT_LE(t.hv.maxCoeff(), 1.0);
}

TEST(DrivingKernel, NormalizedSeparableAndPsd) {
  const auto k = driving_kernel();
  const Eigen::Vector3d z(120.0, 1.8, 4.0);
  EXPECT_DOUBLE_EQ(k.eval(z, z), 1.0);
  const Eigen::Vector3d moved(80.0, 1.8, 4.0);
  // only the progress summand drops: (c + 1 + 1) / 3
  EXPECT_NEAR(k.eval(z, moved), (matern_correlation(40.0, 2.5, 40.0) + 2.0) / 3.0, 1e-15);

  const auto grids = make_action_grids();
  const auto t = tabulate({30.0, -1.75, -1.75, 15.0, 10.0}, grids, SimConfig{}, ScoreModel{},
                          ScoreModel::human());
  const Eigen::MatrixXd g = gram(k, t.features.leftCols(30));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
}

TEST(Boltzmann, ConstantAndSoftmax) {
  const auto x = MixedStrategy::dirac(0);
  const auto p = hv_boltzmann_probabilities(x, PayoffTable::Constant(2, 11, 0.4));
  EXPECT_TRUE(p.isApprox(Eigen::VectorXd::Constant(11, 1.0 / 11.0)));
  PayoffTable two(1, 2);
  two << 0.0, std::log(2.0);
  const auto q = hv_boltzmann_probabilities(x, two);
  EXPECT_NEAR(q(0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(q(1), 2.0 / 3.0, 1e-15);
}

TEST(Boltzmann, NormalizedOnScenarioTable) {
  const auto grids = make_action_grids();
  const auto t = tabulate(ClosedLoopConfig{}.initial, grids, SimConfig{}, ScoreModel{}, ScoreModel::human());
  const auto p = hv_boltzmann_probabilities(MixedStrategy::from_masses({{3, 1.0}, {60, 2.0}}), t.hv);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
}

TEST(ScenarioGrid, LexicographicWithGapSlowest) {
  ScenarioBox box;
  box.gap = {0.0, 10.0};
  box.av_y = {-1.75};
  box.hv_y = {-1.75, 1.75};
  box.av_speed = {5.0};
  box.hv_speed = {10.0};
  const auto s = scenario_grid(box);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[1], (Scenario{0.0, -1.75, 1.75, 5.0, 10.0}));
  EXPECT_EQ(s[2], (Scenario{10.0, -1.75, -1.75, 5.0, 10.0}));
  EXPECT_EQ(nearest_scenario(s, {9.0, -1.0, 1.0, 5.0, 10.0}), 3u);
  EXPECT_EQ(nearest_scenario(s, {5.0, -1.75, -1.75, 5.0, 10.0}), 0u);
}

PolicyConfig fast_config() {
  PolicyConfig c;
  c.algorithm.horizon = 15;
  return c;
}

std::vector<Scenario> few_scenarios() {
  return {{40.0, -1.75, -1.75, 20.0, 10.0}, {10.0, -1.75, -1.75, 15.0, 10.0}, {60.0, -1.75, 0.0, 20.0, 10.0}};
}

TEST(Policy, EmptyScenarioSet) {
  const auto p = precompute_policy({}, fast_config());
  EXPECT_TRUE(p.strategies.empty());
  EXPECT_EQ(p.total_queries, 0u);
}

TEST(Policy, GateSkipsAndSharedGpAmortizes) {
  const auto cfg = fast_config();
  const auto p = precompute_policy(few_scenarios(), cfg);
  ASSERT_EQ(p.strategies.size(), 3u);
  ASSERT_EQ(p.traces.size(), 3u);
  Index queries = 0;
  for (const auto& tr : p.traces) {
    for (const auto& r : tr.records) {
      if (!r.queried) EXPECT_LE(r.sigma, *cfg.algorithm.variance_gate);
    }
    queries += tr.queries();
  }
  EXPECT_EQ(p.total_queries, queries);
  EXPECT_LT(p.total_queries, 3u * cfg.algorithm.horizon);
}

TEST(Policy, MaximinComparatorIsPure) {
  const auto m = maximin_policy(few_scenarios(), fast_config());
  for (const auto& s : m.strategies) EXPECT_EQ(s.support().size(), 1u);
}

TEST(Policy, CsvRoundTrip) {
  const auto cfg = fast_config();
  const auto p = precompute_policy(few_scenarios(), cfg);
  std::stringstream ss;
  write_policy_csv(ss, p);
  const auto back = read_policy_csv(ss, cfg);
  EXPECT_EQ(back.scenarios, p.scenarios);
  EXPECT_EQ(back.strategies, p.strategies);
  ASSERT_EQ(back.hv_tables.size(), p.hv_tables.size());
  EXPECT_EQ(back.hv_tables[1], p.hv_tables[1]);

  std::stringstream bad("scenario_id,gap\n");
  EXPECT_THROW(read_policy_csv(bad, cfg), DomainError);
}

/// One scenario whose strategy and HV model are both point masses.
DrivingPolicy dirac_policy(const Scenario& s, Index av_action, Index theta) {
  DrivingPolicy p;
  p.scenarios = {s};
  p.strategies = {MixedStrategy::dirac(av_action)};
  PayoffTable hv = PayoffTable::Zero(121, 11);
  hv.col(static_cast<Eigen::Index>(theta)).setConstant(50.0);
  p.hv_tables = {hv};
  return p;
}

TEST(ClosedLoop, FivePlansAndDeterministicDiracs) {
  const Scenario s{40.0, -1.75, 1.75, 20.0, 10.0};
  // action index = steering_index * 11 + accel_index; 65 is straight at full throttle
  const auto p = dirac_policy(s, 65, 5);
  ClosedLoopConfig loop;
  loop.initial = s;
  const auto a = closed_loop(p, PolicyConfig{}, loop, 1);
  const auto b = closed_loop(p, PolicyConfig{}, loop, 999);
  EXPECT_EQ(a.plans, 5u);
  EXPECT_EQ(a.log.size(), 5u);
  EXPECT_EQ(a.av_final_x, b.av_final_x);
  EXPECT_EQ(a.hv_final_x, b.hv_final_x);
}

TEST(ClosedLoop, FreeLaneOvertake) {
  // HV straight in the other lane, AV straight and accelerating from 40 m behind.
  const Scenario s{40.0, -1.75, 1.75, 20.0, 10.0};
  ClosedLoopConfig loop;
  loop.initial = s;
  const auto e = closed_loop(dirac_policy(s, 65, 5), PolicyConfig{}, loop, 3);
  EXPECT_TRUE(e.overtake);
  // 250 Euler steps: AV 200 + 0.0016 * (0 + ... + 249) m, HV 40 + 100 m
  EXPECT_NEAR(e.av_final_x - e.hv_final_x, 109.8, 1e-6);
  EXPECT_EQ(e.emergency_brake_steps, 0u);
}

TEST(ClosedLoop, EmergencyBrakeAvoidsRearEnd) {
  const Scenario s{40.0, -1.75, -1.75, 20.0, 10.0};
  ClosedLoopConfig loop;
  loop.initial = s;
  // 64: straight at -0.1 m/s^2, closing at about 10 m/s, which stops within the gap.
  const auto braked = closed_loop(dirac_policy(s, 64, 5), PolicyConfig{}, loop, 3);
  EXPECT_FALSE(braked.overtake);
  EXPECT_GT(braked.emergency_brake_steps, 0u);
  EXPECT_GT(braked.min_separation, 0.5);  // stops about 0.95 m short
  loop.emergency_brake_gap = 0.0;
  const auto unbraked = closed_loop(dirac_policy(s, 64, 5), PolicyConfig{}, loop, 3);
  EXPECT_TRUE(unbraked.overtake);  // drives through the HV
  EXPECT_LT(unbraked.min_separation, 1.0);
}

TEST(ClosedLoop, BatchIndependentOfScheduling) {
  const auto cfg = fast_config();
  const auto p = precompute_policy(few_scenarios(), cfg);
  const ClosedLoopConfig loop;
  const auto a = run_episodes(p, cfg, loop, 24, 5);
  const auto b = run_episodes(p, cfg, loop, 24, 5);
  std::ostringstream sa, sb;
  write_episodes_csv(sa, a);
  write_episodes_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.episodes.size(), 24u);
  EXPECT_EQ(closed_loop(p, cfg, loop, 7).av_final_x, closed_loop(p, cfg, loop, 7).av_final_x);
}

TEST(Config, Validation) {
  SimConfig sim;
  sim.dt = 0.0;
  EXPECT_THROW(sim.validate(), DomainError);
  ScoreModel m;
  m.proximity_distance = 0.0;
  EXPECT_THROW(m.validate(), DomainError);
}

}  // namespace
}  // namespace mro::driving
