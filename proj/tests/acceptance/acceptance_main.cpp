// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Usage: mro_acceptance [output_root]

#include "mro/algorithms.hpp"
#include "mro/benchmarks.hpp"
#include "mro/driving.hpp"
#include "mro/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace mro;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

/// fn(i) for i in [0, count) on all hardware threads.
void parallel_for(Index count, const std::function<void(Index)>& fn) {
  const Index workers = std::max<Index>(1, std::min<Index>(count, std::thread::hardware_concurrency()));
  std::atomic<Index> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (Index i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trace_csv(const RunTrace& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

/// Relative paths of all CSV files under `root` that differ from the copy
/// under `other`, plus the number compared.
std::pair<std::vector<std::string>, Index> compare_csvs(const fs::path& root, const fs::path& other) {
  std::vector<std::string> diffs;
  Index compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const auto rel = fs::relative(entry.path(), root);
    ++compared;
    if (!fs::exists(other / rel) || slurp(entry.path()) != slurp(other / rel)) diffs.push_back(rel.string());
  }
  return {diffs, compared};
}

// ------------------------------------------------------------ criterion 1

Verdict gp_numerics() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u01;
  std::normal_distribution<double> n01;
  const Slice pair{0, 2};
  double worst = 0.0;
  for (int cfg = 0; cfg < 20; ++cfg) {
    const double l = 0.2 + 0.8 * u01(rng);
    Kernel k = Kernel::squared_exponential(l, pair);
    switch (cfg % 4) {
      case 1: k = Kernel::matern(0.5 + 3.0 * u01(rng), l, pair); break;
      case 2: k = Kernel::product({Kernel::linear(pair, std::sqrt(2.0)), Kernel::squared_exponential(l, pair)}); break;
      case 3: k = Kernel::sum({Kernel::matern(2.5, l, pair), Kernel::squared_exponential(2.0 * l, pair)}); break;
      default: break;
    }
    const double lambda = cfg % 2 ? 1.0 : 0.01;
    Eigen::MatrixXd x(2, 30), probes(2, 50);
    for (auto& v : x.reshaped()) v = 2.0 * u01(rng) - 1.0;
    for (auto& v : probes.reshaped()) v = 2.0 * u01(rng) - 1.0;
    Eigen::VectorXd y(30);
    for (auto& v : y) v = n01(rng);

    GpState gp(k, lambda);
    for (Eigen::Index i = 0; i < 30; ++i) gp = std::move(gp).update(x.col(i), y(i));

    // Dense oracle: one LU solve of the full system.
    Eigen::MatrixXd a(30, 30);
    for (Eigen::Index i = 0; i < 30; ++i)
      for (Eigen::Index j = 0; j < 30; ++j) a(i, j) = k(x.col(i), x.col(j));
    a.diagonal().array() += lambda;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::VectorXd alpha = lu.solve(y);
    for (Eigen::Index p = 0; p < 50; ++p) {
      Eigen::VectorXd kz(30);
      for (Eigen::Index i = 0; i < 30; ++i) kz(i) = k(x.col(i), probes.col(p));
      const double mean = kz.dot(alpha);
      const double var = std::max(0.0, k(probes.col(p), probes.col(p)) - kz.dot(lu.solve(kz)));
      const auto post = gp.posterior(probes.col(p));
      worst = std::max({worst, std::abs(post.mean - mean), std::abs(post.variance - var)});
    }
  }
  return {worst <= 1e-8, fmt("max |incremental - dense| = %.2e over 20 configurations", worst)};
}

// ------------------------------------------------------------ criterion 2

Verdict mwu_regret() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u01;
  Index violations = 0, cases = 0;
  double worst_ratio = 0.0;
  for (Index m : {5, 30}) {
    for (Index horizon : {100, 1000}) {
      const double bound = std::sqrt(std::log(static_cast<double>(m)) / (2.0 * static_cast<double>(horizon)));
      for (int seq = 0; seq < 50; ++seq) {
        auto s = MwuState::uniform(m, default_eta(m, horizon));
        Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
        double incurred = 0.0;
        for (Index t = 0; t < horizon; ++t) {
          Eigen::VectorXd loss(static_cast<Eigen::Index>(m));
          for (auto& v : loss) v = u01(rng);
          incurred += s.weights.dot(loss);
          total += loss;
          s = mwu_update(s, loss);
        }
        const double regret = (incurred - total.minCoeff()) / static_cast<double>(horizon);
        worst_ratio = std::max(worst_ratio, regret / bound);
        violations += regret > bound;
        ++cases;
      }
    }
  }
  return {violations == 0,
          fmt("%llu/%llu sequences above the bound, worst regret/bound %.3f",
              static_cast<unsigned long long>(violations), static_cast<unsigned long long>(cases), worst_ratio)};
}

// -------------------------------------------------------- criteria 3, 4, 6

/// Replays a GP-MRO trace, calling visit(t, bounds) with the bound tables
/// the algorithm saw before its t-th selection.
void replay(const Problem& problem, const RunTrace& trace,
            const std::function<void(const TraceRecord&, const BoundTables&)>& visit) {
  GpState gp(problem.prior.kernel, problem.prior.lambda);
  GridPosterior cache(gp, problem.joint_inputs);
  for (const auto& rec : trace.records) {
    cache.sync(gp);
    visit(rec, bound_tables(cache, problem, rec.beta));
    if (rec.queried) {
      gp = std::move(gp).update(problem.joint_inputs.col(static_cast<Eigen::Index>(
                                    problem.joint_index(rec.x, rec.theta))),
                                problem.prior.output.to_model(rec.y));
    }
  }
}

struct SynthBatch {
  ExperimentConfig config;
  ExperimentReport report;
  std::vector<BenchmarkInstance> instances;
  std::vector<RunResult> mro_runs;
};

template <class T>
std::vector<T> unwrap(std::vector<std::optional<T>>& slots) {
  std::vector<T> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

ExperimentConfig synth_config(const fs::path& out) {
  auto c = ExperimentConfig::defaults(BenchmarkKind::Synth1d, "paper");
  c.output_dir = out.string();
  return c;
}

SynthBatch synth_batch(const fs::path& out) {
  SynthBatch b;
  b.config = synth_config(out);
  b.report = run_experiment(b.config);
  const auto seeds = b.config.seeds;
  std::vector<std::optional<BenchmarkInstance>> instances(seeds.size());
  std::vector<std::optional<RunResult>> runs(seeds.size());
  const auto& mro = b.config.algorithms.front();
  if (mro.kind != AlgorithmKind::GpMro) throw std::logic_error("expected gp-mro first");
  parallel_for(seeds.size(), [&](Index s) {
    instances[s] = make_synth_1d(b.config.synth_1d, seeds[s]);
    auto cfg = mro.config;
    cfg.seed = seeds[s];
    runs[s] = run_gp_mro(instances[s]->problem, cfg);
  });
  b.instances = unwrap(instances);
  b.mro_runs = unwrap(runs);
  return b;
}

Verdict confidence_ordering(const SynthBatch& batch) {
  // Ordering on every recorded iteration of every synth-1d GP-MRO run.
  std::atomic<Index> bad_order{0}, checked_order{0};
  parallel_for(batch.instances.size(), [&](Index s) {
    replay(batch.instances[s].problem, batch.mro_runs[s].trace, [&](const TraceRecord&, const BoundTables& b) {
      const auto ok = (b.oucb.array() <= 1.0 && b.oucb.array() >= b.olcb.array() && b.olcb.array() >= 0.0);
      bad_order += static_cast<Index>(ok.size() - ok.count());
      checked_order += static_cast<Index>(ok.size());
    });
  });

  // Containment on 100 fresh GP draws under the true prior, beta = 3.
  const Index draws = 100;
  std::vector<Index> inside(draws, 0), total(draws, 0);
  AlgorithmConfig cfg = batch.config.algorithms.front().config;
  cfg.beta = ConstantBeta{3.0};
  parallel_for(draws, [&](Index i) {
    const auto inst = make_synth_1d(batch.config.synth_1d, 1000 + i);
    auto c = cfg;
    c.seed = 1000 + i;
    const auto run = run_gp_mro(inst.problem, c);
    const auto& f = inst.problem.oracle.table();
    replay(inst.problem, run.trace, [&](const TraceRecord&, const BoundTables& b) {
      inside[i] += static_cast<Index>((b.oucb.array() >= f.array() && f.array() >= b.olcb.array()).count());
      total[i] += static_cast<Index>(f.size());
    });
  });
  Index in = 0, all = 0;
  for (Index i = 0; i < draws; ++i) in += inside[i], all += total[i];
  const double freq = static_cast<double>(in) / static_cast<double>(all);
  return {bad_order == 0 && freq >= 0.95,
          fmt("%llu ordering violations in %llu checks; containment %.4f over %llu draws",
              static_cast<unsigned long long>(bad_order.load()),
              static_cast<unsigned long long>(checked_order.load()), freq,
              static_cast<unsigned long long>(draws))};
}

Verdict sigma_sum(const SynthBatch& batch) {
  Index violations = 0, runs = 0;
  double worst_ratio = 0.0;
  for (std::size_t s = 0; s < batch.mro_runs.size(); ++s) {
    const auto& problem = batch.instances[s].problem;
    const double lambda = problem.prior.lambda;
    if (lambda < 1.0) continue;
    const auto& trace = batch.mro_runs[s].trace;
    double sum = 0.0;
    Index queries = 0;
    for (const auto& rec : trace.records) {
      if (!rec.queried) continue;
      sum += rec.sigma;
      ++queries;
    }
    const double gamma = trace.info_gain.back();
    const double bound = std::sqrt(4.0 * static_cast<double>(queries) * lambda * gamma);
    worst_ratio = std::max(worst_ratio, sum / bound);
    violations += sum > bound;
    ++runs;
  }
  return {runs > 0 && violations == 0,
          fmt("%llu/%llu runs with lambda >= 1 above the bound, worst ratio %.3f",
              static_cast<unsigned long long>(violations), static_cast<unsigned long long>(runs), worst_ratio)};
}

/// Median final performance per algorithm, in config order.
std::vector<std::pair<std::string, double>> final_medians(const ExperimentReport& report) {
  std::vector<std::pair<std::string, std::vector<double>>> by_alg;
  for (const auto& r : report.runs) {
    if (!r.ok) continue;
    auto it = std::find_if(by_alg.begin(), by_alg.end(), [&](const auto& e) { return e.first == r.algorithm; });
    if (it == by_alg.end()) it = by_alg.insert(by_alg.end(), {r.algorithm, {}});
    it->second.push_back(r.curve.back());
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [name, values] : by_alg) out.emplace_back(name, median(values));
  return out;
}

Verdict ordering(const ExperimentReport& report, std::size_t seeds) {
  const auto medians = final_medians(report);
  std::map<std::string, double> m(medians.begin(), medians.end());
  std::string detail = fmt("%zu seeds, medians:", seeds);
  for (const auto& [name, v] : medians) detail += fmt(" %s %.4f", name.c_str(), v);
  if (!report.all_ok()) return {false, detail + " (some runs failed)"};
  const double mro = m.at("gp-mro");
  const bool pass = mro >= m.at("stableopt") && mro >= m.at("gp-ucb") && mro >= m.at("randmaxmin") &&
                    mro <= m.at("clss") + 0.02;
  return {pass, detail};
}

// ------------------------------------------------------------ criterion 5

Verdict epsilon_optimality() {
  const Index tables = 10;
  std::vector<double> gaps(tables);
  parallel_for(tables, [&](Index i) {
    std::mt19937_64 rng(500 + i);
    std::uniform_real_distribution<double> u01;
    PayoffTable f(20, 5);
    for (auto& v : f.reshaped()) v = u01(rng);
    const auto grid = DecisionGrid::uniform_1d(20, 0.0, 1.0);
    const ParamSet params(DecisionGrid::uniform_1d(5, 0.0, 1.0).points());
    // Short lengthscale: near-independent arms for an unstructured table.
    const Problem problem{ObjectiveOracle(f, 0.1), concat_joint_inputs(grid, params),
                          GpPrior{Kernel::squared_exponential(0.02, {0, 2}), 0.01, {}}};
    AlgorithmConfig c;
    c.horizon = 500;
    c.beta = ConstantBeta{2.0};
    c.seed = i;
    const double tau = maximin_value(f, 1e-3).upper_bound;
    gaps[i] = performance(run_gp_mro(problem, c).strategy, f) - tau;
  });
  const double worst = *std::min_element(gaps.begin(), gaps.end());
  return {worst >= -0.05, fmt("worst performance - tau* = %.4f over %llu tables", worst,
                              static_cast<unsigned long long>(tables))};
}

// ------------------------------------------------------------ criterion 7

ExperimentConfig poly_config(const fs::path& out) {
  auto c = ExperimentConfig::defaults(BenchmarkKind::SynthPoly, "desk");
  c.output_dir = out.string();
  return c;
}

// ------------------------------------------------------------ criterion 8

Verdict corollary_reductions(const SynthBatch& batch) {
  const Index seeds = std::min<Index>(10, batch.instances.size());
  std::vector<int> unit_ok(seeds, 0);
  std::vector<Index> mismatches(seeds, 0), steps(seeds, 0);
  parallel_for(seeds, [&](Index s) {
    const auto& problem = batch.instances[s].problem;
    std::mt19937_64 rng(800 + s);
    std::gamma_distribution<double> g1(1.0);
    Eigen::VectorXd q(static_cast<Eigen::Index>(problem.num_theta()));
    for (auto& v : q) v = g1(rng);
    const PriorQ prior(q / q.sum());

    auto base = batch.config.algorithms.front().config;
    base.seed = batch.config.seeds[s];
    auto unit = base;
    unit.chi = 1.0;
    unit.prior_q = prior;
    unit_ok[s] = trace_csv(run_gp_mro(problem, unit).trace) == trace_csv(batch.mro_runs[s].trace);

    auto zero = base;
    zero.chi = 0.0;
    zero.prior_q = prior;
    const auto run = run_gp_mro(problem, zero);
    replay(problem, run.trace, [&](const TraceRecord& rec, const BoundTables& b) {
      Index best = 0;
      double best_value = -1.0;
      for (Eigen::Index x = 0; x < b.oucb.rows(); ++x) {
        double v = 0.0;
        for (Eigen::Index j = 0; j < b.oucb.cols(); ++j) v += prior.weights()(j) * b.oucb(x, j);
        if (v > best_value) best_value = v, best = static_cast<Index>(x);
      }
      mismatches[s] += best != rec.x;
      ++steps[s];
    });
  });
  Index unit_pass = 0, bad = 0, total = 0;
  for (Index s = 0; s < seeds; ++s) unit_pass += unit_ok[s], bad += mismatches[s], total += steps[s];
  return {unit_pass == seeds && bad == 0,
          fmt("chi=1 trace-identical on %llu/%llu seeds; chi=0 argmax mismatches %llu/%llu iterations",
              static_cast<unsigned long long>(unit_pass), static_cast<unsigned long long>(seeds),
              static_cast<unsigned long long>(bad), static_cast<unsigned long long>(total))};
}

// ------------------------------------------------------------ criterion 9

ExperimentConfig drive_config(const fs::path& out) {
  auto c = ExperimentConfig::defaults(BenchmarkKind::Drive, "desk");
  c.output_dir = out.string();
  return c;
}

Verdict drive_ordering(const DriveReport& report, Index episodes) {
  const auto& mro = report.mro.front();
  const auto& mm = report.maximin.front();
  const bool pass = mm.overtakes == 0 && mro.overtakes > 0 && mro.mean_av_final_x > mm.mean_av_final_x;
  return {pass, fmt("%llu episodes: gp-mro %llu overtakes, avg AV x %.1f m; maximin %llu overtakes, %.1f m",
                    static_cast<unsigned long long>(episodes), static_cast<unsigned long long>(mro.overtakes),
                    mro.mean_av_final_x, static_cast<unsigned long long>(mm.overtakes), mm.mean_av_final_x)};
}

// ------------------------------------------------------------ driver

class Board {
 public:
  void record(int id, const std::string& name, const std::function<Verdict()>& check,
              double limit_seconds = 0.0) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_seconds > 0.0 && secs >= limit_seconds) {
      v.pass = false;
      v.detail += fmt("; over the %.0f s limit", limit_seconds);
    }
    report(id, name, v, secs);
  }

  void report(int id, const std::string& name, const Verdict& v, double secs) {
    std::printf("criterion %2d %-22s %s  %s [%.1f s]\n", id, name.c_str(), v.pass ? "PASS" : "FAIL",
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failures_ += !v.pass;
  }

  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "mro_acceptance";
  fs::remove_all(root);
  Board board;

  board.record(1, "gp-numerics", gp_numerics, 5.0);
  board.record(2, "mwu-regret", mwu_regret);

  // The synth-1d batch feeds criteria 3, 4, 6 and 8.
  SynthBatch batch;
  std::string batch_error;
  const auto t_batch = std::chrono::steady_clock::now();
  try {
    batch = synth_batch(root / "synth-1d");
  } catch (const std::exception& e) {
    batch_error = e.what();
  }
  const double batch_seconds = seconds_since(t_batch);
  auto with_batch = [&](const std::function<Verdict()>& check) {
    return [&, check] { return batch_error.empty() ? check() : Verdict{false, "batch error: " + batch_error}; };
  };

  board.record(3, "confidence-ordering", with_batch([&] { return confidence_ordering(batch); }));
  board.record(4, "sigma-sum", with_batch([&] { return sigma_sum(batch); }));
  board.record(5, "epsilon-optimality", epsilon_optimality, 60.0);
  board.report(6, "synth-1d-ordering",
               batch_error.empty() ? ordering(batch.report, batch.config.seeds.size())
                                   : Verdict{false, "batch error: " + batch_error},
               batch_seconds);

  board.record(7, "poly-ordering", [&] {
    const auto c = poly_config(root / "synth-poly");
    return ordering(run_experiment(c), c.seeds.size());
  }, 600.0);

  board.record(8, "corollary-reductions", with_batch([&] { return corollary_reductions(batch); }));

  board.record(9, "driving", [&] {
    const auto c = drive_config(root / "drive");
    return drive_ordering(run_drive_closed_loop(c), c.drive.episodes);
  }, 900.0);

  board.record(10, "determinism", [&] {
    std::vector<std::string> diffs;
    Index compared = 0;
    auto rerun = [&](const fs::path& first, const fs::path& second, const std::function<void()>& run) {
      run();
      const auto [d, n] = compare_csvs(first, second);
      diffs.insert(diffs.end(), d.begin(), d.end());
      compared += n;
    };
    rerun(root / "synth-1d", root / "rerun/synth-1d", [&] { run_experiment(synth_config(root / "rerun/synth-1d")); });
    rerun(root / "synth-poly", root / "rerun/synth-poly",
          [&] { run_experiment(poly_config(root / "rerun/synth-poly")); });
    rerun(root / "drive", root / "rerun/drive", [&] { run_drive_closed_loop(drive_config(root / "rerun/drive")); });
    std::string detail = fmt("%llu CSV files compared, %zu differ", static_cast<unsigned long long>(compared),
                             diffs.size());
    if (!diffs.empty()) detail += " (first: " + diffs.front() + ")";
    return Verdict{compared > 0 && diffs.empty(), detail};
  });

  std::printf("%d criteria failed\n", board.failures());
  return board.failures() == 0 ? 0 : 1;
}
