#include "mro/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/Core>

namespace mro {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kVersion = "0.1.0";

constexpr std::pair<BenchmarkKind, std::string_view> kBenchmarks[] = {
    {BenchmarkKind::Synth1d, "synth-1d"},
    {BenchmarkKind::SynthPoly, "synth-poly"},
    {BenchmarkKind::Drive, "drive"},
};

constexpr std::pair<AlgorithmKind, std::string_view> kAlgorithms[] = {
    {AlgorithmKind::GpMro, "gp-mro"},       {AlgorithmKind::StableOpt, "stableopt"},
    {AlgorithmKind::GpUcb, "gp-ucb"},       {AlgorithmKind::RandMaxMin, "randmaxmin"},
    {AlgorithmKind::Clss, "clss"},
};

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

// ----------------------------------------------------- typed JSON reads

void read_value(const json& j, const std::string& path, double& out) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  out = j.get<double>();
  if (!std::isfinite(out)) throw ConfigError(path, "must be finite");
}

// Index and std::uint64_t coincide on the supported platforms.
static_assert(std::is_same_v<Index, std::uint64_t>);

void read_value(const json& j, const std::string& path, std::uint64_t& out) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw ConfigError(path, "expected a nonnegative integer");
  }
  out = j.get<std::uint64_t>();
}

void read_value(const json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  out = j.get<bool>();
}

void read_value(const json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  out = j.get<std::string>();
}

template <class T>
void read_value(const json& j, const std::string& path, std::vector<T>& out) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  out.assign(j.size(), T{});
  for (std::size_t i = 0; i < j.size(); ++i) read_value(j[i], index_path(path, i), out[i]);
}

void read_value(const json& j, const std::string& path, std::optional<double>& out) {
  if (j.is_null()) {
    out.reset();
    return;
  }
  double v = 0.0;
  read_value(j, path, v);
  out = v;
}

/// Reads the fields of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.emplace_back(key);
    if (auto it = j_.find(key); it != j_.end()) read_value(*it, at(key), out);
  }

  const json* child(const char* key) {
    seen_.emplace_back(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const std::string& key) const { return join_path(path_, key); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        throw ConfigError(at(key), "unknown field");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

// ------------------------------------------------- section (de)serializers

json beta_to_json(const BetaSchedule& b) {
  if (const auto* c = std::get_if<ConstantBeta>(&b)) return c->beta;
  const auto& t = std::get<TheoreticalBeta>(b);
  return {{"rkhs_bound", t.rkhs_bound}, {"noise_sigma", t.noise_sigma}, {"delta", t.delta}};
}

BetaSchedule beta_from_json(const json& j, const std::string& path) {
  if (j.is_number()) {
    double v = 0.0;
    read_value(j, path, v);
    return ConstantBeta{v};
  }
  Fields f(j, path);
  TheoreticalBeta t{1.0, 1.0, 0.1};
  f.read("rkhs_bound", t.rkhs_bound);
  f.read("noise_sigma", t.noise_sigma);
  f.read("delta", t.delta);
  f.finish();
  return t;
}

json algorithm_to_json(const AlgorithmConfig& a) {
  json j;
  j["horizon"] = a.horizon;
  j["beta"] = beta_to_json(a.beta);
  j["eta"] = a.eta ? json(*a.eta) : json(nullptr);
  j["chi"] = a.chi;
  if (a.prior_q) {
    const auto& w = a.prior_q->weights();
    j["prior_q"] = std::vector<double>(w.data(), w.data() + w.size());
  } else {
    j["prior_q"] = nullptr;
  }
  j["variance_gate"] = a.variance_gate ? json(*a.variance_gate) : json(nullptr);
  j["epsilon"] = a.epsilon;
  return j;
}

/// Applies the fields present in `f` on top of `a`.
void read_algorithm_fields(Fields& f, AlgorithmConfig& a) {
  f.read("horizon", a.horizon);
  if (const json* b = f.child("beta")) a.beta = beta_from_json(*b, f.at("beta"));
  f.read("eta", a.eta);
  f.read("chi", a.chi);
  if (const json* q = f.child("prior_q")) {
    if (q->is_null()) {
      a.prior_q.reset();
    } else {
      std::vector<double> w;
      read_value(*q, f.at("prior_q"), w);
      try {
        a.prior_q = PriorQ(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
      } catch (const DomainError& e) {
        throw ConfigError(f.at("prior_q"), e.what());
      }
    }
  }
  f.read("variance_gate", a.variance_gate);
  f.read("epsilon", a.epsilon);
}

json scenario_to_json(const driving::Scenario& s) {
  return {{"gap", s.gap}, {"av_y", s.av_y}, {"hv_y", s.hv_y}, {"av_speed", s.av_speed}, {"hv_speed", s.hv_speed}};
}

void read_scenario(const json& j, const std::string& path, driving::Scenario& s) {
  Fields f(j, path);
  f.read("gap", s.gap);
  f.read("av_y", s.av_y);
  f.read("hv_y", s.hv_y);
  f.read("av_speed", s.av_speed);
  f.read("hv_speed", s.hv_speed);
  f.finish();
}

json score_to_json(const driving::ScoreModel& m) {
  return {{"progress_scale", m.progress_scale},   {"progress_weight", m.progress_weight},
          {"road_threshold", m.road_threshold},   {"road_ramp", m.road_ramp},
          {"road_weight", m.road_weight},         {"proximity_distance", m.proximity_distance},
          {"proximity_weight", m.proximity_weight}, {"offset", m.offset}};
}

void read_score(const json& j, const std::string& path, driving::ScoreModel& m) {
  Fields f(j, path);
  f.read("progress_scale", m.progress_scale);
  f.read("progress_weight", m.progress_weight);
  f.read("road_threshold", m.road_threshold);
  f.read("road_ramp", m.road_ramp);
  f.read("road_weight", m.road_weight);
  f.read("proximity_distance", m.proximity_distance);
  f.read("proximity_weight", m.proximity_weight);
  f.read("offset", m.offset);
  f.finish();
}

json sim_to_json(const driving::SimConfig& c) {
  return {{"dt", c.dt},
          {"steps", c.steps},
          {"wheelbase", c.vehicle.wheelbase},
          {"steering_ratio", c.vehicle.steering_ratio},
          {"steering_points", c.steering_points},
          {"accel_points", c.accel_points},
          {"theta_points", c.theta_points},
          {"max_av_steering", c.max_av_steering},
          {"min_accel", c.min_accel},
          {"max_accel", c.max_accel},
          {"max_hv_steering", c.max_hv_steering}};
}

void read_sim(const json& j, const std::string& path, driving::SimConfig& c) {
  Fields f(j, path);
  f.read("dt", c.dt);
  f.read("steps", c.steps);
  f.read("wheelbase", c.vehicle.wheelbase);
  f.read("steering_ratio", c.vehicle.steering_ratio);
  f.read("steering_points", c.steering_points);
  f.read("accel_points", c.accel_points);
  f.read("theta_points", c.theta_points);
  f.read("max_av_steering", c.max_av_steering);
  f.read("min_accel", c.min_accel);
  f.read("max_accel", c.max_accel);
  f.read("max_hv_steering", c.max_hv_steering);
  f.finish();
}

json drive_to_json(const DriveExperiment& d) {
  const auto& p = d.policy;
  return {{"sim", sim_to_json(p.sim)},
          {"av_score", score_to_json(p.av_model)},
          {"hv_score", score_to_json(p.hv_model)},
          {"algorithm", algorithm_to_json(p.algorithm)},
          {"lengthscales", p.lengthscales},
          {"nu", p.nu},
          {"lambda", p.lambda},
          {"scenario_box",
           {{"gap", d.box.gap},
            {"av_y", d.box.av_y},
            {"hv_y", d.box.hv_y},
            {"av_speed", d.box.av_speed},
            {"hv_speed", d.box.hv_speed}}},
          {"closed_loop",
           {{"initial", scenario_to_json(d.loop.initial)},
            {"duration", d.loop.duration},
            {"replan_every", d.loop.replan_every},
            {"realign_headings", d.loop.realign_headings},
            {"emergency_brake_gap", d.loop.emergency_brake_gap},
            {"emergency_brake_lateral", d.loop.emergency_brake_lateral}}},
          {"episodes", d.episodes},
          {"policy_csv", d.policy_csv}};
}

void read_drive(const json& j, const std::string& path, DriveExperiment& d) {
  Fields f(j, path);
  auto& p = d.policy;
  if (const json* s = f.child("sim")) read_sim(*s, f.at("sim"), p.sim);
  if (const json* s = f.child("av_score")) read_score(*s, f.at("av_score"), p.av_model);
  if (const json* s = f.child("hv_score")) read_score(*s, f.at("hv_score"), p.hv_model);
  if (const json* a = f.child("algorithm")) {
    Fields af(*a, f.at("algorithm"));
    read_algorithm_fields(af, p.algorithm);
    af.finish();
  }
  if (const json* l = f.child("lengthscales")) {
    std::vector<double> v;
    read_value(*l, f.at("lengthscales"), v);
    if (v.size() != 3) throw ConfigError(f.at("lengthscales"), "expected three values");
    std::copy(v.begin(), v.end(), p.lengthscales.begin());
  }
  f.read("nu", p.nu);
  f.read("lambda", p.lambda);
  if (const json* b = f.child("scenario_box")) {
    Fields bf(*b, f.at("scenario_box"));
    bf.read("gap", d.box.gap);
    bf.read("av_y", d.box.av_y);
    bf.read("hv_y", d.box.hv_y);
    bf.read("av_speed", d.box.av_speed);
    bf.read("hv_speed", d.box.hv_speed);
    bf.finish();
  }
  if (const json* c = f.child("closed_loop")) {
    Fields cf(*c, f.at("closed_loop"));
    if (const json* s = cf.child("initial")) read_scenario(*s, cf.at("initial"), d.loop.initial);
    cf.read("duration", d.loop.duration);
    cf.read("replan_every", d.loop.replan_every);
    cf.read("realign_headings", d.loop.realign_headings);
    cf.read("emergency_brake_gap", d.loop.emergency_brake_gap);
    cf.read("emergency_brake_lateral", d.loop.emergency_brake_lateral);
    cf.finish();
  }
  f.read("episodes", d.episodes);
  f.read("policy_csv", d.policy_csv);
  f.finish();
}

// ------------------------------------------------------------ helpers

std::vector<std::uint64_t> seed_range(std::uint64_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::uint64_t i = 0; i < n; ++i) s[i] = i;
  return s;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Calls fn(i) for i in [0, count) on up to `workers` threads; the first
/// exception is rethrown after all threads join.
template <class Fn>
void parallel_for(Index count, Index workers, Fn fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::max<Index>(1, std::min(workers, count));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](Index w) {
    try {
      for (Index i = w; i < count; i += workers) fn(i);
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
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <class Writer>
void write_csv(const fs::path& path, Writer&& writer) {
  std::ostringstream s;
  writer(s);
  write_file(path, s.str());
}

json versions_json() {
  return {{"mro", std::string(kVersion)},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", std::string(__VERSION__)},
          {"cxx", static_cast<long>(__cplusplus)}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunResult run_algorithm(AlgorithmKind kind, const BenchmarkInstance& inst, AlgorithmConfig config,
                        std::uint64_t seed) {
  config.seed = seed;
  switch (kind) {
    case AlgorithmKind::GpMro:
      return run_gp_mro(inst.problem, config);
    case AlgorithmKind::StableOpt:
      return run_stableopt(inst.problem, config);
    case AlgorithmKind::GpUcb:
      return run_gp_ucb(inst.problem, config);
    case AlgorithmKind::RandMaxMin:
      return run_randmaxmin(inst.problem, config);
    case AlgorithmKind::Clss:
      return run_clss(inst.problem.oracle.table(), config.horizon, config.eta);
  }
  throw DomainError("unknown algorithm");
}

}  // namespace

// ------------------------------------------------------------- names

std::string_view to_string(BenchmarkKind kind) {
  for (const auto& [k, name] : kBenchmarks) {
    if (k == kind) return name;
  }
  return "?";
}

std::string_view to_string(AlgorithmKind kind) {
  for (const auto& [k, name] : kAlgorithms) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<BenchmarkKind> benchmark_from_string(std::string_view name) {
  for (const auto& [k, n] : kBenchmarks) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::optional<AlgorithmKind> algorithm_from_string(std::string_view name) {
  for (const auto& [k, n] : kAlgorithms) {
    if (n == name) return k;
  }
  return std::nullopt;
}

// ------------------------------------------------------------- config

ExperimentConfig ExperimentConfig::defaults(BenchmarkKind benchmark, std::string_view profile) {
  if (profile != "desk" && profile != "paper") throw ConfigError("profile", "expected 'desk' or 'paper'");
  const bool paper = profile == "paper";
  ExperimentConfig c;
  c.benchmark = benchmark;
  c.profile = std::string(profile);
  AlgorithmConfig base;
  switch (benchmark) {
    case BenchmarkKind::Synth1d:
      c.output_dir = "results/synth-1d";
      c.seeds = seed_range(paper ? 50 : 10);
      base.horizon = 40;
      base.beta = ConstantBeta{2.0};
      break;
    case BenchmarkKind::SynthPoly:
      c.output_dir = "results/synth-poly";
      c.seeds = seed_range(5);
      base.horizon = paper ? 200 : 100;
      base.beta = ConstantBeta{2.0};
      if (paper) {
        c.poly.grid_side = 100;
        c.poly.num_theta = 100;
      }
      break;
    case BenchmarkKind::Drive:
      c.output_dir = "results/drive";
      c.seeds = {0};
      c.drive.episodes = paper ? 1000 : 200;
      if (paper) {
        // 8400 scenarios. hv_y keeps the desk grid: finer HV offsets let the
        // max-min comparator snap onto drifted-HV scenarios and overtake.
        auto& b = c.drive.box;
        b.gap = {-40, -30, -20, -10, 0, 10, 20, 25, 30, 35, 40, 50, 60, 80};
        b.av_y = {-1.75, -0.875, 0.0, 0.875, 1.75};
        b.hv_y = {-1.75, 0.0, 1.75};
        b.av_speed = {0, 2.5, 5, 7.5, 10, 12.5, 15, 17.5, 20, 22.5};
        b.hv_speed = {6, 8, 10, 12};
      }
      break;
  }
  for (const auto& [kind, name] : kAlgorithms) c.algorithms.push_back({kind, base});
  return c;
}

void ExperimentConfig::validate() const {
  if (profile != "desk" && profile != "paper") throw ConfigError("profile", "expected 'desk' or 'paper'");
  if (seeds.empty()) throw ConfigError("seeds", "must be nonempty");
  if (output_dir.empty()) throw ConfigError("output_dir", "must be nonempty");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] == 0) throw ConfigError(index_path("checkpoints", i), "must be >= 1");
    if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) {
      throw ConfigError(index_path("checkpoints", i), "must be strictly increasing");
    }
  }

  if (benchmark == BenchmarkKind::Drive) {
    const auto& p = drive.policy;
    auto wrap = [](const std::string& path, auto&& check) {
      try {
        check();
      } catch (const ConfigError&) {
        throw;
      } catch (const DomainError& e) {
        throw ConfigError(path, e.what());
      }
    };
    wrap("drive.sim", [&] { p.sim.validate(); });
    wrap("drive.av_score", [&] { p.av_model.validate(); });
    wrap("drive.hv_score", [&] { p.hv_model.validate(); });
    wrap("drive.algorithm", [&] { p.algorithm.validate(p.sim.theta_points, p.lambda); });
    if (!(p.lambda > 0.0)) throw ConfigError("drive.lambda", "must be positive");
    if (!(p.nu > 0.0)) throw ConfigError("drive.nu", "must be positive");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(p.lengthscales[i] > 0.0)) throw ConfigError(index_path("drive.lengthscales", i), "must be positive");
    }
    wrap("drive.scenario_box", [&] { driving::scenario_grid(drive.box); });
    if (drive.episodes == 0) throw ConfigError("drive.episodes", "must be >= 1");
    if (drive.loop.emergency_brake_gap < 0.0) {
      throw ConfigError("drive.closed_loop.emergency_brake_gap", "must be nonnegative");
    }
    if (drive.loop.emergency_brake_lateral < 0.0) {
      throw ConfigError("drive.closed_loop.emergency_brake_lateral", "must be nonnegative");
    }
    if (!(drive.loop.replan_every > 0.0)) throw ConfigError("drive.closed_loop.replan_every", "must be positive");
    if (!(drive.loop.duration >= drive.loop.replan_every)) {
      throw ConfigError("drive.closed_loop.duration", "must be at least replan_every");
    }
    return;
  }

  if (algorithms.empty()) throw ConfigError("algorithms", "must be nonempty");
  Index num_theta = 0;
  double lambda = 1.0;
  if (benchmark == BenchmarkKind::Synth1d) {
    if (synth_1d.grid_x < 2) throw ConfigError("synth_1d.grid_x", "must be >= 2");
    if (synth_1d.grid_theta < 1) throw ConfigError("synth_1d.grid_theta", "must be >= 1");
    if (!(synth_1d.lengthscale > 0.0)) throw ConfigError("synth_1d.lengthscale", "must be positive");
    if (!(synth_1d.noise_sigma > 0.0)) throw ConfigError("synth_1d.noise_sigma", "must be positive");
    num_theta = synth_1d.grid_theta;
    lambda = synth_1d.noise_sigma * synth_1d.noise_sigma;
  } else {
    if (poly.grid_side < 2) throw ConfigError("poly.grid_side", "must be >= 2");
    if (poly.num_theta < 1) throw ConfigError("poly.num_theta", "must be >= 1");
    if (!(poly.ball_radius > 0.0)) throw ConfigError("poly.ball_radius", "must be positive");
    if (!(poly.noise_sigma >= 0.0)) throw ConfigError("poly.noise_sigma", "must be nonnegative");
    if (poly.fit_samples < 2) throw ConfigError("poly.fit_samples", "must be >= 2");
    num_theta = poly.num_theta;
    // The fitted lambda is only known at run time; it is checked there.
    lambda = std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < algorithms.size(); ++i) {
    const auto& a = algorithms[i];
    try {
      a.config.validate(num_theta, lambda);
    } catch (const DomainError& e) {
      throw ConfigError(index_path("algorithms", i), e.what());
    }
    if (!checkpoints.empty() && checkpoints.back() > a.config.horizon) {
      throw ConfigError(index_path("algorithms", i) + ".horizon", "is below the last checkpoint");
    }
  }
}

std::vector<Index> ExperimentConfig::checkpoint_schedule(Index horizon) const {
  if (!checkpoints.empty()) {
    // Clip to this algorithm's horizon; the final iterate is always reported.
    std::vector<Index> clipped;
    for (Index c : checkpoints)
      if (c < horizon) clipped.push_back(c);
    clipped.push_back(horizon);
    return clipped;
  }
  std::vector<Index> all(horizon);
  for (Index t = 0; t < horizon; ++t) all[t] = t + 1;
  return all;
}

ExperimentConfig parse_experiment_config(const json& doc) {
  Fields root(doc, "");
  std::string bench_name = "synth-1d";
  std::string profile = "desk";
  root.read("benchmark", bench_name);
  root.read("profile", profile);
  const auto bench = benchmark_from_string(bench_name);
  if (!bench) throw ConfigError("benchmark", "unknown benchmark '" + bench_name + "'");
  ExperimentConfig c = ExperimentConfig::defaults(*bench, profile);

  root.read("seeds", c.seeds);
  root.read("output_dir", c.output_dir);
  root.read("checkpoints", c.checkpoints);
  root.read("workers", c.workers);

  // Shared algorithm defaults first, then per-algorithm overrides.
  AlgorithmConfig shared = c.algorithms.front().config;
  if (const json* a = root.child("algorithm")) {
    Fields af(*a, "algorithm");
    read_algorithm_fields(af, shared);
    af.finish();
  }
  for (auto& spec : c.algorithms) spec.config = shared;
  if (const json* list = root.child("algorithms")) {
    if (!list->is_array()) throw ConfigError("algorithms", "expected an array");
    c.algorithms.clear();
    for (std::size_t i = 0; i < list->size(); ++i) {
      const auto path = index_path("algorithms", i);
      const json& item = (*list)[i];
      std::string name;
      AlgorithmConfig cfg = shared;
      if (item.is_string()) {
        name = item.get<std::string>();
      } else {
        Fields f(item, path);
        f.read("name", name);
        read_algorithm_fields(f, cfg);
        f.finish();
      }
      const auto kind = algorithm_from_string(name);
      if (!kind) throw ConfigError(path, "unknown algorithm '" + name + "'");
      c.algorithms.push_back({*kind, cfg});
    }
  }

  if (const json* s = root.child("synth_1d")) {
    Fields f(*s, "synth_1d");
    f.read("grid_x", c.synth_1d.grid_x);
    f.read("grid_theta", c.synth_1d.grid_theta);
    f.read("lengthscale", c.synth_1d.lengthscale);
    f.read("noise_sigma", c.synth_1d.noise_sigma);
    f.finish();
  }
  if (const json* s = root.child("poly")) {
    Fields f(*s, "poly");
    f.read("grid_side", c.poly.grid_side);
    f.read("num_theta", c.poly.num_theta);
    f.read("ball_radius", c.poly.ball_radius);
    f.read("noise_sigma", c.poly.noise_sigma);
    f.read("shrink_by_radius", c.poly.shrink_by_radius);
    f.read("fit_samples", c.poly.fit_samples);
    f.read("perturbed_input", c.poly.perturbed_input);
    f.finish();
  }
  if (const json* s = root.child("drive")) read_drive(*s, "drive", c.drive);
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse_experiment_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json algs = json::array();
  for (const auto& a : c.algorithms) {
    json j = algorithm_to_json(a.config);
    j["name"] = std::string(to_string(a.kind));
    algs.push_back(std::move(j));
  }
  return {{"benchmark", std::string(to_string(c.benchmark))},
          {"profile", c.profile},
          {"seeds", c.seeds},
          {"output_dir", c.output_dir},
          {"checkpoints", c.checkpoints},
          {"workers", c.workers},
          {"algorithms", std::move(algs)},
          {"synth_1d",
           {{"grid_x", c.synth_1d.grid_x},
            {"grid_theta", c.synth_1d.grid_theta},
            {"lengthscale", c.synth_1d.lengthscale},
            {"noise_sigma", c.synth_1d.noise_sigma}}},
          {"poly",
           {{"grid_side", c.poly.grid_side},
            {"num_theta", c.poly.num_theta},
            {"ball_radius", c.poly.ball_radius},
            {"noise_sigma", c.poly.noise_sigma},
            {"shrink_by_radius", c.poly.shrink_by_radius},
            {"fit_samples", c.poly.fit_samples},
            {"perturbed_input", c.poly.perturbed_input}}},
          {"drive", drive_to_json(c.drive)}};
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  // Where results go and how many threads produce them do not change them.
  json j = to_json(c);
  j.erase("output_dir");
  j.erase("workers");
  return fnv1a64(j.dump());
}

// --------------------------------------------------------------- runs

bool ExperimentReport::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.ok; });
}

void write_curve_csv(std::ostream& out, const std::vector<Index>& checkpoints,
                     const std::vector<double>& values) {
  if (checkpoints.size() != values.size()) throw DomainError("curve CSV: length mismatch");
  out << "checkpoint,performance\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << checkpoints[i] << ',' << format_double(values[i]) << '\n';
  }
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.benchmark == BenchmarkKind::Drive) {
    throw ConfigError("benchmark", "use the drive runners for the driving benchmark");
  }
  const fs::path out(config.output_dir);
  const Index num_seeds = config.seeds.size();
  const Index num_algs = config.algorithms.size();

  // Instances, one per seed.
  std::vector<std::optional<BenchmarkInstance>> instances(num_seeds);
  std::vector<std::string> instance_errors(num_seeds);
  std::vector<HyperFit> fits(num_seeds);
  ExperimentReport report;
  report.tau_star.assign(num_seeds, std::numeric_limits<double>::quiet_NaN());
  parallel_for(num_seeds, config.workers, [&](Index s) {
    try {
      instances[s] = config.benchmark == BenchmarkKind::Synth1d
                         ? make_synth_1d(config.synth_1d, config.seeds[s])
                         : make_poly_robust(config.poly, config.seeds[s], &fits[s]);
      report.tau_star[s] = maximin_value(instances[s]->problem.oracle.table()).value;
    } catch (const std::exception& e) {
      instance_errors[s] = e.what();
    }
  });

  report.runs.resize(num_algs * num_seeds);
  Index max_horizon = 0;
  for (const auto& a : config.algorithms) max_horizon = std::max(max_horizon, a.config.horizon);
  report.checkpoints = config.checkpoint_schedule(max_horizon);

  parallel_for(num_algs * num_seeds, config.workers, [&](Index k) {
    const Index a = k / num_seeds, s = k % num_seeds;
    const auto& spec = config.algorithms[a];
    RunOutcome& r = report.runs[k];
    r.algorithm = std::string(to_string(spec.kind));
    r.seed = config.seeds[s];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (!instances[s]) throw std::runtime_error("instance: " + instance_errors[s]);
      const auto& inst = *instances[s];
      const auto checkpoints = config.checkpoint_schedule(spec.config.horizon);
      auto run = run_algorithm(spec.kind, inst, spec.config, r.seed);
      r.curve = evaluate_run(run.trace, inst.problem.oracle.table(), checkpoints);
      r.queries = run.trace.queries();
      const fs::path dir = out / r.algorithm / ("seed_" + std::to_string(r.seed));
      write_csv(dir / "trace.csv", [&](std::ostream& o) { write_trace_csv(o, run.trace); });
      write_csv(dir / "strategy.csv", [&](std::ostream& o) { write_strategy_csv(o, run.strategy); });
      write_csv(dir / "curve.csv", [&](std::ostream& o) { write_curve_csv(o, checkpoints, r.curve); });
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    r.wall_seconds = seconds_since(t0);
  });

  json manifest;
  manifest["config"] = to_json(config);
  manifest["config_hash"] = hex64(config_hash(config));
  manifest["versions"] = versions_json();
  manifest["checkpoints"] = report.checkpoints;
  json inst = json::array();
  for (Index s = 0; s < num_seeds; ++s) {
    json j{{"seed", config.seeds[s]}};
    if (instances[s]) {
      j["normalization"] = {{"offset", instances[s]->norm.offset}, {"range", instances[s]->norm.range}};
      j["tau_star"] = report.tau_star[s];
      j["noise_sigma_normalized"] = instances[s]->problem.oracle.noise_sigma();
      j["lambda"] = instances[s]->problem.prior.lambda;
      j["kernel"] = kernel_to_json(instances[s]->problem.prior.kernel);
      if (config.benchmark == BenchmarkKind::SynthPoly) {
        j["hyperparameters"] = {{"nu", fits[s].nu},
                                {"lengthscale", fits[s].lengthscale},
                                {"lambda", fits[s].lambda},
                                {"log_likelihood", fits[s].log_likelihood}};
      }
    } else {
      j["error"] = instance_errors[s];
    }
    inst.push_back(std::move(j));
  }
  manifest["instances"] = std::move(inst);
  json runs = json::array();
  for (const auto& r : report.runs) {
    json j{{"algorithm", r.algorithm},
           {"seed", r.seed},
           {"status", r.ok ? "ok" : "failed"},
           {"queries", r.queries},
           {"wall_seconds", r.wall_seconds}};
    if (r.ok) {
      j["final_performance"] = r.curve.empty() ? json(nullptr) : json(r.curve.back());
      j["curve"] = (fs::path(r.algorithm) / ("seed_" + std::to_string(r.seed)) / "curve.csv").generic_string();
    } else {
      j["error"] = r.error;
    }
    runs.push_back(std::move(j));
  }
  manifest["runs"] = std::move(runs);
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
  return report;
}

// -------------------------------------------------------------- drive

namespace {

DriveReport drive_policies(const ExperimentConfig& config) {
  config.validate();
  if (config.benchmark != BenchmarkKind::Drive) throw ConfigError("benchmark", "expected 'drive'");
  const auto& d = config.drive;
  const auto scenarios = driving::scenario_grid(d.box);
  DriveReport r;
  const auto t0 = std::chrono::steady_clock::now();
  if (d.policy_csv.empty()) {
    r.policy = driving::precompute_policy(scenarios, d.policy);
  } else {
    std::ifstream in(d.policy_csv);
    if (!in) throw ConfigError("drive.policy_csv", "cannot open " + d.policy_csv);
    r.policy = driving::read_policy_csv(in, d.policy);
  }
  r.precompute_seconds = seconds_since(t0);
  r.comparator = driving::maximin_policy(scenarios, d.policy);
  return r;
}

json drive_manifest(const ExperimentConfig& config, const DriveReport& r) {
  json m;
  m["config"] = to_json(config);
  m["config_hash"] = hex64(config_hash(config));
  m["versions"] = versions_json();
  m["scenarios"] = r.policy.scenarios.size();
  m["total_queries"] = r.policy.total_queries;
  m["precompute_seconds"] = r.precompute_seconds;
  return m;
}

}  // namespace

DriveReport run_drive_precompute(const ExperimentConfig& config) {
  DriveReport r = drive_policies(config);
  const fs::path out(config.output_dir);
  write_csv(out / "policy.csv", [&](std::ostream& o) { driving::write_policy_csv(o, r.policy); });
  write_csv(out / "maximin_policy.csv", [&](std::ostream& o) { driving::write_policy_csv(o, r.comparator); });
  write_file(out / "manifest.json", drive_manifest(config, r).dump(2) + "\n");
  return r;
}

DriveReport run_drive_closed_loop(const ExperimentConfig& config) {
  DriveReport r = drive_policies(config);
  const auto& d = config.drive;
  const fs::path out(config.output_dir);
  write_csv(out / "policy.csv", [&](std::ostream& o) { driving::write_policy_csv(o, r.policy); });
  write_csv(out / "maximin_policy.csv", [&](std::ostream& o) { driving::write_policy_csv(o, r.comparator); });
  for (auto seed : config.seeds) {
    r.mro.push_back(driving::run_episodes(r.policy, d.policy, d.loop, d.episodes, seed));
    r.maximin.push_back(driving::run_episodes(r.comparator, d.policy, d.loop, d.episodes, seed));
    const auto tag = "_seed_" + std::to_string(seed) + ".csv";
    write_csv(out / ("episodes_gp-mro" + tag), [&](std::ostream& o) { driving::write_episodes_csv(o, r.mro.back()); });
    write_csv(out / ("episodes_maximin" + tag),
              [&](std::ostream& o) { driving::write_episodes_csv(o, r.maximin.back()); });
  }
  write_csv(out / "summary.csv", [&](std::ostream& o) { write_drive_summary_csv(o, config, r); });
  json m = drive_manifest(config, r);
  json rows = json::array();
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    for (const auto& [name, b] : {std::pair{"gp-mro", &r.mro[i]}, std::pair{"maximin", &r.maximin[i]}}) {
      rows.push_back({{"policy", name},
                      {"seed", config.seeds[i]},
                      {"overtakes", b->overtakes},
                      {"avg_av_final_x", b->mean_av_final_x},
                      {"avg_hv_final_x", b->mean_hv_final_x}});
    }
  }
  m["closed_loop"] = std::move(rows);
  write_file(out / "manifest.json", m.dump(2) + "\n");
  return r;
}

void write_drive_summary_csv(std::ostream& out, const ExperimentConfig& config, const DriveReport& r) {
  out << "policy,seed,episodes,overtakes,avg_av_final_x,avg_hv_final_x\n";
  for (std::size_t i = 0; i < r.mro.size(); ++i) {
    for (const auto& [name, b] : {std::pair{"gp-mro", &r.mro[i]}, std::pair{"maximin", &r.maximin[i]}}) {
      out << name << ',' << config.seeds[i] << ',' << b->episodes.size() << ',' << b->overtakes << ','
          << format_double(b->mean_av_final_x) << ',' << format_double(b->mean_hv_final_x) << '\n';
    }
  }
}

}  // namespace mro
