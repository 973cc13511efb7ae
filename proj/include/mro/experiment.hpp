#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mro/algorithms.hpp"
#include "mro/benchmarks.hpp"
#include "mro/driving.hpp"

namespace mro {

/// Invalid experiment configuration. `path` locates the offending field,
/// e.g. "algorithms[1].horizon".
class ConfigError : public DomainError {
 public:
  ConfigError(std::string path, const std::string& what)
      : DomainError(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class BenchmarkKind { Synth1d, SynthPoly, Drive };
enum class AlgorithmKind { GpMro, StableOpt, GpUcb, RandMaxMin, Clss };

std::string_view to_string(BenchmarkKind kind);
std::string_view to_string(AlgorithmKind kind);
std::optional<BenchmarkKind> benchmark_from_string(std::string_view name);
std::optional<AlgorithmKind> algorithm_from_string(std::string_view name);

struct AlgorithmSpec {
  AlgorithmKind kind;
  AlgorithmConfig config;
};

struct DriveExperiment {
  driving::PolicyConfig policy;
  driving::ScenarioBox box;
  driving::ClosedLoopConfig loop;
  Index episodes = 200;
  std::string policy_csv;  // load instead of precomputing when set
};

struct ExperimentConfig {
  BenchmarkKind benchmark = BenchmarkKind::Synth1d;
  std::string profile = "desk";
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "results";
  std::vector<Index> checkpoints;  // empty: every round
  std::vector<AlgorithmSpec> algorithms;
  Synth1dSpec synth_1d;
  PolySpec poly;
  DriveExperiment drive;
  Index workers = 0;  // 0: hardware concurrency

  /// Protocol defaults for `benchmark` at the `desk` or `paper` profile.
  static ExperimentConfig defaults(BenchmarkKind benchmark, std::string_view profile = "desk");

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  /// Checkpoints for a run of `horizon` rounds: every round, or the explicit
  /// list clipped below `horizon` with `horizon` appended.
  std::vector<Index> checkpoint_schedule(Index horizon) const;
};

/// Defaults for the document's benchmark and profile, overridden field by
/// field. Unknown keys are errors.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Every field of the effective configuration, keys sorted.
nlohmann::json to_json(const ExperimentConfig& config);
/// FNV-1a over the compact dump of to_json(config).
std::uint64_t config_hash(const ExperimentConfig& config);

struct RunOutcome {
  std::string algorithm;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<double> curve;  // performance at each checkpoint
  Index queries = 0;
  double wall_seconds = 0.0;
};

struct ExperimentReport {
  std::vector<Index> checkpoints;
  std::vector<RunOutcome> runs;  // algorithm-major, in config order
  std::vector<double> tau_star;  // maximin value per seed; NaN where the instance failed

  bool all_ok() const;
};

/// Synthetic benchmarks. Writes
///   <out>/<algorithm>/seed_<s>/{trace,strategy,curve}.csv
/// and <out>/manifest.json. A failing run is recorded and the rest continue.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Header `checkpoint,performance`.
void write_curve_csv(std::ostream& out, const std::vector<Index>& checkpoints,
                     const std::vector<double>& values);

struct DriveReport {
  driving::DrivingPolicy policy;
  driving::DrivingPolicy comparator;
  std::vector<driving::BatchStats> mro;         // one batch per seed
  std::vector<driving::BatchStats> maximin;
  double precompute_seconds = 0.0;
};

/// Precomputes the GP-MRO policy and the max-min comparator; writes
/// policy.csv, maximin_policy.csv and manifest.json.
DriveReport run_drive_precompute(const ExperimentConfig& config);

/// Precomputes (or loads drive.policy_csv) and runs drive.episodes
/// closed-loop episodes per seed under both policies; writes
/// both policy CSVs, episodes_<policy>_seed_<s>.csv, summary.csv and
/// manifest.json.
DriveReport run_drive_closed_loop(const ExperimentConfig& config);

/// Header `policy,seed,episodes,overtakes,avg_av_final_x,avg_hv_final_x`.
void write_drive_summary_csv(std::ostream& out, const ExperimentConfig& config,
                             const DriveReport& report);

}  // namespace mro
