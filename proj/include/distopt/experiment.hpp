#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "distopt/problem_io.hpp"
#include "distopt/simnet.hpp"
#include "distopt/tuner.hpp"

namespace distopt {

inline constexpr int kExperimentSchemaVersion = 1;

enum class ExperimentMode { kRun, kSweep, kDrops };
std::string_view ToString(ExperimentMode mode);
ExperimentMode ParseMode(std::string_view name);

struct ProblemConfig {
  std::string kind;  // target_tracking | factored_ls | scalar_consensus | file
  int robots = 0;
  // target_tracking
  int timesteps = 0;
  TrackingDefaults tracking;
  // factored_ls
  int dimension = 0;
  std::vector<int> rows;  // per-robot measurement counts; empty draws 2n..4n
  FactoredGeneratorOptions factored;
  // scalar_consensus
  std::vector<double> targets;
  // file
  std::filesystem::path path;
  // Fixed data seed; when absent each trial seed generates its own instance.
  std::optional<std::uint64_t> seed;
};

struct GraphConfig {
  std::string kind;  // geometric | complete | ring | path | edges | file
  double radius = kGeometricRadiusN20;
  bool require_connected = true;
  std::optional<std::uint64_t> seed;  // fixed graph; absent: trial seed
  bool directed = false;              // edges only
  std::vector<Edge> edges;
  std::filesystem::path path;
};

struct TuneConfig {
  double lo = 0.0;
  double hi = 0.0;
  int budget = 16;
  bool prune = true;
};

struct GridConfig {
  std::vector<double> values;  // explicit list, or
  double lo = 0.0;             // log-spaced lo..hi
  double hi = 0.0;
  int points = 0;
  double decades = 0.0;  // > 0: centered on the tuned value, spanning this many decades
};

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::kDiging;
  ScheduleKind schedule = ScheduleKind::kConstant;
  std::optional<double> param;
  std::optional<TuneConfig> tune;
  std::optional<GridConfig> grid;
  std::vector<double> robot_params;
};

struct DropsConfig {
  std::vector<double> probabilities;
  std::vector<AlgorithmKind> directed;  // algorithms additionally run under directed drops
  bool tune_on_sampled = true;          // tune on the lossy topology of each trial
};

struct ExperimentConfig {
  int schema_version = kExperimentSchemaVersion;
  std::string name;
  std::filesystem::path base_dir;  // for relative file references
  ProblemConfig problem;
  GraphConfig graph;
  DropModel model = DropModel::kStatic;
  double drop_probability = 0.0;
  WeightsPolicy weights = WeightsPolicy::kMetropolis;
  std::vector<AlgorithmConfig> algorithms;
  StopCriteria stop;
  std::vector<std::uint64_t> seeds{1};
  std::optional<DropsConfig> drops;
  std::filesystem::path output = "out";
  int workers = 1;
  std::optional<std::int64_t> payload_bytes;
  bool allow_unsupported = false;
  bool record_wall_time = true;
};

struct ExperimentOverrides {
  std::optional<int> seed_count;
  std::optional<std::int64_t> max_iters;
  std::optional<std::filesystem::path> output;
  bool allow_unsupported = false;
  std::optional<std::int64_t> payload_bytes;
  std::optional<int> workers;
};

// Throws ConfigError naming the offending field (or line/column for malformed JSON).
ExperimentConfig ParseExperimentConfig(std::string_view text, std::string_view origin = "config");
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path);
void ApplyOverrides(ExperimentConfig& config, const ExperimentOverrides& overrides);

// Mode-specific checks, including algorithm/topology compatibility (CompatibilityError).
void ValidateForMode(const ExperimentConfig& config, ExperimentMode mode);

// A trial's concrete problem and base graph.
struct TrialInstance {
  SeparableProblem problem;
  Graph graph;
};
TrialInstance BuildTrial(const ExperimentConfig& config, std::uint64_t seed);

struct ExperimentOutcome {
  int exit_code = 0;  // 0 ok, 3 some trial diverged
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;
  std::string report;  // human-readable table
};

ExperimentOutcome Execute(const ExperimentConfig& config, ExperimentMode mode);

// Median with +inf for non-converged entries; empty input yields +inf.
double MedianIterations(std::vector<double> values);

}  // namespace distopt
