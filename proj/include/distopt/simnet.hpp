#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distopt/algorithms.hpp"
#include "distopt/graph.hpp"
#include "distopt/problem.hpp"

namespace distopt {

inline constexpr int kTraceSchemaVersion = 1;

// How each iteration's mixing matrix is derived from the sampled graph.
//  metropolis:     Metropolis on the sampled graph; a directed sample keeps only
//                  arcs that were delivered both ways (acknowledged links).
//  uniform-row:    1/(|in|+1) over received senders.
//  uniform-column: 1/(|out|+1) over recipients.
enum class WeightsPolicy { kMetropolis, kUniformRow, kUniformColumn };

std::string_view ToString(WeightsPolicy policy);
WeightsPolicy ParseWeightsPolicy(std::string_view name);

WeightMatrix DeriveWeights(WeightsPolicy policy, const Graph& sampled);

struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::kDiging;
  double parameter = 0.0;  // alpha (DIGing), alpha0 (DGD, NEXT-Q) or rho (C-ADMM)
  ScheduleKind schedule = ScheduleKind::kConstant;
  // DGD-ATC only: per-robot alpha0, overriding `parameter` when non-empty.
  std::vector<double> robot_parameters;

  // Uses the algorithm's default schedule.
  static AlgorithmSpec Make(AlgorithmKind kind, double parameter);
};

// DGD: inverse, DIGing: constant, NEXT-Q: inverse-sqrt, C-ADMM: n/a (constant).
ScheduleKind DefaultSchedule(AlgorithmKind kind);

struct StopCriteria {
  std::int64_t max_iters = 10000;
  double mse_threshold = 1e-6;
  // When set, convergence additionally requires the consensus residual to fall below it.
  std::optional<double> residual_threshold;
};

struct RunOptions {
  int workers = 1;  // 0 selects the hardware concurrency
  std::optional<std::int64_t> payload_bytes;
  bool allow_unsupported = false;
  bool record_wall_time = true;
  // Order in which robots are evaluated within a phase; empty means ascending.
  std::vector<int> evaluation_order;
  // Per-robot starting iterates; empty means all zeros.
  std::vector<Vector> initial_x;
  // Stop (unconverged) after this many iterations even if max_iters is larger.
  std::optional<std::int64_t> iteration_cap;
  std::uint64_t seed = 0;  // recorded in the header only
};

struct IterationRecord {
  std::int64_t iter = 0;
  double mse = 0.0;
  double consensus_residual = 0.0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t packets_sent = 0;
  std::int64_t wall_ns = 0;
  bool diverged = false;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct RunHeader {
  int schema_version = kTraceSchemaVersion;
  std::string algorithm;
  double parameter = 0.0;
  std::string schedule;
  std::vector<double> robot_parameters;
  std::string topology_model;
  double drop_probability = 0.0;
  std::uint64_t topology_seed = 0;
  std::uint64_t seed = 0;
  std::string weights;
  std::uint64_t problem_fingerprint = 0;
  std::uint64_t graph_fingerprint = 0;
  std::string problem_label;
  int robots = 0;
  int dimension = 0;
  std::int64_t max_iters = 0;
  double mse_threshold = 0.0;
  std::optional<double> residual_threshold;
  std::optional<std::int64_t> payload_bytes;
  std::string mse_definition;
  std::int64_t weight_renormalizations = 0;
  bool converged = false;
  bool diverged = false;
  std::optional<std::int64_t> iterations_to_threshold;
  std::int64_t iterations_run = 0;
};

struct RunTrace {
  RunHeader header;
  std::vector<IterationRecord> records;  // records[0] is the initial state (iter 0)
  std::vector<Vector> final_x;
  Vector oracle;
};

// (1/N) sum_i |x_i - x*|^2 / max(|x*|^2, 1e-30)
double ComputeMse(std::span<const Vector> xs, const Vector& x_star);
// Sum over edges (i, j) of g of |x_i - x_j|^2.
double ConsensusResidual(std::span<const Vector> xs, const Graph& g);
std::uint64_t AccountPackets(std::uint64_t bytes, std::uint64_t payload_bytes);

// Throws CompatibilityError for pairings outside the supported matrix unless allowed.
void CheckCompatibility(AlgorithmKind kind, const TopologySequence& topology,
                        WeightsPolicy policy, bool allow_unsupported);

// MSE growth past this factor of max(initial MSE, 1) marks a run divergent.
inline constexpr double kDivergenceFactor = 1e6;

RunTrace Run(const SeparableProblem& problem, const AlgorithmSpec& algorithm,
             const TopologySequence& topology, WeightsPolicy policy, const StopCriteria& stop,
             const RunOptions& options = {});

}  // namespace distopt
