#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distopt/simnet.hpp"

namespace distopt {

inline constexpr double kInvPhi = 0.6180339887498948482;  // 1/phi

struct ProbeScore {
  double score = std::numeric_limits<double>::infinity();
  bool diverged = false;
  // For an unconverged probe: how far the final iterate is from the stop thresholds
  // (ratio, > 1). Orders two unconverged probes; +inf when unknown.
  double shortfall = std::numeric_limits<double>::infinity();
};

// Scores a parameter value. `cap` is the best score seen so far; a probe that cannot
// beat it may stop early and report +inf.
using ScoreFunction = std::function<ProbeScore(double param, double cap)>;

struct GssOptions {
  double lo = 0.0;
  double hi = 0.0;
  int budget = 20;
  double log_tolerance = 1e-5;  // stop once the log10 bracket is narrower than this
  bool use_cap = true;
};

struct ProbeRecord {
  int probe = 0;  // 0-based, in evaluation order
  double param = 0.0;
  double score = 0.0;
  bool diverged = false;
};

struct Bracket {
  double log_lo = 0.0;
  double log_hi = 0.0;
  double width() const { return log_hi - log_lo; }
};

struct GssResult {
  double best_param = 0.0;
  double best_score = 0.0;
  std::vector<ProbeRecord> probes;
  // brackets[m] is the log10 interval in which probe m was placed.
  std::vector<Bracket> brackets;
};

// Golden-section search over log10(param) in [lo, hi]. Ties prefer the smaller parameter.
// Throws NumericError when no probe produced a finite score.
GssResult GoldenSectionSearch(const ScoreFunction& objective, const GssOptions& options);

struct TuneSpec {
  double lo = 0.0;
  double hi = 0.0;
  int budget = 20;
  StopCriteria stop;
  RunOptions run;
  bool prune = true;  // cap probes at the best iteration count found so far
  // When false a search without any convergent probe returns found == false instead of throwing.
  bool require_convergent = true;
};

struct TuneProbe {
  int probe = 0;
  double param = 0.0;
  std::optional<std::int64_t> iters;  // empty: not converged (diverged, capped or max_iters)
  bool diverged = false;
};

struct TuneResult {
  bool found = true;
  double best_param = 0.0;
  std::int64_t best_iters = 0;
  std::vector<TuneProbe> probes;
  std::vector<Bracket> brackets;
};

// Objective: iterations to reach stop.mse_threshold, worst case over `topologies`.
TuneResult GssTune(const TuneSpec& spec, const SeparableProblem& problem,
                   const AlgorithmSpec& algorithm, std::span<const TopologySequence> topologies,
                   WeightsPolicy policy);
TuneResult GssTune(const TuneSpec& spec, const SeparableProblem& problem,
                   const AlgorithmSpec& algorithm, const TopologySequence& topology,
                   WeightsPolicy policy);

struct SweepEntry {
  double param = 0.0;
  std::optional<std::int64_t> iters;
  bool diverged = false;
};

// One run per value, in list order. `concurrency` runs values in parallel.
std::vector<SweepEntry> GridSweep(std::span<const double> params, const SeparableProblem& problem,
                                  const AlgorithmSpec& algorithm, const TopologySequence& topology,
                                  WeightsPolicy policy, const StopCriteria& stop,
                                  const RunOptions& run = {}, int concurrency = 1);

// n points spaced evenly in log10 between lo and hi inclusive.
std::vector<double> LogGrid(double lo, double hi, int n);

inline constexpr std::string_view kProbeLogHeader = "probe,param,iters,diverged";
inline constexpr std::string_view kSweepHeader = "param,iters,diverged";

std::string ProbeLogCsv(std::span<const TuneProbe> probes);
std::vector<TuneProbe> ParseProbeLogCsv(std::string_view text);
std::string SweepCsv(std::span<const SweepEntry> entries);
std::vector<SweepEntry> ParseSweepCsv(std::string_view text);

}  // namespace distopt
