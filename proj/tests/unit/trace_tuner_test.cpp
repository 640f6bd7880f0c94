#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "distopt/error.hpp"
#include "distopt/trace_io.hpp"
#include "distopt/tuner.hpp"

using namespace distopt;

namespace {

RunTrace SampleTrace(bool diverge) {
  const SeparableProblem p = BuildTargetTracking(SimulateTargetData(MakeTrackingSpec(4, 4, 2)));
  StopCriteria s;
  s.max_iters = 40;
  s.mse_threshold = 1e-6;
  s.residual_threshold = 1e-9;
  RunOptions o;
  o.payload_bytes = 92;
  return Run(p, AlgorithmSpec::Make(AlgorithmKind::kDgdCta, diverge ? 1e4 : 0.01),
             {Graph::Ring(4), DropModel::kUndirectedDrop, 0.2, 3, 1}, WeightsPolicy::kMetropolis, s, o);
}

}  // namespace

TEST_CASE("trace CSV and sidecar round-trip without loss") {
  for (bool diverge : {false, true}) {
    const RunTrace t = SampleTrace(diverge);
    const std::string csv = TraceCsv(t);
    CHECK(csv.rfind(std::string(kTraceCsvHeader) + "\n", 0) == 0);
    const RunTrace back = ParseTrace(csv, nlohmann::json::parse(TraceSidecar(t).dump()));
    REQUIRE(back.records.size() == t.records.size());
    for (std::size_t k = 0; k < t.records.size(); ++k) {
      const auto& a = t.records[k];
      const auto& b = back.records[k];
      CHECK(a.iter == b.iter);
      CHECK((a.mse == b.mse || (std::isnan(a.mse) && std::isnan(b.mse))));
      CHECK((a.consensus_residual == b.consensus_residual ||
             (std::isnan(a.consensus_residual) && std::isnan(b.consensus_residual))));
      CHECK(a.bytes_sent == b.bytes_sent);
      CHECK(a.packets_sent == b.packets_sent);
      CHECK(a.wall_ns == b.wall_ns);
      CHECK(a.diverged == b.diverged);
    }
    CHECK(TraceCsv(back) == csv);
    CHECK(TraceSidecar(back) == TraceSidecar(t));
    CHECK(back.header.problem_fingerprint == t.header.problem_fingerprint);
    CHECK(back.header.residual_threshold == t.header.residual_threshold);
    CHECK(back.header.payload_bytes == t.header.payload_bytes);
    CHECK(back.oracle == t.oracle);
    CHECK(back.final_x == t.final_x);
    // The sidecar is enough to recompute the final MSE.
    if (!diverge) CHECK(ComputeMse(back.final_x, back.oracle) == t.records.back().mse);
  }
}

TEST_CASE("trace files") {
  const auto dir = std::filesystem::temp_directory_path() / "distopt_trace_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const RunTrace t = SampleTrace(false);
  WriteTrace(t, dir / "a");
  CHECK(std::filesystem::exists(dir / "a.csv"));
  CHECK(std::filesystem::exists(dir / "a.json"));
  CHECK(TraceCsv(ReadTrace(dir / "a")) == TraceCsv(t));
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed trace CSV is rejected") {
  CHECK_THROWS(ParseTraceCsv("iter,mse\n0,1\n"));
  CHECK_THROWS(ParseTraceCsv(std::string(kTraceCsvHeader) + "\n0,1,0,0,0\n"));
  CHECK_THROWS(ParseTraceCsv(std::string(kTraceCsvHeader) + "\n0,abc,0,0,0,0,0\n"));
}

TEST_CASE("golden-section search on a synthetic objective") {
  int calls = 0;
  const ScoreFunction f = [&](double s, double) {
    ++calls;
    const double d = std::log10(s) - std::log10(2.0);
    return ProbeScore{d * d, false};
  };
  const GssResult r = GoldenSectionSearch(f, {0.1, 100.0, 30, 1e-9, false});
  CHECK(calls <= 30);
  CHECK(std::abs(r.best_param - 2.0) <= 0.02);
  CHECK(r.probes.size() == static_cast<std::size_t>(calls));
}

TEST_CASE("bracket widths follow the golden ratio") {
  const ScoreFunction f = [](double s, double) {
    const double d = std::log10(s) - 0.3;
    return ProbeScore{d * d, false};
  };
  const GssResult r = GoldenSectionSearch(f, {0.01, 100.0, 25, 1e-12, false});
  REQUIRE(r.brackets.size() == r.probes.size());
  CHECK(r.brackets[0].width() == doctest::Approx(4.0));
  CHECK(r.brackets[1].width() == doctest::Approx(4.0));
  for (std::size_t m = 2; m < r.brackets.size(); ++m) {
    CHECK(r.brackets[m].width() == doctest::Approx(4.0 * std::pow(kInvPhi, m - 1)).epsilon(1e-9));
  }
}

TEST_CASE("search edge cases") {
  const ScoreFunction flat = [](double, double) { return ProbeScore{1.0, false}; };
  const GssResult one = GoldenSectionSearch(flat, {5.0, 5.00001, 20});
  CHECK(one.probes.size() == 1);
  CHECK(one.best_param == doctest::Approx(5.0));

  CHECK_THROWS_AS(GoldenSectionSearch(flat, {0.0, 1.0, 20}), ContractViolation);
  CHECK_THROWS_AS(GoldenSectionSearch(flat, {2.0, 1.0, 20}), ContractViolation);
  CHECK_THROWS_AS(GoldenSectionSearch(flat, {1.0, 2.0, 4}), ContractViolation);

  const ScoreFunction never = [](double, double) { return ProbeScore{}; };
  CHECK_THROWS_AS(GoldenSectionSearch(never, {1.0, 2.0, 10}), NumericError);

  // Ties prefer the smaller parameter.
  const GssResult tie = GoldenSectionSearch(flat, {1.0, 100.0, 6});
  double smallest = 1e300;
  for (const auto& p : tie.probes) smallest = std::min(smallest, p.param);
  CHECK(tie.best_param == smallest);
}

TEST_CASE("unconverged probes steer the search") {
  // Too-small values fail slowly, too-large values blow up; the window is [3, 4].
  const ScoreFunction f = [](double s, double) {
    if (s > 4.0) return ProbeScore{std::numeric_limits<double>::infinity(), true};
    if (s < 3.0) return ProbeScore{std::numeric_limits<double>::infinity(), false, 10.0 / s};
    return ProbeScore{100.0 - s, false};
  };
  const GssResult r = GoldenSectionSearch(f, {0.01, 1000.0, 30});
  CHECK(r.best_param >= 3.0);
  CHECK(r.best_param <= 4.0);
}

TEST_CASE("tuning C-ADMM on scalar consensus beats the interval ends") {
  const SeparableProblem p = ScalarConsensusProblem({0, 3, 6});
  const TopologySequence topo{Graph::Path(3), DropModel::kStatic, 0.0, 0, 1};
  TuneSpec ts;
  ts.lo = 0.01;
  ts.hi = 100.0;
  ts.budget = 20;
  ts.stop.max_iters = 20000;
  ts.run.record_wall_time = false;
  const TuneResult r = GssTune(ts, p, AlgorithmSpec::Make(AlgorithmKind::kCadmm, 1.0), topo, WeightsPolicy::kMetropolis);
  REQUIRE(r.found);
  for (double end : {ts.lo, ts.hi}) {
    const RunTrace t = Run(p, AlgorithmSpec::Make(AlgorithmKind::kCadmm, end), topo, WeightsPolicy::kMetropolis,
                           ts.stop, ts.run);
    const double it = t.header.iterations_to_threshold ? *t.header.iterations_to_threshold : 1e300;
    CHECK(r.best_iters <= it);
  }
  // Probe log parses back.
  const auto log = ParseProbeLogCsv(ProbeLogCsv(r.probes));
  REQUIRE(log.size() == r.probes.size());
  for (std::size_t k = 0; k < log.size(); ++k) {
    CHECK(log[k].param == r.probes[k].param);
    CHECK(log[k].iters == r.probes[k].iters);
    CHECK(log[k].diverged == r.probes[k].diverged);
  }
}

TEST_CASE("a tune without a convergent parameter can be reported instead of thrown") {
  const SeparableProblem p = ScalarConsensusProblem({0, 3, 6});
  const TopologySequence topo{Graph::Path(3), DropModel::kStatic, 0.0, 0, 1};
  TuneSpec ts;
  ts.lo = 1e3;
  ts.hi = 1e4;
  ts.budget = 6;
  ts.stop.max_iters = 50;
  CHECK_THROWS_AS(GssTune(ts, p, AlgorithmSpec::Make(AlgorithmKind::kDgdCta, 1.0), topo, WeightsPolicy::kMetropolis),
                  NumericError);
  ts.require_convergent = false;
  const TuneResult r = GssTune(ts, p, AlgorithmSpec::Make(AlgorithmKind::kDgdCta, 1.0), topo, WeightsPolicy::kMetropolis);
  CHECK_FALSE(r.found);
  CHECK(r.probes.size() == 6);
}

TEST_CASE("grid sweeps") {
  const SeparableProblem p = BuildTargetTracking(SimulateTargetData(MakeTrackingSpec(4, 4, 3)));
  const TopologySequence topo{Graph::Ring(4), DropModel::kStatic, 0.0, 0, 1};
  StopCriteria s;
  s.max_iters = 3000;
  RunOptions o;
  o.record_wall_time = false;
  const std::vector<double> rho{0.01, 0.1, 1, 10, 100};
  const auto c = GridSweep(rho, p, AlgorithmSpec::Make(AlgorithmKind::kCadmm, 1.0), topo, WeightsPolicy::kMetropolis, s, o);
  for (const auto& e : c) CHECK_FALSE(e.diverged);
  const std::vector<double> big{1e3};
  const auto d = GridSweep(big, p, AlgorithmSpec::Make(AlgorithmKind::kDgdCta, 1.0), topo, WeightsPolicy::kMetropolis, s, o);
  CHECK(d[0].diverged);
  CHECK_THROWS_AS(GridSweep(std::vector<double>{}, p, AlgorithmSpec::Make(AlgorithmKind::kCadmm, 1.0), topo,
                            WeightsPolicy::kMetropolis, s, o),
                  ContractViolation);
  // Parallel sweep matches the serial one.
  const auto par = GridSweep(rho, p, AlgorithmSpec::Make(AlgorithmKind::kCadmm, 1.0), topo, WeightsPolicy::kMetropolis, s, o, 3);
  for (std::size_t k = 0; k < rho.size(); ++k) CHECK(par[k].iters == c[k].iters);
  const auto back = ParseSweepCsv(SweepCsv(c));
  for (std::size_t k = 0; k < rho.size(); ++k) {
    CHECK(back[k].param == c[k].param);
    CHECK(back[k].iters == c[k].iters);
  }
}

TEST_CASE("log grids") {
  const auto g = LogGrid(0.01, 100, 5);
  REQUIRE(g.size() == 5);
  CHECK(g[0] == doctest::Approx(0.01));
  CHECK(g[2] == doctest::Approx(1.0));
  CHECK(g[4] == doctest::Approx(100.0));
  CHECK_THROWS(LogGrid(0, 1, 3));
}
