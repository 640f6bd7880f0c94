#include "distopt/tuner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "distopt/error.hpp"
#include "distopt/numeric_text.hpp"
#include "worker_pool.hpp"

namespace distopt {

GssResult GoldenSectionSearch(const ScoreFunction& objective, const GssOptions& o) {
  if (!(o.lo > 0.0) || !(o.hi >= o.lo) || !std::isfinite(o.hi)) {
    throw ContractViolation("search interval must satisfy 0 < lo <= hi");
  }
  if (o.budget < 5) throw ContractViolation("search budget must be at least 5 probes");

  GssResult out;
  double best = std::numeric_limits<double>::infinity();
  double a = std::log10(o.lo);
  double b = std::log10(o.hi);

  auto probe = [&](double s) {
    const double param = std::pow(10.0, s);
    const ProbeScore r = objective(param, o.use_cap ? best : std::numeric_limits<double>::infinity());
    out.probes.push_back({static_cast<int>(out.probes.size()), param, r.score, r.diverged});
    out.brackets.push_back({a, b});
    best = std::min(best, r.score);
    return r;
  };

  if (b - a < o.log_tolerance) {
    probe(0.5 * (a + b));
  } else {
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    ProbeScore fc = probe(c);
    ProbeScore fd = probe(d);
    while (static_cast<int>(out.probes.size()) < o.budget && (b - a) * kInvPhi >= o.log_tolerance) {
      bool go_left = fc.score <= fd.score;
      // Neither point converged: back off if something blew up, else follow the smaller
      // shortfall, else climb toward larger values.
      if (std::isinf(fc.score) && std::isinf(fd.score)) {
        if (fc.diverged || fd.diverged) {
          go_left = true;
        } else if (fc.shortfall != fd.shortfall) {
          go_left = fc.shortfall < fd.shortfall;
        } else {
          go_left = false;
        }
      }
      if (go_left) {
        b = d;
        d = c;
        fd = fc;
        c = b - kInvPhi * (b - a);
        fc = probe(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kInvPhi * (b - a);
        fd = probe(d);
      }
    }
  }

  const auto it = std::min_element(out.probes.begin(), out.probes.end(),
                                   [](const ProbeRecord& x, const ProbeRecord& y) {
                                     if (x.score != y.score) return x.score < y.score;
                                     return x.param < y.param;
                                   });
  if (!std::isfinite(it->score)) throw NumericError("no convergent parameter in interval");
  out.best_param = it->param;
  out.best_score = it->score;
  return out;
}

namespace {

double Shortfall(const IterationRecord& r, const StopCriteria& stop) {
  if (!std::isfinite(r.mse)) return std::numeric_limits<double>::infinity();
  double f = r.mse / std::max(stop.mse_threshold, 1e-300);
  if (stop.residual_threshold) {
    f = std::max(f, r.consensus_residual / std::max(*stop.residual_threshold, 1e-300));
  }
  return f;
}

}  // namespace

TuneResult GssTune(const TuneSpec& spec, const SeparableProblem& problem,
                   const AlgorithmSpec& algorithm, std::span<const TopologySequence> topologies,
                   WeightsPolicy policy) {
  if (topologies.empty()) throw ContractViolation("tuning needs at least one topology");
  for (const auto& t : topologies) {
    CheckCompatibility(algorithm.kind, t, policy, spec.run.allow_unsupported);
  }
  std::vector<TuneProbe> probes;
  auto score = [&](double param, double cap) {
    AlgorithmSpec a = algorithm;
    a.parameter = param;
    RunOptions ro = spec.run;
    if (spec.prune && std::isfinite(cap)) ro.iteration_cap = static_cast<std::int64_t>(cap);
    ProbeScore s{0.0, false, 1.0};
    for (const auto& t : topologies) {
      const RunTrace tr = Run(problem, a, t, policy, spec.stop, ro);
      if (tr.header.diverged) s.diverged = true;
      if (!tr.header.iterations_to_threshold) {
        s.score = std::numeric_limits<double>::infinity();
        s.shortfall = tr.header.diverged ? s.score : Shortfall(tr.records.back(), spec.stop);
        break;
      }
      s.score = std::max(s.score, static_cast<double>(*tr.header.iterations_to_threshold));
    }
    TuneProbe p{static_cast<int>(probes.size()), param, std::nullopt, s.diverged};
    if (std::isfinite(s.score)) p.iters = static_cast<std::int64_t>(s.score);
    probes.push_back(p);
    return s;
  };
  TuneResult out;
  GssResult g;
  try {
    g = GoldenSectionSearch(score, {spec.lo, spec.hi, spec.budget, 1e-5, spec.prune});
  } catch (const NumericError&) {
    if (spec.require_convergent) throw;
    out.found = false;
    out.best_param = std::numeric_limits<double>::quiet_NaN();
    out.best_iters = -1;
    out.probes = std::move(probes);
    return out;
  }
  out.best_param = g.best_param;
  out.best_iters = static_cast<std::int64_t>(g.best_score);
  out.probes = std::move(probes);
  out.brackets = g.brackets;
  return out;
}

TuneResult GssTune(const TuneSpec& spec, const SeparableProblem& problem,
                   const AlgorithmSpec& algorithm, const TopologySequence& topology,
                   WeightsPolicy policy) {
  return GssTune(spec, problem, algorithm, std::span<const TopologySequence>(&topology, 1), policy);
}

std::vector<SweepEntry> GridSweep(std::span<const double> params, const SeparableProblem& problem,
                                  const AlgorithmSpec& algorithm, const TopologySequence& topology,
                                  WeightsPolicy policy, const StopCriteria& stop,
                                  const RunOptions& run, int concurrency) {
  if (params.empty()) throw ContractViolation("parameter grid is empty");
  CheckCompatibility(algorithm.kind, topology, policy, run.allow_unsupported);
  std::vector<SweepEntry> out(params.size());
  RunOptions ro = run;
  if (concurrency > 1) ro.workers = 1;
  detail::WorkerPool pool(std::max(1, std::min<int>(concurrency, static_cast<int>(params.size()))));
  pool.ParallelFor(static_cast<int>(params.size()), [&](int idx) {
    AlgorithmSpec a = algorithm;
    a.parameter = params[idx];
    const RunTrace tr = Run(problem, a, topology, policy, stop, ro);
    out[idx] = {params[idx], tr.header.iterations_to_threshold, tr.header.diverged};
  });
  return out;
}

std::vector<double> LogGrid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw ContractViolation("bad log grid");
  std::vector<double> g;
  if (n == 1) return {lo};
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) g.push_back(std::pow(10.0, a + (b - a) * i / (n - 1)));
  return g;
}

namespace {

std::vector<std::vector<std::string_view>> SplitCsv(std::string_view text, std::string_view header,
                                                    std::size_t fields) {
  std::vector<std::vector<std::string_view>> rows;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != header) throw ConfigError("expected CSV header '" + std::string(header) + "'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t s = 0;
    for (;;) {
      const std::size_t c = line.find(',', s);
      f.push_back(line.substr(s, c == std::string_view::npos ? c : c - s));
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    if (f.size() != fields) {
      throw ConfigError("CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(fields) + " fields");
    }
    rows.push_back(std::move(f));
  }
  return rows;
}

std::optional<std::int64_t> ParseIters(std::string_view f) {
  if (f == "inf") return std::nullopt;
  std::int64_t v = 0;
  auto r = std::from_chars(f.data(), f.data() + f.size(), v);
  if (r.ec != std::errc() || r.ptr != f.data() + f.size()) {
    throw ConfigError("bad iteration count '" + std::string(f) + "'");
  }
  return v;
}

std::string ItersText(const std::optional<std::int64_t>& v) {
  return v ? std::to_string(*v) : std::string("inf");
}

}  // namespace

std::string ProbeLogCsv(std::span<const TuneProbe> probes) {
  std::string out(kProbeLogHeader);
  out += '\n';
  for (const auto& p : probes) {
    out += std::to_string(p.probe) + ',' + FormatDecimal(p.param) + ',' + ItersText(p.iters) + ',' +
           (p.diverged ? '1' : '0') + '\n';
  }
  return out;
}

std::vector<TuneProbe> ParseProbeLogCsv(std::string_view text) {
  std::vector<TuneProbe> out;
  for (const auto& f : SplitCsv(text, kProbeLogHeader, 4)) {
    TuneProbe p;
    p.probe = static_cast<int>(ParseIters(f[0]).value_or(-1));
    p.param = ParseDouble(f[1]);
    p.iters = ParseIters(f[2]);
    p.diverged = f[3] == "1";
    out.push_back(p);
  }
  return out;
}

std::string SweepCsv(std::span<const SweepEntry> entries) {
  std::string out(kSweepHeader);
  out += '\n';
  for (const auto& e : entries) {
    out += FormatDecimal(e.param) + ',' + ItersText(e.iters) + ',' + (e.diverged ? '1' : '0') + '\n';
  }
  return out;
}

std::vector<SweepEntry> ParseSweepCsv(std::string_view text) {
  std::vector<SweepEntry> out;
  for (const auto& f : SplitCsv(text, kSweepHeader, 3)) {
    out.push_back({ParseDouble(f[0]), ParseIters(f[1]), f[2] == "1"});
  }
  return out;
}

}  // namespace distopt
