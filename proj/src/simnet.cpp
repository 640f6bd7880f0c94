#include "distopt/simnet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "distopt/error.hpp"
#include "worker_pool.hpp"

namespace distopt {

std::string_view ToString(WeightsPolicy policy) {
  switch (policy) {
    case WeightsPolicy::kMetropolis:
      return "metropolis";
    case WeightsPolicy::kUniformRow:
      return "uniform-row";
    case WeightsPolicy::kUniformColumn:
      return "uniform-column";
  }
  return "?";
}

WeightsPolicy ParseWeightsPolicy(std::string_view name) {
  if (name == "metropolis") return WeightsPolicy::kMetropolis;
  if (name == "uniform-row") return WeightsPolicy::kUniformRow;
  if (name == "uniform-column") return WeightsPolicy::kUniformColumn;
  throw ConfigError("unknown weights policy '" + std::string(name) +
                    "' (expected metropolis, uniform-row or uniform-column)");
}

WeightMatrix DeriveWeights(WeightsPolicy policy, const Graph& sampled) {
  switch (policy) {
    case WeightsPolicy::kMetropolis: {
      if (!sampled.directed()) return Metropolis(sampled);
      WeightMatrix w = Metropolis(BidirectionalCore(sampled));
      w.graph_fingerprint = sampled.Fingerprint();
      return w;
    }
    case WeightsPolicy::kUniformRow:
      return UniformRowStochastic(sampled);
    case WeightsPolicy::kUniformColumn:
      return UniformColumnStochastic(sampled);
  }
  throw ContractViolation("bad weights policy");
}

ScheduleKind DefaultSchedule(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::kDgdCta:
    case AlgorithmKind::kDgdAtc:
      return ScheduleKind::kInverse;
    case AlgorithmKind::kNextQ:
      return ScheduleKind::kInverseSqrt;
    default:
      return ScheduleKind::kConstant;
  }
}

AlgorithmSpec AlgorithmSpec::Make(AlgorithmKind kind, double parameter) {
  AlgorithmSpec spec;
  spec.kind = kind;
  spec.parameter = parameter;
  spec.schedule = DefaultSchedule(kind);
  return spec;
}

double ComputeMse(std::span<const Vector> xs, const Vector& x_star) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& x : xs) acc += (x - x_star).squaredNorm();
  return acc / static_cast<double>(xs.size()) / std::max(x_star.squaredNorm(), 1e-30);
}

double ConsensusResidual(std::span<const Vector> xs, const Graph& g) {
  double acc = 0.0;
  for (const auto& [i, j] : g.edges()) acc += (xs[i] - xs[j]).squaredNorm();
  return acc;
}

std::uint64_t AccountPackets(std::uint64_t bytes, std::uint64_t payload_bytes) {
  if (payload_bytes == 0) throw ContractViolation("packet payload size must be positive");
  return (bytes + payload_bytes - 1) / payload_bytes;
}

void CheckCompatibility(AlgorithmKind kind, const TopologySequence& topology,
                        WeightsPolicy policy, bool allow_unsupported) {
  if (allow_unsupported) return;
  const bool dynamic = topology.model != DropModel::kStatic && topology.drop_probability > 0.0;
  const bool directed = topology.base.directed() || topology.model == DropModel::kDirectedDrop;
  const std::string name(ToString(kind));
  switch (kind) {
    case AlgorithmKind::kCadmm:
      if (topology.base.directed()) {
        throw CompatibilityError(
            "C-ADMM requires bi-directional communication links (Table 1: undirected networks "
            "only)");
      }
      if (dynamic) {
        throw CompatibilityError(
            "C-ADMM is not supported on dynamic communication networks (Table 1, \"Dynamic "
            "Communication Networks\"); pass --allow-unsupported to run it anyway");
      }
      break;
    case AlgorithmKind::kNextQ:
      if (directed && topology.drop_probability > 0.0) {
        throw CompatibilityError(
            "NEXT-Q needs a doubly-stochastic mixing matrix and cannot run under directed edge "
            "drops (Table 1, \"Dynamic Communication Networks\")");
      }
      if (topology.base.directed()) {
        throw CompatibilityError("NEXT-Q requires an undirected network");
      }
      if (policy != WeightsPolicy::kMetropolis) {
        throw CompatibilityError("NEXT-Q requires doubly-stochastic (metropolis) weights");
      }
      break;
    case AlgorithmKind::kDiging:
      if (policy == WeightsPolicy::kUniformRow) {
        throw CompatibilityError(
            "DIGing gradient tracking needs column-stochastic weights; uniform-row does not "
            "preserve the tracked gradient sum");
      }
      break;
    case AlgorithmKind::kDgdCta:
    case AlgorithmKind::kDgdAtc:
      if (policy == WeightsPolicy::kUniformColumn) {
        throw CompatibilityError(name + " needs row-stochastic weights");
      }
      break;
  }
  if (policy == WeightsPolicy::kMetropolis && topology.base.directed() &&
      kind != AlgorithmKind::kDiging) {
    throw CompatibilityError("metropolis weights need an undirected base graph");
  }
}

namespace {

struct PhaseTraffic {
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;
};

void BuildInboxes(const Graph& g, const std::vector<OutboundMessage>& outbound,
                  std::vector<std::vector<const OutboundMessage*>>& inboxes,
                  std::optional<std::int64_t> payload, PhaseTraffic& traffic) {
  for (int i = 0; i < g.size(); ++i) {
    auto& box = inboxes[i];
    box.clear();
    for (int j : g.InNeighbors(i)) {
      const OutboundMessage& m = outbound[j];
      box.push_back(&m);
      const std::uint64_t bytes = m.byte_size();
      traffic.bytes += bytes;
      if (payload) traffic.packets += AccountPackets(bytes, static_cast<std::uint64_t>(*payload));
    }
  }
}

bool AllFinite(std::span<const RobotState> states) {
  for (const auto& s : states) {
    if (!s.x.allFinite()) return false;
    if (s.y.size() && !s.y.allFinite()) return false;
  }
  return true;
}

}  // namespace

RunTrace Run(const SeparableProblem& problem, const AlgorithmSpec& algorithm,
             const TopologySequence& topology, WeightsPolicy policy, const StopCriteria& stop,
             const RunOptions& options) {
  CheckCompatibility(algorithm.kind, topology, policy, options.allow_unsupported);
  const int N = problem.robot_count();
  const int n = problem.dimension();
  if (topology.base.size() != N) {
    throw ContractViolation("graph has " + std::to_string(topology.base.size()) +
                            " vertices but the problem has " + std::to_string(N) + " robots");
  }
  if (stop.max_iters < 0) throw ContractViolation("max_iters must be non-negative");
  if (options.payload_bytes && *options.payload_bytes <= 0) {
    throw ContractViolation("payload_bytes must be positive");
  }
  const AlgorithmKind kind = algorithm.kind;

  std::vector<int> order = options.evaluation_order;
  if (order.empty()) {
    order.resize(N);
    std::iota(order.begin(), order.end(), 0);
  } else {
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(N);
    std::iota(expect.begin(), expect.end(), 0);
    if (sorted != expect) throw ContractViolation("evaluation_order must be a permutation");
  }

  // Per-robot parameters.
  if (!algorithm.robot_parameters.empty()) {
    if (kind != AlgorithmKind::kDgdAtc) {
      throw ContractViolation("per-robot step sizes are only supported by DGD-ATC");
    }
    if (static_cast<int>(algorithm.robot_parameters.size()) != N) {
      throw ContractViolation("robot_parameters must have one entry per robot");
    }
  }
  std::vector<StepSchedule> schedules;
  double rho = 0.0;
  if (kind == AlgorithmKind::kCadmm) {
    rho = algorithm.parameter;
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ContractViolation("rho must be positive");
  } else {
    for (int i = 0; i < N; ++i) {
      const double p =
          algorithm.robot_parameters.empty() ? algorithm.parameter : algorithm.robot_parameters[i];
      schedules.push_back(StepSchedule::Make(algorithm.schedule, p));
    }
  }

  const Vector x_star = OracleSolve(problem);

  const int workers = options.workers > 0
                          ? options.workers
                          : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  detail::WorkerPool pool(std::min(workers, std::max(N, 1)));
  auto for_each_robot = [&](const std::function<void(int)>& fn) {
    pool.ParallelFor(N, [&](int idx) { fn(order[idx]); });
  };

  std::vector<LocalFactorization> hessians;
  if (kind == AlgorithmKind::kNextQ) {
    hessians.resize(N);
    for_each_robot([&](int i) { hessians[i] = LocalFactorization(problem.Hessian(i)); });
  }
  std::vector<ProxCache> prox;
  if (kind == AlgorithmKind::kCadmm) {
    for (int i = 0; i < N; ++i) prox.emplace_back(problem);
  }

  std::vector<RobotState> states(N);
  for (int i = 0; i < N; ++i) {
    Vector x0 = Vector::Zero(n);
    if (!options.initial_x.empty()) {
      if (static_cast<int>(options.initial_x.size()) != N || options.initial_x[i].size() != n) {
        throw ContractViolation("initial_x must hold one n-vector per robot");
      }
      x0 = options.initial_x[i];
    }
    states[i] = InitState(kind, problem, i, x0);
  }

  RunTrace trace;
  RunHeader& h = trace.header;
  h.algorithm = std::string(ToString(kind));
  h.parameter = algorithm.parameter;
  h.schedule = kind == AlgorithmKind::kCadmm ? "none" : std::string(ToString(algorithm.schedule));
  h.robot_parameters = algorithm.robot_parameters;
  h.topology_model = std::string(ToString(topology.model));
  h.drop_probability = topology.drop_probability;
  h.topology_seed = topology.seed;
  h.seed = options.seed;
  h.weights = kind == AlgorithmKind::kCadmm ? "none" : std::string(ToString(policy));
  h.problem_fingerprint = problem.Fingerprint();
  h.graph_fingerprint = topology.base.Fingerprint();
  h.problem_label = problem.label();
  h.robots = N;
  h.dimension = n;
  h.max_iters = stop.max_iters;
  h.mse_threshold = stop.mse_threshold;
  h.residual_threshold = stop.residual_threshold;
  h.payload_bytes = options.payload_bytes;
  h.mse_definition = "(1/N) sum_i |x_i - x*|^2 / max(|x*|^2, 1e-30)";
  trace.oracle = x_star;

  std::vector<Vector> xs(N);
  auto collect = [&] {
    for (int i = 0; i < N; ++i) xs[i] = states[i].x;
  };
  auto converged = [&](const IterationRecord& r) {
    return r.mse <= stop.mse_threshold &&
           (!stop.residual_threshold || r.consensus_residual <= *stop.residual_threshold);
  };

  collect();
  IterationRecord initial;
  initial.mse = ComputeMse(xs, x_star);
  initial.consensus_residual = ConsensusResidual(xs, topology.base);
  initial.diverged = !std::isfinite(initial.mse);
  trace.records.push_back(initial);
  const double divergence_limit = kDivergenceFactor * std::max(initial.mse, 1.0);

  std::int64_t limit = stop.max_iters;
  if (options.iteration_cap) limit = std::min(limit, *options.iteration_cap);
  if (converged(initial)) {
    h.converged = true;
    h.iterations_to_threshold = 0;
  }

  std::vector<OutboundMessage> outbound(N);
  std::vector<std::vector<const OutboundMessage*>> inboxes(N);
  std::vector<RobotState> next(N);
  std::vector<char> renormalized(N, 0);

  for (std::int64_t k = 0; k < limit && !h.converged && !initial.diverged; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const Graph g = topology.Sample(k);
    WeightMatrix w;
    if (kind != AlgorithmKind::kCadmm) w = DeriveWeights(policy, g);
    PhaseTraffic traffic;
    std::fill(renormalized.begin(), renormalized.end(), 0);

    auto inbox_of = [&](int i) { return Inbox(inboxes[i].data(), inboxes[i].size()); };

    switch (kind) {
      case AlgorithmKind::kDgdCta:
        for_each_robot([&](int i) { outbound[i] = DgdMessage(i, states[i]); });
        BuildInboxes(g, outbound, inboxes, options.payload_bytes, traffic);
        for_each_robot([&](int i) {
          StepFlags f;
          next[i] = DgdCtaStep(problem, i, states[i], inbox_of(i), w, schedules[i], k, &f);
          renormalized[i] = f.renormalized;
        });
        break;
      case AlgorithmKind::kDgdAtc:
        for_each_robot(
            [&](int i) { outbound[i] = DgdAtcMessage(i, states[i], schedules[i], k); });
        BuildInboxes(g, outbound, inboxes, options.payload_bytes, traffic);
        for_each_robot([&](int i) {
          StepFlags f;
          next[i] = DgdAtcStep(problem, i, states[i], inbox_of(i), w, schedules[i], k, &f);
          renormalized[i] = f.renormalized;
        });
        break;
      case AlgorithmKind::kDiging:
        for_each_robot([&](int i) { outbound[i] = DigingMessage(i, states[i]); });
        BuildInboxes(g, outbound, inboxes, options.payload_bytes, traffic);
        for_each_robot([&](int i) {
          StepFlags f;
          next[i] = DigingStep(problem, i, states[i], inbox_of(i), w, algorithm.parameter, &f);
          renormalized[i] = f.renormalized;
        });
        break;
      case AlgorithmKind::kNextQ:
        for_each_robot([&](int i) {
          next[i] = NextQPrepare(i, states[i], hessians[i], schedules[i], k);
          outbound[i] = NextQMessage(i, next[i]);
        });
        BuildInboxes(g, outbound, inboxes, options.payload_bytes, traffic);
        for_each_robot([&](int i) {
          StepFlags f;
          next[i] = NextQStep(problem, i, next[i], inbox_of(i), w, &f);
          renormalized[i] = f.renormalized;
        });
        break;
      case AlgorithmKind::kCadmm:
        for_each_robot([&](int i) { outbound[i] = CadmmMessage(i, states[i]); });
        BuildInboxes(g, outbound, inboxes, options.payload_bytes, traffic);
        for_each_robot([&](int i) {
          next[i] = CadmmPrimalStep(problem, i, states[i], inbox_of(i), rho, &prox[i]);
        });
        // Second exchange on the same sampled graph.
        for_each_robot([&](int i) { outbound[i] = CadmmPendingMessage(i, next[i]); });
        BuildInboxes(g, outbound, inboxes, options.payload_bytes, traffic);
        for_each_robot([&](int i) { next[i] = CadmmDualStep(i, next[i], inbox_of(i), rho); });
        break;
    }
    std::swap(states, next);
    for (char r : renormalized) h.weight_renormalizations += r;

    collect();
    IterationRecord rec;
    rec.iter = k + 1;
    rec.mse = ComputeMse(xs, x_star);
    rec.consensus_residual = ConsensusResidual(xs, topology.base);
    rec.bytes_sent = traffic.bytes;
    rec.packets_sent = traffic.packets;
    rec.diverged = !std::isfinite(rec.mse) || !std::isfinite(rec.consensus_residual) ||
                   rec.mse > divergence_limit || !AllFinite(states);
    if (options.record_wall_time) {
      rec.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    }
    trace.records.push_back(rec);
    if (rec.diverged) break;
    if (converged(rec)) {
      h.converged = true;
      h.iterations_to_threshold = rec.iter;
    }
  }

  h.diverged = trace.records.back().diverged;
  h.iterations_run = trace.records.back().iter;
  trace.final_x = xs;
  return trace;
}

}  // namespace distopt
