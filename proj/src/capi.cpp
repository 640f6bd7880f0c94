#include "distopt/distopt.h"

#include <memory>
#include <string>
#include <string_view>

#include "distopt/error.hpp"
#include "distopt/experiment.hpp"
#include "distopt/trace_io.hpp"

#ifndef DISTOPT_VERSION
#define DISTOPT_VERSION "unknown"
#endif

struct distopt_graph {
  distopt::Graph g;
};

struct distopt_problem {
  distopt::SeparableProblem p;
};

struct distopt_trace {
  distopt::RunTrace t;
};

struct distopt_experiment {
  distopt::ExperimentConfig config;
  std::string report;
  std::string summary;
  std::vector<std::string> files;
};

namespace {

thread_local std::string g_last_error;

distopt_status Fail(distopt_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
distopt_status Guard(F&& f) {
  try {
    f();
    return DISTOPT_OK;
  } catch (const distopt::Error& e) {
    return Fail(static_cast<distopt_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(DISTOPT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(DISTOPT_ERR_INTERNAL, e.what());
  } catch (...) {
    return Fail(DISTOPT_ERR_INTERNAL, "unknown error");
  }
}

#define DISTOPT_REQUIRE(cond, what) \
  if (!(cond)) return Fail(DISTOPT_ERR_INVALID_ARGUMENT, what)

distopt::RunOptions OptionsFrom(const distopt_run_config& c) {
  distopt::RunOptions o;
  o.workers = c.workers;
  if (c.payload_bytes > 0) o.payload_bytes = c.payload_bytes;
  o.allow_unsupported = c.allow_unsupported != 0;
  o.record_wall_time = c.record_wall_time != 0;
  o.seed = c.seed;
  return o;
}

distopt::AlgorithmSpec SpecFrom(const distopt_run_config& c) {
  distopt::AlgorithmSpec s = distopt::AlgorithmSpec::Make(distopt::ParseAlgorithm(c.algorithm), c.parameter);
  if (c.schedule) s.schedule = distopt::ParseSchedule(c.schedule);
  return s;
}

distopt::StopCriteria StopFrom(const distopt_run_config& c) {
  distopt::StopCriteria s;
  s.max_iters = c.max_iters;
  s.mse_threshold = c.mse_threshold;
  if (c.residual_threshold > 0.0) s.residual_threshold = c.residual_threshold;
  return s;
}

distopt::TopologySequence TopologyFrom(const distopt_graph& g, const distopt_run_config& c) {
  return {g.g, distopt::ParseDropModel(c.topology_model ? c.topology_model : "static"),
          c.drop_probability, c.seed, 1};
}

bool KnownMode(const char* mode) {
  const std::string_view m(mode);
  return m == "run" || m == "sweep" || m == "drops";
}

}  // namespace

extern "C" {

const char* distopt_version(void) { return DISTOPT_VERSION; }

const char* distopt_status_string(distopt_status status) {
  switch (status) {
    case DISTOPT_OK:
      return "ok";
    case DISTOPT_ERR_INTERNAL:
      return "internal error";
    case DISTOPT_ERR_CONFIG:
      return "configuration error";
    case DISTOPT_ERR_DIVERGED:
      return "diverged";
    case DISTOPT_ERR_INCOMPATIBLE:
      return "incompatible algorithm and topology";
    case DISTOPT_ERR_CONTRACT:
      return "contract violation";
    case DISTOPT_ERR_NUMERIC:
      return "numeric error";
    case DISTOPT_ERR_IO:
      return "i/o error";
    case DISTOPT_ERR_INVALID_ARGUMENT:
      return "invalid argument";
  }
  return "unknown status";
}

const char* distopt_last_error(void) { return g_last_error.c_str(); }

distopt_status distopt_graph_create(int n, int directed, const int* edges, size_t edge_count,
                                    distopt_graph** out) {
  DISTOPT_REQUIRE(out, "out is null");
  DISTOPT_REQUIRE(edges || edge_count == 0, "edges is null");
  return Guard([&] {
    std::vector<distopt::Edge> e;
    for (size_t k = 0; k < edge_count; ++k) e.emplace_back(edges[2 * k], edges[2 * k + 1]);
    auto h = std::make_unique<distopt_graph>();
    h->g = distopt::Graph(n, directed ? distopt::Directedness::kDirected
                                      : distopt::Directedness::kUndirected,
                          std::move(e));
    *out = h.release();
  });
}

distopt_status distopt_graph_parse(const char* text, distopt_graph** out) {
  DISTOPT_REQUIRE(text && out, "null argument");
  return Guard([&] { *out = new distopt_graph{distopt::Graph::Parse(text)}; });
}

distopt_status distopt_graph_geometric(int n, double radius, uint64_t seed, int require_connected,
                                       distopt_graph** out) {
  DISTOPT_REQUIRE(out, "out is null");
  return Guard([&] {
    const distopt::GeometricGraphSpec spec{n, radius, seed};
    *out = new distopt_graph{require_connected ? distopt::GenerateConnectedGeometric(spec).graph
                                               : distopt::GenerateGeometricGraph(spec)};
  });
}

int distopt_graph_size(const distopt_graph* g) { return g ? g->g.size() : -1; }

size_t distopt_graph_edge_count(const distopt_graph* g) { return g ? g->g.edge_count() : 0; }

int distopt_graph_is_connected(const distopt_graph* g) {
  if (!g) return -1;
  return g->g.directed() ? distopt::IsStronglyConnected(g->g) : distopt::IsConnected(g->g);
}

void distopt_graph_destroy(distopt_graph* g) { delete g; }

distopt_status distopt_problem_create_quadratic(int robots, int dim, const double* hessians,
                                                const double* linears, const double* constants,
                                                distopt_problem** out) {
  DISTOPT_REQUIRE(out && hessians && linears, "null argument");
  DISTOPT_REQUIRE(robots > 0 && dim > 0, "robots and dim must be positive");
  return Guard([&] {
    std::vector<distopt::QuadraticLocalCost> costs;
    const size_t block = static_cast<size_t>(dim) * static_cast<size_t>(dim);
    for (int i = 0; i < robots; ++i) {
      distopt::QuadraticLocalCost c;
      c.hessian = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          hessians + block * static_cast<size_t>(i), dim, dim);
      c.linear = Eigen::Map<const Eigen::VectorXd>(linears + static_cast<size_t>(dim) * i, dim);
      c.constant = constants ? constants[i] : 0.0;
      costs.push_back(std::move(c));
    }
    *out = new distopt_problem{distopt::SeparableProblem(std::move(costs), "quadratic")};
  });
}

distopt_status distopt_problem_target_tracking(int robots, int timesteps, uint64_t seed,
                                               distopt_problem** out) {
  DISTOPT_REQUIRE(out, "out is null");
  return Guard([&] {
    *out = new distopt_problem{distopt::BuildTargetTracking(
        distopt::SimulateTargetData(distopt::MakeTrackingSpec(robots, timesteps, seed)))};
  });
}

distopt_status distopt_problem_factored_ls(int robots, int dim, const int* rows, uint64_t seed,
                                           distopt_problem** out) {
  DISTOPT_REQUIRE(out, "out is null");
  DISTOPT_REQUIRE(robots > 0 && dim > 0, "robots and dim must be positive");
  return Guard([&] {
    distopt::ExperimentConfig c;
    c.problem.kind = "factored_ls";
    c.problem.robots = robots;
    c.problem.dimension = dim;
    if (rows) c.problem.rows.assign(rows, rows + robots);
    c.problem.seed = seed;
    c.graph.kind = "complete";
    *out = new distopt_problem{distopt::BuildTrial(c, seed).problem};
  });
}

distopt_status distopt_problem_load(const char* path, distopt_problem** out) {
  DISTOPT_REQUIRE(path && out, "null argument");
  return Guard([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(distopt::ReadFile(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw distopt::ConfigError(std::string(path) + ": " + e.what());
    }
    *out = new distopt_problem{distopt::BuildProblem(distopt::ProblemSpecFromJson(doc))};
  });
}

int distopt_problem_robots(const distopt_problem* p) { return p ? p->p.robot_count() : -1; }

int distopt_problem_dimension(const distopt_problem* p) { return p ? p->p.dimension() : -1; }

distopt_status distopt_problem_oracle(const distopt_problem* p, double* out, size_t len) {
  DISTOPT_REQUIRE(p && out, "null argument");
  DISTOPT_REQUIRE(len == static_cast<size_t>(p->p.dimension()), "len must equal the dimension");
  return Guard([&] {
    const Eigen::VectorXd x = distopt::OracleSolve(p->p);
    std::copy(x.data(), x.data() + len, out);
  });
}

void distopt_problem_destroy(distopt_problem* p) { delete p; }

void distopt_run_config_init(distopt_run_config* c) {
  if (!c) return;
  *c = distopt_run_config{};
  c->algorithm = "diging";
  c->parameter = 0.01;
  c->schedule = nullptr;
  c->topology_model = "static";
  c->weights = "metropolis";
  c->max_iters = 10000;
  c->mse_threshold = 1e-6;
  c->workers = 1;
  c->record_wall_time = 1;
}

distopt_status distopt_run(const distopt_problem* problem, const distopt_graph* graph,
                           const distopt_run_config* config, distopt_trace** out) {
  DISTOPT_REQUIRE(problem && graph && config && out, "null argument");
  DISTOPT_REQUIRE(config->algorithm, "config->algorithm is null");
  return Guard([&] {
    auto t = std::make_unique<distopt_trace>();
    t->t = distopt::Run(problem->p, SpecFrom(*config), TopologyFrom(*graph, *config),
                        distopt::ParseWeightsPolicy(config->weights ? config->weights : "metropolis"),
                        StopFrom(*config), OptionsFrom(*config));
    *out = t.release();
  });
}

size_t distopt_trace_length(const distopt_trace* t) { return t ? t->t.records.size() : 0; }

distopt_status distopt_trace_record(const distopt_trace* t, size_t index,
                                    distopt_iteration_record* out) {
  DISTOPT_REQUIRE(t && out, "null argument");
  DISTOPT_REQUIRE(index < t->t.records.size(), "record index out of range");
  const auto& r = t->t.records[index];
  *out = {r.iter, r.mse, r.consensus_residual, r.bytes_sent, r.packets_sent, r.wall_ns,
          r.diverged ? 1 : 0};
  return DISTOPT_OK;
}

int distopt_trace_converged(const distopt_trace* t) { return t ? t->t.header.converged : -1; }

int distopt_trace_diverged(const distopt_trace* t) { return t ? t->t.header.diverged : -1; }

int64_t distopt_trace_iterations_to_threshold(const distopt_trace* t) {
  if (!t || !t->t.header.iterations_to_threshold) return -1;
  return *t->t.header.iterations_to_threshold;
}

distopt_status distopt_trace_final_x(const distopt_trace* t, int robot, double* out, size_t len) {
  DISTOPT_REQUIRE(t && out, "null argument");
  DISTOPT_REQUIRE(robot >= 0 && robot < static_cast<int>(t->t.final_x.size()), "robot out of range");
  const auto& x = t->t.final_x[static_cast<size_t>(robot)];
  DISTOPT_REQUIRE(len == static_cast<size_t>(x.size()), "len must equal the dimension");
  std::copy(x.data(), x.data() + len, out);
  return DISTOPT_OK;
}

distopt_status distopt_trace_write(const distopt_trace* t, const char* stem) {
  DISTOPT_REQUIRE(t && stem, "null argument");
  return Guard([&] { distopt::WriteTrace(t->t, stem); });
}

void distopt_trace_destroy(distopt_trace* t) { delete t; }

distopt_status distopt_tune(const distopt_problem* problem, const distopt_graph* graph,
                            const distopt_run_config* config, double lo, double hi, int budget,
                            double* best_param, int64_t* best_iters) {
  DISTOPT_REQUIRE(problem && graph && config && best_param, "null argument");
  DISTOPT_REQUIRE(config->algorithm, "config->algorithm is null");
  return Guard([&] {
    distopt::TuneSpec ts;
    ts.lo = lo;
    ts.hi = hi;
    ts.budget = budget;
    ts.stop = StopFrom(*config);
    ts.run = OptionsFrom(*config);
    const auto r = distopt::GssTune(
        ts, problem->p, SpecFrom(*config), TopologyFrom(*graph, *config),
        distopt::ParseWeightsPolicy(config->weights ? config->weights : "metropolis"));
    *best_param = r.best_param;
    if (best_iters) *best_iters = r.best_iters;
  });
}

void distopt_overrides_init(distopt_overrides* o) {
  if (!o) return;
  *o = distopt_overrides{};
  o->max_iters = -1;
  o->workers = -1;
}

distopt_status distopt_experiment_load(const char* path, distopt_experiment** out) {
  DISTOPT_REQUIRE(path && out, "null argument");
  return Guard([&] {
    auto e = std::make_unique<distopt_experiment>();
    e->config = distopt::LoadExperimentConfig(path);
    *out = e.release();
  });
}

distopt_status distopt_experiment_parse(const char* json_text, const char* base_dir,
                                        distopt_experiment** out) {
  DISTOPT_REQUIRE(json_text && out, "null argument");
  return Guard([&] {
    auto e = std::make_unique<distopt_experiment>();
    e->config = distopt::ParseExperimentConfig(json_text);
    if (base_dir) e->config.base_dir = base_dir;
    *out = e.release();
  });
}

distopt_status distopt_experiment_apply_overrides(distopt_experiment* e,
                                                  const distopt_overrides* o) {
  DISTOPT_REQUIRE(e && o, "null argument");
  return Guard([&] {
    distopt::ExperimentOverrides ov;
    if (o->seed_count != 0) ov.seed_count = o->seed_count;
    if (o->max_iters >= 0) ov.max_iters = o->max_iters;
    if (o->output) ov.output = std::filesystem::path(o->output);
    ov.allow_unsupported = o->allow_unsupported != 0;
    if (o->payload_bytes != 0) ov.payload_bytes = o->payload_bytes;
    if (o->workers >= 0) ov.workers = o->workers;
    distopt::ApplyOverrides(e->config, ov);
  });
}

distopt_status distopt_experiment_validate(const distopt_experiment* e, const char* mode) {
  DISTOPT_REQUIRE(e && mode, "null argument");
  DISTOPT_REQUIRE(KnownMode(mode), "mode must be run, sweep or drops");
  return Guard([&] { distopt::ValidateForMode(e->config, distopt::ParseMode(mode)); });
}

distopt_status distopt_experiment_execute(distopt_experiment* e, const char* mode, int* exit_code) {
  DISTOPT_REQUIRE(e && mode, "null argument");
  DISTOPT_REQUIRE(KnownMode(mode), "mode must be run, sweep or drops");
  return Guard([&] {
    const auto r = distopt::Execute(e->config, distopt::ParseMode(mode));
    e->report = r.report;
    e->summary = r.summary.dump(2);
    e->files.clear();
    for (const auto& f : r.files) e->files.push_back(f.string());
    if (exit_code) *exit_code = r.exit_code;
  });
}

const char* distopt_experiment_report(const distopt_experiment* e) {
  return e ? e->report.c_str() : "";
}

const char* distopt_experiment_summary_json(const distopt_experiment* e) {
  return e ? e->summary.c_str() : "";
}

size_t distopt_experiment_file_count(const distopt_experiment* e) {
  return e ? e->files.size() : 0;
}

const char* distopt_experiment_file(const distopt_experiment* e, size_t index) {
  if (!e || index >= e->files.size()) return nullptr;
  return e->files[index].c_str();
}

void distopt_experiment_destroy(distopt_experiment* e) { delete e; }

}  // extern "C"
