/* C interface to the distopt library.
 *
 * All objects are opaque handles created by *_create / *_load style calls and
 * released with the matching *_destroy. Every fallible call returns a
 * distopt_status; on failure distopt_last_error() describes what went wrong
 * (the message is per thread and valid until the next failing call).
 */
#ifndef DISTOPT_DISTOPT_H_
#define DISTOPT_DISTOPT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(DISTOPT_BUILDING_LIBRARY)
#define DISTOPT_API __attribute__((visibility("default")))
#else
#define DISTOPT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum distopt_status {
  DISTOPT_OK = 0,
  DISTOPT_ERR_INTERNAL = 1,
  DISTOPT_ERR_CONFIG = 2,
  DISTOPT_ERR_DIVERGED = 3,
  DISTOPT_ERR_INCOMPATIBLE = 4,
  DISTOPT_ERR_CONTRACT = 5,
  DISTOPT_ERR_NUMERIC = 6,
  DISTOPT_ERR_IO = 7,
  DISTOPT_ERR_INVALID_ARGUMENT = 8
} distopt_status;

DISTOPT_API const char* distopt_version(void);
DISTOPT_API const char* distopt_status_string(distopt_status status);
DISTOPT_API const char* distopt_last_error(void);

/* ---- graphs ------------------------------------------------------------ */

typedef struct distopt_graph distopt_graph;

/* edges holds edge_count (from, to) pairs, flattened. */
DISTOPT_API distopt_status distopt_graph_create(int n, int directed, const int* edges,
                                                size_t edge_count, distopt_graph** out);
DISTOPT_API distopt_status distopt_graph_parse(const char* text, distopt_graph** out);
DISTOPT_API distopt_status distopt_graph_geometric(int n, double radius, uint64_t seed,
                                                   int require_connected, distopt_graph** out);
DISTOPT_API int distopt_graph_size(const distopt_graph* g);
DISTOPT_API size_t distopt_graph_edge_count(const distopt_graph* g);
/* 1 if connected (strongly, for directed graphs), 0 if not, -1 on bad handle. */
DISTOPT_API int distopt_graph_is_connected(const distopt_graph* g);
DISTOPT_API void distopt_graph_destroy(distopt_graph* g);

/* ---- problems ---------------------------------------------------------- */

typedef struct distopt_problem distopt_problem;

/* hessians: robots blocks of dim*dim row-major; linears: robots*dim; constants may be NULL. */
DISTOPT_API distopt_status distopt_problem_create_quadratic(int robots, int dim,
                                                            const double* hessians,
                                                            const double* linears,
                                                            const double* constants,
                                                            distopt_problem** out);
DISTOPT_API distopt_status distopt_problem_target_tracking(int robots, int timesteps,
                                                           uint64_t seed, distopt_problem** out);
/* rows may be NULL to draw 2*dim..4*dim measurements per robot. */
DISTOPT_API distopt_status distopt_problem_factored_ls(int robots, int dim, const int* rows,
                                                       uint64_t seed, distopt_problem** out);
/* Loads a problem document (target_tracking or factored_ls JSON). */
DISTOPT_API distopt_status distopt_problem_load(const char* path, distopt_problem** out);
DISTOPT_API int distopt_problem_robots(const distopt_problem* p);
DISTOPT_API int distopt_problem_dimension(const distopt_problem* p);
/* Writes the centralized minimizer; len must equal the dimension. */
DISTOPT_API distopt_status distopt_problem_oracle(const distopt_problem* p, double* out,
                                                  size_t len);
DISTOPT_API void distopt_problem_destroy(distopt_problem* p);

/* ---- single runs ------------------------------------------------------- */

typedef struct distopt_run_config {
  const char* algorithm;      /* dgd-cta | dgd-atc | diging | next-q | cadmm */
  double parameter;           /* alpha, alpha0 or rho */
  const char* schedule;       /* NULL selects the algorithm default */
  const char* topology_model; /* static | undirected-drop | directed-drop */
  double drop_probability;
  uint64_t seed;
  const char* weights; /* metropolis | uniform-row | uniform-column */
  int64_t max_iters;
  double mse_threshold;
  double residual_threshold; /* <= 0 disables */
  int workers;
  int64_t payload_bytes; /* 0 disables packet accounting */
  int allow_unsupported;
  int record_wall_time;
} distopt_run_config;

DISTOPT_API void distopt_run_config_init(distopt_run_config* config);

typedef struct distopt_iteration_record {
  int64_t iter;
  double mse;
  double consensus_residual;
  uint64_t bytes_sent;
  uint64_t packets_sent;
  int64_t wall_ns;
  int diverged;
} distopt_iteration_record;

typedef struct distopt_trace distopt_trace;

DISTOPT_API distopt_status distopt_run(const distopt_problem* problem, const distopt_graph* graph,
                                       const distopt_run_config* config, distopt_trace** out);
DISTOPT_API size_t distopt_trace_length(const distopt_trace* t);
DISTOPT_API distopt_status distopt_trace_record(const distopt_trace* t, size_t index,
                                                distopt_iteration_record* out);
DISTOPT_API int distopt_trace_converged(const distopt_trace* t);
DISTOPT_API int distopt_trace_diverged(const distopt_trace* t);
/* -1 when the threshold was not reached. */
DISTOPT_API int64_t distopt_trace_iterations_to_threshold(const distopt_trace* t);
DISTOPT_API distopt_status distopt_trace_final_x(const distopt_trace* t, int robot, double* out,
                                                 size_t len);
/* Writes <stem>.csv and <stem>.json. */
DISTOPT_API distopt_status distopt_trace_write(const distopt_trace* t, const char* stem);
DISTOPT_API void distopt_trace_destroy(distopt_trace* t);

/* Golden-section search of config->parameter over [lo, hi]. */
DISTOPT_API distopt_status distopt_tune(const distopt_problem* problem, const distopt_graph* graph,
                                        const distopt_run_config* config, double lo, double hi,
                                        int budget, double* best_param, int64_t* best_iters);

/* ---- experiments ------------------------------------------------------- */

typedef struct distopt_experiment distopt_experiment;

typedef struct distopt_overrides {
  int seed_count;         /* 0 keeps the configured seeds */
  int64_t max_iters;      /* < 0 keeps the configured value */
  const char* output;     /* NULL keeps the configured prefix */
  int allow_unsupported;  /* nonzero enables */
  int64_t payload_bytes;  /* 0 keeps the configured value */
  int workers;            /* < 0 keeps the configured value */
} distopt_overrides;

DISTOPT_API void distopt_overrides_init(distopt_overrides* o);

DISTOPT_API distopt_status distopt_experiment_load(const char* path, distopt_experiment** out);
/* base_dir resolves relative file references; may be NULL. */
DISTOPT_API distopt_status distopt_experiment_parse(const char* json_text, const char* base_dir,
                                                    distopt_experiment** out);
DISTOPT_API distopt_status distopt_experiment_apply_overrides(distopt_experiment* e,
                                                              const distopt_overrides* o);
/* mode: run | sweep | drops */
DISTOPT_API distopt_status distopt_experiment_validate(const distopt_experiment* e,
                                                       const char* mode);
/* On success *exit_code is 0, or 3 when some trial diverged. */
DISTOPT_API distopt_status distopt_experiment_execute(distopt_experiment* e, const char* mode,
                                                      int* exit_code);
DISTOPT_API const char* distopt_experiment_report(const distopt_experiment* e);
DISTOPT_API const char* distopt_experiment_summary_json(const distopt_experiment* e);
DISTOPT_API size_t distopt_experiment_file_count(const distopt_experiment* e);
DISTOPT_API const char* distopt_experiment_file(const distopt_experiment* e, size_t index);
DISTOPT_API void distopt_experiment_destroy(distopt_experiment* e);

#ifdef __cplusplus
}
#endif

#endif /* DISTOPT_DISTOPT_H_ */
