#ifndef NUDGECAST_H
#define NUDGECAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  NC_STATUS_OK = 0,
  NC_STATUS_NULL_POINTER = 1,
  NC_STATUS_VALIDATION = 2,
  NC_STATUS_IO = 3,
  NC_STATUS_BUFFER_TOO_SMALL = 4,
  NC_STATUS_PANIC = 5,
} NcStatus;

typedef enum {
  NC_OBJECTIVE_MAX_MEAN = 0,
  NC_OBJECTIVE_MAX_VAR = 1,
  NC_OBJECTIVE_MIN_VAR = 2,
} NcObjective;

typedef enum {
  NC_FAMILY_NUDGING = 0,
  NC_FAMILY_DEGROOT = 1,
} NcFamily;

/**
 * Opaque network handle.
 */
typedef struct NcNetwork NcNetwork;

/**
 * Opaque trajectory handle.
 */
typedef struct NcTrajectory NcTrajectory;

typedef struct {
  double epsilon;
  double omega;
  double u_min;
  double u_max;
  double lambda_max;
} NcModelParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the last error on this thread, or NULL. Free with [`nc_string_free`].
 */
char *nc_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void nc_string_free(char *s);

NcModelParams nc_model_default(void);

/**
 * Builds a network from parallel edge arrays; `sources[k]` is followed by `targets[k]`.
 *
 * # Safety
 * Array pointers must be valid for the given lengths.
 */
NcStatus nc_network_new(size_t n_nodes,
                        const double *opinions,
                        size_t n_edges,
                        const size_t *sources,
                        const size_t *targets,
                        const double *rates,
                        NcNetwork **out);

/**
 * # Safety
 * Paths must be NUL-terminated strings.
 */
NcStatus nc_network_load(const char *edge_path, const char *opinion_path, NcNetwork **out);

/**
 * # Safety
 * `net` must come from this library or be NULL.
 */
void nc_network_free(NcNetwork *net);

/**
 * # Safety
 * `net` must be a live handle.
 */
size_t nc_network_node_count(const NcNetwork *net);

double nc_shift(double x, NcModelParams model);

/**
 * One greedy content step. `has_prev = false` ignores `prev` and `gamma`.
 *
 * # Safety
 * `weights` and `thetas` must hold `n` values.
 */
NcStatus nc_greedy_step(const double *weights,
                        const double *thetas,
                        size_t n,
                        bool has_prev,
                        double prev,
                        double gamma,
                        NcModelParams model,
                        double *out);

/**
 * # Safety
 * `theta` must hold `n` values.
 */
NcStatus nc_objective(NcObjective kind, const double *theta, size_t n, double *out);

/**
 * Runs a policy family over `horizon` steps. Targets are `(agents[k], nodes[k])` pairs.
 *
 * # Safety
 * `net` must be live; arrays must hold `n_assign` values.
 */
NcStatus nc_simulate(const NcNetwork *net,
                     size_t n_agents,
                     size_t n_assign,
                     const size_t *agents,
                     const size_t *nodes,
                     NcFamily family,
                     NcObjective objective,
                     double gamma,
                     NcModelParams model,
                     size_t horizon,
                     double substep,
                     NcTrajectory **out);

/**
 * # Safety
 * `traj` must come from this library or be NULL.
 */
void nc_trajectory_free(NcTrajectory *traj);

/**
 * # Safety
 * `traj` must be a live handle.
 */
size_t nc_trajectory_horizon(const NcTrajectory *traj);

/**
 * Copies θ(t) into `buf`, which must hold the network's node count.
 *
 * # Safety
 * `traj` must be live; `buf` must hold `len` values.
 */
NcStatus nc_trajectory_opinions(const NcTrajectory *traj, size_t t, double *buf, size_t len);

/**
 * Opinion of agent `a` on `[t, t+1)`; NaN for an agent without targets.
 *
 * # Safety
 * `traj` must be live.
 */
NcStatus nc_trajectory_agent_opinion(const NcTrajectory *traj, size_t t, size_t agent, double *out);

/**
 * Greedy targeting. Writes `(agent, node)` pairs; `capacity` must be at
 * least `n_agents * d_max`. `out_len` receives the pair count.
 *
 * # Safety
 * `net` must be live; output arrays must hold `capacity` values.
 */
NcStatus nc_greedy_targets(const NcNetwork *net,
                           NcObjective objective,
                           size_t n_agents,
                           size_t d_max,
                           size_t consideration_size,
                           size_t horizon,
                           NcFamily family,
                           double gamma,
                           NcModelParams model,
                           double substep,
                           size_t *out_agents,
                           size_t *out_nodes,
                           size_t capacity,
                           size_t *out_len);

/**
 * Static instruction string; do not free.
 */
const char *nc_build_instruction(void);

/**
 * Writes a newly allocated prompt to `out`; free with [`nc_string_free`].
 *
 * # Safety
 * String arguments must be NUL-terminated.
 */
NcStatus nc_build_prompt(const char *topic,
                         const char *content_type,
                         int64_t scale_min,
                         int64_t scale_max,
                         int64_t opinion,
                         char **out);

/**
 * # Safety
 * `out` must be writable.
 */
NcStatus nc_scale_opinion(double u, int64_t scale_min, int64_t scale_max, int64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NUDGECAST_H */
