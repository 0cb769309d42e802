#ifndef IDDGT_H
#define IDDGT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IddgtStatus {
  IDDGT_STATUS_OK = 0,
  IDDGT_STATUS_NULL_POINTER = 1,
  IDDGT_STATUS_INVALID_ARGUMENT = 2,
  IDDGT_STATUS_SHAPE = 3,
  IDDGT_STATUS_INFEASIBLE = 4,
  IDDGT_STATUS_NUMERICAL = 5,
  IDDGT_STATUS_TOLERANCE_UNREACHABLE = 6,
  IDDGT_STATUS_DIVERGENCE = 7,
  IDDGT_STATUS_STEP_SIZE = 8,
  IDDGT_STATUS_CONSTRUCTION = 9,
  IDDGT_STATUS_IO = 10,
  IDDGT_STATUS_PANIC = 11,
} IddgtStatus;

/**
 * Inner solver selector for [`IddgtRunOptions`].
 */
typedef enum IddgtInner {
  IDDGT_INNER_EXACT = 0,
  IDDGT_INNER_GD_FIXED = 1,
  IDDGT_INNER_AGD_FIXED = 2,
  IDDGT_INNER_AGD_TOLERANCE = 3,
} IddgtInner;

typedef struct IddgtInstance IddgtInstance;

typedef struct IddgtTopology IddgtTopology;

typedef struct IddgtTrace IddgtTrace;

typedef struct IddgtStepBounds {
  double bound_smooth;
  double bound_rate;
  double beta_theoretical;
  double theta;
  double rho_m;
} IddgtStepBounds;

typedef struct IddgtRunOptions {
  enum IddgtInner inner;
  /**
   * Used by `AgdTolerance`.
   */
  double gamma;
  /**
   * Used by `AgdTolerance`.
   */
  double delta0;
  /**
   * Used by `GdFixed` and `AgdFixed`.
   */
  size_t inner_steps;
  /**
   * Step size; zero or negative selects 0.9 × the theoretical bound.
   */
  double beta;
  size_t max_outer;
  double gap_tol;
} IddgtRunOptions;

typedef struct IddgtTraceRow {
  size_t k;
  size_t grad_steps;
  size_t exact_solves;
  size_t comm_rounds;
  double gap;
  double delta_k;
  double zeta[4];
  double lmi_violation;
} IddgtTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *iddgt_last_error(void);

/**
 * Parses an instance from its JSON encoding (NUL-terminated UTF-8).
 *
 * # Safety
 * `json` must be a valid C string and `out` a valid pointer.
 */
enum IddgtStatus iddgt_instance_from_json(const char *json, struct IddgtInstance **out);

/**
 * The two-agent instance `x₁² + 2x₂²` subject to `x₁ + x₂ = 3`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IddgtStatus iddgt_instance_toy(struct IddgtInstance **out);

/**
 * Instance of experiment recipe `which` (1 or 2) for `seed`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IddgtStatus iddgt_instance_experiment(uint32_t which,
                                           uint64_t seed,
                                           struct IddgtInstance **out);

/**
 * # Safety
 * `inst` must come from an `iddgt_instance_*` constructor, or be NULL.
 */
void iddgt_instance_free(struct IddgtInstance *inst);

/**
 * Agent count, constraint count and total primal dimension.
 *
 * # Safety
 * All pointers must be valid.
 */
enum IddgtStatus iddgt_instance_dims(const struct IddgtInstance *inst,
                                     size_t *n,
                                     size_t *p,
                                     size_t *d);

/**
 * Writes `x*` (length `d`) and the minimum-norm multiplier (length `p`).
 *
 * # Safety
 * Buffers must hold at least `x_len` and `lambda_len` doubles.
 */
enum IddgtStatus iddgt_kkt_solve(const struct IddgtInstance *inst,
                                 double *x_out,
                                 size_t x_len,
                                 double *lambda_out,
                                 size_t lambda_len);

/**
 * `∇φ(λ) = A x*(λ) − b`.
 *
 * # Safety
 * `lambda` must hold `p` doubles and `out` at least `out_len`.
 */
enum IddgtStatus iddgt_dual_gradient(const struct IddgtInstance *inst,
                                     const double *lambda,
                                     size_t p,
                                     double *out,
                                     size_t out_len);

/**
 * Directed exponential graph with offsets `2^j`, `j = 0..=e`, and uniform
 * weights.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IddgtStatus iddgt_topology_exponential(size_t n, uint32_t e, struct IddgtTopology **out);

/**
 * Undirected Erdős–Rényi graph with Metropolis weights.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IddgtStatus iddgt_topology_erdos_renyi(size_t n,
                                            double p,
                                            uint64_t seed,
                                            struct IddgtTopology **out);

/**
 * Complete graph with uniform weights `1/n`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IddgtStatus iddgt_topology_complete(size_t n, struct IddgtTopology **out);

/**
 * `σ = ‖W − (1/n)𝟙𝟙ᵀ‖`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum IddgtStatus iddgt_topology_sigma(const struct IddgtTopology *topo, double *out);

/**
 * # Safety
 * `topo` must come from an `iddgt_topology_*` constructor, or be NULL.
 */
void iddgt_topology_free(struct IddgtTopology *topo);

/**
 * Step-size bounds, `θ` and `ρ(M)` at `beta` (non-positive selects the
 * default) with decay `gamma`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum IddgtStatus iddgt_step_bounds(const struct IddgtInstance *inst,
                                   const struct IddgtTopology *topo,
                                   double beta,
                                   double gamma,
                                   struct IddgtStepBounds *out);

/**
 * Runs the outer iteration against the instance's KKT solution.
 *
 * # Safety
 * Pointers must be valid; `opts` is read once.
 */
enum IddgtStatus iddgt_run(const struct IddgtInstance *inst,
                           const struct IddgtTopology *topo,
                           const struct IddgtRunOptions *opts,
                           struct IddgtTrace **out);

/**
 * Number of recorded rows (iterations including `k = 0`); 0 for NULL.
 *
 * # Safety
 * `trace` must be a handle from `iddgt_run`, or NULL.
 */
size_t iddgt_trace_len(const struct IddgtTrace *trace);

/**
 * # Safety
 * Pointers must be valid.
 */
enum IddgtStatus iddgt_trace_row(const struct IddgtTrace *trace,
                                 size_t index,
                                 struct IddgtTraceRow *out);

/**
 * Final stacked primal iterate (length `d`).
 *
 * # Safety
 * `out` must hold at least `len` doubles.
 */
enum IddgtStatus iddgt_trace_final_x(const struct IddgtTrace *trace, double *out, size_t len);

/**
 * # Safety
 * `trace` must be a handle from `iddgt_run`, or NULL.
 */
void iddgt_trace_free(struct IddgtTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IDDGT_H */
