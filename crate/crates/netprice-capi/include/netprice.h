/* C interface to the netprice pricing solvers. */

#ifndef NETPRICE_H
#define NETPRICE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a C API call.
typedef enum NpStatus {
  NpStatus_Ok = 0,
  // A required pointer argument was null.
  NpStatus_NullPointer = 1,
  // Malformed input (JSON, dimensions, parameter ranges).
  NpStatus_InvalidArgument = 2,
  // The instance violates a model invariant required by the solver.
  NpStatus_InvalidInstance = 3,
  // Centrality or relaxation ill-defined for these inputs.
  NpStatus_IllDefined = 4,
  NpStatus_NoConvergence = 5,
  // Exact enumeration requested beyond its size limit.
  NpStatus_TooLarge = 6,
  // Internal consistency check failed.
  NpStatus_Inconsistent = 7,
  NpStatus_SingularSystem = 8,
  NpStatus_NotPositiveDefinite = 9,
  // A panic was caught at the boundary.
  NpStatus_Internal = 10,
} NpStatus;

// Opaque market instance handle.
typedef struct NpInstance NpInstance;

// Blind-vs-informed profit comparison with spectral bounds.
typedef struct NpProfitComparison {
  double pi0;
  double pi_n;
  double ratio;
  double lower_bound;
  double upper_bound;
} NpProfitComparison;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message into `buf` (NUL-terminated, truncated to
// `len`). Returns the full length of the message including the NUL, or 0
// when `buf` is null and `len` nonzero.
size_t np_last_error_message(char *buf, size_t len);

// Parse an instance from its JSON representation
// (`{"n": ..., "G": [[...]], "a": [...], "b": [...], "c": ...}`).
// Returns null on failure; free with [`np_instance_free`].
struct NpInstance *np_instance_from_json(const char *json);

// Build an instance from raw arrays: `g` row-major `n*n`, `a` and `b` of
// length `n`. Returns null on failure; free with [`np_instance_free`].
struct NpInstance *np_instance_new(size_t n,
                                   const double *g,
                                   const double *a,
                                   const double *b,
                                   double c);

// Release an instance created by this library. Null is a no-op.
void np_instance_free(struct NpInstance *inst);

// Number of agents, or 0 for a null handle.
size_t np_instance_agent_count(const struct NpInstance *inst);

// Whether the instance satisfies every model invariant.
bool np_instance_is_admissible(const struct NpInstance *inst);

// Equilibrium consumption at `prices` (length n) into `x_out` (length n).
// `residual_out` and `iterations_out` may be null.
enum NpStatus np_solve_equilibrium(const struct NpInstance *inst,
                                   const double *prices,
                                   double tol,
                                   size_t max_iter,
                                   double *x_out,
                                   double *residual_out,
                                   size_t *iterations_out);

// Closed-form individualized prices into `prices_out`/`consumption_out`
// (length n each; either may be null) and the profit into `profit_out`.
enum NpStatus np_discriminatory_prices(const struct NpInstance *inst,
                                       double *prices_out,
                                       double *consumption_out,
                                       double *profit_out);

// Optimal single uniform price and its profit.
enum NpStatus np_optimal_uniform_price(const struct NpInstance *inst,
                                       double *price_out,
                                       double *profit_out);

// Full/discounted assignment for two price levels. `assignment_out`
// (length n) receives +1 for full price and -1 for discounted;
// `sdp_bound_out` (nullable) receives the certified relaxation bound or
// NaN when the exact path ran.
enum NpStatus np_two_price_solve(const struct NpInstance *inst,
                                 double p_low,
                                 double p_high,
                                 size_t trials,
                                 uint64_t seed,
                                 bool force_sdp,
                                 int8_t *assignment_out,
                                 double *profit_out,
                                 double *sdp_bound_out);

// Blind-vs-informed profit comparison with spectral bounds.
enum NpStatus np_value_of_info(const struct NpInstance *inst, struct NpProfitComparison *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETPRICE_H */
