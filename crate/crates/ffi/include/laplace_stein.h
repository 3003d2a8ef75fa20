#ifndef LAPLACE_STEIN_H
#define LAPLACE_STEIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_DOMAIN = 2,
  LS_STATUS_INVALID_PARAMETER = 3,
  LS_STATUS_QUADRATURE = 4,
  LS_STATUS_UNSUPPORTED = 5,
  LS_STATUS_CONTRACT = 6,
  LS_STATUS_TRUNCATION = 7,
  LS_STATUS_PANIC = 8,
} LsStatus;

/*
 Built-in test functions for `ls_stein_solution_new`.
 */
typedef enum LsTestFunction {
  LS_TEST_FUNCTION_SINE = 0,
  LS_TEST_FUNCTION_COSINE = 1,
  LS_TEST_FUNCTION_TANH = 2,
  LS_TEST_FUNCTION_CLAMP_UNIT = 3,
  /*
   `param1 = c`: `clamp(z - c, -1, 1)`.
   */
  LS_TEST_FUNCTION_SHIFTED_CLAMP = 4,
  /*
   `param1 = x0`, `param2 = eps`: ramp from `eps` down to 0 on `[x0, x0 + eps]`.
   */
  LS_TEST_FUNCTION_SMOOTHED_INDICATOR = 5,
} LsTestFunction;

/*
 Summand laws for `ls_source_new`.
 */
typedef enum LsSourceKind {
  /*
   `±c`.
   */
  LS_SOURCE_KIND_RADEMACHER = 0,
  /*
   `Uniform(-c, c)`.
   */
  LS_SOURCE_KIND_UNIFORM = 1,
  /*
   `Laplace(0, c)`.
   */
  LS_SOURCE_KIND_LAPLACE = 2,
  /*
   Atoms `-2c`, `c`, `3c` with weights ½, ¼, ¼.
   */
  LS_SOURCE_KIND_SKEWED = 3,
} LsSourceKind;

/*
 Opaque summand law.
 */
typedef struct LsSource LsSource;

/*
 Opaque Stein solution.
 */
typedef struct LsSteinSolution LsSteinSolution;

/*
 `g`, `g'`, `g''`, `g'''` at a point.
 */
typedef struct LsSteinValues {
  double g;
  double g1;
  double g2;
  double g3;
} LsSteinValues;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copy the calling thread's last error message into `buf` (at most `len`
 bytes including the terminating NUL). Returns the full message length
 plus one, so a return value above `len` means truncation.
 */
size_t ls_last_error_message(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *ls_version(void);

/*
 Density of `Laplace(a, b)` at `x`.
 */
enum LsStatus ls_laplace_pdf(double a, double b, double x, double *result);

/*
 Distribution function of `Laplace(a, b)` at `x`.
 */
enum LsStatus ls_laplace_cdf(double a, double b, double x, double *result);

/*
 Quantile of `Laplace(a, b)` at level `q ∈ (0, 1)`.
 */
enum LsStatus ls_laplace_quantile(double a, double b, double q, double *result);

/*
 Solve the Stein equation for a built-in test function at scale `b`.
 Unused parameters are ignored.
 */
enum LsStatus ls_stein_solution_new(enum LsTestFunction kind,
                                    double param1,
                                    double param2,
                                    double b,
                                    struct LsSteinSolution **handle);

/*
 Evaluate a solution and its first three derivatives at `x`.
 */
enum LsStatus ls_stein_solution_eval(const struct LsSteinSolution *handle,
                                     double x,
                                     struct LsSteinValues *values);

/*
 Release a solution; null is ignored.
 */
void ls_stein_solution_free(struct LsSteinSolution *handle);

/*
 Create a summand law with magnitude `c`.
 */
enum LsStatus ls_source_new(enum LsSourceKind kind, double c, struct LsSource **handle);

/*
 `E X²` of a source.
 */
enum LsStatus ls_source_variance(const struct LsSource *handle, double *result);

/*
 Release a source; null is ignored.
 */
void ls_source_free(struct LsSource *handle);

/*
 Fill `buf[0..n]` with sorted draws of `√p (X_1 + … + X_N)`, `N`
 geometric with parameter `p`.
 */
enum LsStatus ls_geometric_sum_sample(const struct LsSource *source,
                                      double p,
                                      uint64_t seed,
                                      double *buf,
                                      size_t n);

/*
 Kolmogorov distance between `values[0..n]` and `Laplace(a, b)`.
 */
enum LsStatus ls_kolmogorov_empirical(const double *values,
                                      size_t n,
                                      double a,
                                      double b,
                                      double *result);

/*
 Wasserstein distance between `values[0..n]` and `Laplace(a, b)`.
 */
enum LsStatus ls_wasserstein_empirical(const double *values,
                                       size_t n,
                                       double a,
                                       double b,
                                       double *result);

/*
 Kolmogorov bound from a bounded-Lipschitz distance `d_bl` against a
 law with density bounded by `density_sup`.
 */
enum LsStatus ls_kolmogorov_from_bl(double d_bl, double density_sup, double *result);

/*
 Bounded-Lipschitz bound for a geometric sum; `capped` is `min(value, 2)`.
 Either out-pointer may be null.
 */
enum LsStatus ls_theorem7_bound(double p, double b, double rho, double *value, double *capped);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAPLACE_STEIN_H */
