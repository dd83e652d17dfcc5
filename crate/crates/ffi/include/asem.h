#ifndef ASEM_H
#define ASEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bit set in [`AsemSummary::flags`].
 */
#define ASEM_FLAG_CONVERGED 1

#define ASEM_FLAG_EIGEN_CONVERGED (1 << 1)

#define ASEM_FLAG_LINEAR_SOLVE_CONVERGED (1 << 2)

#define ASEM_FLAG_HARD_CASE_SUSPECTED (1 << 3)

#define ASEM_FLAG_TRACE_ESTIMATED (1 << 4)

#define ASEM_FLAG_MU_CLAMPED (1 << 5)

#define ASEM_FLAG_INDEFINITE_SHIFT (1 << 6)

#define ASEM_FLAG_DIVERGED (1 << 7)

#define ASEM_FLAG_BUDGET_EXHAUSTED (1 << 8)

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum AsemStatus {
  ASEM_STATUS_OK = 0,
  ASEM_STATUS_NULL_POINTER = 1,
  ASEM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * `b` is (numerically) orthogonal to the bottom eigenvector.
   */
  ASEM_STATUS_HARD_CASE = 3,
  ASEM_STATUS_NUMERICAL_FAILURE = 4,
  /**
   * The caller's buffer is shorter than the data to be written.
   */
  ASEM_STATUS_BUFFER_TOO_SMALL = 5,
  ASEM_STATUS_PANIC = 6,
} AsemStatus;

/**
 * Surrogate rule for the unseen part of the spectrum.
 */
typedef enum AsemMuRule {
  ASEM_MU_RULE_AUTO = 0,
  ASEM_MU_RULE_MEAN = 1,
  ASEM_MU_RULE_WEIGHTED = 2,
  ASEM_MU_RULE_LARGEST_KNOWN = 3,
  /**
   * Uses [`AsemOptions::mu_value`].
   */
  ASEM_MU_RULE_FIXED = 4,
} AsemMuRule;

/**
 * Opaque problem handle.
 */
typedef struct AsemProblem AsemProblem;

/**
 * Opaque solve result.
 */
typedef struct AsemReport AsemReport;

/**
 * Writes `y = A x` for vectors of length `n`. Must be symmetric, and safe
 * to call from several threads at once with the same `ctx`.
 */
typedef void (*AsemMatvecFn)(void *ctx, const double *x, double *y, size_t n);

/**
 * Options for [`asem_solve_asem`]; start from [`asem_options_default`].
 */
typedef struct AsemOptions {
  /**
   * Number of eigenpairs to estimate.
   */
  size_t m;
  /**
   * Secular model order, 1 or 2.
   */
  uint32_t order;
  enum AsemMuRule mu_rule;
  double mu_value;
  /**
   * Lanczos dimension per cycle; 0 picks `max(2m, 20)`.
   */
  size_t krylov_dim;
  size_t restarts;
  /**
   * Total matvec budget; 0 means unlimited.
   */
  uint64_t budget;
  uint64_t seed;
  /**
   * Take eigenpairs from a full decomposition instead of Lanczos.
   */
  bool use_oracle;
} AsemOptions;

/**
 * Scalar results of a solve.
 */
typedef struct AsemSummary {
  size_t dim;
  double sigma;
  double grad_norm;
  double objective;
  double residual_norm;
  uint64_t matvecs;
  /**
   * `ASEM_FLAG_*` bits.
   */
  uint32_t flags;
} AsemSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds `min b^T x + 1/2 x^T diag(d) x + rho/3 ||x||^3`.
 *
 * # Safety
 * `diag` and `b` must be valid for `n` reads; `out` must be writable.
 */
enum AsemStatus asem_problem_new_diagonal(const double *diag,
                                          const double *b,
                                          size_t n,
                                          double rho,
                                          struct AsemProblem **out);

/**
 * Builds a problem from a dense symmetric `n x n` matrix stored row-major.
 *
 * # Safety
 * `matrix` must be valid for `n * n` reads, `b` for `n`; `out` writable.
 */
enum AsemStatus asem_problem_new_dense(const double *matrix,
                                       const double *b,
                                       size_t n,
                                       double rho,
                                       struct AsemProblem **out);

/**
 * Builds a matrix-free problem whose operator is applied through `matvec`.
 * `trace` is used for the first-order surrogate when finite; pass NaN to
 * have it estimated. `ctx` must outlive the problem handle.
 *
 * # Safety
 * `b` must be valid for `n` reads, `out` writable, and `matvec` must honour
 * the [`AsemMatvecFn`] contract.
 */
enum AsemStatus asem_problem_new_matvec(size_t n,
                                        AsemMatvecFn matvec,
                                        void *ctx,
                                        double trace,
                                        const double *b,
                                        double rho,
                                        struct AsemProblem **out);

/**
 * Dimension of the problem, 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t asem_problem_dim(const struct AsemProblem *problem);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void asem_problem_free(struct AsemProblem *problem);

/**
 * First-order model, `mu_1`, `m = 10`, Lanczos without restarts.
 */
struct AsemOptions asem_options_default(void);

/**
 * Solves with the approximate secular equation method. `options` may be
 * null for the defaults.
 *
 * # Safety
 * `problem` must be a live handle, `options` null or valid, `out` writable.
 */
enum AsemStatus asem_solve_asem(const struct AsemProblem *problem,
                                const struct AsemOptions *options,
                                struct AsemReport **out);

/**
 * Solves through a full eigendecomposition (diagonal or small dense).
 *
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum AsemStatus asem_solve_exact(const struct AsemProblem *problem, struct AsemReport **out);

/**
 * Solves the subproblem restricted to a `k`-dimensional Krylov subspace.
 *
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum AsemStatus asem_solve_krylov(const struct AsemProblem *problem,
                                  size_t k,
                                  struct AsemReport **out);

/**
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum AsemStatus asem_report_summary(const struct AsemReport *report, struct AsemSummary *out);

/**
 * Copies the solution into `x`, which must hold at least the problem
 * dimension.
 *
 * # Safety
 * `report` must be a live handle and `x` valid for `len` writes.
 */
enum AsemStatus asem_report_solution(const struct AsemReport *report, double *x, size_t len);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void asem_report_free(struct AsemReport *report);

/**
 * Copies the last error message on this thread into `buf` (NUL-terminated,
 * truncated to fit) and returns the full message length without the NUL.
 * Call with a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t asem_last_error(char *buf, size_t len);

/**
 * Static description of a status code.
 */
const char *asem_status_str(enum AsemStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASEM_H */
