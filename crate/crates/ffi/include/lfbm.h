#ifndef LFBM_H
#define LFBM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LfbmStatus {
  LFBM_STATUS_OK = 0,
  LFBM_STATUS_INVALID_PARAMETER = 1,
  LFBM_STATUS_GRID_MISMATCH = 2,
  LFBM_STATUS_DIMENSION_MISMATCH = 3,
  LFBM_STATUS_ILL_CONDITIONED = 4,
  LFBM_STATUS_NOT_POSITIVE_DEFINITE = 5,
  LFBM_STATUS_DIVERGENT = 6,
  LFBM_STATUS_MEMORY_GUARD = 7,
  LFBM_STATUS_CONFIG = 8,
  LFBM_STATUS_IO = 9,
  LFBM_STATUS_JSON = 10,
  LFBM_STATUS_NULL_POINTER = 11,
  LFBM_STATUS_BUFFER_TOO_SMALL = 12,
  LFBM_STATUS_PANIC = 13,
} LfbmStatus;

typedef enum LfbmSide {
  LFBM_SIDE_LEFT = 0,
  LFBM_SIDE_RIGHT = 1,
} LfbmSide;

typedef enum LfbmScheme {
  LFBM_SCHEME_CHOLESKY = 0,
  LFBM_SCHEME_MOVING_AVERAGE = 1,
} LfbmScheme;

// Liouville fBm paths, `n_paths × (n_cells + 1)` values.
typedef struct LfbmEnsemble LfbmEnsemble;

// Fractional integral matrix on a uniform grid starting at 0.
typedef struct LfbmKernel LfbmKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message (NUL terminated,
// truncated to fit) into `buf` and returns the full message length in
// bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t lfbm_last_error_message(char *buf, size_t len);

// `Cov(W(s), W(t))` of Liouville fBm with Hurst order `beta`.
//
// # Safety
// `out` must be valid for a write.
enum LfbmStatus lfbm_cov_liouville(double s, double t, double beta, double *out);

// Isometry norm of the step function with `n_cells` values on `(0, t_end)`.
//
// # Safety
// `values` must point to `n_cells` doubles and `out` must be valid for a write.
enum LfbmStatus lfbm_isometry_norm(double t_end,
                                   const double *values,
                                   size_t n_cells,
                                   double beta,
                                   double *out);

// Standard deviation of `∫_s^t (t-r)^{-alpha} dW(r)`.
//
// # Safety
// `out` must be valid for a write.
enum LfbmStatus lfbm_kernel_variance(double s, double t, double alpha, double beta, double *out);

// Variance at time `t` of the stochastic convolution of one heat mode
// with eigenvalue `lambda`.
//
// # Safety
// `out` must be valid for a write.
enum LfbmStatus lfbm_mode_variance(double lambda, double t, double beta, double *out);

// Builds the order-`order` fractional integral matrix on `n_cells` cells
// of `(0, t_end)`.
//
// # Safety
// `out` must be valid for a write; the handle is freed with
// [`lfbm_kernel_free`].
enum LfbmStatus lfbm_kernel_new(double t_end,
                                size_t n_cells,
                                double order,
                                enum LfbmSide side_,
                                struct LfbmKernel **out);

// Applies the integral to cell values, writing `n_cells` node values.
//
// # Safety
// `kernel` must come from [`lfbm_kernel_new`]; `values` must point to
// `n_cells` doubles and `out` to `out_len` writable doubles.
enum LfbmStatus lfbm_kernel_apply(const struct LfbmKernel *kernel,
                                  const double *values,
                                  size_t n_cells,
                                  double *out,
                                  size_t out_len);

// Solves for the cell values whose integral equals the given node values
// (the discrete fractional derivative).
//
// # Safety
// As for [`lfbm_kernel_apply`].
enum LfbmStatus lfbm_kernel_solve(const struct LfbmKernel *kernel,
                                  const double *node_values,
                                  size_t n_nodes,
                                  double *out,
                                  size_t out_len);

// # Safety
// `kernel` must be null or come from [`lfbm_kernel_new`], and is invalid
// afterwards.
void lfbm_kernel_free(struct LfbmKernel *kernel);

// Samples `n_paths` Liouville fBm paths on `n_cells` cells of `(0, t_end)`.
//
// # Safety
// `out` must be valid for a write; the handle is freed with
// [`lfbm_ensemble_free`].
enum LfbmStatus lfbm_ensemble_sample(double t_end,
                                     size_t n_cells,
                                     double beta,
                                     enum LfbmScheme scheme,
                                     size_t n_paths,
                                     uint64_t seed,
                                     struct LfbmEnsemble **out);

// Writes the number of paths and of nodes per path.
//
// # Safety
// `ensemble` must come from [`lfbm_ensemble_sample`]; the out pointers
// must be valid for writes.
enum LfbmStatus lfbm_ensemble_shape(const struct LfbmEnsemble *ensemble,
                                    size_t *n_paths,
                                    size_t *n_nodes);

// Copies path `index` (node values, starting with 0) into `out`.
//
// # Safety
// `ensemble` must come from [`lfbm_ensemble_sample`] and `out` must point
// to `out_len` writable doubles.
enum LfbmStatus lfbm_ensemble_path(const struct LfbmEnsemble *ensemble,
                                   size_t index,
                                   double *out,
                                   size_t out_len);

// Pathwise integral of a step function against every path, one value
// per path.
//
// # Safety
// `ensemble` must come from [`lfbm_ensemble_sample`]; `values` must point
// to `n_cells` doubles and `out` to `out_len` writable doubles.
enum LfbmStatus lfbm_ensemble_integrate(const struct LfbmEnsemble *ensemble,
                                        const double *values,
                                        size_t n_cells,
                                        double *out,
                                        size_t out_len);

// # Safety
// `ensemble` must be null or come from [`lfbm_ensemble_sample`], and is
// invalid afterwards.
void lfbm_ensemble_free(struct LfbmEnsemble *ensemble);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LFBM_H */
