#ifndef RBEIG_H
#define RBEIG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * ABI version of this header; bump on breaking changes.
 */
#define RBEIG_ABI_VERSION 1

/**
 * Status codes returned by every fallible call.
 */
typedef enum RbStatus {
  RbStatus_Ok = 0,
  RbStatus_NullArgument = 1,
  RbStatus_InvalidUtf8 = 2,
  RbStatus_LoadFailed = 3,
  RbStatus_InvalidParameter = 4,
  RbStatus_SolveFailed = 5,
  RbStatus_Panic = 6,
} RbStatus;

/**
 * Opaque reduced-basis model handle.
 */
typedef struct RbModel RbModel;

/**
 * Online solve results for one parameter.
 */
typedef struct RbSolveResult {
  /**
   * Effective multiplication factor `k_N`.
   */
  double k_eff;
  /**
   * Eigenvalue `lambda_N = 1/k_N`.
   */
  double lambda;
  /**
   * Residual norm of the direct problem.
   */
  double residual_direct;
  /**
   * Residual norm of the adjoint problem.
   */
  double residual_adjoint;
  /**
   * Eigenvalue estimator `eta_k`.
   */
  double eta_k;
  /**
   * Calibrated error estimate `delta_k`; NaN when uncalibrated.
   */
  double delta_k;
  /**
   * Power iteration counts (direct, adjoint).
   */
  uint32_t iterations_direct;
  uint32_t iterations_adjoint;
} RbSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

uint32_t rbeig_abi_version(void);

/**
 * Static description of a status code.
 */
const char *rbeig_status_message(enum RbStatus status);

/**
 * Loads artifacts produced by `rbeig offline` into a model handle.
 *
 * # Safety
 * `artifact_dir` must be a NUL-terminated string and `out` a valid pointer;
 * the returned handle must be released with [`rbeig_model_free`].
 */
enum RbStatus rbeig_model_load(const char *artifact_dir, struct RbModel **out);

/**
 * Releases a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must come from [`rbeig_model_load`] and not be freed twice.
 */
void rbeig_model_free(struct RbModel *model);

/**
 * Reduced-basis dimension of the loaded model.
 *
 * # Safety
 * `model` must be a live handle from [`rbeig_model_load`].
 */
uint32_t rbeig_model_basis_dim(const struct RbModel *model);

/**
 * Number of parameter subdomains the model expects.
 *
 * # Safety
 * `model` must be a live handle from [`rbeig_model_load`].
 */
uint32_t rbeig_model_subdomain_count(const struct RbModel *model);

/**
 * Solves the reduced eigenproblem at one parameter given as raw
 * coefficients: `f_coeffs` holds `6 * K` values `(D1, Sigma11, Sigma12, D2,
 * Sigma21, Sigma22)` per subdomain and `g_coeffs` `4 * K` fission products
 * `(chi1 nuSigf1, chi1 nuSigf2, chi2 nuSigf1, chi2 nuSigf2)`.
 *
 * # Safety
 * `model` must be a live handle; `f_coeffs` and `g_coeffs` must point to at
 * least `6 * K` and `4 * K` readable doubles; `out` must be valid.
 */
enum RbStatus rbeig_model_solve(const struct RbModel *model,
                                const double *f_coeffs,
                                const double *g_coeffs,
                                struct RbSolveResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RBEIG_H */
