#ifndef LINMED_H
#define LINMED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define LINMED_OK 0

#define LINMED_ERR_INVALID_ARGUMENT 1

#define LINMED_ERR_INTERNAL 2

#define LINMED_ERR_PARSE 3

#define LINMED_ERR_SCHEMA 4

#define LINMED_ERR_ESTIMATOR_UNDEFINED 5

#define LINMED_ERR_UNSUPPORTED 6

#define LINMED_ERR_CONFIG 7

#define LINMED_ERR_IO 8

#define LINMED_ERR_NULL_POINTER 9

#define LINMED_ERR_PANIC 10

/*
 Online ridge-regression state.
 */
typedef struct LinmedGram LinmedGram;

/*
 A bandit policy with its own random stream.
 */
typedef struct LinmedPolicy LinmedPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *linmed_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *linmed_version(void);

/*
 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
int32_t linmed_gram_new(uintptr_t dim, double lambda, struct LinmedGram **out_gram);

/*
 # Safety
 `gram` must be NULL or a handle from `linmed_gram_new` not yet freed.
 */
void linmed_gram_free(struct LinmedGram *gram);

/*
 # Safety
 `gram` must be a live handle and `arm` must point to `dim` doubles.
 */
int32_t linmed_gram_update(struct LinmedGram *gram,
                           const double *arm_coords,
                           uintptr_t dim,
                           double reward);

/*
 Writes `‖a‖²_{V⁻¹}`.

 # Safety
 `gram` must be a live handle, `arm` must point to `dim` doubles and
 `out_leverage` must be writable.
 */
int32_t linmed_gram_leverage(const struct LinmedGram *gram,
                             const double *arm_coords,
                             uintptr_t dim,
                             double *out_leverage);

/*
 Copies `θ̂` into `out_theta`, which must hold `dim` doubles.

 # Safety
 `gram` must be a live handle and `out_theta` must point to `dim`
 writable doubles.
 */
int32_t linmed_gram_theta_hat(const struct LinmedGram *gram, double *out_theta, uintptr_t dim);

/*
 Writes `log det V − log det λI` and the number of absorbed rounds.

 # Safety
 `gram` must be a live handle; out-pointers must be writable.
 */
int32_t linmed_gram_log_det_ratio(const struct LinmedGram *gram,
                                  double *out_log_det_ratio,
                                  uint64_t *out_rounds);

/*
 Writes the confidence radius `β` for guesses `sigma` and `s` under the
 default `δ_t = 1/(t+1)` schedule.

 # Safety
 `gram` must be a live handle and `out_beta` writable.
 */
int32_t linmed_gram_beta(const struct LinmedGram *gram, double sigma, double s, double *out_beta);

/*
 Approximate G-optimal design over `k` arms given row-major in `arms`.
 Writes one weight per arm into `out_weights`, the certificate
 `g(π) = max_a ‖a‖²_{M(π)⁻¹}` into `out_max_leverage` and the support
 budget into `out_tau`.

 # Safety
 `arms` must point to `k·dim` doubles, `out_weights` to `k` writable
 doubles; the scalar out-pointers must be writable.
 */
int32_t linmed_approx_design(const double *arms,
                             uintptr_t k,
                             uintptr_t dim,
                             double *out_weights,
                             double *out_max_leverage,
                             uintptr_t *out_tau);

/*
 Creates a policy by name (`LinMED-99`, `LinMED-90`, `LinMED-50`,
 `LinMEDNOPT`, `OFUL`, `LinTS-Freq`, `LinTS-Bayes`, `EXP2`) with noise guess
 `sigma`, norm guess `s`, regularizer `lambda` and EXP2 horizon `horizon`.
 A positive `mc_samples` makes Thompson sampling estimate propensities.

 # Safety
 `name` must be a NUL-terminated string and `out_policy` writable.
 */
int32_t linmed_policy_new(const char *name,
                          uintptr_t dim,
                          double sigma,
                          double s,
                          double lambda,
                          uintptr_t horizon,
                          uintptr_t mc_samples,
                          uint64_t seed,
                          struct LinmedPolicy **out_policy);

/*
 # Safety
 `policy` must be NULL or a handle from `linmed_policy_new` not yet freed.
 */
void linmed_policy_free(struct LinmedPolicy *policy);

/*
 Chooses among `k` row-major arms. Writes the chosen index and its
 propensity; the propensity is NaN when the policy cannot report one.

 # Safety
 `policy` must be a live handle, `arms` must point to `k·dim` doubles and
 the out-pointers must be writable.
 */
int32_t linmed_policy_decide(struct LinmedPolicy *policy,
                             const double *arms,
                             uintptr_t k,
                             uintptr_t dim,
                             uintptr_t *out_index,
                             double *out_propensity);

/*
 Feeds back the reward of a played arm.

 # Safety
 `policy` must be a live handle and `arm` must point to `dim` doubles.
 */
int32_t linmed_policy_observe(struct LinmedPolicy *policy,
                              const double *arm_coords,
                              uintptr_t dim,
                              double reward);

/*
 IPW estimate `(1/n)·Σ target[i]/propensity[i]·reward[i]`, where
 `target[i]` is the target policy's probability of the logged arm.

 # Safety
 The three input arrays must each hold `n` doubles and `out_estimate`
 must be writable.
 */
int32_t linmed_ipw_estimate(const double *propensities,
                            const double *rewards,
                            const double *target_probs,
                            uintptr_t n,
                            double *out_estimate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LINMED_H */
