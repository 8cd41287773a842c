#ifndef NPHKIT_H
#define NPHKIT_H

#include <stddef.h>
#include <stdint.h>

// Status codes returned by every function.
typedef enum NphStatus {
  NPH_STATUS_OK = 0,
  NPH_STATUS_NULL_POINTER = 1,
  NPH_STATUS_INVALID_INPUT = 2,
  NPH_STATUS_EMPTY_DATASET = 3,
  NPH_STATUS_SINGLE_ARM = 4,
  NPH_STATUS_DEGENERATE = 5,
  NPH_STATUS_NON_CONVERGENCE = 6,
  NPH_STATUS_MALFORMED_CSV = 7,
  NPH_STATUS_UNKNOWN_SCENARIO = 8,
  NPH_STATUS_IO = 9,
  NPH_STATUS_PANIC = 10,
} NphStatus;

typedef enum NphAftFamily {
  NPH_AFT_FAMILY_GENERALIZED_GAMMA = 0,
  NPH_AFT_FAMILY_GENERALIZED_F = 1,
} NphAftFamily;

// Opaque fitted generalized gamma or generalized F model.
typedef struct NphAftFit NphAftFit;

// Opaque right-censored two-arm dataset.
typedef struct NphDataset NphDataset;

// A test statistic with its two-sided p-value.
typedef struct NphTestResult {
  double statistic;
  double p_value;
} NphTestResult;

typedef struct NphRmstResult {
  double t_star;
  double rmst0;
  double rmst1;
  double delta;
  double se_delta;
  double z;
  double p_value;
} NphRmstResult;

typedef struct NphCoxResult {
  double beta;
  double se;
  double hazard_ratio;
  double p_value;
  int converged;
} NphCoxResult;

// Summary of an AFT fit. Fields that are unavailable are NaN.
typedef struct NphAftSummary {
  double beta0;
  double beta1;
  double sigma;
  // τ for the generalized gamma, q for the generalized F.
  double shape1;
  // p for the generalized F, NaN for the generalized gamma.
  double shape2;
  double se_beta1;
  double acceleration_factor;
  double wald_statistic;
  double wald_p;
  double loglik;
  int converged;
} NphAftSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or NULL. Valid until the
// next call into the library from the same thread.
const char *nph_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *nph_version(void);

// Builds a dataset from `n` records. `events` and `arms` hold 0 or 1.
//
// # Safety
// The three arrays must each hold `n` elements; `out` must be writable.
enum NphStatus nph_dataset_new(const double *times,
                               const uint8_t *events,
                               const uint8_t *arms,
                               uintptr_t n,
                               struct NphDataset **out);

// Reads a `time,event,arm` CSV file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum NphStatus nph_dataset_read_csv(const char *path, struct NphDataset **out);

// Simulates one trial from a builtin scenario.
//
// # Safety
// `scenario` must be a NUL-terminated string; `out` must be writable.
enum NphStatus nph_simulate_trial(const char *scenario, uint64_t seed, struct NphDataset **out);

// Releases a dataset. NULL is ignored.
//
// # Safety
// `ds` must come from this library and not be used afterwards.
void nph_dataset_free(struct NphDataset *ds);

// Number of records.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum NphStatus nph_dataset_len(const struct NphDataset *ds, uintptr_t *out);

// Fleming–Harrington G(rho, gamma) weighted log-rank test; (0, 0) is the log-rank test.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum NphStatus nph_weighted_logrank(const struct NphDataset *ds,
                                    double rho,
                                    double gamma,
                                    struct NphTestResult *out);

// MaxCombo test over G(1,0), G(0,1), G(1,1). Nonzero `identity_correlation`
// treats the components as independent.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum NphStatus nph_maxcombo(const struct NphDataset *ds,
                            int identity_correlation,
                            struct NphTestResult *out);

// Difference in restricted mean survival time, treatment minus control.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum NphStatus nph_rmst_difference(const struct NphDataset *ds, struct NphRmstResult *out);

// Cox proportional hazards fit with the treatment indicator as covariate.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum NphStatus nph_cox_fit(const struct NphDataset *ds, struct NphCoxResult *out);

// Fits a generalized gamma or generalized F AFT model.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum NphStatus nph_aft_fit(const struct NphDataset *ds,
                           enum NphAftFamily family,
                           struct NphAftFit **out);

// Releases a fit. NULL is ignored.
//
// # Safety
// `fit` must come from this library and not be used afterwards.
void nph_aft_fit_free(struct NphAftFit *fit);

// # Safety
// `fit` must be a live handle; `out` must be writable.
enum NphStatus nph_aft_fit_summary(const struct NphAftFit *fit, struct NphAftSummary *out);

// Fitted survival probability at `t` in arm 0 or 1.
//
// # Safety
// `fit` must be a live handle; `out` must be writable.
enum NphStatus nph_aft_fit_survival(const struct NphAftFit *fit,
                                    uint8_t arm,
                                    double t,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NPHKIT_H */
