#ifndef IIRL_H
#define IIRL_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Outcome of a call.
typedef enum IirlStatus {
  IIRL_STATUS_OK = 0,
  // A required pointer argument was null.
  IIRL_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  IIRL_STATUS_INVALID_UTF8 = 2,
  // Arguments were well formed but rejected (bad shape, out of range).
  IIRL_STATUS_INVALID_INPUT = 3,
  // JSON text could not be parsed into the expected object.
  IIRL_STATUS_PARSE = 4,
  IIRL_STATUS_IO = 5,
  // The problem has no feasible point (empty budget set, no masking).
  IIRL_STATUS_INFEASIBLE = 6,
  // An iterative solver stopped before reaching its tolerance.
  IIRL_STATUS_NON_CONVERGED = 7,
  // A quantity is undefined for these inputs (zero noise, degenerate pair...).
  IIRL_STATUS_NUMERICAL = 8,
  // Internal error. The library state is still usable.
  IIRL_STATUS_PANIC = 9,
} IirlStatus;

// Observed `(function, response)` pairs.
typedef struct IirlDataset IirlDataset;

// Solution of one masking problem.
typedef struct IirlMaskingResult IirlMaskingResult;

// Adversary utilities plus the true budget.
typedef struct IirlScenario IirlScenario;

// Scalar summary of a masking result.
typedef struct IirlMaskingSummary {
  double eta;
  double psi_true;
  double target;
  double psi_masked;
  double violation_norm;
  bool feasible;
  // The unmasked responses already failed the test; nothing was changed.
  bool degenerate;
  size_t horizon;
  size_t dim;
} IirlMaskingSummary;

// Objective callback: returns `u(x)` and writes the gradient into `grad`.
// Both arrays hold `m` values. Called on the thread that invoked the solver.
typedef double (*IirlObjective)(const double *x, size_t m, double *grad, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null after a
// successful one. Valid until the next call on the same thread.
const char *iirl_last_error_message(void);

// Library version as a static string.
const char *iirl_version(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void iirl_string_free(char *s);

// Parses a dataset from JSON text.
//
// # Safety
// `json` must be a nul-terminated string and the out-pointer valid.
enum IirlStatus iirl_dataset_from_json(const char *json, struct IirlDataset **out_ds);

// Reads a dataset file.
//
// # Safety
// `path` must be a nul-terminated string and the out-pointer valid.
enum IirlStatus iirl_dataset_load(const char *path, struct IirlDataset **out_ds);

// # Safety
// `ds` must come from this library and not have been freed. Null is ignored.
void iirl_dataset_free(struct IirlDataset *ds);

// Number of observations.
//
// # Safety
// Pointers must be valid.
enum IirlStatus iirl_dataset_horizon(const struct IirlDataset *ds, size_t *k);

// Response dimension.
//
// # Safety
// Pointers must be valid.
enum IirlStatus iirl_dataset_dim(const struct IirlDataset *ds, size_t *m);

// GARP on a utility-test dataset, with revealed-preference tolerance `tol`.
//
// # Safety
// Pointers must be valid.
enum IirlStatus iirl_garp_check(const struct IirlDataset *ds, double tol, bool *passes);

// Whether the Afriat inequalities admit a solution (the data are
// rationalized by a monotone concave utility).
//
// # Safety
// Pointers must be valid.
enum IirlStatus iirl_afriat_test(const struct IirlDataset *ds, bool *feasible);

// Whether a strategy-test dataset is consistent with some convex budget.
//
// # Safety
// Pointers must be valid.
enum IirlStatus iirl_strategy_test(const struct IirlDataset *ds, bool *feasible);

// Parses a scenario from JSON text.
//
// # Safety
// `json` must be a nul-terminated string and the out-pointer valid.
enum IirlStatus iirl_scenario_from_json(const char *json, struct IirlScenario **out_sc);

// Reads a scenario file.
//
// # Safety
// `path` must be a nul-terminated string and the out-pointer valid.
enum IirlStatus iirl_scenario_load(const char *path, struct IirlScenario **out_sc);

// # Safety
// `sc` must come from this library and not have been freed. Null is ignored.
void iirl_scenario_free(struct IirlScenario *sc);

// # Safety
// Pointers must be valid.
enum IirlStatus iirl_scenario_horizon(const struct IirlScenario *sc, size_t *k);

// # Safety
// Pointers must be valid.
enum IirlStatus iirl_scenario_dim(const struct IirlScenario *sc, size_t *m);

// Finds minimally violated thresholds that bring the strategy margin down
// to `(1 - eta)` of its true value. Default solver options.
//
// # Safety
// Pointers must be valid.
enum IirlStatus iirl_mask(const struct IirlScenario *sc,
                          double eta,
                          struct IirlMaskingResult **out_r);

// # Safety
// `r` must come from this library and not have been freed. Null is ignored.
void iirl_masking_result_free(struct IirlMaskingResult *r);

// # Safety
// Pointers must be valid.
enum IirlStatus iirl_masking_result_summary(const struct IirlMaskingResult *r,
                                            struct IirlMaskingSummary *summary);

// Copies the masked thresholds into `buf`, which holds `len` doubles and
// must have room for the horizon.
//
// # Safety
// `buf` must point to `len` writable doubles.
enum IirlStatus iirl_masking_result_thresholds(const struct IirlMaskingResult *r,
                                               double *buf,
                                               size_t len);

// Copies the masked responses, row-major `horizon x dim`.
//
// # Safety
// `buf` must point to `len` writable doubles.
enum IirlStatus iirl_masking_result_responses(const struct IirlMaskingResult *r,
                                              double *buf,
                                              size_t len);

// The full result as JSON. Free the string with [`iirl_string_free`].
//
// # Safety
// Pointers must be valid.
enum IirlStatus iirl_masking_result_to_json(const struct IirlMaskingResult *r, char **json);

// Upper bound on the probability that noise in the adversary's utility
// estimates defeats the masking, from Lipschitz constant `l`, spread
// `delta_max`, conditioning `kappa`, noise trace and horizon `k`.
//
// # Safety
// `bound` must be a valid pointer.
enum IirlStatus iirl_analytic_bound(double l,
                                    double delta_max,
                                    double kappa,
                                    double trace_sigma,
                                    size_t k,
                                    double *bound);

// Maximizes a concave `u` over `{x >= 0, price'x <= gamma}`.
//
// Writes the maximizer to `point` (`m` doubles) and optionally the optimal
// value and the budget multiplier (either may be null).
//
// # Safety
// `price` and `point` must hold `m` doubles; `f` must be safe to call with
// `user_data`.
enum IirlStatus iirl_maximize_linear_budget(IirlObjective f,
                                            void *user_data,
                                            const double *price,
                                            size_t m,
                                            double gamma,
                                            double *point,
                                            double *value,
                                            double *multiplier);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IIRL_H */
