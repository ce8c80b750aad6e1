#ifndef CENSOR_LAB_H
#define CENSOR_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum CensorLabStatus {
  CENSOR_LAB_STATUS_OK = 0,
  CENSOR_LAB_STATUS_NULL_POINTER = 1,
  CENSOR_LAB_STATUS_DOMAIN = 2,
  CENSOR_LAB_STATUS_NUMERIC = 3,
  CENSOR_LAB_STATUS_EXISTENCE = 4,
  CENSOR_LAB_STATUS_VALIDATION = 5,
  CENSOR_LAB_STATUS_PROPERTY_VIOLATION = 6,
  CENSOR_LAB_STATUS_IO = 7,
  CENSOR_LAB_STATUS_INVALID_UTF8 = 8,
  CENSOR_LAB_STATUS_PANIC = 9,
} CensorLabStatus;

typedef enum CensorLabIndex {
  CENSOR_LAB_INDEX_RUNNING_MAX = 0,
  CENSOR_LAB_INDEX_RUNNING_MIN = 1,
  CENSOR_LAB_INDEX_RUNNING_AVERAGE = 2,
} CensorLabIndex;

/**
 * Tracker and market-rule state.
 */
typedef struct CensorLabMarket CensorLabMarket;

/**
 * Censoring problem.
 */
typedef struct CensorLabProblem CensorLabProblem;

typedef struct CensorLabSentiment {
  double v_star;
  double prob_good;
  double prob_bad;
  double e_star;
  double discount;
} CensorLabSentiment;

typedef struct CensorLabEstimate {
  double mean;
  double std_error;
  uint64_t n;
} CensorLabEstimate;

typedef struct CensorLabSolution {
  double l_vt;
  double residual;
  uint64_t iterations;
  double n_term;
  double s1_term;
  double s2_term;
} CensorLabSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *censor_lab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *censor_lab_version(void);

/**
 * `Q(max_{[0,h]} (mu w + sigma W_w) >= a)`; NaN on invalid input.
 */
double censor_lab_running_max_tail(double mu, double sigma, double a, double h);

/**
 * `Q(min_{[0,h]} (mu w + sigma W_w) >= a)`; NaN on invalid input.
 */
double censor_lab_running_min_survival(double mu, double sigma, double a, double h);

/**
 * Market state; `signature` is +1 (good news) or -1 (bad news), `mu` the
 * log drift of the tracker.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum CensorLabStatus censor_lab_market_new(double s_star_t,
                                           double vt,
                                           double vc,
                                           int signature_sign,
                                           double markup,
                                           double r,
                                           double t,
                                           double t1,
                                           double mu,
                                           double sigma,
                                           enum CensorLabIndex performance_index,
                                           struct CensorLabMarket **out_market);

/**
 * # Safety
 * `market` must come from [`censor_lab_market_new`] and not be freed twice.
 */
void censor_lab_market_free(struct CensorLabMarket *market);

/**
 * Closed-form probability that the index reaches the trigger level.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CensorLabStatus censor_lab_trigger_probability(const struct CensorLabMarket *market,
                                                    double *out_p);

/**
 * Sentiment value of a silent firm.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CensorLabStatus censor_lab_sentiment_value(const struct CensorLabMarket *market,
                                                struct CensorLabSentiment *out_value);

/**
 * Monte Carlo estimate of the trigger probability.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CensorLabStatus censor_lab_mc_trigger_probability(const struct CensorLabMarket *market,
                                                       uint64_t n_paths,
                                                       uint64_t steps_per_unit,
                                                       uint64_t seed,
                                                       uint64_t batches,
                                                       struct CensorLabEstimate *out_estimate);

/**
 * Censoring problem on `[window_start, window_end]` for a unit-start firm
 * with log drift `mu`. `intervals` holds `n_intervals` (start, end) pairs.
 *
 * # Safety
 * `intervals` must hold `2 * n_intervals` values and `times` `n_times`
 * values; `out_problem` must be valid.
 */
enum CensorLabStatus censor_lab_problem_new(double window_start,
                                            double window_end,
                                            const double *intervals,
                                            uintptr_t n_intervals,
                                            const double *times,
                                            uintptr_t n_times,
                                            int signature_sign,
                                            double markup,
                                            double mu,
                                            double sigma,
                                            double vt_label,
                                            struct CensorLabProblem **out_problem);

/**
 * Censoring problem from the JSON layout used by scenario files.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_problem` must be valid.
 */
enum CensorLabStatus censor_lab_problem_from_json(const char *json,
                                                  struct CensorLabProblem **out_problem);

/**
 * # Safety
 * `problem` must come from a `censor_lab_problem_*` constructor and not be
 * freed twice.
 */
void censor_lab_problem_free(struct CensorLabProblem *problem);

/**
 * Solve for the optimal censor. Existence failures name the failed
 * conditions in the last-error message.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CensorLabStatus censor_lab_solve_censor(const struct CensorLabProblem *problem,
                                             double tol,
                                             struct CensorLabSolution *out_solution);

/**
 * Cobb-Douglas profit for technology `technology · x1^a x2^b`.
 *
 * # Safety
 * `out_profit` must be valid.
 */
enum CensorLabStatus censor_lab_cobb_douglas_profit(double a,
                                                    double b,
                                                    double p,
                                                    double w1,
                                                    double w2,
                                                    double technology,
                                                    double *out_profit);

/**
 * Run a scenario file and return the CLI exit code (0, 2 or 3). The
 * diagnostic of a failed run is the last-error message.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
int censor_lab_run_scenario(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CENSOR_LAB_H */
