#ifndef GQR_H
#define GQR_H

/*
 * C interface to the grouped quantile regression library.
 *
 * Conventions:
 *   - Every fallible call returns gqr_status; GQR_OK is 0.
 *   - On failure, gqr_last_error() returns a thread-local message describing
 *     the most recent failing call on this thread.
 *   - Strings returned through char** are heap-allocated; release them with
 *     gqr_string_free. Handles are released with their matching *_free.
 *   - Designs are the user's covariates with an intercept column prepended
 *     internally; group sizes therefore describe the augmented design and
 *     always start with the intercept group of size 1.
 */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gqr_status {
  GQR_OK = 0,
  GQR_ERROR_INVALID_ARGUMENT = 1,
  GQR_ERROR_DIMENSION_MISMATCH = 2,
  GQR_ERROR_SINGULAR = 3,
  GQR_ERROR_NUMERIC = 4,
  GQR_ERROR_IO = 5,
  GQR_ERROR_INTERNAL = 6
} gqr_status;

const char* gqr_version(void);

/* Message of the most recent failing call on this thread; "" when none. */
const char* gqr_last_error(void);

void gqr_string_free(char* text);

/* ---------------- data ---------------- */

typedef struct gqr_dataset gqr_dataset;

/* Reads a numeric CSV (optional header row, auto-detected). response selects
 * the response column by header name or zero-based index in text form;
 * NULL or "" selects the first column. The remaining columns become the
 * covariates, in file order. */
gqr_status gqr_dataset_read_csv(const char* path, const char* response, gqr_dataset** out);

/* y: n responses; x: n*d covariate values, column-major. */
gqr_status gqr_dataset_create(int n, int d, const double* y, const double* x,
                              gqr_dataset** out);

int gqr_dataset_rows(const gqr_dataset* data);
int gqr_dataset_covariates(const gqr_dataset* data);
void gqr_dataset_free(gqr_dataset* data);

/* Reads a group-sizes sidecar file: positive integers separated by commas or
 * whitespace, describing the intercept-augmented design (first size 1).
 * *sizes_out receives a heap array of *count_out entries; release it with
 * gqr_ints_free. */
gqr_status gqr_read_group_sizes(const char* path, int** sizes_out, int* count_out);

void gqr_ints_free(int* values);

/* ---------------- penalized fits ---------------- */

typedef struct gqr_model gqr_model;

/* Fits the grouped quantile regression
 *   min (1/n) sum_i rho_tau(y_i - x_i'beta)
 *       + (lambda/n) sum_k w_k |Sigma_k^{1/2} beta_k|
 * with w_k = sqrt(group size), the intercept group unpenalized. group_sizes
 * (length n_groups) partitions the intercept-augmented design: first size 1,
 * total 1 + covariates. Pass NULL/0 for singleton groups (an L1 fit). With
 * unpenalized nonzero, lambda is ignored and no penalty is applied. */
gqr_status gqr_fit(const gqr_dataset* data, const int* group_sizes, int n_groups, double tau,
                   double lambda, int unpenalized, gqr_model** out);

int gqr_model_num_coefficients(const gqr_model* model);
/* beta receives gqr_model_num_coefficients values (intercept first). */
gqr_status gqr_model_coefficients(const gqr_model* model, double* beta);
double gqr_model_objective(const gqr_model* model);
double gqr_model_relative_gap(const gqr_model* model);
int gqr_model_iterations(const gqr_model* model);
int gqr_model_converged(const gqr_model* model);
int gqr_model_num_selected_groups(const gqr_model* model);

/* JSON record: beta, selected 1-based groups, objective decomposition,
 * certified duality gap, iteration count, and the solver options echo. */
gqr_status gqr_model_to_json(const gqr_model* model, char** json);
void gqr_model_free(gqr_model* model);

/* ---------------- penalty-level selection ---------------- */

/* Simulates the pivotal statistic of the grouped design under Bernoulli(tau)
 * sign draws and sets *lambda = c * empirical (1-theta)-quantile of n_sim
 * draws. json (may be NULL) receives the full tuning record including the
 * draws. Group sizes follow the gqr_fit convention. */
gqr_status gqr_tune(const gqr_dataset* data, const int* group_sizes, int n_groups, double tau,
                    double theta, double c, int n_sim, unsigned long long seed, double* lambda,
                    char** json);

/* ---------------- additive models ---------------- */

typedef struct gqr_additive_model gqr_additive_model;

/* Sparse additive quantile regression: each covariate is expanded in a
 * centered basis and the expansion blocks are penalized groupwise. family is
 * "bspline" (m_or_knots = interior knots, m = knots + 3 functions) or
 * "fourier" (m_or_knots = function count, even). Domains come from the data
 * columns. lambda_override < 0 selects lambda by the pivotal rule with
 * (theta, c, n_sim, seed); otherwise the override is used as given. */
gqr_status gqr_additive_fit(const gqr_dataset* data, double tau, const char* family,
                            int m_or_knots, double theta, double c, int n_sim,
                            unsigned long long seed, double lambda_override,
                            gqr_additive_model** out);

/* Evaluates the fitted additive quantile surface at a d-vector z (clamping
 * coordinates to their basis domains). */
gqr_status gqr_additive_predict(const gqr_additive_model* model, const double* z, int d,
                                double* value);

/* JSON record: basis spec (family, counts, domains), beta, lambda, selected
 * covariates, tuning record when tuned, and fit diagnostics. */
gqr_status gqr_additive_to_json(const gqr_additive_model* model, char** json);
void gqr_additive_free(gqr_additive_model* model);

/* ---------------- simulation benchmarks ---------------- */

/* Runs the built-in benchmark experiments and (optionally) writes
 * report.json, table.csv, and timing.json into out_dir. config_json:
 *   {"model": 1, "tau": 0.5, "n": 200, "reps": 100, "seed": 42,
 *    "scenario": 1, "q": 101, "group_size": 5,          // model 1
 *    "d": 100, "knots": 4, "n_mc": 20000,               // model 2
 *    "theta": ..., "c": ..., "n_sim": ..., "workers": ...,
 *    "estimators": ["grlasso", "lasso", "qr"]}
 * Unknown keys are rejected. json (may be NULL) receives the deterministic
 * report; out_dir may be NULL to skip file output. */
gqr_status gqr_simulate(const char* config_json, const char* out_dir, char** json);

/* ---------------- design diagnostics ---------------- */

/* Samples the dominant-coordinate cone of the grouped design to estimate the
 * restricted eigenvalue range, and checks the per-group Gram square-root
 * deviation from the identity. active_groups lists assumed-active 1-based
 * group ids (the intercept group 1 must be included); n_samples <= 0 uses
 * the default sample count. */
gqr_status gqr_diag(const gqr_dataset* data, const int* group_sizes, int n_groups, double c0,
                    const int* active_groups, int n_active, int n_samples,
                    unsigned long long seed, char** json);

#ifdef __cplusplus
}
#endif

#endif /* GQR_H */
