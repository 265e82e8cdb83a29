#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "core/additive.hpp"
#include "core/grouped_design.hpp"
#include "core/rng.hpp"
#include "core/solver.hpp"

namespace gqr {

// Benchmark 1: linear model y = x'beta_bar + e on a correlated Gaussian
// design. x has an all-ones first column; the remaining p - 1 columns are
// jointly Gaussian with Toeplitz correlation ar_corr^|j - k|. The noise is
// e = N(0,1) - normal_quantile(tau), so P(e <= 0) = tau exactly and the
// conditional tau-quantile of y is x'beta_bar.
struct Model1Config {
  int n = 200;
  int q = 101;         // groups including the intercept
  int group_size = 5;  // columns per non-intercept group
  int scenario = 1;    // 1: first group fully active; 2: first coordinate of
                       //    each of the first five groups active
  double tau = 0.5;
  double ar_corr = 0.25;
  int n_reps = 100;
  std::uint64_t seed = 0;
  double theta = 0.1;  // pivotal tail level for tuned estimators
  double c = 1.1;      // pivotal quantile multiplier
  int n_sim = 2000;    // pivotal simulation draws
  int workers = 0;     // replication worker threads; 0 = hardware concurrency

  int p() const { return 1 + (q - 1) * group_size; }
  void validate() const;
};

struct Model1Data {
  Eigen::MatrixXd x;  // n x p, first column all ones
  Eigen::VectorXd y;
  Eigen::VectorXd beta_bar;
  GroupPartition partition;  // {1, group_size, ..., group_size}
};

// Caches the Cholesky factor of the Toeplitz correlation so repeated draws
// share the O(p^3) factorization. draw() is const and safe to call
// concurrently with distinct Rngs.
class Model1Generator {
 public:
  explicit Model1Generator(const Model1Config& config);
  Model1Data draw(Rng& rng) const;
  const Eigen::VectorXd& beta_bar() const { return beta_bar_; }

 private:
  Model1Config config_;
  Eigen::MatrixXd chol_;  // lower Cholesky factor, (p-1) x (p-1)
  Eigen::VectorXd beta_bar_;
};

Model1Data gen_model1(const Model1Config& config, Rng& rng);

// Benchmark 2: heteroscedastic additive model on z ~ Unif[-1,1]^d,
//   y = 0.1 + g1(z1) + g2(z2) + g3(z3) + 0.5 sigma(z) e,
//   g1(z) = z, g2(z) = cos(pi z), g3(z) = e(e^z - e + 1/e),
//   sigma^2(z) = 0.7 + 0.1 (z1^2 + z2^2 + z3^2),
// with the same quantile-centered noise, so the conditional tau-quantile of y
// is exactly the additive surface below.
struct Model2Config {
  int n = 400;
  int d = 100;
  double tau = 0.5;
  int knots = 4;  // interior knots of the cubic spline basis (m = knots + 3)
  int n_reps = 50;
  std::uint64_t seed = 0;
  double theta = 0.2;
  double c = 1.0;
  int n_sim = 2000;
  int n_mc = 20000;  // Monte-Carlo points for the function-space error
  int workers = 0;

  void validate() const;
};

struct Model2Data {
  Eigen::MatrixXd z;  // n x d, entries in [-1, 1]
  Eigen::VectorXd y;
};

Model2Data gen_model2(const Model2Config& config, Rng& rng);

// Conditional tau-quantile surface 0.1 + g1(z1) + g2(z2) + g3(z3); uses the
// first three coordinates of z.
double model2_quantile_surface(const Eigen::VectorXd& z);

enum class Estimator { grlasso, lasso, qr };

std::string estimator_name(Estimator est);
Estimator estimator_from_name(const std::string& name);

// Model-selection counts. NSG counts the intercept group unconditionally plus
// every other group with ||beta_k|| > 1e-6 max(1, ||beta||); NSV counts
// coefficients with |beta_j| > 1e-6 max(1, ||beta||_inf). Thresholds stand in
// for the exact zeros an interior-point solver would report.
struct SelectionCounts {
  int nsg = 0;
  int nsv = 0;
};

SelectionCounts selection_counts(const Eigen::VectorXd& beta, const GroupPartition& partition);

// Membership of alpha = beta_hat - beta_bar in the dominant-coordinate cone
//   sum_{k not in S} sqrt(p_k) ||alpha_k|| <= c0 sum_{k in S} sqrt(p_k) ||alpha_k||,
// where S holds the intercept group plus every group active in beta_bar.
// When no group beyond the intercept is active the test is vacuous and
// reports membership.
struct ConeCheck {
  bool in_cone = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

ConeCheck cone_diagnostic(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_bar,
                          const GroupPartition& partition, double c0);

// One (replication, estimator) outcome. err is ||beta_hat - beta_bar||_2 for
// the linear benchmark and the Monte-Carlo function-space L2 error for the
// additive one.
struct RepRecord {
  int rep = 0;
  std::string estimator;
  bool ok = false;  // false: the fit raised an error (excluded from aggregates)
  std::string error_message;
  bool converged = false;
  int iterations = 0;
  double relative_gap = 0.0;
  double lambda = 0.0;
  int nsg = 0;
  int nsv = 0;
  double err = 0.0;
  bool has_cone = false;  // cone diagnostic attached (grlasso, linear model)
  bool in_cone = false;
  double cone_lhs = 0.0;
  double cone_rhs = 0.0;
};

struct EstimatorSummary {
  std::string estimator;
  int n_ok = 0;
  int n_failed = 0;        // excluded replications
  int n_nonconverged = 0;  // aggregated but flagged
  double nsg_mean = 0.0;
  double nsg_sd = 0.0;
  double nsv_mean = 0.0;
  double nsv_sd = 0.0;
  double rmse = 0.0;    // sqrt(mean of squared errs)
  double err_sd = 0.0;  // sample sd of per-replication errs
  bool has_cone = false;
  double cone_fraction = 0.0;  // fraction of ok replications inside the cone
};

struct ExperimentReport {
  std::string model;        // "model1" | "model2"
  std::string config_json;  // echo of the generating configuration
  std::vector<EstimatorSummary> summaries;  // in requested estimator order
  std::vector<RepRecord> records;           // ordered by (rep, estimator)
  double wall_seconds = 0.0;  // measured, excluded from the serialized report
};

// Deterministic serializations: identical config + seed give byte-identical
// strings (wall_seconds is deliberately not serialized).
std::string report_to_json(const ExperimentReport& report);
std::string report_to_csv(const ExperimentReport& report);

// Runs n_reps replications across a worker pool: generate data, tune lambda
// per estimator (group weights for grlasso, singleton partition for lasso,
// none for qr), fit, and collect metrics. Every random stream is a substream
// of (seed, rep), so reports are bit-identical across runs, worker counts,
// and estimator subsets. When out_dir is nonempty writes report.json and
// table.csv (deterministic) plus timing.json (wall clock, not deterministic).
// A replication whose fit throws is recorded with ok = false and excluded
// from the aggregates; it is never retried.
ExperimentReport run_experiment(const Model1Config& config,
                                const std::vector<Estimator>& estimators,
                                const std::string& out_dir = "");
ExperimentReport run_experiment(const Model2Config& config,
                                const std::vector<Estimator>& estimators,
                                const std::string& out_dir = "");

}  // namespace gqr
