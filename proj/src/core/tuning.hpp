#pragma once
#include <Eigen/Dense>
#include <cstdint>

#include "core/grouped_design.hpp"
#include "core/rng.hpp"

namespace gqr {

// Configuration for the simulation-based choice of the penalty level.
struct PivotConfig {
  double tau = 0.5;
  double theta = 0.1;  // tail level: lambda targets the (1 - theta)-quantile
  double c = 1.1;      // multiplier on the simulated quantile
  int n_sim = 2000;
  uint64_t seed = 0;

  void validate() const;
};

struct TuningResult {
  Eigen::VectorXd draws;          // n_sim simulated pivot values, in draw order
  double quantile_value = 0.0;    // empirical (1 - theta)-quantile of draws
  double lambda = 0.0;            // c * quantile_value
  bool tail_undersampled = false; // n_sim * theta < 1: too few draws above the quantile
  PivotConfig config;
};

// One realization of the pivot max_k |Sigma_k^{-1/2} X_k' xi| / sqrt(p_k) with
// xi_i = tau - B_i, B_i iid Bernoulli(tau). The max runs over every group,
// including the intercept, where the statistic reduces to |sum_i xi_i|. Its
// conditional law given the design is parameter-free, so quantiles can be
// simulated exactly.
double pivot_draw(const GroupedDesign& design, double tau, Rng& rng);

// n_sim pivot draws on independent substreams of config.seed, their empirical
// (1 - theta)-quantile by the "higher" rule (smallest draw whose empirical CDF
// reaches 1 - theta), and lambda = c * quantile. Deterministic given the seed
// regardless of evaluation order.
TuningResult select_lambda(const GroupedDesign& design, const PivotConfig& config);

// Tail-level schedule (max(e, q^{1/p_min}))^{-t^2}: decreasing in the
// divergence parameter t, always in (0, 1).
double theta_schedule(int n, int q, int p_min, double t);

}  // namespace gqr
