#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "core/grouped_design.hpp"

namespace gqr {

// Sampling configuration for the cone
//   C = { alpha : sum_{k not in S} sqrt(p_k) |alpha_k| <= c0 sum_{k in S} sqrt(p_k) |alpha_k| }.
struct ConeSampleConfig {
  double c0 = 4.0;
  std::vector<int> s_bar;  // active 1-based group ids; must contain group 1
  int n_samples = 10000;
  uint64_t seed = 0;

  void validate(const GroupPartition& partition) const;
};

// Heuristic restricted-eigenvalue estimates: min and max of the Rayleigh
// quotient sqrt(alpha' gram alpha / alpha' alpha) over random cone members.
// Sampling can only miss extremes, so phi_min is an UPPER bound estimate of
// the true restricted minimum and phi_max a LOWER bound estimate of the
// maximum. Never consumed by the solver.
struct RestrictedEigs {
  double phi_min = 0.0;
  double phi_max = 0.0;
};

RestrictedEigs estimate_restricted_eigs(const Eigen::MatrixXd& gram,
                                        const GroupPartition& partition,
                                        const ConeSampleConfig& config);

// max over non-intercept groups of the operator norm |Sigma_k^{1/2} - I| and
// whether every group stays within 0.5.
struct Omega0Result {
  bool holds = true;
  double max_deviation = 0.0;
};

Omega0Result omega0_check(const GroupedDesign& design);

// Reference value (4 sqrt(2) + Delta + A1) sqrt(n) + A2 sqrt(n log(q) / p_min).
// A theoretical upper-bound scale for the penalty, typically far above the
// simulated pivot quantile; reported for orientation only.
double theoretical_lambda(int n, int q, int p_min, double a1, double a2, double delta);

}  // namespace gqr
