#pragma once
#include <Eigen/Dense>

#include "core/grouped_design.hpp"

namespace gqr {

// Check loss rho_tau(u) = {tau - I(u <= 0)} u.
double check_loss(double u, double tau);
double check_loss_sum(const Eigen::VectorXd& u, double tau);

// Penalty lambda/n * sum_k w_k || Sigma_k^{1/2} beta_k ||_2 with w_1 = 0 so the
// intercept group is never penalized. Default weights are sqrt(p_k).
struct PenaltySpec {
  double lambda = 0.0;
  Eigen::VectorXd group_weights;

  static PenaltySpec grouped(const GroupedDesign& design, double lambda);
  void validate(const GroupedDesign& design) const;
};

struct ObjectiveParts {
  double loss = 0.0;     // (1/n) sum_i rho_tau(y_i - x_i' beta)
  double penalty = 0.0;  // (lambda/n) sum_k w_k ||Sigma_k^{1/2} beta_k||
  double total = 0.0;
};

ObjectiveParts objective_parts(const GroupedDesign& design, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& beta, double tau,
                               const PenaltySpec& penalty);
double objective_value(const GroupedDesign& design, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double tau, const PenaltySpec& penalty);

// argmin_x step * rho_tau(x) + 0.5 (x - v)^2
double prox_check(double v, double step, double tau);

// argmin_x threshold * ||x|| + 0.5 ||x - v||^2  (block soft-thresholding)
Eigen::VectorXd group_soft_threshold(const Eigen::VectorXd& v, double threshold);

// Knight's identity: rho_tau(u - v) - rho_tau(u) =
//   -v {tau - I(u <= 0)}  +  integral_0^v {I(u <= s) - I(u <= 0)} ds.
// Returns the two terms in closed form; the integral term is always >= 0.
struct KnightParts {
  double linear = 0.0;
  double integral = 0.0;
};
KnightParts knight_decomposition(double u, double v, double tau);

}  // namespace gqr
