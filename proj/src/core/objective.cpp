#include "core/objective.hpp"

#include <cmath>

namespace gqr {

namespace {
void check_tau(double tau) {
  require(std::isfinite(tau) && tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument,
          "tau must lie in the open interval (0, 1)");
}
}  // namespace

double check_loss(double u, double tau) {
  check_tau(tau);
  require(!std::isnan(u), ErrorCode::invalid_argument, "check_loss: NaN input");
  return (u <= 0.0) ? (tau - 1.0) * u : tau * u;
}

double check_loss_sum(const Eigen::VectorXd& u, double tau) {
  check_tau(tau);
  require(!u.hasNaN(), ErrorCode::invalid_argument, "check_loss_sum: NaN input");
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    s += (u[i] <= 0.0) ? (tau - 1.0) * u[i] : tau * u[i];
  }
  return s;
}

PenaltySpec PenaltySpec::grouped(const GroupedDesign& design, double lambda) {
  PenaltySpec out;
  out.lambda = lambda;
  out.group_weights = Eigen::VectorXd(design.q());
  out.group_weights[0] = 0.0;
  for (int k = 1; k < design.q(); ++k) {
    out.group_weights[k] = std::sqrt(static_cast<double>(design.group_size(k)));
  }
  return out;
}

void PenaltySpec::validate(const GroupedDesign& design) const {
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::invalid_argument,
          "penalty lambda must be finite and nonnegative");
  require(group_weights.size() == design.q(), ErrorCode::dimension_mismatch,
          "penalty needs one group weight per group");
  require(group_weights.allFinite() && group_weights.minCoeff() >= 0.0,
          ErrorCode::invalid_argument, "group weights must be finite and nonnegative");
  require(group_weights[0] == 0.0, ErrorCode::invalid_argument,
          "the intercept group weight must be zero");
}

ObjectiveParts objective_parts(const GroupedDesign& design, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& beta, double tau,
                               const PenaltySpec& penalty) {
  check_tau(tau);
  penalty.validate(design);
  require(y.size() == design.n(), ErrorCode::dimension_mismatch, "objective: y length != n");
  require(beta.size() == design.p(), ErrorCode::dimension_mismatch,
          "objective: beta length != p");
  require(y.allFinite() && beta.allFinite(), ErrorCode::invalid_argument,
          "objective: non-finite inputs");

  const double n = static_cast<double>(design.n());
  ObjectiveParts parts;
  parts.loss = check_loss_sum(y - design.x() * beta, tau) / n;
  if (penalty.lambda > 0.0) {
    double s = 0.0;
    for (int k : design.partition().canonical_order()) {
      const double w = penalty.group_weights[k];
      if (w == 0.0) continue;
      s += w * (design.gram_sqrt(k) * design.group_segment(k, beta)).norm();
    }
    parts.penalty = penalty.lambda / n * s;
  }
  parts.total = parts.loss + parts.penalty;
  return parts;
}

double objective_value(const GroupedDesign& design, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double tau, const PenaltySpec& penalty) {
  return objective_parts(design, y, beta, tau, penalty).total;
}

double prox_check(double v, double step, double tau) {
  check_tau(tau);
  require(std::isfinite(v), ErrorCode::invalid_argument, "prox_check: non-finite input");
  require(std::isfinite(step) && step > 0.0, ErrorCode::invalid_argument,
          "prox_check: step must be positive");
  if (v > step * tau) return v - step * tau;
  if (v < -step * (1.0 - tau)) return v + step * (1.0 - tau);
  return 0.0;
}

Eigen::VectorXd group_soft_threshold(const Eigen::VectorXd& v, double threshold) {
  require(v.allFinite(), ErrorCode::invalid_argument, "group_soft_threshold: non-finite input");
  require(std::isfinite(threshold) && threshold >= 0.0, ErrorCode::invalid_argument,
          "group_soft_threshold: threshold must be nonnegative");
  const double norm = v.norm();
  if (norm <= threshold) return Eigen::VectorXd::Zero(v.size());
  return (1.0 - threshold / norm) * v;
}

KnightParts knight_decomposition(double u, double v, double tau) {
  check_tau(tau);
  require(std::isfinite(u) && std::isfinite(v), ErrorCode::invalid_argument,
          "knight_decomposition: non-finite inputs");
  KnightParts parts;
  const double ind = (u <= 0.0) ? 1.0 : 0.0;
  parts.linear = -v * (tau - ind);
  // integral_0^v {I(u <= s) - I(u <= 0)} ds, evaluated exactly: the integrand
  // is a 0/1 step with the jump at s = u.
  if (v >= 0.0) {
    parts.integral = (u > 0.0) ? std::max(0.0, v - u) : 0.0;
  } else {
    parts.integral = (u <= 0.0) ? std::max(0.0, u - v) : 0.0;
  }
  return parts;
}

}  // namespace gqr
