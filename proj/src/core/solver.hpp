#pragma once
#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "core/grouped_design.hpp"
#include "core/objective.hpp"

namespace gqr {

struct SolverOptions {
  int max_iter = 20000;  // total iteration budget, shared across working-set rounds
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;  // convergence requires certified gap/(1+|n F|) <= rel_tol
  double rho = 1.0;       // ADMM penalty parameter
  bool adapt_rho = true;  // residual balancing: x2 / /2 when residuals diverge by 10x
  int rho_freeze_iter = 2000;  // stop rebalancing after this many iterations (persistent
                               // rescaling of the scaled duals can settle into a limit cycle)
  double over_relax = 1.0;        // 1.0 = plain ADMM
  bool working_set = true;        // solve via certified working sets when many groups
  int certificate_interval = 50;  // iterations between duality-gap evaluations
  double group_zero_tol = 1e-6;   // scale of the selected-group threshold
  double ridge_eps = 1e-10;       // scale of the singular-system ridge fallback

  void validate() const;
};

// Feasible point of the dual program
//   max y'a  s.t.  a in [tau-1, tau]^n, 1'a = 0,
//                  Sigma_k^{1/2} b_k = X_k' a, ||b_k|| <= lambda w_k,
// with X_k' a = 0 forced for every unpenalized group. By weak duality
// n F(beta) - y'a >= 0 for every beta, so gap certifies suboptimality.
struct DualCertificate {
  double gap = std::numeric_limits<double>::infinity();  // n F(beta) - y'a
  Eigen::VectorXd a;  // n-vector
  Eigen::VectorXd b;  // p-vector, group duals stacked by column position
  bool feasible = false;
};

struct QuantileFit {
  Eigen::VectorXd beta;
  double tau = 0.5;
  double lambda = 0.0;
  double objective = 0.0;  // (1/n) sum rho_tau + (lambda/n) sum w_k ||.||, at beta
  double loss_term = 0.0;
  double penalty_term = 0.0;
  double duality_gap = 0.0;   // absolute, on the n-scaled problem
  double relative_gap = 0.0;  // duality_gap / (1 + |n * objective|)
  int iterations = 0;
  bool converged = false;
  double ridge_used = 0.0;  // ridge added to the beta-update system, 0 if none
  double rho_final = 0.0;
  std::vector<int> selected_groups;  // 1-based group ids; group 1 always present
  Eigen::VectorXd residuals;         // y - X beta
  Eigen::VectorXd dual_a;            // certificate achieving the reported gap
};

// Penalized fit by ADMM over the splitting (beta; r = y - X beta;
// theta_k = Sigma_k^{1/2} beta_k). The beta-update normal matrix
// X'X + blockdiag(Sigma_k) is factorized once. Deterministic given
// (design, y, tau, penalty, options); safe to run concurrently on a shared
// design. Declares convergence only when a dual certificate shows
// relative duality gap <= rel_tol; otherwise returns the best iterate with
// converged = false and the last certified gap.
QuantileFit fit(const GroupedDesign& design, const Eigen::VectorXd& y, double tau,
                const PenaltySpec& penalty, const SolverOptions& options = {});

// lambda = 0. The duality gap is certified against the dual with every group
// constraint tightened to X_k' a = 0.
QuantileFit fit_unpenalized(const GroupedDesign& design, const Eigen::VectorXd& y, double tau,
                            const SolverOptions& options = {});

// All-singletons penalty sum_j lambda s_j |beta_j| with s_j the column scale:
// delegates to fit() on the singleton repartition of the same columns.
QuantileFit fit_l1(const GroupedDesign& design, const Eigen::VectorXd& y, double tau,
                   double lambda, const SolverOptions& options = {});

// Projects a_seed onto the dual feasible set (clip to the box, project onto
// the equality span, then shrink globally for violated cone bounds) and
// returns the certified gap at beta. Never returns an infeasible certificate:
// if feasibility cannot be reached the gap is +infinity.
DualCertificate dual_certificate(const GroupedDesign& design, const Eigen::VectorXd& y,
                                 double tau, const PenaltySpec& penalty,
                                 const Eigen::VectorXd& beta, const Eigen::VectorXd& a_seed);

// Smallest lambda at which the intercept-only solution is optimal:
// max_k ||Sigma_k^{-1/2} X_k' a*|| / w_k over penalized groups, with a* the
// exact dual-optimal vector of the intercept-only problem. Weights default to
// sqrt(p_k).
double lambda_max(const GroupedDesign& design, const Eigen::VectorXd& y, double tau,
                  const Eigen::VectorXd* group_weights = nullptr);

// Explicit second-order-cone data of the n-scaled primal
//   min tau 1'eta+ + (1-tau) 1'eta- + sum_k lambda_k v_k
//   s.t. X beta + eta+ - eta- = y, ||Sigma_k^{1/2} beta_k|| <= v_k, eta >= 0,
// laid out so a generic conic solver can consume it. Variable stacking:
// z = (beta [p], v [one per cone, canonical group order], eta+ [n], eta- [n]).
struct SocpProblem {
  int n = 0;
  int p = 0;
  double tau = 0.5;
  Eigen::VectorXd cost;    // length p + #cones + 2n
  Eigen::MatrixXd eq_lhs;  // n rows: X beta + eta+ - eta- = y
  Eigen::VectorXd eq_rhs;  // y
  struct Cone {
    int group = 0;    // group index in the design partition
    int v_index = 0;  // index of the epigraph scalar within z
    std::vector<int> beta_cols;
    Eigen::MatrixXd sqrt_block;  // Sigma_k^{1/2}
    double lambda_k = 0.0;       // objective weight; dual bound ||b_k|| <= lambda_k
  };
  std::vector<Cone> cones;
  // Dual description: maximize y'a over a in [tau-1, tau]^n with 1'a = 0,
  // Sigma_k^{1/2} b_k = X_k' a and ||b_k|| <= lambda_k per cone, X_k' a = 0
  // for groups without a cone.

  int num_vars() const { return p + static_cast<int>(cones.size()) + 2 * n; }
  double primal_objective(const Eigen::VectorXd& z) const;
  // Max violation over the equality rows, the cones, and eta >= 0.
  double primal_infeasibility(const Eigen::VectorXd& z) const;
};

SocpProblem assemble_socp(const GroupedDesign& design, const Eigen::VectorXd& y, double tau,
                          const PenaltySpec& penalty);

}  // namespace gqr
