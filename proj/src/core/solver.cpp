#include "core/solver.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace gqr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void SolverOptions::validate() const {
  require(max_iter >= 1, ErrorCode::invalid_argument, "max_iter must be >= 1");
  require(abs_tol > 0.0 && rel_tol > 0.0, ErrorCode::invalid_argument,
          "tolerances must be positive");
  require(rho > 0.0 && std::isfinite(rho), ErrorCode::invalid_argument,
          "rho must be positive");
  require(over_relax > 0.0 && over_relax < 2.0, ErrorCode::invalid_argument,
          "over_relax must lie in (0, 2)");
  require(rho_freeze_iter >= 0, ErrorCode::invalid_argument,
          "rho_freeze_iter must be nonnegative");
  require(certificate_interval >= 1, ErrorCode::invalid_argument,
          "certificate_interval must be >= 1");
  require(group_zero_tol > 0.0, ErrorCode::invalid_argument, "group_zero_tol must be positive");
  require(ridge_eps >= 0.0, ErrorCode::invalid_argument, "ridge_eps must be nonnegative");
}

namespace {

void check_fit_inputs(const GroupedDesign& design, const VectorXd& y, double tau,
                      const PenaltySpec& penalty, const SolverOptions& options) {
  require(std::isfinite(tau) && tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument,
          "tau must lie in the open interval (0, 1)");
  require(y.size() == design.n(), ErrorCode::dimension_mismatch, "y length != n");
  require(y.allFinite(), ErrorCode::invalid_argument, "y contains non-finite entries");
  penalty.validate(design);
  options.validate();
}

// Layout of the penalized groups (lambda * w_k > 0) with their theta/v blocks
// stacked into one vector, iterated in canonical group order.
struct PenalizedLayout {
  std::vector<int> groups;
  std::vector<int> offset;     // into the stacked arrays
  std::vector<int> start_col;  // first design column when contiguous, else -1
  std::vector<double> lam;     // lambda * w_k
  int dim = 0;
  bool all_singletons = true;

  static PenalizedLayout build(const GroupedDesign& design, const PenaltySpec& penalty) {
    PenalizedLayout out;
    for (int k : design.partition().canonical_order()) {
      const double lk = penalty.lambda * penalty.group_weights[k];
      if (lk <= 0.0) continue;
      out.groups.push_back(k);
      out.offset.push_back(out.dim);
      out.lam.push_back(lk);
      const auto& cols = design.group_cols(k);
      bool contiguous = true;
      for (size_t i = 1; i < cols.size(); ++i) {
        if (cols[i] != cols[i - 1] + 1) contiguous = false;
      }
      out.start_col.push_back(contiguous ? cols[0] : -1);
      if (cols.size() != 1) out.all_singletons = false;
      out.dim += static_cast<int>(cols.size());
    }
    return out;
  }
};

// Cached LDLT of the beta-update normal matrix with the documented ridge
// fallback for singular systems.
struct NormalSolver {
  Eigen::LDLT<MatrixXd> ldlt;
  double ridge = 0.0;

  void build(MatrixXd m, double ridge_eps) {
    const Index p = m.rows();
    const double base = ridge_eps * m.trace() / static_cast<double>(p);
    double added = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
      ldlt.compute(m);
      if (ldlt.info() == Eigen::Success && probe_ok(m)) {
        ridge = added;
        return;
      }
      const double step = (added == 0.0) ? std::max(base, 1e-300) : added * 999.0;
      m.diagonal().array() += step;
      added += step;
    }
    fail(ErrorCode::singular, "beta-update system is singular; ridge fallback failed");
  }

  void solve_into(VectorXd& x) const { ldlt.solveInPlace(x); }

 private:
  // m is PSD by construction, so rank deficiency shows up directly as a
  // vanishing (or slightly negative) LDLT pivot.
  bool probe_ok(const MatrixXd&) const {
    const VectorXd dvec = ldlt.vectorD();
    const double dmax = dvec.maxCoeff();
    if (!(dmax > 0.0) || !dvec.allFinite()) return false;
    return dvec.minCoeff() > 1e-12 * dmax;
  }
};

// Exact solution of the intercept-only problem min_mu sum_i rho_tau(y_i - mu)
// together with its dual optimum: max y'a over 1'a = 0, a in [tau-1, tau]^n.
// a_i = tau above mu, tau-1 below, ties share the balancing remainder.
struct InterceptDual {
  VectorXd a;
  double mu = 0.0;
};

InterceptDual intercept_dual_optimum(const VectorXd& y, double tau) {
  const Index n = y.size();
  std::vector<double> sorted(y.data(), y.data() + n);
  std::sort(sorted.begin(), sorted.end());
  InterceptDual out;
  out.a.resize(n);
  for (Index i = 0; i < n; ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    const double mu = sorted[i];
    Index below = 0, ties = 0;
    for (Index j = 0; j < n; ++j) {
      below += (y[j] < mu) ? 1 : 0;
      ties += (y[j] == mu) ? 1 : 0;
    }
    const Index above = n - below - ties;
    const double needed =
        -(tau * static_cast<double>(above) + (tau - 1.0) * static_cast<double>(below));
    const double td = static_cast<double>(ties);
    if (needed >= td * (tau - 1.0) - 1e-12 && needed <= td * tau + 1e-12) {
      const double tie_value = std::clamp(needed / td, tau - 1.0, tau);
      for (Index j = 0; j < n; ++j) {
        out.a[j] = (y[j] > mu) ? tau : (y[j] < mu) ? tau - 1.0 : tie_value;
      }
      out.mu = mu;
      return out;
    }
  }
  fail(ErrorCode::internal, "no balancing quantile found");
}

// Dual-feasibility machinery shared by the public dual_certificate and the
// in-loop convergence checks. Built once per fit: the projection basis for the
// equality columns (the intercept plus every unpenalized group) is cached.
class CertificateContext {
 public:
  CertificateContext(const GroupedDesign& design, double tau, const PenaltySpec& penalty)
      : design_(design), tau_(tau) {
    std::vector<int> eq_cols;
    for (int k : design.partition().canonical_order()) {
      const double lk = penalty.lambda * penalty.group_weights[k];
      if (k == 0 || lk <= 0.0) {
        for (int c : design.group_cols(k)) eq_cols.push_back(c);
      } else {
        cone_groups_.push_back(k);
        cone_lambda_.push_back(lk);
      }
    }
    intercept_only_eq_ = (eq_cols.size() == 1);
    if (!intercept_only_eq_) {
      MatrixXd e(design.n(), eq_cols.size());
      for (size_t j = 0; j < eq_cols.size(); ++j) {
        e.col(static_cast<Index>(j)) = design.x().col(eq_cols[j]);
      }
      Eigen::ColPivHouseholderQR<MatrixXd> qr(e);
      qr.setThreshold(1e-12);
      const Index rank = qr.rank();
      eq_spans_everything_ = (rank >= design.n());
      if (!eq_spans_everything_) {
        MatrixXd qfull = qr.householderQ();
        q_ = qfull.leftCols(rank);
      }
    }
  }

  // n_objective = n * F(beta) for the beta the gap certifies.
  DualCertificate run(const VectorXd& y, double n_objective, VectorXd a) const {
    const double lo = tau_ - 1.0, hi = tau_;
    DualCertificate cert;
    if (!a.allFinite()) a.setZero();
    if (eq_spans_everything_) {
      a.setZero();
    } else {
      for (int it = 0; it < 300; ++it) {
        a = a.cwiseMax(lo).cwiseMin(hi);
        project_eq(a);
        const double viol = std::max(0.0, std::max(a.maxCoeff() - hi, lo - a.minCoeff()));
        if (viol <= 1e-14) break;
      }
      project_eq(a);
      // Scale toward 0 to restore the box exactly; 0 is interior to the box
      // and the equality span is linear, so feasibility of both is exact.
      double s = 1.0;
      for (Index i = 0; i < a.size(); ++i) {
        if (a[i] > hi) {
          s = std::min(s, hi / a[i]);
        } else if (a[i] < lo) {
          s = std::min(s, lo / a[i]);
        }
      }
      a *= s;
    }

    // Group duals; shrink a globally when a cone bound is violated.
    VectorXd b = VectorXd::Zero(design_.p());
    double shrink = 1.0;
    std::vector<VectorXd> bks(cone_groups_.size());
    for (size_t i = 0; i < cone_groups_.size(); ++i) {
      const int k = cone_groups_[i];
      bks[i] = design_.gram_sqrt_pinv(k) * (design_.group_x(k).transpose() * a);
      const double norm = bks[i].norm();
      if (norm > cone_lambda_[i]) shrink = std::min(shrink, cone_lambda_[i] / norm);
    }
    if (shrink < 1.0) {
      a *= shrink;
      for (auto& bk : bks) bk *= shrink;
    }
    for (size_t i = 0; i < cone_groups_.size(); ++i) {
      design_.scatter_group(cone_groups_[i], bks[i], b);
    }

    if (!a.allFinite() || !feasible_within_tolerance(a)) {
      cert.a = std::move(a);
      cert.b = std::move(b);
      return cert;  // gap stays +inf, feasible stays false
    }
    cert.a = std::move(a);
    cert.b = std::move(b);
    cert.feasible = true;
    cert.gap = n_objective - y.dot(cert.a);
    return cert;
  }

 private:
  void project_eq(VectorXd& a) const {
    if (intercept_only_eq_) {
      a.array() -= a.mean();
    } else {
      a.noalias() -= q_ * (q_.transpose() * a);
    }
  }

  bool feasible_within_tolerance(const VectorXd& a) const {
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if (a.maxCoeff() > tau_ + 1e-12 * scale) return false;
    if (a.minCoeff() < tau_ - 1.0 - 1e-12 * scale) return false;
    if (intercept_only_eq_) {
      return std::abs(a.sum()) <= 1e-9 * static_cast<double>(a.size()) * scale;
    }
    if (eq_spans_everything_) return a.cwiseAbs().maxCoeff() == 0.0;
    return (q_.transpose() * a).cwiseAbs().maxCoeff() <= 1e-9 * scale;
  }

  const GroupedDesign& design_;
  double tau_;
  std::vector<int> cone_groups_;
  std::vector<double> cone_lambda_;
  bool intercept_only_eq_ = false;
  bool eq_spans_everything_ = false;
  MatrixXd q_;
};

}  // namespace

DualCertificate dual_certificate(const GroupedDesign& design, const VectorXd& y, double tau,
                                 const PenaltySpec& penalty, const VectorXd& beta,
                                 const VectorXd& a_seed) {
  check_fit_inputs(design, y, tau, penalty, SolverOptions{});
  require(beta.size() == design.p(), ErrorCode::dimension_mismatch,
          "dual_certificate: beta length != p");
  require(a_seed.size() == design.n(), ErrorCode::dimension_mismatch,
          "dual_certificate: a_seed length != n");
  const double n_obj =
      static_cast<double>(design.n()) * objective_parts(design, y, beta, tau, penalty).total;
  CertificateContext ctx(design, tau, penalty);
  return ctx.run(y, n_obj, a_seed);
}

namespace {

struct WarmStart {
  const VectorXd* beta = nullptr;  // length p
  const VectorXd* u = nullptr;     // length n, scaled residual dual
  double rho = 0.0;                // 0 = use options.rho
};

QuantileFit admm_fit(const GroupedDesign& design, const VectorXd& y, double tau,
                     const PenaltySpec& penalty, const SolverOptions& options,
                     const WarmStart& warm) {
  const Index n = design.n();
  const Index p = design.p();
  const double nd = static_cast<double>(n);
  const MatrixXd& x = design.x();
  const PenalizedLayout lay = PenalizedLayout::build(design, penalty);
  const int ng = static_cast<int>(lay.groups.size());
  const int d = lay.dim;

  // Normal matrix of the beta update: X'X + sum_k selector' Sigma_k selector.
  MatrixXd m = x.transpose() * x;
  for (int i = 0; i < ng; ++i) {
    const int k = lay.groups[i];
    const auto& cols = design.group_cols(k);
    const MatrixXd& g = design.gram(k);
    for (size_t r = 0; r < cols.size(); ++r) {
      for (size_t c = 0; c < cols.size(); ++c) {
        m(cols[r], cols[c]) += g(static_cast<Index>(r), static_cast<Index>(c));
      }
    }
  }
  NormalSolver beta_solver;
  beta_solver.build(std::move(m), options.ridge_eps);

  CertificateContext cert_ctx(design, tau, penalty);

  // Singleton fast path: every penalized block is 1x1 and the stacked block
  // vector maps to one contiguous column range.
  bool singleton_fast = lay.all_singletons && ng > 0;
  int singleton_start = -1;
  VectorXd singleton_scale(d), singleton_lam(d);
  if (singleton_fast) {
    for (int i = 0; i < ng; ++i) {
      if (lay.start_col[i] != lay.start_col[0] + i) singleton_fast = false;
    }
    if (singleton_fast) {
      singleton_start = lay.start_col[0];
      for (int i = 0; i < ng; ++i) {
        singleton_scale[i] = design.gram_sqrt(lay.groups[i])(0, 0);
        singleton_lam[i] = lay.lam[i];
      }
    }
  }

  // ADMM state (n-scaled objective: sum rho_tau(r) + sum lambda_k ||theta_k||).
  VectorXd beta = warm.beta ? *warm.beta : VectorXd::Zero(p);
  VectorXd r = warm.beta ? VectorXd(y - x * beta) : y;
  VectorXd u = warm.u ? *warm.u : VectorXd::Zero(n);
  VectorXd theta = VectorXd::Zero(d), vdual = VectorXd::Zero(d), xi = VectorXd::Zero(d);
  if (warm.beta) {
    for (int i = 0; i < ng; ++i) {
      const int k = lay.groups[i];
      theta.segment(lay.offset[i], design.group_size(k)).noalias() =
          design.gram_sqrt(k) * design.group_segment(k, beta);
    }
  }
  VectorXd theta_prev(d), r_prev(n);
  VectorXd rhs(p), xb(n), w1(n), svec(p);
  double rho = warm.rho > 0.0 ? warm.rho : options.rho;
  const double alpha = options.over_relax;

  // Any feasible dual point lower-bounds the optimum; a = 0 always qualifies.
  double best_dual = 0.0;
  VectorXd best_a = VectorXd::Zero(n);
  double best_nobj = std::numeric_limits<double>::infinity();
  VectorXd best_beta = beta;
  bool converged = false;
  int iterations = 0;
  const int residual_every = 10;

  auto gather = [&](int i, const VectorXd& src, VectorXd& dst_block) {
    const int k = lay.groups[i];
    const auto& cols = design.group_cols(k);
    dst_block.resize(static_cast<Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) dst_block[static_cast<Index>(j)] = src[cols[j]];
  };

  VectorXd block_tmp, block_tmp2;

  auto consider = [&](VectorXd cand) {
    // The intercept is never penalized, so replacing cand[0] with the exact
    // quantile of y - X_{-0} cand_{-0} can only lower the objective. The
    // intercept column is all ones, so that partial residual is y - X cand
    // plus cand[0].
    VectorXd partial = y - x * cand;
    partial.array() += cand[0];
    cand[0] = intercept_dual_optimum(partial, tau).mu;
    const double nobj = nd * objective_parts(design, y, cand, tau, penalty).total;
    if (nobj < best_nobj) {
      best_nobj = nobj;
      best_beta = std::move(cand);
    }
  };

  auto evaluate_candidates = [&]() {
    // Current beta and its dead-group truncation; keep whichever has the
    // smaller objective. Truncation makes the zeros produced by the theta
    // soft-threshold exact in the reported coefficients.
    consider(beta);
    if (ng > 0) {
      VectorXd truncated = beta;
      bool any = false;
      for (int i = 0; i < ng; ++i) {
        const int pk = design.group_size(lay.groups[i]);
        if (theta.segment(lay.offset[i], pk).isZero(0.0)) {
          for (int c : design.group_cols(lay.groups[i])) truncated[c] = 0.0;
          any = true;
        }
      }
      if (any) consider(std::move(truncated));
    }
  };

  auto fold_certificate = [&](const DualCertificate& cert) {
    if (cert.feasible) {
      const double value = best_nobj - cert.gap;  // y'a
      if (value > best_dual) {
        best_dual = value;
        best_a = cert.a;
      }
    }
  };

  bool intercept_dual_tried = false;
  auto run_certificate = [&]() {
    evaluate_candidates();
    if (!intercept_dual_tried) {
      // One-shot extra candidate: the intercept-only dual optimum. Exact for
      // lambda >= lambda_max, where the cone bounds leave it unshrunk.
      intercept_dual_tried = true;
      fold_certificate(cert_ctx.run(y, best_nobj, intercept_dual_optimum(y, tau).a));
    }
    fold_certificate(cert_ctx.run(y, best_nobj, rho * u));
    const double gap = best_nobj - best_dual;
    return gap <= options.rel_tol * (1.0 + std::abs(best_nobj));
  };

  for (int t = 1; t <= options.max_iter; ++t) {
    iterations = t;
    const bool track_residuals = (t % residual_every == 0);
    if (track_residuals) {
      r_prev = r;
      theta_prev = theta;
    }

    // beta update
    w1 = y - r + u;
    rhs.noalias() = x.transpose() * w1;
    if (singleton_fast) {
      rhs.segment(singleton_start, d).array() +=
          singleton_scale.array() * (theta - vdual).array();
    } else {
      for (int i = 0; i < ng; ++i) {
        const int k = lay.groups[i];
        const int pk = design.group_size(k);
        block_tmp.noalias() =
            design.gram_sqrt(k) * (theta.segment(lay.offset[i], pk) -
                                   vdual.segment(lay.offset[i], pk));
        const auto& cols = design.group_cols(k);
        for (int j = 0; j < pk; ++j) rhs[cols[static_cast<size_t>(j)]] += block_tmp[j];
      }
    }
    beta = rhs;
    beta_solver.solve_into(beta);

    xb.noalias() = x * beta;
    if (singleton_fast) {
      xi.array() = singleton_scale.array() * beta.segment(singleton_start, d).array();
    } else {
      for (int i = 0; i < ng; ++i) {
        const int k = lay.groups[i];
        const int pk = design.group_size(k);
        gather(i, beta, block_tmp);
        xi.segment(lay.offset[i], pk).noalias() = design.gram_sqrt(k) * block_tmp;
      }
    }

    // r and theta updates (with optional over-relaxation on the consensus
    // terms), then the scaled dual ascent.
    const double prox_step = 1.0 / rho;
    if (alpha == 1.0) {
      for (Index i = 0; i < n; ++i) r[i] = prox_check(y[i] - xb[i] + u[i], prox_step, tau);
      u += y - xb - r;
    } else {
      for (Index i = 0; i < n; ++i) {
        const double h = alpha * xb[i] + (1.0 - alpha) * (y[i] - r[i]);
        r[i] = prox_check(y[i] - h + u[i], prox_step, tau);
        u[i] += y[i] - h - r[i];
      }
    }
    for (int i = 0; i < ng; ++i) {
      const int pk = design.group_size(lay.groups[i]);
      auto xik = xi.segment(lay.offset[i], pk);
      auto thk = theta.segment(lay.offset[i], pk);
      auto vk = vdual.segment(lay.offset[i], pk);
      const double thr = lay.lam[i] * prox_step;
      if (alpha == 1.0) {
        block_tmp2 = xik + vk;
      } else {
        block_tmp2 = alpha * xik + (1.0 - alpha) * thk + vk;
      }
      // Block soft-threshold (group_soft_threshold semantics, allocation-free).
      const double norm = block_tmp2.norm();
      if (norm <= thr) {
        thk.setZero();
      } else {
        thk = (1.0 - thr / norm) * block_tmp2;
      }
      if (alpha == 1.0) {
        vk += xik - thk;
      } else {
        vk = block_tmp2 - thk;
      }
    }

    bool residual_pass = false;
    if (track_residuals) {
      const double pri_r = (y - xb - r).squaredNorm() + (xi - theta).squaredNorm();
      svec.noalias() = x.transpose() * (r - r_prev);
      if (singleton_fast) {
        svec.segment(singleton_start, d).array() -=
            singleton_scale.array() * (theta - theta_prev).array();
      } else {
        for (int i = 0; i < ng; ++i) {
          const int k = lay.groups[i];
          const int pk = design.group_size(k);
          block_tmp.noalias() = design.gram_sqrt(k) * (theta.segment(lay.offset[i], pk) -
                                                       theta_prev.segment(lay.offset[i], pk));
          const auto& cols = design.group_cols(k);
          for (int j = 0; j < pk; ++j) svec[cols[static_cast<size_t>(j)]] -= block_tmp[j];
        }
      }
      const double dual_r = rho * svec.norm();
      const double pri = std::sqrt(pri_r);

      const double ax_norm = std::sqrt(xb.squaredNorm() + xi.squaredNorm());
      const double bz_norm = std::sqrt(r.squaredNorm() + theta.squaredNorm());
      const double eps_pri = std::sqrt(static_cast<double>(n + d)) * options.abs_tol +
                             options.rel_tol * std::max({ax_norm, bz_norm, y.norm()});
      svec.noalias() = x.transpose() * u;
      if (singleton_fast) {
        svec.segment(singleton_start, d).array() += singleton_scale.array() * vdual.array();
      } else {
        for (int i = 0; i < ng; ++i) {
          const int k = lay.groups[i];
          const int pk = design.group_size(k);
          block_tmp.noalias() = design.gram_sqrt(k) * vdual.segment(lay.offset[i], pk);
          const auto& cols = design.group_cols(k);
          for (int j = 0; j < pk; ++j) svec[cols[static_cast<size_t>(j)]] += block_tmp[j];
        }
      }
      const double eps_dual = std::sqrt(static_cast<double>(p)) * options.abs_tol +
                              options.rel_tol * rho * svec.norm();
      residual_pass = (pri <= eps_pri && dual_r <= eps_dual);

      if (options.adapt_rho && t <= options.rho_freeze_iter) {
        if (pri > 10.0 * dual_r && rho < 1e8) {
          rho *= 2.0;
          u *= 0.5;
          vdual *= 0.5;
        } else if (dual_r > 10.0 * pri && rho > 1e-8) {
          rho *= 0.5;
          u *= 2.0;
          vdual *= 2.0;
        }
      }
    }

    if (residual_pass || t % options.certificate_interval == 0 || t == options.max_iter) {
      if (run_certificate()) {
        converged = true;
        break;
      }
    }
  }
  if (!converged) {
    converged = run_certificate();
  }

  QuantileFit out;
  out.beta = best_beta;
  out.tau = tau;
  out.lambda = penalty.lambda;
  ObjectiveParts parts = objective_parts(design, y, best_beta, tau, penalty);
  out.objective = parts.total;
  out.loss_term = parts.loss;
  out.penalty_term = parts.penalty;
  out.duality_gap = best_nobj - best_dual;
  out.relative_gap = out.duality_gap / (1.0 + std::abs(best_nobj));
  out.iterations = iterations;
  out.converged = converged;
  out.ridge_used = beta_solver.ridge;
  out.rho_final = rho;
  out.residuals = y - x * best_beta;
  out.dual_a = best_a;
  const double tol = options.group_zero_tol * std::max(1.0, best_beta.norm());
  out.selected_groups.push_back(1);
  for (int k = 1; k < design.q(); ++k) {
    if (design.group_segment(k, best_beta).norm() > tol) {
      out.selected_groups.push_back(k + 1);
    }
  }
  return out;
}

// Working-set driver for designs with many penalized groups: solve the
// problem restricted to a small set of groups, then let the full-dimensional
// certificate either certify global optimality or name the violated cones to
// add. Screening mistakes surface as a large certified gap, never as a
// silently wrong answer.
QuantileFit working_set_fit(const GroupedDesign& design, const VectorXd& y, double tau,
                            const PenaltySpec& penalty, const SolverOptions& options) {
  const Index n = design.n();
  const double nd = static_cast<double>(n);
  CertificateContext cert_ctx(design, tau, penalty);

  std::vector<char> in_w(design.q(), 0);
  std::vector<int> order = design.partition().canonical_order();
  auto group_lambda = [&](int k) { return penalty.lambda * penalty.group_weights[k]; };
  for (int k : order) {
    if (k == 0 || group_lambda(k) <= 0.0) in_w[k] = 1;
  }

  // Standardized score of each cone under a dual candidate; > 1 means the
  // candidate violates that group's bound.
  auto cone_ratios = [&](const VectorXd& a, std::vector<std::pair<double, int>>& out) {
    out.clear();
    for (int k : order) {
      const double lk = group_lambda(k);
      if (in_w[k] || lk <= 0.0) continue;
      const double score =
          (design.gram_sqrt_pinv(k) * (design.group_x(k).transpose() * a)).norm();
      out.emplace_back(score / lk, k);
    }
    std::sort(out.begin(), out.end(), std::greater<>());
  };

  const InterceptDual idual = intercept_dual_optimum(y, tau);
  std::vector<std::pair<double, int>> ratios;
  cone_ratios(idual.a, ratios);
  int seeded = 0;
  for (const auto& [ratio, k] : ratios) {
    if (ratio > 1.0 && seeded < 100) {
      in_w[k] = 1;
      ++seeded;
    }
  }

  VectorXd beta_full = VectorXd::Zero(design.p());
  VectorXd dual_u;
  double rho_carry = 0.0;
  QuantileFit best;
  best.beta = beta_full;
  double best_nobj = nd * objective_parts(design, y, beta_full, tau, penalty).total;
  double best_dual = 0.0;
  VectorXd best_a = VectorXd::Zero(n);
  int total_iters = 0;
  bool certified = false;
  // Screening rounds run loose: they only have to expose violated cones. The
  // target tolerance applies once the working set stops growing.
  const double loose_tol = std::max(options.rel_tol, 1e-3);
  bool tightened = loose_tol == options.rel_tol;

  for (int round = 0; round < 60; ++round) {
    std::vector<int> wgroups;
    std::vector<int> cols;
    GroupPartition psub;
    for (int k : order) {
      if (!in_w[k]) continue;
      wgroups.push_back(k);
      std::vector<int> sub_cols;
      for (int c : design.group_cols(k)) {
        sub_cols.push_back(static_cast<int>(cols.size()));
        cols.push_back(c);
      }
      psub.groups.push_back(std::move(sub_cols));
    }
    MatrixXd xsub(n, static_cast<Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) xsub.col(static_cast<Index>(j)) = design.x().col(cols[j]);
    GroupedDesign dsub = build_design(std::move(xsub), std::move(psub));
    PenaltySpec pensub;
    pensub.lambda = penalty.lambda;
    pensub.group_weights.resize(static_cast<Index>(wgroups.size()));
    for (size_t i = 0; i < wgroups.size(); ++i) {
      pensub.group_weights[static_cast<Index>(i)] = penalty.group_weights[wgroups[i]];
    }

    SolverOptions inner = options;
    inner.rel_tol = tightened ? options.rel_tol : loose_tol;
    inner.max_iter = tightened ? std::max(500, options.max_iter - total_iters)
                               : std::min(4000, options.max_iter);
    VectorXd beta_sub(static_cast<Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) beta_sub[static_cast<Index>(j)] = beta_full[cols[j]];
    WarmStart warm;
    warm.beta = &beta_sub;
    if (dual_u.size() == n) warm.u = &dual_u;
    warm.rho = rho_carry;
    QuantileFit sub = admm_fit(dsub, y, tau, pensub, inner, warm);
    total_iters += sub.iterations;

    beta_full.setZero();
    for (size_t j = 0; j < cols.size(); ++j) beta_full[cols[j]] = sub.beta[static_cast<Index>(j)];
    const double nobj = nd * objective_parts(design, y, beta_full, tau, penalty).total;
    if (nobj < best_nobj || best.beta.size() == 0) {
      best_nobj = nobj;
      best.beta = beta_full;
    }
    rho_carry = sub.rho_final;
    if (sub.rho_final > 0.0) dual_u = sub.dual_a / sub.rho_final;
    best.ridge_used = sub.ridge_used;
    best.rho_final = sub.rho_final;

    DualCertificate cert = cert_ctx.run(y, best_nobj, sub.dual_a);
    if (cert.feasible && best_nobj - cert.gap > best_dual) {
      best_dual = best_nobj - cert.gap;
      best_a = cert.a;
    }
    if (best_nobj - best_dual <= options.rel_tol * (1.0 + std::abs(best_nobj))) {
      certified = true;
      break;
    }

    cone_ratios(sub.dual_a, ratios);
    int added = 0;
    for (const auto& [ratio, k] : ratios) {
      if (ratio > 1.0 + 1e-9 && added < 100) {
        in_w[k] = 1;
        ++added;
      }
    }
    if (total_iters >= options.max_iter) break;
    if (added == 0) {
      if (!tightened) {
        // The screen is stable; re-solve the same working set at the target
        // tolerance before trusting the gap.
        tightened = true;
        continue;
      }
      // No strict violator, yet the gap is too large: a cone that is exactly
      // tight at the full optimum can score fractionally under 1 against an
      // approximate dual. Admit the highest-scoring outsiders so the working
      // set keeps growing; with everything admitted the subproblem is the
      // full problem and its gap is the honest answer.
      for (const auto& [ratio, k] : ratios) {
        if (added >= 8) break;
        in_w[k] = 1;
        ++added;
      }
      if (added == 0) break;
    }
  }

  best.tau = tau;
  best.lambda = penalty.lambda;
  ObjectiveParts parts = objective_parts(design, y, best.beta, tau, penalty);
  best.objective = parts.total;
  best.loss_term = parts.loss;
  best.penalty_term = parts.penalty;
  best.duality_gap = best_nobj - best_dual;
  best.relative_gap = best.duality_gap / (1.0 + std::abs(best_nobj));
  best.iterations = total_iters;
  best.converged = certified;
  best.residuals = y - design.x() * best.beta;
  best.dual_a = best_a;
  const double tol = options.group_zero_tol * std::max(1.0, best.beta.norm());
  best.selected_groups.clear();
  best.selected_groups.push_back(1);
  for (int k = 1; k < design.q(); ++k) {
    if (design.group_segment(k, best.beta).norm() > tol) {
      best.selected_groups.push_back(k + 1);
    }
  }
  return best;
}

}  // namespace

QuantileFit fit(const GroupedDesign& design, const VectorXd& y, double tau,
                const PenaltySpec& penalty, const SolverOptions& options) {
  check_fit_inputs(design, y, tau, penalty, options);
  int penalized_groups = 0;
  Index penalized_cols = 0;
  for (int k = 0; k < design.q(); ++k) {
    if (penalty.lambda * penalty.group_weights[k] > 0.0) {
      ++penalized_groups;
      penalized_cols += design.group_size(k);
    }
  }
  const bool small = penalized_groups <= 8 || penalized_cols <= 40;
  if (small || !options.working_set) {
    return admm_fit(design, y, tau, penalty, options, WarmStart{});
  }
  return working_set_fit(design, y, tau, penalty, options);
}

QuantileFit fit_unpenalized(const GroupedDesign& design, const VectorXd& y, double tau,
                            const SolverOptions& options) {
  return fit(design, y, tau, PenaltySpec::grouped(design, 0.0), options);
}

QuantileFit fit_l1(const GroupedDesign& design, const VectorXd& y, double tau, double lambda,
                   const SolverOptions& options) {
  GroupedDesign singles =
      build_design(design.x(), GroupPartition::singletons(static_cast<int>(design.p())));
  return fit(singles, y, tau, PenaltySpec::grouped(singles, lambda), options);
}

double lambda_max(const GroupedDesign& design, const VectorXd& y, double tau,
                  const VectorXd* group_weights) {
  require(std::isfinite(tau) && tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument,
          "tau must lie in the open interval (0, 1)");
  require(y.size() == design.n(), ErrorCode::dimension_mismatch, "y length != n");
  require(y.allFinite(), ErrorCode::invalid_argument, "y contains non-finite entries");
  VectorXd w;
  if (group_weights != nullptr) {
    w = *group_weights;
    require(w.size() == design.q(), ErrorCode::dimension_mismatch,
            "lambda_max: need one weight per group");
  } else {
    w = PenaltySpec::grouped(design, 1.0).group_weights;
  }

  // The smallest lambda whose fit keeps only the intercept is attained at the
  // intercept-only dual optimum a: for lambda at least the largest
  // standardized group score, that a certifies the intercept-only fit.
  const VectorXd a = intercept_dual_optimum(y, tau).a;
  double lmax = 0.0;
  for (int k = 1; k < design.q(); ++k) {
    if (w[k] <= 0.0) continue;
    const double norm =
        (design.gram_sqrt_pinv(k) * (design.group_x(k).transpose() * a)).norm();
    lmax = std::max(lmax, norm / w[k]);
  }
  return lmax;
}

double SocpProblem::primal_objective(const VectorXd& z) const {
  require(z.size() == num_vars(), ErrorCode::dimension_mismatch,
          "SocpProblem: variable vector has wrong length");
  return cost.dot(z);
}

double SocpProblem::primal_infeasibility(const VectorXd& z) const {
  require(z.size() == num_vars(), ErrorCode::dimension_mismatch,
          "SocpProblem: variable vector has wrong length");
  double viol = (eq_lhs * z - eq_rhs).cwiseAbs().maxCoeff();
  for (const Cone& cone : cones) {
    VectorXd bk(cone.beta_cols.size());
    for (size_t i = 0; i < cone.beta_cols.size(); ++i) {
      bk[static_cast<Index>(i)] = z[cone.beta_cols[i]];
    }
    viol = std::max(viol, (cone.sqrt_block * bk).norm() - z[cone.v_index]);
  }
  const Index eta_start = static_cast<Index>(p + cones.size());
  for (Index i = eta_start; i < z.size(); ++i) viol = std::max(viol, -z[i]);
  return viol;
}

SocpProblem assemble_socp(const GroupedDesign& design, const VectorXd& y, double tau,
                          const PenaltySpec& penalty) {
  check_fit_inputs(design, y, tau, penalty, SolverOptions{});
  SocpProblem prob;
  prob.n = static_cast<int>(design.n());
  prob.p = static_cast<int>(design.p());
  prob.tau = tau;
  std::vector<int> cone_groups;
  for (int k : design.partition().canonical_order()) {
    if (penalty.lambda * penalty.group_weights[k] > 0.0) cone_groups.push_back(k);
  }
  const int c = static_cast<int>(cone_groups.size());
  const int dim = prob.p + c + 2 * prob.n;

  prob.cost = VectorXd::Zero(dim);
  for (int i = 0; i < c; ++i) {
    prob.cost[prob.p + i] = penalty.lambda * penalty.group_weights[cone_groups[i]];
  }
  prob.cost.segment(prob.p + c, prob.n).setConstant(tau);
  prob.cost.segment(prob.p + c + prob.n, prob.n).setConstant(1.0 - tau);

  prob.eq_lhs = MatrixXd::Zero(prob.n, dim);
  prob.eq_lhs.leftCols(prob.p) = design.x();
  prob.eq_lhs.block(0, prob.p + c, prob.n, prob.n) =
      MatrixXd::Identity(prob.n, prob.n);
  prob.eq_lhs.block(0, prob.p + c + prob.n, prob.n, prob.n) =
      -MatrixXd::Identity(prob.n, prob.n);
  prob.eq_rhs = y;

  for (int i = 0; i < c; ++i) {
    SocpProblem::Cone cone;
    cone.group = cone_groups[i];
    cone.v_index = prob.p + i;
    cone.beta_cols = design.group_cols(cone_groups[i]);
    cone.sqrt_block = design.gram_sqrt(cone_groups[i]);
    cone.lambda_k = penalty.lambda * penalty.group_weights[cone_groups[i]];
    prob.cones.push_back(std::move(cone));
  }
  return prob;
}

}  // namespace gqr
