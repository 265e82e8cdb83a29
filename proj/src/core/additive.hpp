#pragma once
#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "core/grouped_design.hpp"
#include "core/rng.hpp"
#include "core/solver.hpp"
#include "core/tuning.hpp"

namespace gqr {

enum class BasisFamily { cubic_bspline, fourier };

// Centered basis functions per covariate: every function integrates to zero
// over its covariate's domain. Cubic B-splines on equidistant interior knots
// are centered by their exact integrals (span length / 4) and the last one is
// dropped, since centering makes the partition of unity sum to zero; Fourier
// pairs sqrt(2)sin(2 pi j u), sqrt(2)cos(2 pi j u) on the unit-rescaled domain
// integrate to zero over whole periods and have unit second moment.
struct BasisSpec {
  BasisFamily family = BasisFamily::cubic_bspline;
  int m = 7;      // centered functions per covariate
  int knots = 4;  // interior knots per covariate (cubic_bspline only)
  std::vector<std::array<double, 2>> domains;  // one [lo, hi] per covariate

  int d() const { return static_cast<int>(domains.size()); }
  void validate() const;
};

// m_or_knots: interior-knot count for cubic_bspline (m = knots + 3), function
// count for fourier (must be even).
BasisSpec build_basis(BasisFamily family, int m_or_knots,
                      std::vector<std::array<double, 2>> domains);

// Domains from the empirical column ranges of z, widened by a relative margin
// so boundary samples stay interior.
BasisSpec basis_from_data(BasisFamily family, int m_or_knots, const Eigen::MatrixXd& z);

// All m centered basis values of one covariate at z (clamped to the domain by
// the caller; z itself must already lie inside).
Eigen::VectorXd basis_row(const BasisSpec& basis, int covariate, double z);

double basis_value(const BasisSpec& basis, int covariate, int j, double z);

// Intercept column plus d blocks of m columns; block k+1 evaluates covariate
// k's basis rowwise. Values within a 1e-12 relative tolerance of the domain
// are clamped silently; values farther outside fail unless clamp is set.
GroupedDesign expand_design(const Eigen::MatrixXd& z, const BasisSpec& basis,
                            bool clamp = false);

struct AdditiveModel {
  BasisSpec basis;
  Eigen::VectorXd beta;  // 1 + d*m coefficients, intercept first
  std::vector<int> selected_covariates;  // 1-based covariate indices
  double lambda = 0.0;
  QuantileFit fit;      // solver diagnostics
  TuningResult tuning;  // populated when lambda came from the pivot rule
  bool tuned = false;
};

// Expand the design, pick lambda by the pivotal rule (or take lambda_override
// when >= 0), and fit with the uniform group weight sqrt(m). basis.domains may
// be empty, in which case they come from the data columns.
AdditiveModel fit_additive(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, double tau,
                           const BasisSpec& basis, const PivotConfig& pivot,
                           double lambda_override = -1.0,
                           const SolverOptions& options = SolverOptions());

// ghat(z) = beta_0 + sum_k sum_j beta_kj psi_kj(z_k). Out-of-domain
// coordinates clamp to the boundary by default; with clamp = false they fail.
double predict_g(const AdditiveModel& model, const Eigen::VectorXd& z, bool clamp = true);

// Monte-Carlo estimate of sqrt(E[(ghat(z) - g(z))^2]) over draws from
// z_sampler, one RNG substream per draw index so the value is independent of
// evaluation order.
double l2_error(const AdditiveModel& model,
                const std::function<double(const Eigen::VectorXd&)>& g_true,
                const std::function<Eigen::VectorXd(Rng&)>& z_sampler, int n_mc,
                uint64_t seed);

}  // namespace gqr
