#include "core/additive.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace gqr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

// Clamped knot vector: 4 copies of each endpoint around equidistant interior
// knots, so the cubic splines on [lo, hi] form a partition of unity.
std::vector<double> knot_vector(double lo, double hi, int knots) {
  std::vector<double> t;
  t.reserve(static_cast<size_t>(knots) + 8);
  for (int i = 0; i < 4; ++i) t.push_back(lo);
  for (int i = 1; i <= knots; ++i) {
    t.push_back(lo + (hi - lo) * double(i) / double(knots + 1));
  }
  for (int i = 0; i < 4; ++i) t.push_back(hi);
  return t;
}

// Span index i with t[i] <= z < t[i+1], clamped so z == hi lands in the last
// nonempty span.
int find_span(const std::vector<double>& t, int knots, double z) {
  const int last = knots + 3;
  if (z >= t[static_cast<size_t>(last) + 1]) return last;
  int i = 3;
  while (i < last && z >= t[static_cast<size_t>(i) + 1]) ++i;
  return i;
}

// Values of the four raw cubic B-splines alive on `span` at z:
// out[r] = B_{span-3+r}(z). Triangular recurrence; empty spans contribute 0.
void raw_cubics(const std::vector<double>& t, int span, double z, double out[4]) {
  double left[4], right[4];
  out[0] = 1.0;
  for (int j = 1; j <= 3; ++j) {
    left[j] = z - t[static_cast<size_t>(span + 1 - j)];
    right[j] = t[static_cast<size_t>(span + j)] - z;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double tmp = denom > 0.0 ? out[r] / denom : 0.0;
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
}

// Per-covariate evaluator with the knot vector and centering constants built
// once. The raw splines sum to 1, so after centering each by its exact mean
// (integral (t_{j+4} - t_j)/4 over span length) the m+1 centered functions sum
// to 0 pointwise; the last is dropped.
struct CovariateBasis {
  BasisFamily family;
  double lo, hi;
  int m;
  std::vector<double> knots_padded;
  std::vector<double> center;  // spline means; empty for fourier

  CovariateBasis(const BasisSpec& spec, int covariate) {
    family = spec.family;
    lo = spec.domains[static_cast<size_t>(covariate)][0];
    hi = spec.domains[static_cast<size_t>(covariate)][1];
    m = spec.m;
    if (family == BasisFamily::cubic_bspline) {
      knots_padded = knot_vector(lo, hi, spec.knots);
      center.resize(static_cast<size_t>(m) + 1);
      for (int j = 0; j <= m; ++j) {
        const double integral =
            (knots_padded[static_cast<size_t>(j) + 4] - knots_padded[static_cast<size_t>(j)]) /
            4.0;
        center[static_cast<size_t>(j)] = integral / (hi - lo);
      }
    }
  }

  void row(double z, double* out) const {
    if (family == BasisFamily::fourier) {
      const double u = (z - lo) / (hi - lo);
      const double root2 = std::sqrt(2.0);
      for (int pair = 1; pair <= m / 2; ++pair) {
        out[2 * (pair - 1)] = root2 * std::sin(kTwoPi * pair * u);
        out[2 * (pair - 1) + 1] = root2 * std::cos(kTwoPi * pair * u);
      }
      return;
    }
    const int n_interior = static_cast<int>(knots_padded.size()) - 8;
    const int span = find_span(knots_padded, n_interior, z);
    double raw[4];
    raw_cubics(knots_padded, span, z, raw);
    for (int j = 0; j < m; ++j) out[j] = -center[static_cast<size_t>(j)];
    for (int r = 0; r < 4; ++r) {
      const int j = span - 3 + r;
      if (j < m) out[j] += raw[r];
    }
  }
};

// Clamp z into [lo, hi]; values farther outside than a relative tolerance are
// errors unless lenient.
double clamp_to_domain(double z, double lo, double hi, bool lenient, const char* what) {
  require(std::isfinite(z), ErrorCode::invalid_argument, "non-finite covariate value");
  const double tol = 1e-12 * std::max({hi - lo, std::abs(lo), std::abs(hi), 1.0});
  if (z < lo - tol || z > hi + tol) {
    require(lenient, ErrorCode::invalid_argument, what);
  }
  return std::clamp(z, lo, hi);
}

}  // namespace

void BasisSpec::validate() const {
  require(!domains.empty(), ErrorCode::invalid_argument, "basis needs at least one covariate");
  for (const auto& dom : domains) {
    require(std::isfinite(dom[0]) && std::isfinite(dom[1]) && dom[0] < dom[1],
            ErrorCode::invalid_argument, "degenerate basis domain");
  }
  require(m >= 1, ErrorCode::invalid_argument, "m must be >= 1");
  if (family == BasisFamily::cubic_bspline) {
    require(knots >= 0, ErrorCode::invalid_argument, "interior knot count must be >= 0");
    require(m == knots + 3, ErrorCode::invalid_argument,
            "cubic spline basis has m = knots + 3 functions");
  } else {
    require(m >= 2 && m % 2 == 0, ErrorCode::invalid_argument,
            "fourier basis needs an even m >= 2");
  }
}

BasisSpec build_basis(BasisFamily family, int m_or_knots,
                      std::vector<std::array<double, 2>> domains) {
  BasisSpec spec;
  spec.family = family;
  if (family == BasisFamily::cubic_bspline) {
    spec.knots = m_or_knots;
    spec.m = m_or_knots + 3;
  } else {
    spec.knots = 0;
    spec.m = m_or_knots;
  }
  spec.domains = std::move(domains);
  spec.validate();
  return spec;
}

BasisSpec basis_from_data(BasisFamily family, int m_or_knots, const MatrixXd& z) {
  require(z.rows() >= 1 && z.cols() >= 1, ErrorCode::invalid_argument,
          "covariate matrix must be nonempty");
  require(z.allFinite(), ErrorCode::invalid_argument, "covariates must be finite");
  std::vector<std::array<double, 2>> domains;
  domains.reserve(static_cast<size_t>(z.cols()));
  for (Index k = 0; k < z.cols(); ++k) {
    const double lo = z.col(k).minCoeff();
    const double hi = z.col(k).maxCoeff();
    require(hi > lo, ErrorCode::invalid_argument, "constant covariate column has no range");
    const double margin = 1e-9 * std::max({hi - lo, std::abs(lo), std::abs(hi)});
    domains.push_back({lo - margin, hi + margin});
  }
  return build_basis(family, m_or_knots, std::move(domains));
}

VectorXd basis_row(const BasisSpec& basis, int covariate, double z) {
  basis.validate();
  require(covariate >= 0 && covariate < basis.d(), ErrorCode::invalid_argument,
          "covariate index out of range");
  const CovariateBasis cb(basis, covariate);
  const double zc = clamp_to_domain(z, cb.lo, cb.hi, false, "basis evaluation out of domain");
  VectorXd out(basis.m);
  cb.row(zc, out.data());
  return out;
}

double basis_value(const BasisSpec& basis, int covariate, int j, double z) {
  require(j >= 0 && j < basis.m, ErrorCode::invalid_argument, "basis index out of range");
  return basis_row(basis, covariate, z)[j];
}

GroupedDesign expand_design(const MatrixXd& z, const BasisSpec& basis, bool clamp) {
  basis.validate();
  require(z.cols() == basis.d(), ErrorCode::dimension_mismatch,
          "covariate count does not match basis");
  require(z.rows() >= 1, ErrorCode::invalid_argument, "need at least one observation");

  const Index n = z.rows();
  const int d = basis.d();
  const int m = basis.m;
  MatrixXd x(n, 1 + Index(d) * m);
  x.col(0).setOnes();
  VectorXd buf(m);
  for (int k = 0; k < d; ++k) {
    const CovariateBasis cb(basis, k);
    for (Index i = 0; i < n; ++i) {
      const double zc =
          clamp_to_domain(z(i, k), cb.lo, cb.hi, clamp, "covariate value outside basis domain");
      cb.row(zc, buf.data());
      x.row(i).segment(1 + Index(k) * m, m) = buf.transpose();
    }
  }

  std::vector<int> sizes{1};
  sizes.insert(sizes.end(), static_cast<size_t>(d), m);
  return build_design(std::move(x), GroupPartition::from_sizes(sizes));
}

AdditiveModel fit_additive(const MatrixXd& z, const VectorXd& y, double tau,
                           const BasisSpec& basis, const PivotConfig& pivot,
                           double lambda_override, const SolverOptions& options) {
  BasisSpec spec = basis;
  if (spec.domains.empty()) {
    const int m_or_knots = spec.family == BasisFamily::cubic_bspline ? spec.knots : spec.m;
    spec = basis_from_data(spec.family, m_or_knots, z);
  }
  require(y.size() == z.rows(), ErrorCode::dimension_mismatch,
          "response length does not match covariate rows");

  AdditiveModel model;
  model.basis = spec;

  const GroupedDesign design = expand_design(z, spec, false);
  if (lambda_override >= 0.0) {
    model.lambda = lambda_override;
  } else {
    PivotConfig cfg = pivot;
    cfg.tau = tau;  // the fit's quantile level governs the pivot
    model.tuning = select_lambda(design, cfg);
    model.tuned = true;
    model.lambda = model.tuning.lambda;
  }

  PenaltySpec pen;
  pen.lambda = model.lambda;
  pen.group_weights = VectorXd::Constant(design.q(), std::sqrt(double(spec.m)));
  pen.group_weights[0] = 0.0;

  model.fit = fit(design, y, tau, pen, options);
  model.beta = model.fit.beta;
  for (int g : model.fit.selected_groups) {
    if (g >= 2) model.selected_covariates.push_back(g - 1);
  }
  return model;
}

double predict_g(const AdditiveModel& model, const VectorXd& z, bool clamp) {
  model.basis.validate();
  const int d = model.basis.d();
  const int m = model.basis.m;
  require(z.size() == d, ErrorCode::dimension_mismatch, "covariate vector has wrong length");
  require(model.beta.size() == 1 + Index(d) * m, ErrorCode::dimension_mismatch,
          "coefficient vector does not match basis");

  double value = model.beta[0];
  VectorXd row(m);
  for (int k = 0; k < d; ++k) {
    const CovariateBasis cb(model.basis, k);
    const double zc = clamp_to_domain(z[k], cb.lo, cb.hi, clamp, "prediction out of domain");
    cb.row(zc, row.data());
    value += row.dot(model.beta.segment(1 + Index(k) * m, m));
  }
  return value;
}

double l2_error(const AdditiveModel& model,
                const std::function<double(const VectorXd&)>& g_true,
                const std::function<VectorXd(Rng&)>& z_sampler, int n_mc, uint64_t seed) {
  require(n_mc >= 1, ErrorCode::invalid_argument, "n_mc must be >= 1");
  double sum = 0.0;
  for (int j = 0; j < n_mc; ++j) {
    Rng rng = Rng::substream(seed, static_cast<uint64_t>(j));
    const VectorXd zj = z_sampler(rng);
    const double diff = predict_g(model, zj) - g_true(zj);
    sum += diff * diff;
  }
  return std::sqrt(sum / double(n_mc));
}

}  // namespace gqr
