#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "core/additive.hpp"
#include "core/error.hpp"
#include "test_helpers.hpp"

using namespace gqr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Textbook Cox-de Boor recursion, independent of the library's evaluator.
// Valid at interior, non-knot z (the half-open convention differs at hi).
double raw_bspline_rec(const std::vector<double>& t, int j, int deg, double z) {
  if (deg == 0) return (t[size_t(j)] <= z && z < t[size_t(j) + 1]) ? 1.0 : 0.0;
  double v = 0.0;
  const double dl = t[size_t(j + deg)] - t[size_t(j)];
  if (dl > 0.0) v += (z - t[size_t(j)]) / dl * raw_bspline_rec(t, j, deg - 1, z);
  const double dr = t[size_t(j + deg + 1)] - t[size_t(j) + 1];
  if (dr > 0.0) {
    v += (t[size_t(j + deg + 1)] - z) / dr * raw_bspline_rec(t, j + 1, deg - 1, z);
  }
  return v;
}

std::vector<double> clamped_knots(double lo, double hi, int interior) {
  std::vector<double> t(4, lo);
  for (int i = 1; i <= interior; ++i) t.push_back(lo + (hi - lo) * i / (interior + 1));
  t.insert(t.end(), 4, hi);
  return t;
}

double simpson_integral_of_basis(const BasisSpec& spec, int covariate, int j) {
  const double lo = spec.domains[size_t(covariate)][0];
  const double hi = spec.domains[size_t(covariate)][1];
  return oracle::simpson_quadrature(
      [&](double z) { return basis_value(spec, covariate, j, z); }, lo, hi, 5000);
}

}  // namespace

TEST_CASE("basis construction validation") {
  CHECK_THROWS_AS(build_basis(BasisFamily::cubic_bspline, 4, {{1.0, 1.0}}), Error);
  CHECK_THROWS_AS(build_basis(BasisFamily::cubic_bspline, 4, {{2.0, 1.0}}), Error);
  CHECK_THROWS_AS(build_basis(BasisFamily::cubic_bspline, -1, {{0.0, 1.0}}), Error);
  CHECK_THROWS_AS(build_basis(BasisFamily::fourier, 3, {{0.0, 1.0}}), Error);
  CHECK_THROWS_AS(build_basis(BasisFamily::fourier, 0, {{0.0, 1.0}}), Error);
  CHECK_THROWS_AS(build_basis(BasisFamily::fourier, 2, {}), Error);

  const BasisSpec spline = build_basis(BasisFamily::cubic_bspline, 4, {{0.0, 1.0}});
  CHECK(spline.m == 7);
  const BasisSpec four = build_basis(BasisFamily::fourier, 4, {{-1.0, 1.0}});
  CHECK(four.m == 4);
}

TEST_CASE("fourier pair on the unit interval") {
  const BasisSpec spec = build_basis(BasisFamily::fourier, 2, {{0.0, 1.0}});
  const double root2 = std::sqrt(2.0);
  for (double z : {0.1, 0.25, 0.4, 0.75, 0.9}) {
    CHECK(basis_value(spec, 0, 0, z) ==
          doctest::Approx(root2 * std::sin(2.0 * M_PI * z)).epsilon(1e-13));
    CHECK(basis_value(spec, 0, 1, z) ==
          doctest::Approx(root2 * std::cos(2.0 * M_PI * z)).epsilon(1e-13));
  }
  CHECK(std::abs(simpson_integral_of_basis(spec, 0, 0)) < 1e-10);
  CHECK(std::abs(simpson_integral_of_basis(spec, 0, 1)) < 1e-10);
}

TEST_CASE("centered splines match an independent recursion") {
  const double lo = -1.0, hi = 2.0;
  for (int interior : {0, 4}) {
    const BasisSpec spec = build_basis(BasisFamily::cubic_bspline, interior, {{lo, hi}});
    const std::vector<double> t = clamped_knots(lo, hi, interior);
    for (int j = 0; j < spec.m; ++j) {
      const double raw_integral = oracle::simpson_quadrature(
          [&](double z) { return raw_bspline_rec(t, j, 3, z); }, lo, hi, 4000);
      const double center = raw_integral / (hi - lo);
      for (int s = 1; s <= 23; ++s) {
        const double z = lo + (hi - lo) * s / 23.7;  // interior, off-knot
        const double want = raw_bspline_rec(t, j, 3, z) - center;
        CHECK(basis_value(spec, 0, j, z) == doctest::Approx(want).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("every centered basis function integrates to zero") {
  const std::vector<std::array<double, 2>> domains{{-1.0, 1.0}, {0.0, 1.0}, {2.5, 7.125}};
  for (const auto& dom : domains) {
    const BasisSpec spline = build_basis(BasisFamily::cubic_bspline, 4, {dom});
    for (int j = 0; j < spline.m; ++j) {
      CHECK(std::abs(simpson_integral_of_basis(spline, 0, j)) < 1e-8);
    }
    const BasisSpec four = build_basis(BasisFamily::fourier, 6, {dom});
    for (int j = 0; j < four.m; ++j) {
      CHECK(std::abs(simpson_integral_of_basis(four, 0, j)) < 1e-8);
    }
  }
}

TEST_CASE("expand_design structure") {
  SUBCASE("single midpoint row") {
    const BasisSpec spec = build_basis(BasisFamily::cubic_bspline, 4, {{0.0, 1.0}});
    MatrixXd z(1, 1);
    z(0, 0) = 0.5;
    const GroupedDesign d = expand_design(z, spec);
    CHECK(d.n() == 1);
    CHECK(d.p() == 8);
    CHECK(d.q() == 2);
    CHECK(d.x()(0, 0) == 1.0);
    const VectorXd row = basis_row(spec, 0, 0.5);
    for (int j = 0; j < 7; ++j) CHECK(d.x()(0, 1 + j) == row[j]);
  }

  SUBCASE("identical covariates give identical blocks") {
    Rng rng(5);
    MatrixXd z(20, 2);
    for (int i = 0; i < 20; ++i) z(i, 0) = z(i, 1) = rng.uniform01();
    const BasisSpec spec =
        build_basis(BasisFamily::cubic_bspline, 4, {{0.0, 1.0}, {0.0, 1.0}});
    const GroupedDesign d = expand_design(z, spec);
    CHECK(d.q() == 3);
    CHECK(d.x().middleCols(1, 7) == d.x().middleCols(8, 7));
  }

  SUBCASE("out-of-domain values fail unless clamped") {
    const BasisSpec spec = build_basis(BasisFamily::fourier, 2, {{0.0, 1.0}});
    MatrixXd z(2, 1);
    z(0, 0) = 0.4;
    z(1, 0) = 1.3;
    CHECK_THROWS_AS(expand_design(z, spec), Error);
    const GroupedDesign d = expand_design(z, spec, true);
    const VectorXd boundary = basis_row(spec, 0, 1.0);
    CHECK(d.x()(1, 1) == boundary[0]);
    CHECK(d.x()(1, 2) == boundary[1]);

    MatrixXd z2(1, 1);
    z2(0, 0) = 1.0 + 1e-13;  // inside the silent clamp tolerance
    CHECK_NOTHROW(expand_design(z2, spec));
  }

  SUBCASE("fourier block gram approaches identity") {
    Rng rng(42);
    MatrixXd z(100, 1);
    for (int i = 0; i < 100; ++i) z(i, 0) = rng.uniform01();
    const BasisSpec spec = build_basis(BasisFamily::fourier, 4, {{0.0, 1.0}});
    const GroupedDesign d = expand_design(z, spec, true);
    const MatrixXd gram = d.gram(1);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram - MatrixXd::Identity(4, 4));
    CHECK(es.eigenvalues().cwiseAbs().maxCoeff() < 0.3);
  }
}

TEST_CASE("predict_g") {
  const BasisSpec spec = build_basis(BasisFamily::fourier, 2, {{0.0, 1.0}});

  SUBCASE("intercept-only coefficients give a constant") {
    AdditiveModel model;
    model.basis = spec;
    model.beta = VectorXd::Zero(3);
    model.beta[0] = 4.25;
    for (double z : {0.0, 0.3, 0.99}) {
      CHECK(predict_g(model, VectorXd::Constant(1, z)) == 4.25);
    }
  }

  SUBCASE("a basis zero contributes nothing") {
    AdditiveModel model;
    model.basis = spec;
    model.beta = VectorXd::Zero(3);
    model.beta[0] = 1.0;
    model.beta[1] = 3.0;  // sqrt(2) sin(2 pi z) vanishes at z = 0.5
    CHECK(predict_g(model, VectorXd::Constant(1, 0.5)) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("matches the expanded feature row") {
    Rng rng(9);
    const BasisSpec spline =
        build_basis(BasisFamily::cubic_bspline, 4, {{0.0, 1.0}, {-2.0, 3.0}});
    AdditiveModel model;
    model.basis = spline;
    model.beta = VectorXd(15);
    for (int i = 0; i < 15; ++i) model.beta[i] = rng.normal();
    for (int trial = 0; trial < 10; ++trial) {
      MatrixXd z(1, 2);
      z(0, 0) = rng.uniform01();
      z(0, 1) = -2.0 + 5.0 * rng.uniform01();
      const GroupedDesign d = expand_design(z, spline);
      const double direct = d.x().row(0).dot(model.beta);
      CHECK(predict_g(model, z.row(0).transpose()) ==
            doctest::Approx(direct).epsilon(1e-14));
    }
  }

  SUBCASE("out-of-domain clamps by default, fails on request") {
    AdditiveModel model;
    model.basis = spec;
    model.beta = VectorXd(3);
    model.beta << 0.5, 1.0, -2.0;
    const double at_boundary = predict_g(model, VectorXd::Constant(1, 1.0));
    CHECK(predict_g(model, VectorXd::Constant(1, 1.8)) == at_boundary);
    CHECK_THROWS_AS(predict_g(model, VectorXd::Constant(1, 1.8), false), Error);
  }
}

TEST_CASE("fit_additive with lambda zero equals the unpenalized series fit") {
  Rng rng(33);
  const int n = 60;
  MatrixXd z(n, 1);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = rng.uniform01();
    y[i] = std::sin(2.0 * M_PI * z(i, 0)) + 0.2 * rng.normal();
  }
  BasisSpec req;
  req.family = BasisFamily::cubic_bspline;
  req.knots = 4;
  req.m = 7;
  PivotConfig pivot;
  const AdditiveModel model = fit_additive(z, y, 0.5, req, pivot, 0.0);

  const BasisSpec spec = basis_from_data(BasisFamily::cubic_bspline, 4, z);
  const GroupedDesign d = expand_design(z, spec);
  const QuantileFit unpen = fit_unpenalized(d, y, 0.5);
  CHECK(model.fit.objective == doctest::Approx(unpen.objective).epsilon(1e-12));
  CHECK((model.beta - unpen.beta).norm() < 1e-10);
  CHECK(model.tuned == false);
  CHECK(model.lambda == 0.0);
}

TEST_CASE("tuned additive fit separates signal from noise") {
  const int n = 150, d = 3, n_seeds = 50;
  PivotConfig pivot;
  pivot.theta = 0.1;
  pivot.c = 1.1;
  pivot.n_sim = 300;
  BasisSpec req;
  req.family = BasisFamily::cubic_bspline;
  req.knots = 4;
  req.m = 7;

  SUBCASE("pure noise selects almost nothing") {
    int false_groups = 0;
    for (int seed = 0; seed < n_seeds; ++seed) {
      Rng rng(1000 + uint64_t(seed));
      MatrixXd z(n, d);
      VectorXd y(n);
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) z(i, k) = rng.uniform01();
        y[i] = rng.normal();
      }
      pivot.seed = 7000 + uint64_t(seed);
      const AdditiveModel model = fit_additive(z, y, 0.5, req, pivot);
      false_groups += int(model.selected_covariates.size());
    }
    CHECK(double(false_groups) / n_seeds <= 1.0);
  }

  SUBCASE("a strong linear component is almost always selected") {
    int hits = 0;
    for (int seed = 0; seed < n_seeds; ++seed) {
      Rng rng(2000 + uint64_t(seed));
      MatrixXd z(n, d);
      VectorXd y(n);
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) z(i, k) = rng.uniform01();
        y[i] = 2.0 * z(i, 0) + 0.25 * rng.normal();
      }
      pivot.seed = 9000 + uint64_t(seed);
      const AdditiveModel model = fit_additive(z, y, 0.5, req, pivot);
      for (int k : model.selected_covariates) {
        if (k == 1) {
          ++hits;
          break;
        }
      }
    }
    CHECK(hits >= int(0.9 * n_seeds));
  }
}

TEST_CASE("l2_error") {
  const BasisSpec spec = build_basis(BasisFamily::fourier, 2, {{-1.0, 1.0}});
  AdditiveModel model;
  model.basis = spec;
  model.beta = VectorXd::Zero(3);
  model.beta[0] = 2.5;

  const auto uniform_sampler = [](Rng& rng) {
    return VectorXd::Constant(1, -1.0 + 2.0 * rng.uniform01()).eval();
  };

  SUBCASE("exact agreement gives zero") {
    const auto g = [](const VectorXd&) { return 2.5; };
    CHECK(l2_error(model, g, uniform_sampler, 5000, 3) == 0.0);
  }

  SUBCASE("constant offset of one gives exactly one") {
    const auto g = [](const VectorXd&) { return 1.5; };
    CHECK(l2_error(model, g, uniform_sampler, 5000, 3) == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("linear gap matches its closed-form second moment") {
    model.beta[0] = 0.0;
    const auto g = [](const VectorXd& z) { return -z[0]; };
    const double err = l2_error(model, g, uniform_sampler, 200000, 11);
    CHECK(err == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(0.01));
  }

  SUBCASE("same seed reproduces bitwise") {
    const auto g = [](const VectorXd& z) { return z[0] * z[0]; };
    CHECK(l2_error(model, g, uniform_sampler, 1000, 17) ==
          l2_error(model, g, uniform_sampler, 1000, 17));
  }
}
