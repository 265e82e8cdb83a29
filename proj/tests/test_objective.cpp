#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "core/objective.hpp"
#include "core/rng.hpp"
#include "test_helpers.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace gqr;

TEST_CASE("check_loss basics") {
  CHECK(check_loss(2.0, 0.3) == doctest::Approx(0.6));
  CHECK(check_loss(-2.0, 0.3) == doctest::Approx(1.4));
  CHECK(check_loss(0.0, 0.7) == 0.0);
  CHECK_THROWS_AS(check_loss(1.0, 0.0), Error);
  CHECK_THROWS_AS(check_loss(1.0, 1.0), Error);
  CHECK_THROWS_AS(check_loss(std::nan(""), 0.5), Error);
}

TEST_CASE("check_loss symmetry rho_tau(u) == rho_{1-tau}(-u)") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double u = 4.0 * (rng.uniform01() - 0.5);
    const double tau = 0.05 + 0.9 * rng.uniform01();
    CHECK(check_loss(u, tau) == doctest::Approx(check_loss(-u, 1.0 - tau)).epsilon(1e-12));
    CHECK(check_loss(u, tau) >= 0.0);
  }
}

TEST_CASE("check_loss is convex along segments") {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const double a = 3.0 * (rng.uniform01() - 0.5);
    const double b = 3.0 * (rng.uniform01() - 0.5);
    const double t = rng.uniform01();
    const double tau = 0.05 + 0.9 * rng.uniform01();
    const double lhs = check_loss(t * a + (1 - t) * b, tau);
    CHECK(lhs <= t * check_loss(a, tau) + (1 - t) * check_loss(b, tau) + 1e-12);
  }
}

TEST_CASE("objective on a tiny intercept-only instance") {
  MatrixXd x = MatrixXd::Ones(2, 1);
  GroupedDesign d = build_design(x, GroupPartition::from_sizes({1}));
  VectorXd y(2);
  y << 0.0, 1.0;
  PenaltySpec pen = PenaltySpec::grouped(d, 0.0);
  VectorXd beta(1);
  beta << 0.0;
  // residuals (0, 1): rho_{0.5}(0) = 0, rho_{0.5}(1) = 0.5, mean = 0.25
  CHECK(objective_value(d, y, beta, 0.5, pen) == doctest::Approx(0.25));
  beta[0] = 0.5;
  // residuals (-0.5, 0.5): each rho = 0.25, mean = 0.25
  CHECK(objective_value(d, y, beta, 0.5, pen) == doctest::Approx(0.25));
}

TEST_CASE("objective separates loss and penalty terms") {
  // X_{G_2} = [[2,0],[0,2]], Gram 2I, sqrt = sqrt(2) I, weight sqrt(2).
  MatrixXd x(2, 3);
  x << 1, 2, 0, 1, 0, 2;
  GroupedDesign d = build_design(x, GroupPartition::from_sizes({1, 2}));
  VectorXd y(2);
  y << 1.0, -1.0;
  VectorXd beta(3);
  beta << 0.0, 1.0, 0.5;
  const double lambda = 0.8, tau = 0.3;
  PenaltySpec pen = PenaltySpec::grouped(d, lambda);

  VectorXd resid = y - x * beta;
  double loss = (check_loss(resid[0], tau) + check_loss(resid[1], tau)) / 2.0;
  double pen_term =
      lambda / 2.0 * std::sqrt(2.0) * (std::sqrt(2.0) * Eigen::Vector2d(1.0, 0.5)).norm();
  ObjectiveParts parts = objective_parts(d, y, beta, tau, pen);
  CHECK(parts.loss == doctest::Approx(loss).epsilon(1e-12));
  CHECK(parts.penalty == doctest::Approx(pen_term).epsilon(1e-12));
  CHECK(parts.total == doctest::Approx(loss + pen_term).epsilon(1e-12));

  // The intercept never contributes to the penalty.
  VectorXd b2 = VectorXd::Zero(3);
  b2[0] = 42.0;
  CHECK(objective_parts(d, y, b2, tau, pen).penalty == 0.0);
}

TEST_CASE("penalty validation") {
  MatrixXd x = MatrixXd::Ones(2, 1);
  GroupedDesign d = build_design(x, GroupPartition::from_sizes({1}));
  PenaltySpec pen = PenaltySpec::grouped(d, 1.0);
  CHECK(pen.group_weights[0] == 0.0);
  pen.group_weights[0] = 1.0;
  CHECK_THROWS_AS(pen.validate(d), Error);
  PenaltySpec neg = PenaltySpec::grouped(d, -1.0);
  CHECK_THROWS_AS(neg.validate(d), Error);
}

TEST_CASE("prox_check closed form and pinned examples") {
  CHECK(prox_check(2.0, 1.0, 0.25) == doctest::Approx(1.75));
  CHECK(prox_check(-2.0, 1.0, 0.25) == doctest::Approx(-1.25));
  CHECK(prox_check(0.1, 1.0, 0.25) == 0.0);
  CHECK(prox_check(-0.5, 1.0, 0.25) == 0.0);
  CHECK_THROWS_AS(prox_check(1.0, 0.0, 0.5), Error);
  CHECK_THROWS_AS(prox_check(1.0, -1.0, 0.5), Error);
}

TEST_CASE("prox_check matches a 1-D grid minimization oracle") {
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    const double v = 6.0 * (rng.uniform01() - 0.5);
    const double step = 0.05 + 3.0 * rng.uniform01();
    const double tau = 0.05 + 0.9 * rng.uniform01();
    auto f = [&](double z) {
      const double r = (z <= 0.0) ? (tau - 1.0) * z : tau * z;
      return step * r + 0.5 * (z - v) * (z - v);
    };
    const double lo = v - step - 1.0, hi = v + step + 1.0;
    const double zstar = oracle::convex_argmin(f, lo, hi, 1e-9);
    CHECK(std::abs(prox_check(v, step, tau) - zstar) < 1e-6);
  }
}

TEST_CASE("prox_check is firmly nonexpansive") {
  Rng rng(22);
  for (int i = 0; i < 300; ++i) {
    const double a = 8.0 * (rng.uniform01() - 0.5);
    const double b = 8.0 * (rng.uniform01() - 0.5);
    const double step = 0.05 + 2.0 * rng.uniform01();
    const double tau = 0.05 + 0.9 * rng.uniform01();
    const double pa = prox_check(a, step, tau), pb = prox_check(b, step, tau);
    CHECK((pa - pb) * (pa - pb) <= (pa - pb) * (a - b) + 1e-14);
  }
}

TEST_CASE("group_soft_threshold pinned example and closed form") {
  Eigen::VectorXd v(2);
  v << 3.0, 4.0;
  VectorXd out = group_soft_threshold(v, 2.5);
  CHECK(out[0] == doctest::Approx(1.5));
  CHECK(out[1] == doctest::Approx(2.0));

  CHECK(group_soft_threshold(v, 5.0).norm() == 0.0);
  CHECK(group_soft_threshold(v, 6.0).norm() == 0.0);
  CHECK((group_soft_threshold(v, 0.0) - v).norm() == 0.0);
  CHECK_THROWS_AS(group_soft_threshold(v, -1.0), Error);
}

TEST_CASE("group_soft_threshold satisfies the subgradient optimality condition") {
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    const int p = 1 + static_cast<int>(rng.uniform01() * 5);
    VectorXd v(p);
    for (int j = 0; j < p; ++j) v[j] = 4.0 * (rng.uniform01() - 0.5);
    const double thr = 2.0 * rng.uniform01();
    VectorXd out = group_soft_threshold(v, thr);
    if (out.norm() > 0.0) {
      // out + thr * out/||out|| = v
      CHECK((out + thr * out / out.norm() - v).cwiseAbs().maxCoeff() < 1e-12);
    } else {
      CHECK(v.norm() <= thr + 1e-12);
    }
  }
}

TEST_CASE("group_soft_threshold matches a radial grid oracle") {
  Rng rng(24);
  for (int i = 0; i < 100; ++i) {
    const int p = 2 + static_cast<int>(rng.uniform01() * 3);
    VectorXd v(p);
    for (int j = 0; j < p; ++j) v[j] = 4.0 * (rng.uniform01() - 0.5);
    const double thr = 1.5 * rng.uniform01();
    // The minimizer lies on the ray through v: minimize over the radial scale.
    auto f = [&](double c) { return thr * c * v.norm() + 0.5 * (c - 1.0) * (c - 1.0) * v.squaredNorm(); };
    const double cstar = oracle::convex_argmin(f, 0.0, 1.0, 1e-10);
    VectorXd expected = std::max(0.0, cstar) * v;
    CHECK((group_soft_threshold(v, thr) - expected).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("knight decomposition pinned examples") {
  KnightParts k1 = knight_decomposition(1.0, 0.5, 0.5);
  CHECK(k1.linear == doctest::Approx(-0.25));
  CHECK(k1.integral == doctest::Approx(0.0));

  KnightParts k2 = knight_decomposition(0.3, 1.0, 0.25);
  CHECK(k2.linear == doctest::Approx(-0.25));
  CHECK(k2.integral == doctest::Approx(0.7));
}

TEST_CASE("knight integral term matches midpoint quadrature") {
  // The integrand is a 0/1 step; midpoint quadrature with N panels is exact up
  // to |v|/N, so N = 1.28e8 resolves the pinned case to 1e-8.
  const double u = 0.3, v = 1.0;
  auto integrand = [&](double s) {
    const double a = (u <= s) ? 1.0 : 0.0;
    const double b = (u <= 0.0) ? 1.0 : 0.0;
    return a - b;
  };
  const double quad = oracle::midpoint_quadrature(integrand, 0.0, v, 128000000L);
  CHECK(std::abs(knight_decomposition(u, v, 0.25).integral - quad) < 1e-8);

  // Negative v case at moderate resolution.
  const double u2 = -0.4, v2 = -1.1;
  auto integrand2 = [&](double s) {
    const double a = (u2 <= s) ? 1.0 : 0.0;
    const double b = (u2 <= 0.0) ? 1.0 : 0.0;
    return a - b;
  };
  const double quad2 = oracle::midpoint_quadrature(integrand2, 0.0, v2, 2000000L);
  CHECK(std::abs(knight_decomposition(u2, v2, 0.6).integral - quad2) < 1e-5);
}

TEST_CASE("knight identity holds to machine precision and integral is nonnegative") {
  Rng rng(25);
  for (int i = 0; i < 10000; ++i) {
    const double u = 6.0 * (rng.uniform01() - 0.5);
    const double v = 6.0 * (rng.uniform01() - 0.5);
    const double tau = 0.02 + 0.96 * rng.uniform01();
    KnightParts k = knight_decomposition(u, v, tau);
    const double lhs = check_loss(u - v, tau) - check_loss(u, tau);
    CHECK(std::abs(lhs - (k.linear + k.integral)) < 1e-12);
    CHECK(k.integral >= 0.0);
  }
}
