#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "core/rng.hpp"

// Test-only oracles. Deliberately written from first principles, independent
// of the library implementation they check.
namespace oracle {

// Minimum of a convex 1-D function: coarse grid scan followed by ternary
// search inside the best bracket. Returns the argmin.
inline double convex_argmin(const std::function<double(double)>& f, double lo, double hi,
                            double tol = 1e-9) {
  const int kGrid = 512;
  double best = lo, bestv = f(lo);
  for (int i = 1; i <= kGrid; ++i) {
    const double x = lo + (hi - lo) * i / kGrid;
    const double v = f(x);
    if (v < bestv) {
      bestv = v;
      best = x;
    }
  }
  double a = std::max(lo, best - (hi - lo) / kGrid);
  double b = std::min(hi, best + (hi - lo) / kGrid);
  while (b - a > tol) {
    const double m1 = a + (b - a) / 3.0;
    const double m2 = b - (b - a) / 3.0;
    if (f(m1) <= f(m2)) {
      b = m2;
    } else {
      a = m1;
    }
  }
  return 0.5 * (a + b);
}

// Midpoint-rule quadrature of f over [a, b] (a may exceed b; the sign follows
// the orientation). Exact for piecewise-constant integrands except in the one
// panel containing a jump, so the error is bounded by |b-a|/n * osc(f).
inline double midpoint_quadrature(const std::function<double(double)>& f, double a, double b,
                                  long n) {
  const double h = (b - a) / static_cast<double>(n);
  double s = 0.0;
  for (long i = 0; i < n; ++i) {
    s += f(a + (static_cast<double>(i) + 0.5) * h);
  }
  return s * h;
}

// Composite Simpson rule for smooth integrands.
inline double simpson_quadrature(const std::function<double(double)>& f, double a, double b,
                                 int panels) {
  const int n = panels * 2;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) {
    s += f(a + i * h) * ((i % 2 == 1) ? 4.0 : 2.0);
  }
  return s * h / 3.0;
}

inline Eigen::MatrixXd random_psd(int p, gqr::Rng& rng, int rank = -1) {
  if (rank < 0) rank = p;
  Eigen::MatrixXd b(rank, p);
  for (int i = 0; i < rank; ++i) {
    for (int j = 0; j < p; ++j) b(i, j) = rng.normal();
  }
  Eigen::MatrixXd a = b.transpose() * b;
  return 0.5 * (a + a.transpose());
}

inline Eigen::MatrixXd random_matrix(int n, int p, gqr::Rng& rng) {
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
  }
  return x;
}

// Random design with an all-ones leading column.
inline Eigen::MatrixXd random_design(int n, int p, gqr::Rng& rng) {
  Eigen::MatrixXd x = random_matrix(n, p, rng);
  x.col(0).setOnes();
  return x;
}

}  // namespace oracle
