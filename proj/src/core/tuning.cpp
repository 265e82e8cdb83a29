#include "core/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "core/error.hpp"

namespace gqr {

using Eigen::VectorXd;

void PivotConfig::validate() const {
  require(std::isfinite(tau) && tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument,
          "tau must lie in (0, 1)");
  require(std::isfinite(theta) && theta > 0.0 && theta < 1.0, ErrorCode::invalid_argument,
          "theta must lie in (0, 1)");
  require(std::isfinite(c) && c > 0.0, ErrorCode::invalid_argument, "c must be positive");
  require(n_sim >= 1, ErrorCode::invalid_argument, "n_sim must be >= 1");
}

double pivot_draw(const GroupedDesign& design, double tau, Rng& rng) {
  require(std::isfinite(tau) && tau > 0.0 && tau < 1.0, ErrorCode::invalid_argument,
          "tau must lie in (0, 1)");
  const Eigen::Index n = design.n();
  VectorXd xi(n);
  for (Eigen::Index i = 0; i < n; ++i) xi[i] = tau - rng.bernoulli(tau);

  double stat = 0.0;
  for (int k = 0; k < design.q(); ++k) {
    const VectorXd score = design.group_x(k).transpose() * xi;
    const double norm_k =
        (design.gram_sqrt_pinv(k) * score).norm() / std::sqrt(double(design.group_size(k)));
    stat = std::max(stat, norm_k);
  }
  return stat;
}

TuningResult select_lambda(const GroupedDesign& design, const PivotConfig& config) {
  config.validate();

  TuningResult out;
  out.config = config;
  out.draws.resize(config.n_sim);
  for (int i = 0; i < config.n_sim; ++i) {
    Rng rng = Rng::substream(config.seed, static_cast<uint64_t>(i));
    out.draws[i] = pivot_draw(design, config.tau, rng);
  }

  std::vector<double> sorted(out.draws.data(), out.draws.data() + config.n_sim);
  std::sort(sorted.begin(), sorted.end());
  // Smallest index whose empirical CDF (i+1)/n_sim reaches 1 - theta; the
  // subtracted slack absorbs rounding in (1 - theta) * n_sim when the product
  // is an exact integer.
  const double target = (1.0 - config.theta) * config.n_sim - 1e-9;
  int idx = static_cast<int>(std::ceil(target)) - 1;
  idx = std::clamp(idx, 0, config.n_sim - 1);
  out.quantile_value = sorted[static_cast<size_t>(idx)];
  out.lambda = config.c * out.quantile_value;
  out.tail_undersampled = config.n_sim * config.theta < 1.0;
  return out;
}

double theta_schedule(int n, int q, int p_min, double t) {
  require(n >= 1, ErrorCode::invalid_argument, "n must be >= 1");
  require(q >= 2, ErrorCode::invalid_argument, "q must be >= 2");
  require(p_min >= 1, ErrorCode::invalid_argument, "p_min must be >= 1");
  require(std::isfinite(t) && t > 0.0, ErrorCode::invalid_argument, "t must be positive");
  const double base = std::max(std::exp(1.0), std::pow(double(q), 1.0 / double(p_min)));
  return std::pow(base, -t * t);
}

}  // namespace gqr
