#include "core/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace gqr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void ConeSampleConfig::validate(const GroupPartition& partition) const {
  require(std::isfinite(c0) && c0 > 3.0, ErrorCode::invalid_argument, "c0 must exceed 3");
  require(n_samples >= 1, ErrorCode::invalid_argument, "n_samples must be >= 1");
  require(!s_bar.empty(), ErrorCode::invalid_argument, "active set must not be empty");
  bool has_intercept = false;
  for (int g : s_bar) {
    require(g >= 1 && g <= partition.num_groups(), ErrorCode::invalid_argument,
            "active group id out of range");
    if (g == 1) has_intercept = true;
  }
  require(has_intercept, ErrorCode::invalid_argument, "active set must contain group 1");
}

RestrictedEigs estimate_restricted_eigs(const MatrixXd& gram, const GroupPartition& partition,
                                        const ConeSampleConfig& config) {
  config.validate(partition);
  const int p = partition.total_size();
  require(gram.rows() == p && gram.cols() == p, ErrorCode::dimension_mismatch,
          "gram size does not match partition");

  std::vector<char> on(static_cast<size_t>(partition.num_groups()), 0);
  for (int g : config.s_bar) on[static_cast<size_t>(g - 1)] = 1;

  RestrictedEigs out;
  out.phi_min = std::numeric_limits<double>::infinity();
  out.phi_max = 0.0;
  VectorXd alpha(p);
  VectorXd galpha(p);
  for (int s = 0; s < config.n_samples; ++s) {
    Rng rng = Rng::substream(config.seed, static_cast<uint64_t>(s));
    for (int i = 0; i < p; ++i) alpha[i] = rng.normal();
    const double slack = rng.uniform01();

    // Scale the off-support blocks so the cone inequality holds with a
    // uniform slack factor; alpha need not be normalized because the Rayleigh
    // quotient is scale-free.
    double on_sum = 0.0, off_sum = 0.0;
    for (int k = 0; k < partition.num_groups(); ++k) {
      double norm2 = 0.0;
      for (int c : partition.groups[static_cast<size_t>(k)]) norm2 += alpha[c] * alpha[c];
      const double weighted = std::sqrt(double(partition.group_size(k))) * std::sqrt(norm2);
      (on[static_cast<size_t>(k)] ? on_sum : off_sum) += weighted;
    }
    if (off_sum > 0.0) {
      const double scale = slack * config.c0 * on_sum / off_sum;
      for (int k = 0; k < partition.num_groups(); ++k) {
        if (on[static_cast<size_t>(k)]) continue;
        for (int c : partition.groups[static_cast<size_t>(k)]) alpha[c] *= scale;
      }
    }

    const double denom = alpha.squaredNorm();
    if (denom <= 0.0) continue;
    galpha.noalias() = gram * alpha;
    const double value = std::sqrt(std::max(0.0, alpha.dot(galpha) / denom));
    out.phi_min = std::min(out.phi_min, value);
    out.phi_max = std::max(out.phi_max, value);
  }
  require(std::isfinite(out.phi_min), ErrorCode::numeric, "no usable cone samples");
  return out;
}

Omega0Result omega0_check(const GroupedDesign& design) {
  Omega0Result out;
  for (int k = 1; k < design.q(); ++k) {
    const int pk = design.group_size(k);
    const MatrixXd diff = design.gram_sqrt(k) - MatrixXd::Identity(pk, pk);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(diff);
    out.max_deviation = std::max(out.max_deviation, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  out.holds = out.max_deviation <= 0.5;
  return out;
}

double theoretical_lambda(int n, int q, int p_min, double a1, double a2, double delta) {
  require(n >= 1, ErrorCode::invalid_argument, "n must be >= 1");
  require(q >= 2, ErrorCode::invalid_argument, "q must be >= 2");
  require(p_min >= 1, ErrorCode::invalid_argument, "p_min must be >= 1");
  require(std::isfinite(a1) && a1 >= 0.0, ErrorCode::invalid_argument, "A1 must be >= 0");
  require(std::isfinite(a2) && a2 >= 0.0, ErrorCode::invalid_argument, "A2 must be >= 0");
  require(std::isfinite(delta) && delta >= 0.0, ErrorCode::invalid_argument,
          "Delta must be >= 0");
  const double nd = double(n);
  return (4.0 * std::sqrt(2.0) + delta + a1) * std::sqrt(nd) +
         a2 * std::sqrt(nd * std::log(double(q)) / double(p_min));
}

}  // namespace gqr
