#include "core/grouped_design.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace gqr {

GroupPartition GroupPartition::from_sizes(const std::vector<int>& sizes) {
  require(!sizes.empty(), ErrorCode::invalid_argument, "group sizes must be nonempty");
  GroupPartition out;
  int col = 0;
  for (int s : sizes) {
    require(s >= 1, ErrorCode::invalid_argument, "group sizes must be positive");
    std::vector<int> g(s);
    std::iota(g.begin(), g.end(), col);
    col += s;
    out.groups.push_back(std::move(g));
  }
  return out;
}

GroupPartition GroupPartition::singletons(int p) {
  std::vector<int> sizes(static_cast<size_t>(p), 1);
  return from_sizes(sizes);
}

int GroupPartition::total_size() const {
  int t = 0;
  for (const auto& g : groups) t += static_cast<int>(g.size());
  return t;
}

void GroupPartition::validate(int p) const {
  require(!groups.empty(), ErrorCode::invalid_argument, "partition has no groups");
  require(groups[0].size() == 1 && groups[0][0] == 0, ErrorCode::invalid_argument,
          "group 1 must be exactly the intercept column");
  std::vector<char> seen(static_cast<size_t>(p), 0);
  for (const auto& g : groups) {
    require(!g.empty(), ErrorCode::invalid_argument, "empty group in partition");
    for (int j : g) {
      require(j >= 0 && j < p, ErrorCode::invalid_argument, "group column index out of range");
      require(!seen[static_cast<size_t>(j)], ErrorCode::invalid_argument,
              "groups overlap: column assigned twice");
      seen[static_cast<size_t>(j)] = 1;
    }
  }
  require(total_size() == p, ErrorCode::invalid_argument,
          "partition does not cover all columns");
}

std::vector<int> GroupPartition::canonical_order() const {
  std::vector<int> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [this](int a, int b) {
    return *std::min_element(groups[a].begin(), groups[a].end()) <
           *std::min_element(groups[b].begin(), groups[b].end());
  });
  return order;
}

SqrtPsdResult sqrt_psd(const Eigen::MatrixXd& a) {
  require(a.rows() == a.cols(), ErrorCode::dimension_mismatch, "sqrt_psd: matrix not square");
  require(a.allFinite(), ErrorCode::invalid_argument, "sqrt_psd: non-finite entries");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-12 * scale, ErrorCode::invalid_argument,
          "sqrt_psd: matrix asymmetric beyond tolerance");

  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  require(eig.info() == Eigen::Success, ErrorCode::numeric, "sqrt_psd: eigensolver failed");

  const Eigen::VectorXd& d = eig.eigenvalues();
  const double dmax = d.maxCoeff();
  SqrtPsdResult out;
  out.tol = 1e-10 * std::max(1.0, dmax);
  require(d.minCoeff() >= -out.tol, ErrorCode::invalid_argument,
          "sqrt_psd: matrix not PSD within tolerance");

  Eigen::VectorXd sd = Eigen::VectorXd::Zero(d.size());
  Eigen::VectorXd isd = Eigen::VectorXd::Zero(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] >= out.tol) {
      sd[i] = std::sqrt(d[i]);
      isd[i] = 1.0 / sd[i];
      ++out.rank;
    }
  }
  const Eigen::MatrixXd& u = eig.eigenvectors();
  out.sqrt = u * sd.asDiagonal() * u.transpose();
  out.pinv_sqrt = u * isd.asDiagonal() * u.transpose();
  // Symmetrize away the last-bit asymmetry of the triple product.
  out.sqrt = 0.5 * (out.sqrt + out.sqrt.transpose()).eval();
  out.pinv_sqrt = 0.5 * (out.pinv_sqrt + out.pinv_sqrt.transpose()).eval();
  return out;
}

Eigen::VectorXd GroupedDesign::group_segment(int k, const Eigen::VectorXd& v) const {
  const auto& cols = partition_.groups[k];
  Eigen::VectorXd out(cols.size());
  for (size_t i = 0; i < cols.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[cols[i]];
  return out;
}

void GroupedDesign::scatter_group(int k, const Eigen::VectorXd& vk, Eigen::VectorXd& out) const {
  const auto& cols = partition_.groups[k];
  for (size_t i = 0; i < cols.size(); ++i) out[cols[i]] = vk[static_cast<Eigen::Index>(i)];
}

GroupedDesign build_design(Eigen::MatrixXd x, GroupPartition partition) {
  require(x.rows() >= 1 && x.cols() >= 1, ErrorCode::invalid_argument, "design is empty");
  require(x.allFinite(), ErrorCode::invalid_argument, "design contains non-finite entries");
  partition.validate(static_cast<int>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    require(x(i, 0) == 1.0, ErrorCode::invalid_argument,
            "first design column must be the all-ones intercept");
  }

  GroupedDesign d;
  d.x_ = std::move(x);
  d.partition_ = std::move(partition);
  const int q = d.partition_.num_groups();
  const double n = static_cast<double>(d.x_.rows());
  d.group_x_.resize(q);
  d.gram_.resize(q);
  d.gram_sqrt_.resize(q);
  d.gram_sqrt_pinv_.resize(q);
  d.gram_rank_.resize(q);
  for (int k = 0; k < q; ++k) {
    const auto& cols = d.partition_.groups[k];
    Eigen::MatrixXd xk(d.x_.rows(), cols.size());
    for (size_t j = 0; j < cols.size(); ++j) xk.col(static_cast<Eigen::Index>(j)) = d.x_.col(cols[j]);
    d.gram_[k] = (xk.transpose() * xk) / n;
    SqrtPsdResult s = sqrt_psd(d.gram_[k]);
    d.gram_sqrt_[k] = std::move(s.sqrt);
    d.gram_sqrt_pinv_[k] = std::move(s.pinv_sqrt);
    d.gram_rank_[k] = s.rank;
    d.group_x_[k] = std::move(xk);
  }
  return d;
}

Eigen::VectorXd RescaleRecord::apply(const std::vector<Eigen::MatrixXd>& blocks,
                                     const Eigen::VectorXd& v) const {
  require(v.size() == partition_.total_size(), ErrorCode::dimension_mismatch,
          "rescale transform: coefficient length mismatch");
  Eigen::VectorXd out(v.size());
  for (int k = 0; k < partition_.num_groups(); ++k) {
    const auto& cols = partition_.groups[k];
    Eigen::VectorXd vk(cols.size());
    for (size_t i = 0; i < cols.size(); ++i) vk[static_cast<Eigen::Index>(i)] = v[cols[i]];
    Eigen::VectorXd wk = blocks[k] * vk;
    for (size_t i = 0; i < cols.size(); ++i) out[cols[i]] = wk[static_cast<Eigen::Index>(i)];
  }
  return out;
}

Eigen::VectorXd RescaleRecord::to_whitened(const Eigen::VectorXd& beta_original) const {
  return apply(d_half_, beta_original);
}

Eigen::VectorXd RescaleRecord::to_original(const Eigen::VectorXd& beta_whitened) const {
  return apply(d_half_inv_, beta_whitened);
}

std::pair<GroupedDesign, RescaleRecord> rescale_to_identity(
    const GroupedDesign& design, const std::vector<Eigen::MatrixXd>* target_grams) {
  const int q = design.q();
  if (target_grams != nullptr) {
    require(static_cast<int>(target_grams->size()) == q, ErrorCode::dimension_mismatch,
            "rescale_to_identity: need one target Gram per group");
  }
  std::vector<Eigen::MatrixXd> d_half(q), d_half_inv(q);
  Eigen::MatrixXd x_new = design.x();
  for (int k = 0; k < q; ++k) {
    const int pk = design.group_size(k);
    Eigen::MatrixXd target;
    if (target_grams != nullptr) {
      target = (*target_grams)[k];
      require(target.rows() == pk && target.cols() == pk, ErrorCode::dimension_mismatch,
              "rescale_to_identity: target Gram has wrong dimensions");
      require(k != 0 || std::abs(target(0, 0) - 1.0) <= 1e-12, ErrorCode::invalid_argument,
              "rescale_to_identity: the intercept target must be the 1x1 identity");
    } else if (k == 0) {
      target = Eigen::MatrixXd::Identity(1, 1);
    } else {
      target = design.gram(k);
    }
    SqrtPsdResult s = sqrt_psd(target);
    require(s.rank == pk, ErrorCode::singular,
            "rescale_to_identity: target Gram singular; cannot whiten");
    const auto& cols = design.group_cols(k);
    Eigen::MatrixXd xk(design.n(), pk);
    for (int j = 0; j < pk; ++j) xk.col(j) = design.x().col(cols[static_cast<size_t>(j)]);
    Eigen::MatrixXd xk_new = xk * s.pinv_sqrt;
    for (int j = 0; j < pk; ++j) x_new.col(cols[static_cast<size_t>(j)]) = xk_new.col(j);
    d_half[k] = std::move(s.sqrt);
    d_half_inv[k] = std::move(s.pinv_sqrt);
  }
  GroupedDesign out = build_design(std::move(x_new), design.partition());
  return {std::move(out),
          RescaleRecord(design.partition(), std::move(d_half), std::move(d_half_inv))};
}

}  // namespace gqr
