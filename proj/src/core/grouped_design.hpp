#pragma once
#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "core/error.hpp"

namespace gqr {

// Disjoint partition of the columns {0, ..., p-1} into groups. Group 0 must be
// exactly the intercept column {0}. Groups may be non-contiguous index sets.
struct GroupPartition {
  std::vector<std::vector<int>> groups;

  static GroupPartition from_sizes(const std::vector<int>& sizes);
  static GroupPartition singletons(int p);

  int num_groups() const { return static_cast<int>(groups.size()); }
  int group_size(int k) const { return static_cast<int>(groups[k].size()); }
  int total_size() const;
  // Throws unless the groups are nonempty, disjoint, cover {0..p-1}, and group
  // 0 is {0}.
  void validate(int p) const;
  // Group indices ordered by smallest member column. Reductions over groups
  // iterate in this order so results do not depend on how the caller listed
  // the groups.
  std::vector<int> canonical_order() const;
};

struct SqrtPsdResult {
  Eigen::MatrixXd sqrt;       // A^{1/2}
  Eigen::MatrixXd pinv_sqrt;  // (A^{1/2})^+, generalized inverse on the range
  int rank = 0;
  double tol = 0.0;  // eigenvalue cutoff that was applied
};

// Symmetric PSD square root via eigendecomposition. The input is symmetrized
// as (A + A')/2 after checking that the asymmetry is below tolerance.
// Eigenvalues below 1e-10 * max(1, lambda_max) are treated as exact zeros.
SqrtPsdResult sqrt_psd(const Eigen::MatrixXd& a);

// Immutable design matrix with group structure and cached per-group Gram
// blocks Sigma_k = X_k' X_k / n together with their symmetric square roots.
// Safe to share across concurrent fits.
class GroupedDesign {
 public:
  GroupedDesign() = default;

  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index p() const { return x_.cols(); }
  int q() const { return partition_.num_groups(); }

  const Eigen::MatrixXd& x() const { return x_; }
  const GroupPartition& partition() const { return partition_; }
  const std::vector<int>& group_cols(int k) const { return partition_.groups[k]; }
  int group_size(int k) const { return partition_.group_size(k); }

  const Eigen::MatrixXd& group_x(int k) const { return group_x_[k]; }
  const Eigen::MatrixXd& gram(int k) const { return gram_[k]; }
  const Eigen::MatrixXd& gram_sqrt(int k) const { return gram_sqrt_[k]; }
  const Eigen::MatrixXd& gram_sqrt_pinv(int k) const { return gram_sqrt_pinv_[k]; }
  int gram_rank(int k) const { return gram_rank_[k]; }

  // Gathers the entries of a length-p vector belonging to group k.
  Eigen::VectorXd group_segment(int k, const Eigen::VectorXd& v) const;
  // Adds the entries of a length-p_k vector into the group's positions.
  void scatter_group(int k, const Eigen::VectorXd& vk, Eigen::VectorXd& out) const;

 private:
  friend GroupedDesign build_design(Eigen::MatrixXd x, GroupPartition partition);

  Eigen::MatrixXd x_;
  GroupPartition partition_;
  std::vector<Eigen::MatrixXd> group_x_;
  std::vector<Eigen::MatrixXd> gram_;
  std::vector<Eigen::MatrixXd> gram_sqrt_;
  std::vector<Eigen::MatrixXd> gram_sqrt_pinv_;
  std::vector<int> gram_rank_;
};

// Validates the inputs (first column all ones, finite entries, partition
// consistent with p) and precomputes the per-group Gram caches.
GroupedDesign build_design(Eigen::MatrixXd x, GroupPartition partition);

// Block-diagonal coefficient transform produced by rescale_to_identity:
// beta_whitened = D^{1/2} beta_original per group.
class RescaleRecord {
 public:
  RescaleRecord(GroupPartition partition, std::vector<Eigen::MatrixXd> d_half,
                std::vector<Eigen::MatrixXd> d_half_inv)
      : partition_(std::move(partition)),
        d_half_(std::move(d_half)),
        d_half_inv_(std::move(d_half_inv)) {}

  Eigen::VectorXd to_whitened(const Eigen::VectorXd& beta_original) const;
  Eigen::VectorXd to_original(const Eigen::VectorXd& beta_whitened) const;
  const Eigen::MatrixXd& d_half(int k) const { return d_half_[k]; }
  const Eigen::MatrixXd& d_half_inv(int k) const { return d_half_inv_[k]; }

 private:
  Eigen::VectorXd apply(const std::vector<Eigen::MatrixXd>& blocks,
                        const Eigen::VectorXd& v) const;
  GroupPartition partition_;
  std::vector<Eigen::MatrixXd> d_half_;
  std::vector<Eigen::MatrixXd> d_half_inv_;
};

// Whitens each group block against a target Gram (empirical Gram by default):
// X_k <- X_k T_k^{-1/2}. Every target must be positive definite to full rank;
// singular targets are an error, never silently regularized. The intercept
// group is left untouched when targets are defaulted.
std::pair<GroupedDesign, RescaleRecord> rescale_to_identity(
    const GroupedDesign& design,
    const std::vector<Eigen::MatrixXd>* target_grams = nullptr);

}  // namespace gqr
