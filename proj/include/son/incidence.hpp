#pragma once

#include "son/core.hpp"

#include <Eigen/SparseCore>

namespace son {

/// Implicit edge-incidence matrix A ∈ R^{|E|×n}, row ℓ = e_i − e_j for edge
/// ℓ = (i, j). Centroids are p × n, so the maps act on the right:
/// differences U·Aᵀ (p × |E|) and scatter Z·A (p × n).
class IncidenceOperator {
public:
  explicit IncidenceOperator(const WeightGraph &graph);

  Index nodes() const { return n_; }
  Index edges() const { return static_cast<Index>(head_.size()); }
  Index head(Index l) const { return head_[static_cast<std::size_t>(l)]; }
  Index tail(Index l) const { return tail_[static_cast<std::size_t>(l)]; }

  /// out.col(ℓ) = U.col(i) − U.col(j).
  void differences(const Matrix &U, Matrix &out) const;
  Matrix differences(const Matrix &U) const;

  /// out = Z·A: out.col(i) += z_ℓ, out.col(j) −= z_ℓ. Overwrites out.
  void scatter(const Matrix &Z, Matrix &out) const;
  Matrix scatter(const Matrix &Z) const;

  /// AᵀA, the unweighted graph Laplacian.
  Eigen::SparseMatrix<double> laplacian() const;

  /// λ_max(A·diag(m)⁻¹·Aᵀ) by power iteration; the dual gradient's
  /// Lipschitz constant.
  double spectral_bound(const Vector &multiplicities,
                        int max_iterations = 2000,
                        double tolerance = 1e-12) const;

private:
  Index n_ = 0;
  std::vector<Index> head_;
  std::vector<Index> tail_;
};

} // namespace son
