#pragma once

#include <Eigen/Core>

#include <cmath>

namespace son {

/// Group soft-threshold: the prox of t‖·‖₂, max(0, 1 − t/‖v‖)·v.
template <typename Derived>
typename Derived::PlainObject
prox_group_norm(const Eigen::MatrixBase<Derived> &v,
                typename Derived::Scalar threshold) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm = v.norm();
  if (norm <= threshold)
    return Derived::PlainObject::Zero(v.rows(), v.cols());
  return (Scalar(1) - threshold / norm) * v;
}

/// Euclidean projection onto {z : ‖z‖₂ ≤ radius}.
template <typename Derived>
typename Derived::PlainObject
project_dual_ball(const Eigen::MatrixBase<Derived> &z,
                  typename Derived::Scalar radius) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm = z.norm();
  if (norm <= radius)
    return z;
  return (radius / norm) * z;
}

/// In-place projection of one column block; returns the norm before
/// projection.
template <typename Derived>
typename Derived::Scalar
project_dual_ball_inplace(Eigen::MatrixBase<Derived> &&z,
                          typename Derived::Scalar radius) {
  const auto norm = z.norm();
  if (norm > radius)
    z *= radius / norm;
  return norm;
}

template <typename Derived>
typename Derived::PlainObject
prox_group_norm_columns(const Eigen::MatrixBase<Derived> &V,
                        const Eigen::Ref<const Eigen::Matrix<
                            typename Derived::Scalar, Eigen::Dynamic, 1>> &t) {
  typename Derived::PlainObject out(V.rows(), V.cols());
  for (Eigen::Index l = 0; l < V.cols(); ++l)
    out.col(l) = prox_group_norm(V.col(l), t(l));
  return out;
}

} // namespace son
