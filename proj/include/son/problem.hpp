#pragma once

#include "son/core.hpp"

#include <optional>

namespace son {

/// Primal objective at centroids U. Fit term is restricted to observed
/// entries when the data carries a mask.
double objective_value(const ClusteringProblem &problem, const Matrix &U);

/// Penalty term Σ w_ij ‖u_i − u_j‖₂ (without γ).
double fusion_penalty(const WeightGraph &graph, const Matrix &U);

struct DualReport {
  double dual = 0.0;
  double primal = 0.0;
  /// Empty when Z violates a ball constraint beyond the feasibility slack.
  std::optional<double> gap;
  /// max_ℓ (‖z_ℓ‖ − γ w_ℓ), ≤ 0 when feasible.
  double max_violation = 0.0;
};

/// Relative slack used for dual feasibility and duality-gap assertions.
inline constexpr double kFeasibilitySlack = 1e-9;

/// Dual value at Z with U eliminated (U = X − Z·A·diag(m)⁻¹), and the gap
/// against the primal objective at that U. Requires unmasked data.
DualReport dual_objective_and_gap(const ClusteringProblem &problem,
                                  const Matrix &Z);
DualReport dual_objective_and_gap(const ClusteringProblem &problem,
                                  const SolverState &state);

/// Primal point paired with a dual iterate.
Matrix primal_from_dual(const ClusteringProblem &problem, const Matrix &Z);

/// Components of the positive-weight graph.
Partition connected_components(const WeightGraph &graph);

/// Components of the graph restricted to edges flagged true.
Partition connected_components(Index n, const std::vector<Edge> &edges,
                               const std::vector<bool> &keep);

/// Exact duplicate columns collapsed into weighted nodes.
struct DuplicateMerge {
  DataMatrix reduced;
  Vector multiplicities;
  std::vector<Index> node_of;  // original index → reduced node
  bool any_merged = false;
};

/// Masked data is returned unchanged (masks make equality ill-defined).
DuplicateMerge merge_duplicates(const DataMatrix &data);

/// Broadcast reduced centroids back to the original observations.
Matrix expand_merged(const DuplicateMerge &merge, const Matrix &U_reduced);

} // namespace son
