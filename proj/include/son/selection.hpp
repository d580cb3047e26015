#pragma once

#include "son/core.hpp"
#include "son/path.hpp"
#include "son/solvers.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace son {

// ---------------------------------------------------------------------------
// Missing data

/// The masked objective increased between outer iterations by more than
/// the allowed slack; the inner solver is too loose.
class MmViolation : public Error {
public:
  MmViolation(long outer, double before, double after);
  long outer_iteration() const { return outer_; }

private:
  long outer_;
};

struct MissingOptions {
  long max_outer = 1000;
  /// Converged when |f_{t} − f_{t+1}| ≤ relative_tolerance · |f_t|.
  double relative_tolerance = 1e-8;
  /// Allowed increase, relative to max(1, |f_t|).
  double slack = 1e-12;
  /// Blocks known to stay fused; inner solves run on the compressed problem.
  std::optional<Partition> fused;
  double fusion_tolerance = 1e-6;
};

struct MissingSolve {
  /// Last inner solve; block-level when `MissingOptions::fused` was given.
  SolverState state;
  Matrix U;  // p × n
  Partition partition;
  /// Data with masked entries replaced by the final centroids.
  Matrix imputed;
  /// Masked objective at the start and after every outer iteration.
  std::vector<double> objective_history;
  long outer_iterations = 0;
  bool converged = false;
};

/// Majorization–minimization: impute unobserved entries from the current
/// centroids (row means at the start), solve the complete-data problem,
/// repeat.
MissingSolve solve_missing(const DataMatrix &data, const WeightGraph &graph,
                           double gamma, const SolverConfig &config = {},
                           const MissingOptions &options = {});

// ---------------------------------------------------------------------------
// Hold-out validation

struct HoldoutPlan {
  double fraction = 0.1;
  std::uint64_t seed = 0;
  std::vector<std::pair<Index, Index>> entries;  // (feature, observation)
};

/// Uniform draw of observed entries such that every observation keeps at
/// least one observed entry.
HoldoutPlan make_holdout_plan(const DataMatrix &data, double fraction,
                              std::uint64_t seed);

/// The data with the plan's entries additionally masked.
DataMatrix apply_holdout(const DataMatrix &data, const HoldoutPlan &plan);

struct SelectionReport {
  std::string criterion;
  std::vector<double> gammas;
  std::vector<double> scores;
  std::vector<Index> clusters;
  /// eBIC only: the residual sum of squares hit the floor.
  std::vector<bool> floored;
  std::size_t chosen = 0;

  double chosen_gamma() const { return gammas.at(chosen); }
  Index chosen_K() const { return clusters.at(chosen); }
};

/// Index of the minimal score; ties go to the larger γ.
std::size_t argmin_prefer_larger(const std::vector<double> &gammas,
                                 const std::vector<double> &scores);

SelectionReport holdout_select(const DataMatrix &data, const WeightGraph &graph,
                               const std::vector<double> &gammas,
                               const HoldoutPlan &plan,
                               const SolverConfig &config = {},
                               double fusion_tolerance = 1e-6);

// ---------------------------------------------------------------------------
// eBIC

/// N·log(RSS/N) + df·log N + 2ζ·df·log n with N = np and df = Kp.
double ebic_score(double rss, Index n, Index p, Index K, double zeta);

struct EbicOptions {
  double zeta = 0.5;
  /// Only snapshots with at most this many clusters compete.
  std::optional<Index> max_clusters;
};

/// Scores each snapshot with the residual sum of squares of the data
/// against its centroid matrix. RSS below the floor ε·max(‖X‖², 1) is raised to
/// the floor and flagged.
SelectionReport ebic_select(const ClusterPath &path, const DataMatrix &data,
                            const EbicOptions &options = {});

// ---------------------------------------------------------------------------
// Metrics and reweighting

double adjusted_rand_index(const std::vector<Index> &a,
                           const std::vector<Index> &b);

struct FoldedPenalty {
  enum class Kind { log_delta, gaussian_integral };
  Kind kind = Kind::log_delta;
  double delta = 1e-3;
  Vector local_scales;  // σ_i, gaussian_integral only

  static FoldedPenalty log(double delta);
  static FoldedPenalty gaussian(Vector local_scales);

  double value(double z, Index i, Index j) const;
  double derivative(double z, Index i, Index j) const;
};

/// One local linear approximation step: w̃_ij = φ′(‖u_i − u_j‖). Weights
/// that underflow are clamped to the smallest normal double so the
/// topology is unchanged.
WeightGraph lla_reweight(const Matrix &U, const WeightGraph &graph,
                         const FoldedPenalty &penalty);

/// ½ Σ ‖x_i − u_i‖² + γ Σ_(i,j)∈E φ_ij(‖u_i − u_j‖) over the graph's edges.
double folded_concave_objective(const DataMatrix &data,
                                const WeightGraph &graph, const Matrix &U,
                                double gamma, const FoldedPenalty &penalty);

} // namespace son
