#pragma once

#include "son/core.hpp"
#include "son/solvers.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace son {

struct PartitionGeometry {
  std::vector<double> diameters;  // max intra-block distance
  Matrix set_distances;           // K × K, min cross-block distance
  Matrix means;                   // p × K
  std::vector<Index> sizes;

  Index K() const { return static_cast<Index>(sizes.size()); }
};

PartitionGeometry partition_geometry(const DataMatrix &data,
                                     const Partition &partition);
/// Labels in [0, K); a label with no members is a structural error.
PartitionGeometry partition_geometry(const DataMatrix &data,
                                     const std::vector<Index> &labels,
                                     Index K);

enum class RecoveryFamily { panahi_uniform, sun_weighted, zhu_two_cubes };
std::string to_string(RecoveryFamily f);

struct RecoveryInterval {
  double lower = 0.0;
  /// Empty means unbounded above.
  std::optional<double> upper;
  bool feasible = false;
  RecoveryFamily family = RecoveryFamily::panahi_uniform;

  bool contains(double gamma) const {
    return gamma >= lower && (!upper || gamma <= *upper);
  }
};

/// Uniform-weight interval: [max_k D_k / n_k, min_{k≠l} ‖x̄_k − x̄_l‖ / (2n)].
RecoveryInterval panahi_interval(const PartitionGeometry &geometry, Index n);

/// Weighted interval. The lower bound's denominator is minimized over
/// intra-block pairs; a nonpositive denominator makes the interval
/// infeasible.
RecoveryInterval sun_interval(const DataMatrix &data, const WeightGraph &graph,
                              const Partition &partition);

/// Two-cube interval from per-axis half-lengths of each cube.
RecoveryInterval zhu_two_cubes(const Vector &half_lengths_1,
                               const Vector &half_lengths_2, Index n1,
                               Index n2, double distance);

/// Prefactor pair (2n₂(n₁−1)/n₁² + 1, 2n₁(n₂−1)/n₂² + 1).
std::pair<double, double> zhu_prefactors(Index n1, Index n2);

struct RecoveryReport {
  RecoveryInterval interval;
  std::vector<double> gammas;
  std::vector<bool> recovered;
  double pass_rate = 0.0;
  /// Widest range found by bisection outside the interval.
  double empirical_lower = 0.0;
  std::optional<double> empirical_upper;
};

/// Solve at 5 γ values inside the interval and compare the fused partition
/// with `truth`; then bisect outward for the empirical recovery range.
RecoveryReport verify_recovery(const DataMatrix &data, const Partition &truth,
                               const WeightGraph &graph,
                               const RecoveryInterval &interval,
                               int trials = 5,
                               const SolverConfig &config = {},
                               double fusion_tolerance = 1e-6,
                               int bisection_steps = 12);

/// Five sample points inside the interval (geometric when lower > 0).
std::vector<double> interval_samples(const RecoveryInterval &interval,
                                     double unbounded_upper, int trials);

struct LipschitzReport {
  std::vector<double> ratios;
  double max_ratio = 0.0;
  /// Every trial satisfied ‖Δu‖ ≤ ‖Δx‖ + 1e-8.
  bool within_bound = true;
};

LipschitzReport lipschitz_harness(const DataMatrix &data,
                                  const WeightGraph &graph, double gamma,
                                  int trials, double perturbation_scale,
                                  std::uint64_t seed,
                                  const SolverConfig &config = {});

} // namespace son
