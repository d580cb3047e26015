#pragma once

#include "son/core.hpp"
#include "son/solvers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace son {

/// Median of all pairwise distances between observations; the length scale
/// for fusion detection.
double median_pairwise_distance(const Matrix &X);

/// Components of the subgraph of edges with ‖u_i − u_j‖ ≤ threshold.
Partition detect_fusions(const Matrix &U, const WeightGraph &graph,
                         double threshold);

/// Default fusion test: threshold = tolerance × median pairwise data distance.
Partition detect_fusions(const SolverState &state, const WeightGraph &graph,
                         const Matrix &X, double tolerance = 1e-6);

/// Column means of U over each block (p × K).
Matrix block_centroids(const Matrix &U, const Partition &partition);

// ---------------------------------------------------------------------------
// Compression

/// The problem restricted to partition-constant centroids: K super-nodes
/// with multiplicities n_k, means x̄_k and total inter-block weights.
struct CompressedProblem {
  Partition partition;
  Vector sizes;              // Σ multiplicities per block
  Matrix means;              // p × K
  WeightGraph graph;         // block graph with w^(k,l)
  double constant = 0.0;     // ½ Σ m_i ‖x_i − x̄_k(i)‖²

  ClusteringProblem problem(double gamma) const;
  /// Objective of the weighted problem at block centroids (p × K).
  double objective(const Matrix &block_U, double gamma) const;
  Matrix broadcast(const Matrix &block_U) const;
  /// Dual variables of `from` summed onto this problem's block edges.
  Matrix remap_duals(const CompressedProblem &from,
                     const Matrix &Z_from) const;
};

CompressedProblem compress(const ClusteringProblem &problem,
                           const Partition &partition);

/// Fusions found by a solve of `cp.problem(γ)`, lifted to observations:
/// block edges whose split variable is exactly zero or whose centroid
/// difference is within `threshold`.
Partition lift_fusions(const CompressedProblem &cp, const SolverState &state,
                       double threshold);

// ---------------------------------------------------------------------------
// Paths

enum class PathMode { exact, carp };

struct GridSpec {
  /// Explicit increasing γ values; when empty see resolve_grid.
  std::vector<double> gammas;
  int count = 50;
  double min_ratio = 1e-4;
};

/// Parse "0.5", "list:0.1,0.2,0.4", "grid:50" or "geom:count:min:max".
GridSpec parse_grid_spec(const std::string &text);

std::vector<double> geometric_grid(double lo, double hi, int count);

struct PathOptions {
  PathMode mode = PathMode::exact;
  SolverConfig solver;
  double fusion_tolerance = 1e-6;
  /// Compress after every fusion so fused clusters stay fused. Disable to
  /// surface weights whose paths are not trees.
  bool enforce_monotone = true;
};

struct PathSnapshot {
  double gamma = 0.0;
  Partition partition;
  Matrix centroids;  // p × K distinct centroids
  Matrix U;          // p × n
  double objective = 0.0;
  long iterations = 0;
  bool converged = false;
  double duality_gap = 0.0;
};

struct ClusterPath {
  std::vector<double> gammas;
  std::vector<PathSnapshot> snapshots;
  bool truncated = false;
  std::string error;
};

struct GammaMax {
  double gamma = 0.0;
  bool connected = true;
  /// Per-component values when the graph is disconnected.
  std::vector<double> per_component;
};

/// Smallest γ found by doubling/halving with a single fused cluster;
/// minimal within a factor of 2.
GammaMax gamma_max(const ClusteringProblem &problem,
                   const SolverConfig &config = {},
                   double fusion_tolerance = 1e-6);

/// Largest γ at which no two observations can share a centroid:
/// min over pairs of ‖x_i − x_j‖ / (deg_i/m_i + deg_j/m_j), with deg the
/// weighted degree. Infinite when no pair is joined by any path.
double fusion_onset(const ClusteringProblem &problem);

/// The explicit values of `grid`, or a geometric grid of `grid.count` points
/// from min(γ*·min_ratio, fusion_onset) to γ*.
std::vector<double> resolve_grid(const ClusteringProblem &problem,
                                 const GridSpec &grid,
                                 const SolverConfig &solver = {},
                                 double fusion_tolerance = 1e-6);

ClusterPath compute_path(const ClusteringProblem &problem,
                         const GridSpec &grid, const PathOptions &options);

// ---------------------------------------------------------------------------
// Dendrogram

class NonMonotoneFusion : public Error {
public:
  NonMonotoneFusion(double gamma_before, double gamma_after);
  double gamma_before() const { return before_; }
  double gamma_after() const { return after_; }

private:
  double before_, after_;
};

enum class HeightMode { fusion_gamma, fusion_rank };

struct Dendrogram {
  struct Node {
    double height = 0.0;
    Index left = -1;   // -1 for leaves
    Index right = -1;
    Index parent = -1;
    Index size = 1;
  };
  /// Nodes [0, n) are the observations; merges follow in creation order.
  std::vector<Node> nodes;
  Index leaves = 0;

  Index merge_count() const {
    return static_cast<Index>(nodes.size()) - leaves;
  }
  std::vector<Index> roots() const;
  /// Height of the lowest node containing every index in `members`, or
  /// empty if they lie in different trees.
  std::optional<double> join_height(const std::vector<Index> &members) const;
};

Dendrogram extract_dendrogram(const ClusterPath &path,
                              HeightMode mode = HeightMode::fusion_gamma);

std::string to_newick(const Dendrogram &tree);

} // namespace son
