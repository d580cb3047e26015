#pragma once

#include "son/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace son {

struct GraphMethod {
  enum class Kind { mst, knn, mst_knn, dmsts, full };
  Kind kind = Kind::mst_knn;
  int k = 3;  // knn and mst_knn
  int M = 1;  // dmsts
};

struct WeightKind {
  enum class Kind { uniform, inverse_euclidean, gaussian, convex_combo };
  Kind kind = Kind::gaussian;
  /// Mixing weight for convex_combo: w = (1 − α) + α·w_gauss.
  double alpha = 1.0;
  /// Neighbors used for the local scale σ_i; empty selects max(3, ⌊n/10⌋).
  std::optional<int> local_scale_neighbors;
};

struct GraphSpec {
  GraphMethod method;
  WeightKind weights;

  void validate() const;
};

/// Parsers for the textual forms used on the command line:
/// "mst", "knn:3", "mst+knn:3", "dmsts:3", "full"; and
/// "uniform", "inverse", "gaussian[:m]", "mix:α[:m]".
GraphMethod parse_graph_method(const std::string &text);
WeightKind parse_weight_kind(const std::string &text);
std::string to_string(const GraphMethod &m);
std::string to_string(const WeightKind &w);

/// A graph plus what the builder has to say about it.
struct BuiltGraph {
  WeightGraph graph;
  bool connected = false;
  std::vector<std::string> warnings;
};

/// Dense Euclidean distances between columns.
Matrix pairwise_distances(const Matrix &X);

BuiltGraph build_mst(const DataMatrix &data);
BuiltGraph build_knn(const DataMatrix &data, int k);
BuiltGraph build_mst_knn(const DataMatrix &data, int k);
BuiltGraph build_full(const DataMatrix &data);

/// Union of M successive minimum spanning trees, each avoiding edges used by
/// the previous ones. `trees`, when given, receives the edges of each tree.
BuiltGraph build_dmsts(const DataMatrix &data, int M,
                       std::vector<std::vector<Edge>> *trees = nullptr);

/// Median distance from each x_i to its m nearest other points.
Vector local_scales(const Matrix &X, int neighbors);
int default_local_scale_neighbors(Index n);

/// Replace the weights of `edges` according to `kind`. Edges whose weight
/// underflows to zero leave the graph and are reported in `warnings`.
BuiltGraph assign_weights(const WeightGraph &edges, const DataMatrix &data,
                          const WeightKind &kind);

/// Topology then weights.
BuiltGraph build_graph(const DataMatrix &data, const GraphSpec &spec);

/// Complete graph with three weight levels: within-cluster, within
/// super-cluster, across super-clusters.
WeightGraph build_level_weights(const std::vector<Index> &labels,
                                const std::vector<Index> &super_labels,
                                double within, double between,
                                double across);

bool is_connected(const WeightGraph &graph);

} // namespace son
