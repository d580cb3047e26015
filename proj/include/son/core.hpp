#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace son {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shapes or indices that do not fit together.
class StructuralError : public Error {
public:
  using Error::Error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// Non-finite iterate or failed factorization.
class NumericalFailure : public Error {
public:
  NumericalFailure(const std::string &what, long iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

private:
  long iteration_;
};

class ParseError : public Error {
public:
  ParseError(const std::string &what, long line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

private:
  long line_;
};

// ---------------------------------------------------------------------------
// DataMatrix

/// Observations stored column-wise (column i is x_i), with an optional
/// observed-entry mask (true = observed).
class DataMatrix {
public:
  DataMatrix() = default;
  explicit DataMatrix(Matrix values);
  DataMatrix(Matrix values, Mask mask);

  Index p() const { return values_.rows(); }
  Index n() const { return values_.cols(); }
  const Matrix &values() const { return values_; }
  bool has_mask() const { return mask_.has_value(); }
  const std::optional<Mask> &mask() const { return mask_; }
  bool observed(Index d, Index i) const { return !mask_ || (*mask_)(d, i); }
  Index observed_count() const;

  /// 0/1 entry weights; all ones when unmasked.
  Matrix entry_weights() const;

  /// Same data with the mask dropped. Masked entries keep whatever value is
  /// stored in `values` (imputation writes there).
  DataMatrix without_mask() const { return DataMatrix(values_); }

private:
  void validate() const;

  Matrix values_;
  std::optional<Mask> mask_;
};

// ---------------------------------------------------------------------------
// WeightGraph

struct Edge {
  Index i = 0;
  Index j = 0;
  double w = 1.0;
};

enum class GraphProvenance { mst, knn, mst_knn, dmsts, full, custom };

std::string to_string(GraphProvenance g);

/// Undirected weighted edge set over n nodes; edges stored with i < j,
/// deduplicated, w > 0 and finite.
class WeightGraph {
public:
  WeightGraph() = default;
  WeightGraph(Index n, std::vector<Edge> edges,
              GraphProvenance provenance = GraphProvenance::custom);

  Index n() const { return n_; }
  Index edge_count() const { return static_cast<Index>(edges_.size()); }
  const std::vector<Edge> &edges() const { return edges_; }
  const Edge &edge(Index l) const { return edges_[static_cast<std::size_t>(l)]; }
  GraphProvenance provenance() const { return provenance_; }

  Vector weights() const;
  /// Same topology with new weights (one per edge, in edge order).
  WeightGraph with_weights(const Vector &w) const;
  std::vector<Index> degrees() const;

private:
  Index n_ = 0;
  std::vector<Edge> edges_;
  GraphProvenance provenance_ = GraphProvenance::custom;
};

// ---------------------------------------------------------------------------
// Partition

/// Cluster labels in [0, K), canonicalized so that clusters are numbered in
/// order of their smallest member.
class Partition {
public:
  Partition() = default;
  static Partition from_labels(const std::vector<Index> &raw);
  static Partition singletons(Index n);
  static Partition single_block(Index n);

  Index n() const { return static_cast<Index>(labels_.size()); }
  Index K() const { return static_cast<Index>(sizes_.size()); }
  const std::vector<Index> &labels() const { return labels_; }
  Index label(Index i) const { return labels_[static_cast<std::size_t>(i)]; }
  const std::vector<Index> &sizes() const { return sizes_; }
  std::vector<std::vector<Index>> blocks() const;

  /// True when every block of `*this` lies inside one block of `coarser`.
  bool refines(const Partition &coarser) const;

  friend bool operator==(const Partition &a, const Partition &b) {
    return a.labels_ == b.labels_;
  }

private:
  std::vector<Index> labels_;
  std::vector<Index> sizes_;
};

// ---------------------------------------------------------------------------
// Problem and solver state

/// One instance of the weighted problem
///   ½ Σ_i m_i Σ_d ω_di (x_di − u_di)² + γ Σ_(i,j)∈E w_ij ‖u_i − u_j‖₂
/// with node multiplicities m_i (1 unless duplicates or fused blocks were
/// merged) and entry weights ω from the data mask.
class ClusteringProblem {
public:
  ClusteringProblem(DataMatrix data, WeightGraph graph, double gamma);
  ClusteringProblem(DataMatrix data, WeightGraph graph, double gamma,
                    Vector multiplicities);

  const DataMatrix &data() const { return data_; }
  const WeightGraph &graph() const { return graph_; }
  double gamma() const { return gamma_; }
  const Vector &multiplicities() const { return multiplicities_; }
  bool unit_multiplicities() const;

  ClusteringProblem with_gamma(double gamma) const;

private:
  DataMatrix data_;
  WeightGraph graph_;
  double gamma_ = 0.0;
  Vector multiplicities_;
};

struct SolverState {
  Matrix U;  // p × n
  Matrix V;  // p × |E|
  Matrix Z;  // p × |E|
  long iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;

  /// Per-iteration records, filled only when the solver is asked to.
  std::vector<double> dual_history;
  std::vector<double> feasibility_history;  // max_ℓ (‖z_ℓ‖ − γw_ℓ)
};

} // namespace son
