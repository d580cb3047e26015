#include "son/problem.hpp"

#include "son/incidence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace son {

namespace {

void check_centroids(const ClusteringProblem &problem, const Matrix &U) {
  if (U.rows() != problem.data().p() || U.cols() != problem.data().n())
    throw StructuralError("centroid matrix is " + std::to_string(U.rows()) +
                          "x" + std::to_string(U.cols()) + ", expected " +
                          std::to_string(problem.data().p()) + "x" +
                          std::to_string(problem.data().n()));
}

class UnionFind {
public:
  explicit UnionFind(Index n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), Index{0});
  }
  Index find(Index a) {
    while (parent_[static_cast<std::size_t>(a)] != a) {
      auto &pa = parent_[static_cast<std::size_t>(a)];
      pa = parent_[static_cast<std::size_t>(pa)];
      a = pa;
    }
    return a;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b)
      parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }

private:
  std::vector<Index> parent_;
};

} // namespace

double fusion_penalty(const WeightGraph &graph, const Matrix &U) {
  double total = 0.0;
  for (const auto &e : graph.edges())
    total += e.w * (U.col(e.i) - U.col(e.j)).norm();
  return total;
}

double objective_value(const ClusteringProblem &problem, const Matrix &U) {
  check_centroids(problem, U);
  const auto &data = problem.data();
  // Masked entries carry zero entry weight; their stored value may be NaN.
  const Matrix omega = data.entry_weights();
  const Matrix residual =
      (omega.array() > 0.0).select(data.values() - U, 0.0);
  const double fit =
      0.5 * (residual.array().square().colwise().sum().transpose() *
             problem.multiplicities().array())
                .sum();
  return fit + problem.gamma() * fusion_penalty(problem.graph(), U);
}

Matrix primal_from_dual(const ClusteringProblem &problem, const Matrix &Z) {
  IncidenceOperator A(problem.graph());
  Matrix S = A.scatter(Z);
  return problem.data().values() -
         S * problem.multiplicities().cwiseInverse().asDiagonal();
}

DualReport dual_objective_and_gap(const ClusteringProblem &problem,
                                  const Matrix &Z) {
  if (problem.data().has_mask())
    throw PreconditionError("dual evaluation requires fully observed data");
  const auto &graph = problem.graph();
  if (Z.rows() != problem.data().p() || Z.cols() != graph.edge_count())
    throw StructuralError("dual matrix shape does not match the problem");

  DualReport report;
  report.max_violation = -std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (Index l = 0; l < graph.edge_count(); ++l) {
    const double radius = problem.gamma() * graph.edge(l).w;
    report.max_violation =
        std::max(report.max_violation, Z.col(l).norm() - radius);
    scale = std::max(scale, radius);
  }
  if (graph.edge_count() == 0)
    report.max_violation = 0.0;

  IncidenceOperator A(graph);
  const Matrix S = A.scatter(Z);
  const Vector &m = problem.multiplicities();
  const Matrix &X = problem.data().values();
  report.dual = (S.cwiseProduct(X)).sum() -
                0.5 * (S.colwise().squaredNorm().transpose().cwiseQuotient(m))
                          .sum();
  const Matrix U = X - S * m.cwiseInverse().asDiagonal();
  report.primal = objective_value(problem, U);
  if (report.max_violation <= kFeasibilitySlack * std::max(1.0, scale)) {
    // primal − dual rewritten as Σ_ℓ (γw‖d_ℓ‖ − ⟨z_ℓ, d_ℓ⟩), which avoids
    // cancellation between two large numbers.
    const Matrix D = A.differences(U);
    double gap = 0.0;
    for (Index l = 0; l < graph.edge_count(); ++l)
      gap += std::max(0.0, problem.gamma() * graph.edge(l).w * D.col(l).norm() -
                               Z.col(l).dot(D.col(l)));
    report.gap = gap;
  }
  return report;
}

DualReport dual_objective_and_gap(const ClusteringProblem &problem,
                                  const SolverState &state) {
  return dual_objective_and_gap(problem, state.Z);
}

Partition connected_components(Index n, const std::vector<Edge> &edges,
                               const std::vector<bool> &keep) {
  UnionFind uf(n);
  for (std::size_t l = 0; l < edges.size(); ++l)
    if (keep.empty() || keep[l])
      uf.unite(edges[l].i, edges[l].j);
  std::vector<Index> roots(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    roots[static_cast<std::size_t>(i)] = uf.find(i);
  return Partition::from_labels(roots);
}

Partition connected_components(const WeightGraph &graph) {
  return connected_components(graph.n(), graph.edges(), {});
}

DuplicateMerge merge_duplicates(const DataMatrix &data) {
  DuplicateMerge out;
  const Index n = data.n();
  if (data.has_mask()) {
    out.reduced = data;
    out.multiplicities = Vector::Ones(n);
    out.node_of.resize(static_cast<std::size_t>(n));
    std::iota(out.node_of.begin(), out.node_of.end(), Index{0});
    return out;
  }
  const Matrix &X = data.values();
  auto less = [&](Index a, Index b) {
    for (Index d = 0; d < X.rows(); ++d) {
      if (X(d, a) < X(d, b)) return true;
      if (X(d, a) > X(d, b)) return false;
    }
    return false;
  };
  std::map<Index, Index, decltype(less)> first_of(less);
  std::vector<Index> representative;
  out.node_of.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto [it, inserted] =
        first_of.try_emplace(i, static_cast<Index>(representative.size()));
    if (inserted)
      representative.push_back(i);
    out.node_of[static_cast<std::size_t>(i)] = it->second;
  }
  const Index k = static_cast<Index>(representative.size());
  Matrix reduced(X.rows(), k);
  out.multiplicities = Vector::Zero(k);
  for (Index r = 0; r < k; ++r)
    reduced.col(r) = X.col(representative[static_cast<std::size_t>(r)]);
  for (Index i = 0; i < n; ++i)
    out.multiplicities(out.node_of[static_cast<std::size_t>(i)]) += 1.0;
  out.reduced = DataMatrix(std::move(reduced));
  out.any_merged = k < n;
  return out;
}

Matrix expand_merged(const DuplicateMerge &merge, const Matrix &U_reduced) {
  Matrix U(U_reduced.rows(), static_cast<Index>(merge.node_of.size()));
  for (std::size_t i = 0; i < merge.node_of.size(); ++i)
    U.col(static_cast<Index>(i)) = U_reduced.col(merge.node_of[i]);
  return U;
}

} // namespace son
