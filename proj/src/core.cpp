#include "son/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <utility>

namespace son {

DataMatrix::DataMatrix(Matrix values) : values_(std::move(values)) {
  validate();
}

DataMatrix::DataMatrix(Matrix values, Mask mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  validate();
}

void DataMatrix::validate() const {
  if (values_.rows() < 1 || values_.cols() < 1)
    throw StructuralError("data matrix needs p >= 1 and n >= 1");
  if (mask_) {
    if (mask_->rows() != values_.rows() || mask_->cols() != values_.cols())
      throw StructuralError("mask shape differs from data shape");
    for (Index i = 0; i < n(); ++i)
      if (!mask_->col(i).any())
        throw StructuralError("observation " + std::to_string(i) +
                              " has no observed entry");
  }
  for (Index i = 0; i < n(); ++i)
    for (Index d = 0; d < p(); ++d)
      if (observed(d, i) && !std::isfinite(values_(d, i)))
        throw StructuralError("non-finite observed entry at (" +
                              std::to_string(d) + ", " + std::to_string(i) +
                              ")");
}

Index DataMatrix::observed_count() const {
  return mask_ ? static_cast<Index>(mask_->count()) : p() * n();
}

Matrix DataMatrix::entry_weights() const {
  if (!mask_)
    return Matrix::Ones(p(), n());
  return mask_->cast<double>();
}

std::string to_string(GraphProvenance g) {
  switch (g) {
  case GraphProvenance::mst: return "mst";
  case GraphProvenance::knn: return "knn";
  case GraphProvenance::mst_knn: return "mst+knn";
  case GraphProvenance::dmsts: return "dmsts";
  case GraphProvenance::full: return "full";
  case GraphProvenance::custom: return "custom";
  }
  return "custom";
}

WeightGraph::WeightGraph(Index n, std::vector<Edge> edges,
                         GraphProvenance provenance)
    : n_(n), edges_(std::move(edges)), provenance_(provenance) {
  if (n_ < 0)
    throw StructuralError("negative node count");
  std::set<std::pair<Index, Index>> seen;
  for (auto &e : edges_) {
    if (e.i > e.j)
      std::swap(e.i, e.j);
    if (e.i < 0 || e.j >= n_ || e.i == e.j)
      throw StructuralError("edge (" + std::to_string(e.i) + ", " +
                            std::to_string(e.j) + ") out of range or a loop");
    if (!(e.w > 0.0) || !std::isfinite(e.w))
      throw StructuralError("edge weight must be positive and finite");
    if (!seen.emplace(e.i, e.j).second)
      throw StructuralError("duplicate edge (" + std::to_string(e.i) + ", " +
                            std::to_string(e.j) + ")");
  }
}

Vector WeightGraph::weights() const {
  Vector w(edge_count());
  for (Index l = 0; l < edge_count(); ++l)
    w(l) = edge(l).w;
  return w;
}

WeightGraph WeightGraph::with_weights(const Vector &w) const {
  if (w.size() != edge_count())
    throw StructuralError("weight vector length differs from edge count");
  auto edges = edges_;
  for (std::size_t l = 0; l < edges.size(); ++l)
    edges[l].w = w(static_cast<Index>(l));
  return WeightGraph(n_, std::move(edges), provenance_);
}

std::vector<Index> WeightGraph::degrees() const {
  std::vector<Index> deg(static_cast<std::size_t>(n_), 0);
  for (const auto &e : edges_) {
    ++deg[static_cast<std::size_t>(e.i)];
    ++deg[static_cast<std::size_t>(e.j)];
  }
  return deg;
}

Partition Partition::from_labels(const std::vector<Index> &raw) {
  Partition out;
  out.labels_.resize(raw.size());
  std::unordered_map<Index, Index> remap;  // raw → canonical
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, inserted] =
        remap.try_emplace(raw[i], static_cast<Index>(remap.size()));
    const Index label = it->second;
    if (inserted)
      out.sizes_.push_back(0);
    out.labels_[i] = label;
    ++out.sizes_[static_cast<std::size_t>(label)];
  }
  return out;
}

Partition Partition::singletons(Index n) {
  Partition out;
  out.labels_.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    out.labels_[static_cast<std::size_t>(i)] = i;
  out.sizes_.assign(static_cast<std::size_t>(n), 1);
  return out;
}

Partition Partition::single_block(Index n) {
  Partition out;
  out.labels_.assign(static_cast<std::size_t>(n), 0);
  if (n > 0)
    out.sizes_.assign(1, n);
  return out;
}

std::vector<std::vector<Index>> Partition::blocks() const {
  std::vector<std::vector<Index>> out(sizes_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i)
    out[static_cast<std::size_t>(labels_[i])].push_back(static_cast<Index>(i));
  return out;
}

bool Partition::refines(const Partition &coarser) const {
  if (coarser.n() != n())
    return false;
  std::vector<Index> target(sizes_.size(), -1);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    auto &t = target[static_cast<std::size_t>(labels_[i])];
    if (t < 0)
      t = coarser.labels_[i];
    else if (t != coarser.labels_[i])
      return false;
  }
  return true;
}

ClusteringProblem::ClusteringProblem(DataMatrix data, WeightGraph graph,
                                     double gamma)
    : ClusteringProblem(std::move(data), std::move(graph), gamma,
                        Vector()) {}

ClusteringProblem::ClusteringProblem(DataMatrix data, WeightGraph graph,
                                     double gamma, Vector multiplicities)
    : data_(std::move(data)), graph_(std::move(graph)), gamma_(gamma),
      multiplicities_(std::move(multiplicities)) {
  if (graph_.n() != data_.n())
    throw StructuralError("graph has " + std::to_string(graph_.n()) +
                          " nodes but data has " + std::to_string(data_.n()) +
                          " observations");
  if (!(gamma_ >= 0.0) || !std::isfinite(gamma_))
    throw InvalidArgument("gamma must be finite and nonnegative");
  if (multiplicities_.size() == 0)
    multiplicities_ = Vector::Ones(data_.n());
  if (multiplicities_.size() != data_.n())
    throw StructuralError("multiplicity vector length differs from n");
  if (!(multiplicities_.array() > 0.0).all())
    throw InvalidArgument("multiplicities must be positive");
}

bool ClusteringProblem::unit_multiplicities() const {
  return (multiplicities_.array() == 1.0).all();
}

ClusteringProblem ClusteringProblem::with_gamma(double gamma) const {
  return ClusteringProblem(data_, graph_, gamma, multiplicities_);
}

} // namespace son
