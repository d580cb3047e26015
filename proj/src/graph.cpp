#include "son/graph.hpp"

#include "son/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

namespace son {

namespace {

struct Pair {
  double d;
  Index i;
  Index j;
};

bool pair_less(const Pair &a, const Pair &b) {
  return std::tie(a.d, a.i, a.j) < std::tie(b.d, b.i, b.j);
}

std::vector<Pair> sorted_pairs(const Matrix &D) {
  const Index n = D.cols();
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index j = 1; j < n; ++j)
    for (Index i = 0; i < j; ++i)
      pairs.push_back({D(i, j), i, j});
  std::sort(pairs.begin(), pairs.end(), pair_less);
  return pairs;
}

class Dsu {
public:
  explicit Dsu(Index n) : p_(static_cast<std::size_t>(n)) {
    std::iota(p_.begin(), p_.end(), Index{0});
  }
  Index find(Index a) {
    while (p_[static_cast<std::size_t>(a)] != a)
      a = p_[static_cast<std::size_t>(a)] =
          p_[static_cast<std::size_t>(p_[static_cast<std::size_t>(a)])];
    return a;
  }
  bool unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a == b)
      return false;
    p_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    return true;
  }

private:
  std::vector<Index> p_;
};

/// Kruskal over pairs not yet used; marks the chosen pairs used.
std::vector<Edge> kruskal(Index n, const std::vector<Pair> &pairs,
                          std::vector<bool> &used) {
  Dsu dsu(n);
  std::vector<Edge> tree;
  for (std::size_t k = 0; k < pairs.size() && static_cast<Index>(tree.size()) < n - 1; ++k) {
    if (used[k])
      continue;
    if (dsu.unite(pairs[k].i, pairs[k].j)) {
      used[k] = true;
      tree.push_back({pairs[k].i, pairs[k].j, 1.0});
    }
  }
  return tree;
}

void check_no_duplicates(const Matrix &D) {
  for (Index j = 1; j < D.cols(); ++j)
    for (Index i = 0; i < j; ++i)
      if (D(i, j) == 0.0)
        throw PreconditionError("observations " + std::to_string(i) + " and " +
                                std::to_string(j) +
                                " coincide; merge duplicates first");
}

BuiltGraph finish(Index n, std::vector<Edge> edges, GraphProvenance tag,
                  std::vector<std::string> warnings = {}) {
  std::sort(edges.begin(), edges.end(), [](const Edge &a, const Edge &b) {
    return std::tie(a.i, a.j) < std::tie(b.i, b.j);
  });
  BuiltGraph out{WeightGraph(n, std::move(edges), tag), false,
                 std::move(warnings)};
  out.connected = is_connected(out.graph);
  if (!out.connected)
    out.warnings.emplace_back("graph is not connected");
  return out;
}

std::vector<Edge> knn_edges(const Matrix &D, int k) {
  const Index n = D.cols();
  std::set<std::pair<Index, Index>> chosen;
  k = static_cast<int>(std::min<Index>(k, n - 1));
  std::vector<Index> order;
  for (Index i = 0; i < n; ++i) {
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    order.erase(order.begin() + i);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](Index a, Index b) {
                        return std::tie(D(i, a), a) < std::tie(D(i, b), b);
                      });
    for (int r = 0; r < k; ++r) {
      const Index j = order[static_cast<std::size_t>(r)];
      chosen.emplace(std::min(i, j), std::max(i, j));
    }
  }
  std::vector<Edge> edges;
  for (auto [i, j] : chosen)
    edges.push_back({i, j, 1.0});
  return edges;
}

int parse_int(const std::string &s, const std::string &what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size())
      throw InvalidArgument("");
    return v;
  } catch (const std::exception &) {
    throw InvalidArgument("bad integer '" + s + "' in " + what);
  }
}

double parse_double(const std::string &s, const std::string &what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size())
      throw InvalidArgument("");
    return v;
  } catch (const std::exception &) {
    throw InvalidArgument("bad number '" + s + "' in " + what);
  }
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    out.push_back(item);
  return out;
}

} // namespace

void GraphSpec::validate() const {
  if ((method.kind == GraphMethod::Kind::knn ||
       method.kind == GraphMethod::Kind::mst_knn) &&
      method.k < 1)
    throw InvalidArgument("k must be >= 1");
  if (method.kind == GraphMethod::Kind::dmsts && method.M < 1)
    throw InvalidArgument("M must be >= 1");
  if (!(weights.alpha >= 0.0 && weights.alpha <= 1.0))
    throw InvalidArgument("alpha must lie in [0, 1]");
  if (weights.local_scale_neighbors && *weights.local_scale_neighbors < 1)
    throw InvalidArgument("local scale neighbor count must be >= 1");
}

GraphMethod parse_graph_method(const std::string &text) {
  const auto parts = split(text, ':');
  if (parts.empty())
    throw InvalidArgument("empty graph spec");
  GraphMethod m;
  const auto &name = parts[0];
  auto arg = [&](int fallback) {
    return parts.size() > 1 ? parse_int(parts[1], "graph spec") : fallback;
  };
  if (name == "mst") {
    m.kind = GraphMethod::Kind::mst;
  } else if (name == "knn") {
    m.kind = GraphMethod::Kind::knn;
    m.k = arg(3);
  } else if (name == "mst+knn" || name == "knn+mst") {
    m.kind = GraphMethod::Kind::mst_knn;
    m.k = arg(3);
  } else if (name == "dmsts") {
    m.kind = GraphMethod::Kind::dmsts;
    m.M = arg(3);
  } else if (name == "full") {
    m.kind = GraphMethod::Kind::full;
  } else {
    throw InvalidArgument("unknown graph method '" + name + "'");
  }
  GraphSpec{m, {}}.validate();
  return m;
}

WeightKind parse_weight_kind(const std::string &text) {
  const auto parts = split(text, ':');
  if (parts.empty())
    throw InvalidArgument("empty weight spec");
  WeightKind w;
  const auto &name = parts[0];
  if (name == "uniform") {
    w.kind = WeightKind::Kind::uniform;
  } else if (name == "inverse" || name == "inverse_euclidean") {
    w.kind = WeightKind::Kind::inverse_euclidean;
  } else if (name == "gaussian") {
    w.kind = WeightKind::Kind::gaussian;
    if (parts.size() > 1)
      w.local_scale_neighbors = parse_int(parts[1], "weight spec");
  } else if (name == "mix") {
    w.kind = WeightKind::Kind::convex_combo;
    if (parts.size() < 2)
      throw InvalidArgument("mix weights need alpha, e.g. mix:0.7");
    w.alpha = parse_double(parts[1], "weight spec");
    if (parts.size() > 2)
      w.local_scale_neighbors = parse_int(parts[2], "weight spec");
  } else {
    throw InvalidArgument("unknown weight kind '" + name + "'");
  }
  GraphSpec{{}, w}.validate();
  return w;
}

std::string to_string(const GraphMethod &m) {
  switch (m.kind) {
  case GraphMethod::Kind::mst: return "mst";
  case GraphMethod::Kind::knn: return "knn:" + std::to_string(m.k);
  case GraphMethod::Kind::mst_knn: return "mst+knn:" + std::to_string(m.k);
  case GraphMethod::Kind::dmsts: return "dmsts:" + std::to_string(m.M);
  case GraphMethod::Kind::full: return "full";
  }
  return "mst";
}

std::string to_string(const WeightKind &w) {
  const std::string m =
      w.local_scale_neighbors ? ":" + std::to_string(*w.local_scale_neighbors)
                              : "";
  switch (w.kind) {
  case WeightKind::Kind::uniform: return "uniform";
  case WeightKind::Kind::inverse_euclidean: return "inverse";
  case WeightKind::Kind::gaussian: return "gaussian" + m;
  case WeightKind::Kind::convex_combo: {
    std::ostringstream os;
    os.precision(17);
    os << "mix:" << w.alpha << m;
    return os.str();
  }
  }
  return "uniform";
}

Matrix pairwise_distances(const Matrix &X) {
  const Index n = X.cols();
  Matrix D(n, n);
  for (Index j = 0; j < n; ++j) {
    D(j, j) = 0.0;
    for (Index i = 0; i < j; ++i)
      D(i, j) = D(j, i) = (X.col(i) - X.col(j)).norm();
  }
  return D;
}

bool is_connected(const WeightGraph &graph) {
  return graph.n() <= 1 || connected_components(graph).K() == 1;
}

BuiltGraph build_mst(const DataMatrix &data) {
  const Index n = data.n();
  if (n < 2)
    return {WeightGraph(n, {}, GraphProvenance::mst), true,
            {"fewer than two observations: empty edge set"}};
  const Matrix D = pairwise_distances(data.values());
  check_no_duplicates(D);
  const auto pairs = sorted_pairs(D);
  std::vector<bool> used(pairs.size(), false);
  return finish(n, kruskal(n, pairs, used), GraphProvenance::mst);
}

BuiltGraph build_knn(const DataMatrix &data, int k) {
  const Index n = data.n();
  if (k < 1 || k > n - 1)
    throw InvalidArgument("k must lie in [1, n-1]; got k = " +
                          std::to_string(k) + ", n = " + std::to_string(n));
  const Matrix D = pairwise_distances(data.values());
  check_no_duplicates(D);
  return finish(n, knn_edges(D, k), GraphProvenance::knn);
}

BuiltGraph build_mst_knn(const DataMatrix &data, int k) {
  const Index n = data.n();
  if (k < 1 || k > n - 1)
    throw InvalidArgument("k must lie in [1, n-1]; got k = " +
                          std::to_string(k) + ", n = " + std::to_string(n));
  const Matrix D = pairwise_distances(data.values());
  check_no_duplicates(D);
  const auto pairs = sorted_pairs(D);
  std::vector<bool> used(pairs.size(), false);
  std::set<std::pair<Index, Index>> chosen;
  for (const auto &e : kruskal(n, pairs, used))
    chosen.emplace(e.i, e.j);
  for (const auto &e : knn_edges(D, k))
    chosen.emplace(e.i, e.j);
  std::vector<Edge> edges;
  for (auto [i, j] : chosen)
    edges.push_back({i, j, 1.0});
  return finish(n, std::move(edges), GraphProvenance::mst_knn);
}

BuiltGraph build_full(const DataMatrix &data) {
  const Index n = data.n();
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      edges.push_back({i, j, 1.0});
  return finish(n, std::move(edges), GraphProvenance::full);
}

BuiltGraph build_dmsts(const DataMatrix &data, int M,
                       std::vector<std::vector<Edge>> *trees) {
  if (M < 1)
    throw InvalidArgument("M must be >= 1");
  const Index n = data.n();
  if (n < 2)
    return {WeightGraph(n, {}, GraphProvenance::dmsts), true,
            {"fewer than two observations: empty edge set"}};
  const Matrix D = pairwise_distances(data.values());
  check_no_duplicates(D);
  const auto pairs = sorted_pairs(D);
  std::vector<bool> used(pairs.size(), false);
  std::vector<Edge> all;
  std::vector<std::string> warnings;
  if (trees)
    trees->clear();
  for (int m = 0; m < M; ++m) {
    auto snapshot = used;
    auto tree = kruskal(n, pairs, used);
    if (static_cast<Index>(tree.size()) < n - 1) {
      used = std::move(snapshot);
      warnings.push_back("only " + std::to_string(m) +
                         " edge-disjoint spanning trees available; requested " +
                         std::to_string(M));
      break;
    }
    if (trees)
      trees->push_back(tree);
    all.insert(all.end(), tree.begin(), tree.end());
  }
  return finish(n, std::move(all), GraphProvenance::dmsts,
                std::move(warnings));
}

int default_local_scale_neighbors(Index n) {
  const Index m = std::max<Index>(3, n / 10);
  return static_cast<int>(std::max<Index>(1, std::min(m, n - 1)));
}

Vector local_scales(const Matrix &X, int neighbors) {
  const Index n = X.cols();
  if (n < 2)
    return Vector::Ones(n);
  const Index m = std::clamp<Index>(neighbors, 1, n - 1);
  const Matrix D = pairwise_distances(X);
  Vector sigma(n);
  std::vector<double> row;
  for (Index i = 0; i < n; ++i) {
    row.clear();
    for (Index j = 0; j < n; ++j)
      if (j != i)
        row.push_back(D(i, j));
    std::partial_sort(row.begin(), row.begin() + m, row.end());
    const auto half = static_cast<std::size_t>(m / 2);
    sigma(i) = (m % 2 == 1) ? row[half] : 0.5 * (row[half - 1] + row[half]);
  }
  return sigma;
}

BuiltGraph assign_weights(const WeightGraph &edges, const DataMatrix &data,
                          const WeightKind &kind) {
  if (edges.n() != data.n())
    throw StructuralError("graph and data disagree on n");
  const Matrix &X = data.values();
  Vector sigma;
  if (kind.kind == WeightKind::Kind::gaussian ||
      kind.kind == WeightKind::Kind::convex_combo) {
    sigma = local_scales(X, kind.local_scale_neighbors.value_or(
                                default_local_scale_neighbors(data.n())));
    if (data.n() > 1 && !(sigma.array() > 0.0).all())
      throw PreconditionError("zero local scale: duplicate observations");
  }
  std::vector<Edge> out;
  std::vector<std::string> warnings;
  out.reserve(edges.edges().size());
  for (const auto &e : edges.edges()) {
    const double d = (X.col(e.i) - X.col(e.j)).norm();
    if (d == 0.0)
      throw PreconditionError("zero-length edge (" + std::to_string(e.i) +
                              ", " + std::to_string(e.j) +
                              "): duplicates were not merged");
    double w = 1.0;
    switch (kind.kind) {
    case WeightKind::Kind::uniform: w = 1.0; break;
    case WeightKind::Kind::inverse_euclidean: w = 1.0 / d; break;
    case WeightKind::Kind::gaussian:
      w = std::exp(-d * d / (sigma(e.i) * sigma(e.j)));
      break;
    case WeightKind::Kind::convex_combo:
      w = (1.0 - kind.alpha) +
          kind.alpha * std::exp(-d * d / (sigma(e.i) * sigma(e.j)));
      break;
    }
    if (w > 0.0)
      out.push_back({e.i, e.j, w});
    else
      warnings.push_back("edge (" + std::to_string(e.i) + ", " +
                         std::to_string(e.j) +
                         ") dropped: weight underflowed to zero");
  }
  BuiltGraph result{WeightGraph(edges.n(), std::move(out), edges.provenance()),
                    false, std::move(warnings)};
  result.connected = is_connected(result.graph);
  if (!result.connected)
    result.warnings.emplace_back("graph is not connected");
  return result;
}

BuiltGraph build_graph(const DataMatrix &data, const GraphSpec &spec) {
  spec.validate();
  BuiltGraph topology;
  switch (spec.method.kind) {
  case GraphMethod::Kind::mst: topology = build_mst(data); break;
  case GraphMethod::Kind::knn: topology = build_knn(data, spec.method.k); break;
  case GraphMethod::Kind::mst_knn:
    topology = build_mst_knn(data, spec.method.k);
    break;
  case GraphMethod::Kind::dmsts:
    topology = build_dmsts(data, spec.method.M);
    break;
  case GraphMethod::Kind::full: topology = build_full(data); break;
  }
  auto weighted = assign_weights(topology.graph, data, spec.weights);
  for (auto &w : topology.warnings)
    if (w != "graph is not connected")
      weighted.warnings.push_back(std::move(w));
  return weighted;
}

WeightGraph build_level_weights(const std::vector<Index> &labels,
                                const std::vector<Index> &super_labels,
                                double within, double between,
                                double across) {
  if (labels.size() != super_labels.size())
    throw StructuralError("label vectors differ in length");
  const Index n = static_cast<Index>(labels.size());
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
      const double w = labels[a] == labels[b]             ? within
                       : super_labels[a] == super_labels[b] ? between
                                                            : across;
      edges.push_back({i, j, w});
    }
  return WeightGraph(n, std::move(edges), GraphProvenance::custom);
}

} // namespace son
