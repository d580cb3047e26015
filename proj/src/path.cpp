#include "son/path.hpp"

#include "son/graph.hpp"
#include "son/kernels.hpp"
#include "son/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>

namespace son {

double median_pairwise_distance(const Matrix &X) {
  const Index n = X.cols();
  if (n < 2)
    return 0.0;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      d.push_back((X.col(i) - X.col(j)).norm());
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

Partition detect_fusions(const Matrix &U, const WeightGraph &graph,
                         double threshold) {
  std::vector<bool> keep(graph.edges().size());
  for (std::size_t l = 0; l < keep.size(); ++l) {
    const auto &e = graph.edges()[l];
    keep[l] = (U.col(e.i) - U.col(e.j)).norm() <= threshold;
  }
  return connected_components(graph.n(), graph.edges(), keep);
}

Partition detect_fusions(const SolverState &state, const WeightGraph &graph,
                         const Matrix &X, double tolerance) {
  const double threshold = tolerance * median_pairwise_distance(X);
  const bool has_split = state.V.cols() == graph.edge_count() &&
                         state.V.rows() == state.U.rows();
  std::vector<bool> keep(graph.edges().size());
  for (std::size_t l = 0; l < keep.size(); ++l) {
    const auto &e = graph.edges()[l];
    const bool split_zero =
        has_split && state.V.col(static_cast<Index>(l)).squaredNorm() == 0.0;
    keep[l] = split_zero ||
              (state.U.col(e.i) - state.U.col(e.j)).norm() <= threshold;
  }
  return connected_components(graph.n(), graph.edges(), keep);
}

Matrix block_centroids(const Matrix &U, const Partition &partition) {
  Matrix C = Matrix::Zero(U.rows(), partition.K());
  for (Index i = 0; i < U.cols(); ++i)
    C.col(partition.label(i)) += U.col(i);
  for (Index k = 0; k < partition.K(); ++k)
    C.col(k) /= static_cast<double>(partition.sizes()[static_cast<std::size_t>(k)]);
  return C;
}

// ---------------------------------------------------------------------------

ClusteringProblem CompressedProblem::problem(double gamma) const {
  return ClusteringProblem(DataMatrix(means), graph, gamma, sizes);
}

double CompressedProblem::objective(const Matrix &block_U, double gamma) const {
  const double fit =
      0.5 * (means - block_U).colwise().squaredNorm().dot(sizes.transpose());
  return constant + fit + gamma * fusion_penalty(graph, block_U);
}

Matrix CompressedProblem::broadcast(const Matrix &block_U) const {
  Matrix U(block_U.rows(), partition.n());
  for (Index i = 0; i < partition.n(); ++i)
    U.col(i) = block_U.col(partition.label(i));
  return U;
}

Matrix CompressedProblem::remap_duals(const CompressedProblem &from,
                                      const Matrix &Z_from) const {
  std::map<std::pair<Index, Index>, Index> index;
  for (Index l = 0; l < graph.edge_count(); ++l)
    index[{graph.edge(l).i, graph.edge(l).j}] = l;
  const auto blocks = from.partition.blocks();
  Matrix Z = Matrix::Zero(means.rows(), graph.edge_count());
  for (Index l = 0; l < from.graph.edge_count(); ++l) {
    const auto &e = from.graph.edge(l);
    const Index a = partition.label(blocks[static_cast<std::size_t>(e.i)][0]);
    const Index b = partition.label(blocks[static_cast<std::size_t>(e.j)][0]);
    if (a == b)
      continue;
    const auto it = index.find({std::min(a, b), std::max(a, b)});
    if (it == index.end())
      throw StructuralError("partition is not a coarsening of the source");
    if (a < b)
      Z.col(it->second) += Z_from.col(l);
    else
      Z.col(it->second) -= Z_from.col(l);
  }
  return Z;
}

CompressedProblem compress(const ClusteringProblem &problem,
                           const Partition &partition) {
  const auto &data = problem.data();
  if (data.has_mask())
    throw PreconditionError("compression requires fully observed data");
  if (partition.n() != data.n())
    throw StructuralError("partition size does not match the data");
  const Matrix &X = data.values();
  const Vector &m = problem.multiplicities();
  const Index K = partition.K();

  CompressedProblem out;
  out.partition = partition;
  out.sizes = Vector::Zero(K);
  out.means = Matrix::Zero(X.rows(), K);
  for (Index i = 0; i < data.n(); ++i) {
    out.sizes(partition.label(i)) += m(i);
    out.means.col(partition.label(i)) += m(i) * X.col(i);
  }
  for (Index k = 0; k < K; ++k)
    out.means.col(k) /= out.sizes(k);
  for (Index i = 0; i < data.n(); ++i)
    out.constant +=
        0.5 * m(i) * (X.col(i) - out.means.col(partition.label(i))).squaredNorm();

  std::map<std::pair<Index, Index>, double> total;
  for (const auto &e : problem.graph().edges()) {
    const Index a = partition.label(e.i), b = partition.label(e.j);
    if (a != b)
      total[{std::min(a, b), std::max(a, b)}] += e.w;
  }
  std::vector<Edge> edges;
  edges.reserve(total.size());
  for (const auto &[key, w] : total)
    edges.push_back({key.first, key.second, w});
  out.graph = WeightGraph(K, std::move(edges), GraphProvenance::custom);
  return out;
}

// ---------------------------------------------------------------------------

GridSpec parse_grid_spec(const std::string &text) {
  auto number = [&](const std::string &s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != s.size() || s.empty())
      throw InvalidArgument("bad number '" + s + "' in grid '" + text + "'");
    return v;
  };
  auto split = [](const std::string &s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
      parts.push_back(item);
    return parts;
  };

  GridSpec grid;
  if (text.rfind("grid:", 0) == 0) {
    grid.count = static_cast<int>(number(text.substr(5)));
    if (grid.count < 1)
      throw InvalidArgument("grid size must be >= 1");
    return grid;
  }
  if (text.rfind("geom:", 0) == 0) {
    const auto parts = split(text.substr(5), ':');
    if (parts.size() != 3)
      throw InvalidArgument("expected geom:count:min:max, got '" + text + "'");
    grid.gammas = geometric_grid(number(parts[1]), number(parts[2]),
                                 static_cast<int>(number(parts[0])));
    return grid;
  }
  const std::string body =
      text.rfind("list:", 0) == 0 ? text.substr(5) : text;
  for (const auto &part : split(body, ','))
    grid.gammas.push_back(number(part));
  if (grid.gammas.empty())
    throw InvalidArgument("empty γ list");
  for (double g : grid.gammas)
    if (!(g >= 0.0) || !std::isfinite(g))
      throw InvalidArgument("γ values must be finite and nonnegative");
  if (!std::is_sorted(grid.gammas.begin(), grid.gammas.end()))
    throw InvalidArgument("γ values must be increasing");
  return grid;
}

std::vector<double> geometric_grid(double lo, double hi, int count) {
  if (count < 1)
    throw InvalidArgument("grid size must be >= 1");
  if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi))
    throw InvalidArgument("geometric grid needs 0 < lo <= hi");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = hi;
    return g;
  }
  const double ratio = std::log(hi / lo) / static_cast<double>(count - 1);
  for (int k = 0; k < count; ++k)
    g[static_cast<std::size_t>(k)] = lo * std::exp(ratio * k);
  g.back() = hi;
  return g;
}

namespace {

/// Restrict the problem to the nodes of one component.
ClusteringProblem subproblem(const ClusteringProblem &problem,
                             const std::vector<Index> &nodes) {
  std::vector<Index> local(static_cast<std::size_t>(problem.data().n()), -1);
  Matrix X(problem.data().p(), static_cast<Index>(nodes.size()));
  Vector m(static_cast<Index>(nodes.size()));
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    local[static_cast<std::size_t>(nodes[a])] = static_cast<Index>(a);
    X.col(static_cast<Index>(a)) = problem.data().values().col(nodes[a]);
    m(static_cast<Index>(a)) = problem.multiplicities()(nodes[a]);
  }
  std::vector<Edge> edges;
  for (const auto &e : problem.graph().edges()) {
    const Index a = local[static_cast<std::size_t>(e.i)];
    const Index b = local[static_cast<std::size_t>(e.j)];
    if (a >= 0 && b >= 0)
      edges.push_back({a, b, e.w});
  }
  return ClusteringProblem(
      DataMatrix(std::move(X)),
      WeightGraph(static_cast<Index>(nodes.size()), std::move(edges)),
      problem.gamma(), std::move(m));
}

double gamma_max_connected(const ClusteringProblem &problem,
                           const SolverConfig &config, double threshold) {
  const Index n = problem.data().n();
  if (n < 2)
    return 0.0;
  const Matrix &X = problem.data().values();
  if ((X.colwise() - X.col(0)).squaredNorm() == 0.0)
    return 0.0;

  // Double upward from the fusion onset, solving on the blocks fused so far;
  // at large γ an uncompressed solve loses all precision to cancellation.
  double gamma = fusion_onset(problem);
  if (!(gamma > 0.0)) {
    double top = 0.0;
    for (const auto &e : problem.graph().edges())
      top = std::max(top, e.w);
    gamma = 1e-12 * std::sqrt(X.squaredNorm()) / top;
  }
  Partition current = Partition::singletons(n);
  for (int k = 0; k < 2100; ++k, gamma *= 2.0) {
    if (current.K() == n) {
      const auto state = solve(problem.with_gamma(gamma), config);
      std::vector<bool> keep(problem.graph().edges().size());
      for (std::size_t l = 0; l < keep.size(); ++l) {
        const auto &e = problem.graph().edges()[l];
        keep[l] = state.V.col(static_cast<Index>(l)).squaredNorm() == 0.0 ||
                  (state.U.col(e.i) - state.U.col(e.j)).norm() <= threshold;
      }
      current = connected_components(n, problem.graph().edges(), keep);
    } else {
      const CompressedProblem cp = compress(problem, current);
      current = lift_fusions(cp, solve(cp.problem(gamma), config), threshold);
    }
    if (current.K() == 1)
      return gamma;
    if (!std::isfinite(gamma))
      break;
  }
  throw NumericalFailure("no fully fused γ found while doubling", 2100);
}

} // namespace

GammaMax gamma_max(const ClusteringProblem &problem,
                   const SolverConfig &config, double fusion_tolerance) {
  GammaMax out;
  const double threshold =
      fusion_tolerance * median_pairwise_distance(problem.data().values());
  const Partition components = connected_components(problem.graph());
  out.connected = components.K() == 1;
  if (out.connected) {
    out.gamma = gamma_max_connected(problem, config, threshold);
    return out;
  }
  for (const auto &nodes : components.blocks()) {
    const double g =
        gamma_max_connected(subproblem(problem, nodes), config, threshold);
    out.per_component.push_back(g);
    out.gamma = std::max(out.gamma, g);
  }
  return out;
}

namespace {

PathSnapshot make_snapshot(const ClusteringProblem &problem, double gamma,
                           Matrix U, Partition partition,
                           const SolverState &state) {
  PathSnapshot s;
  s.gamma = gamma;
  s.centroids = block_centroids(U, partition);
  s.partition = std::move(partition);
  s.objective = objective_value(problem.with_gamma(gamma), U);
  s.U = std::move(U);
  s.iterations = state.iterations;
  s.converged = state.converged;
  s.duality_gap = state.duality_gap;
  return s;
}

} // namespace

Partition lift_fusions(const CompressedProblem &cp, const SolverState &state,
                       double threshold) {
  std::vector<bool> keep(cp.graph.edges().size());
  for (std::size_t l = 0; l < keep.size(); ++l) {
    const auto &e = cp.graph.edges()[l];
    keep[l] = state.V.col(static_cast<Index>(l)).squaredNorm() == 0.0 ||
              (state.U.col(e.i) - state.U.col(e.j)).norm() <= threshold;
  }
  const Partition blocks =
      connected_components(cp.graph.n(), cp.graph.edges(), keep);
  const Index n = cp.partition.n();
  std::vector<Index> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    labels[static_cast<std::size_t>(i)] = blocks.label(cp.partition.label(i));
  return Partition::from_labels(labels);
}

namespace {

void exact_path(const ClusteringProblem &problem, ClusterPath &path,
                const PathOptions &options) {
  const Matrix &X = problem.data().values();
  const Index n = problem.data().n();
  const double threshold =
      options.fusion_tolerance * median_pairwise_distance(X);

  Partition current = Partition::singletons(n);
  std::optional<CompressedProblem> compressed;
  std::optional<Matrix> Z_full;
  std::optional<Matrix> Z_block;

  for (double gamma : path.gammas) {
    Matrix U;
    SolverState state;
    Partition next;
    if (options.enforce_monotone && current.K() < n) {
      CompressedProblem cp = compress(problem, current);
      std::optional<Matrix> warm;
      if (compressed)
        warm = cp.remap_duals(*compressed, *Z_block);
      else if (Z_full) {
        CompressedProblem identity;
        identity.partition = Partition::singletons(n);
        identity.graph = problem.graph();
        warm = cp.remap_duals(identity, *Z_full);
      }
      state = solve(cp.problem(gamma), options.solver, warm);
      U = cp.broadcast(state.U);
      next = lift_fusions(cp, state, threshold);
      Z_block = state.Z;
      compressed = std::move(cp);
    } else {
      state = solve(problem.with_gamma(gamma), options.solver, Z_full);
      U = state.U;
      next = detect_fusions(state, problem.graph(), X,
                            options.fusion_tolerance);
      Z_full = state.Z;
    }
    path.snapshots.push_back(
        make_snapshot(problem, gamma, std::move(U), next, state));
    current = std::move(next);
  }
}

void carp_path(const ClusteringProblem &problem, ClusterPath &path,
               const PathOptions &options) {
  const AdmmSystem system(problem.graph(), problem.multiplicities(),
                          options.solver.rho, options.solver.cholesky_limit,
                          options.solver.cg_tolerance);
  const IncidenceOperator A(problem.graph());
  Matrix V = A.differences(problem.data().values());
  Matrix Z = Matrix::Zero(V.rows(), V.cols());
  for (double gamma : path.gammas) {
    SolverState state = admm_round(problem.with_gamma(gamma), system, V, Z);
    // Algorithmic fusions are the exact zeros of the split variable.
    std::vector<bool> keep(problem.graph().edges().size());
    for (std::size_t l = 0; l < keep.size(); ++l)
      keep[l] = state.V.col(static_cast<Index>(l)).squaredNorm() == 0.0;
    Partition P =
        connected_components(problem.data().n(), problem.graph().edges(), keep);
    V = state.V;
    Z = state.Z;
    Matrix U = state.U;
    path.snapshots.push_back(
        make_snapshot(problem, gamma, std::move(U), std::move(P), state));
  }
}

} // namespace

double fusion_onset(const ClusteringProblem &problem) {
  const auto &graph = problem.graph();
  const Index n = problem.data().n();
  Vector reach = Vector::Zero(n);
  for (const auto &e : graph.edges()) {
    reach(e.i) += e.w;
    reach(e.j) += e.w;
  }
  reach = reach.cwiseQuotient(problem.multiplicities());
  const Matrix D = pairwise_distances(problem.data().values());
  const Partition components = connected_components(graph);
  double onset = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < j; ++i)
      if (components.label(i) == components.label(j))
        onset = std::min(onset, D(i, j) / (reach(i) + reach(j)));
  return onset;
}

std::vector<double> resolve_grid(const ClusteringProblem &problem,
                                 const GridSpec &grid,
                                 const SolverConfig &solver,
                                 double fusion_tolerance) {
  if (!grid.gammas.empty())
    return grid.gammas;
  const double top = gamma_max(problem, solver, fusion_tolerance).gamma;
  if (top == 0.0)
    return {0.0};
  const double lo = std::min(top * grid.min_ratio, fusion_onset(problem));
  return geometric_grid(lo, top, grid.count);
}

ClusterPath compute_path(const ClusteringProblem &problem,
                         const GridSpec &grid, const PathOptions &options) {
  options.solver.validate();
  if (!(options.fusion_tolerance >= 0.0))
    throw InvalidArgument("fusion tolerance must be nonnegative");
  ClusterPath path;
  path.gammas =
      resolve_grid(problem, grid, options.solver, options.fusion_tolerance);
  try {
    if (options.mode == PathMode::carp)
      carp_path(problem, path, options);
    else
      exact_path(problem, path, options);
  } catch (const Error &e) {
    path.truncated = true;
    path.error = e.what();
  }
  return path;
}

// ---------------------------------------------------------------------------

namespace {
std::string fusion_message(double a, double b) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "clusters split between γ = " << a << " and γ = " << b
     << "; the path is not a tree";
  return ss.str();
}
} // namespace

NonMonotoneFusion::NonMonotoneFusion(double gamma_before, double gamma_after)
    : Error(fusion_message(gamma_before, gamma_after)), before_(gamma_before),
      after_(gamma_after) {}

std::vector<Index> Dendrogram::roots() const {
  std::vector<Index> out;
  for (std::size_t k = 0; k < nodes.size(); ++k)
    if (nodes[k].parent < 0)
      out.push_back(static_cast<Index>(k));
  return out;
}

std::optional<double>
Dendrogram::join_height(const std::vector<Index> &members) const {
  if (members.empty())
    return std::nullopt;
  // Ancestors of the first member, bottom-up; the answer is the lowest one
  // that contains every other member.
  std::vector<Index> chain;
  for (Index a = members[0]; a >= 0; a = nodes[static_cast<std::size_t>(a)].parent)
    chain.push_back(a);
  std::size_t need = 0;
  for (Index m : members) {
    bool found = false;
    for (Index a = m; a >= 0; a = nodes[static_cast<std::size_t>(a)].parent) {
      const auto it = std::find(chain.begin(), chain.end(), a);
      if (it != chain.end()) {
        need = std::max(need, static_cast<std::size_t>(it - chain.begin()));
        found = true;
        break;
      }
    }
    if (!found)
      return std::nullopt;
  }
  return nodes[static_cast<std::size_t>(chain[need])].height;
}

Dendrogram extract_dendrogram(const ClusterPath &path, HeightMode mode) {
  Dendrogram tree;
  if (path.snapshots.empty())
    return tree;
  const Index n = path.snapshots.front().partition.n();
  tree.leaves = n;
  tree.nodes.resize(static_cast<std::size_t>(n));

  Partition previous = Partition::singletons(n);
  double previous_gamma = 0.0;
  // Tree node currently representing each block of `previous`.
  std::vector<Index> node_of(static_cast<std::size_t>(n));
  std::iota(node_of.begin(), node_of.end(), Index{0});

  for (std::size_t t = 0; t < path.snapshots.size(); ++t) {
    const auto &snap = path.snapshots[t];
    if (!previous.refines(snap.partition))
      throw NonMonotoneFusion(previous_gamma, snap.gamma);
    const double height = mode == HeightMode::fusion_gamma
                              ? snap.gamma
                              : static_cast<double>(t + 1);
    // Old blocks grouped by new block; blocks are numbered by smallest
    // member, so iterating old blocks in order keeps that ordering.
    std::vector<std::vector<Index>> groups(
        static_cast<std::size_t>(snap.partition.K()));
    const auto old_blocks = previous.blocks();
    for (std::size_t b = 0; b < old_blocks.size(); ++b)
      groups[static_cast<std::size_t>(snap.partition.label(old_blocks[b][0]))]
          .push_back(static_cast<Index>(b));
    std::vector<Index> next_node(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
      Index acc = node_of[static_cast<std::size_t>(groups[g][0])];
      for (std::size_t r = 1; r < groups[g].size(); ++r) {
        const Index other = node_of[static_cast<std::size_t>(groups[g][r])];
        Dendrogram::Node node;
        node.height = height;
        node.left = acc;
        node.right = other;
        node.size = tree.nodes[static_cast<std::size_t>(acc)].size +
                    tree.nodes[static_cast<std::size_t>(other)].size;
        const Index id = static_cast<Index>(tree.nodes.size());
        tree.nodes.push_back(node);
        tree.nodes[static_cast<std::size_t>(acc)].parent = id;
        tree.nodes[static_cast<std::size_t>(other)].parent = id;
        acc = id;
      }
      next_node[g] = acc;
    }
    node_of = std::move(next_node);
    previous = snap.partition;
    previous_gamma = snap.gamma;
  }
  return tree;
}

namespace {
void newick(const Dendrogram &tree, Index id, std::ostringstream &out) {
  const auto &node = tree.nodes[static_cast<std::size_t>(id)];
  if (node.left < 0) {
    out << id;
  } else {
    out << '(';
    newick(tree, node.left, out);
    out << ':' << node.height - tree.nodes[static_cast<std::size_t>(node.left)].height
        << ',';
    newick(tree, node.right, out);
    out << ':'
        << node.height - tree.nodes[static_cast<std::size_t>(node.right)].height
        << ')';
  }
}
} // namespace

std::string to_newick(const Dendrogram &tree) {
  std::ostringstream out;
  out.precision(17);
  for (Index root : tree.roots()) {
    newick(tree, root, out);
    out << ";\n";
  }
  return out.str();
}

} // namespace son
