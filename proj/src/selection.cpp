#include "son/selection.hpp"

#include "son/problem.hpp"
#include "son/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace son {

namespace {
std::string mm_message(long outer, double before, double after) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "masked objective rose from " << before << " to " << after
     << " at outer iteration " << outer;
  return ss.str();
}
} // namespace

MmViolation::MmViolation(long outer, double before, double after)
    : Error(mm_message(outer, before, after)), outer_(outer) {}

MissingSolve solve_missing(const DataMatrix &data, const WeightGraph &graph,
                           double gamma, const SolverConfig &config,
                           const MissingOptions &options) {
  MissingSolve out;
  const Index n = data.n();
  const Partition fused = options.fused ? *options.fused : Partition::singletons(n);
  if (fused.n() != n)
    throw StructuralError("fused partition does not match the data");
  const bool compressed = fused.K() < n;

  Matrix Xt = data.values();
  std::optional<Mask> mask;
  if (data.has_mask()) {
    mask = *data.mask();
    for (Index d = 0; d < data.p(); ++d) {
      double sum = 0.0;
      Index count = 0;
      for (Index i = 0; i < n; ++i)
        if ((*mask)(d, i)) {
          sum += Xt(d, i);
          ++count;
        }
      const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
      for (Index i = 0; i < n; ++i)
        if (!(*mask)(d, i))
          Xt(d, i) = mean;
    }
  }
  const ClusteringProblem masked(data, graph, gamma);
  const double threshold =
      options.fusion_tolerance * median_pairwise_distance(Xt);

  // One complete-data solve; compressed onto `fused` when it has merged
  // blocks.
  std::optional<Matrix> warm;
  auto inner_solve = [&](const SolverConfig &cfg) {
    const ClusteringProblem complete(DataMatrix(Xt), graph, gamma);
    std::optional<CompressedProblem> cp;
    if (compressed)
      cp = compress(complete, fused);
    const ClusteringProblem base = cp ? cp->problem(gamma) : complete;
    const double onset = fusion_onset(base);
    if (std::isfinite(onset) && gamma > 2.0 * onset) {
      // Far above the first fusion a direct solve cancels away its own
      // precision; walk up from the onset, compressing as blocks fuse.
      PathOptions po;
      po.solver = cfg;
      po.fusion_tolerance = options.fusion_tolerance;
      GridSpec grid;
      grid.gammas = geometric_grid(
          onset, gamma,
          static_cast<int>(std::ceil(std::log2(gamma / onset))) + 1);
      const ClusterPath path = compute_path(base, grid, po);
      if (path.truncated || path.snapshots.size() != grid.gammas.size())
        throw NumericalFailure("continuation to γ failed: " + path.error, 0);
      const PathSnapshot &last = path.snapshots.back();
      out.state = SolverState{};
      out.state.U = last.U;
      out.state.converged = last.converged;
      out.state.duality_gap = last.duality_gap;
      out.state.iterations = last.iterations;
      std::vector<Index> labels(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i)
        labels[static_cast<std::size_t>(i)] =
            cp ? last.partition.label(cp->partition.label(i))
               : last.partition.label(i);
      out.partition = Partition::from_labels(labels);
      out.U = cp ? cp->broadcast(last.U) : last.U;
      warm.reset();
      return;
    }
    out.state = solve(base, cfg, warm);
    if (cp) {
      out.U = cp->broadcast(out.state.U);
      out.partition = lift_fusions(*cp, out.state, threshold);
    } else {
      out.U = out.state.U;
      out.partition = detect_fusions(out.state, graph, Xt, options.fusion_tolerance);
    }
    warm = out.state.Z;
  };

  if (!mask) {
    inner_solve(config);
    out.imputed = Xt;
    out.objective_history.push_back(objective_value(masked, out.U));
    out.converged = out.state.converged;
    return out;
  }

  double f = objective_value(masked, Xt);
  out.objective_history.push_back(f);
  double last_drop = std::numeric_limits<double>::infinity();
  SolverConfig inner = config;
  for (long t = 0; t < options.max_outer; ++t) {
    // Tighten the inner solve as the outer decrease shrinks, so inexact
    // minimization cannot undo the majorization guarantee.
    inner.gap_tolerance =
        std::max(1e-15, std::min(config.gap_tolerance, 1e-3 * last_drop));
    inner_solve(inner);
    const double next = objective_value(masked, out.U);
    out.objective_history.push_back(next);
    out.outer_iterations = t + 1;
    if (next > f + options.slack * std::max(1.0, std::abs(f)))
      throw MmViolation(t + 1, f, next);
    for (Index i = 0; i < n; ++i)
      for (Index d = 0; d < data.p(); ++d)
        if (!(*mask)(d, i))
          Xt(d, i) = out.U(d, i);
    last_drop = std::max(0.0, f - next);
    const bool done = last_drop <= options.relative_tolerance * std::abs(f);
    f = next;
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.imputed = std::move(Xt);
  return out;
}

// ---------------------------------------------------------------------------

HoldoutPlan make_holdout_plan(const DataMatrix &data, double fraction,
                              std::uint64_t seed) {
  if (!(fraction > 0.0) || !(fraction < 1.0))
    throw InvalidArgument("hold-out fraction must lie in (0, 1)");
  std::vector<std::pair<Index, Index>> observed;
  std::vector<Index> remaining(static_cast<std::size_t>(data.n()), 0);
  for (Index i = 0; i < data.n(); ++i)
    for (Index d = 0; d < data.p(); ++d)
      if (data.observed(d, i)) {
        observed.emplace_back(d, i);
        ++remaining[static_cast<std::size_t>(i)];
      }
  const auto target = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(observed.size())));
  if (target == 0)
    throw InvalidArgument("hold-out set would be empty");

  auto rng = RandomStreams(seed).stream("holdout");
  for (std::size_t k = observed.size(); k > 1; --k)
    std::swap(observed[k - 1], observed[uniform_index(rng, k)]);

  HoldoutPlan plan;
  plan.fraction = fraction;
  plan.seed = seed;
  for (const auto &entry : observed) {
    if (plan.entries.size() == target)
      break;
    auto &left = remaining[static_cast<std::size_t>(entry.second)];
    if (left > 1) {
      --left;
      plan.entries.push_back(entry);
    }
  }
  if (plan.entries.empty())
    throw InvalidArgument("no entry can be held out without emptying a column");
  std::sort(plan.entries.begin(), plan.entries.end(),
            [](const auto &a, const auto &b) {
              return std::tie(a.second, a.first) < std::tie(b.second, b.first);
            });
  return plan;
}

DataMatrix apply_holdout(const DataMatrix &data, const HoldoutPlan &plan) {
  Mask mask = data.has_mask() ? *data.mask()
                              : Mask::Constant(data.p(), data.n(), true);
  for (const auto &[d, i] : plan.entries) {
    if (d < 0 || d >= data.p() || i < 0 || i >= data.n())
      throw StructuralError("hold-out entry outside the data");
    if (!mask(d, i))
      throw InvalidArgument("hold-out entry is already missing");
    mask(d, i) = false;
  }
  return DataMatrix(data.values(), std::move(mask));
}

std::size_t argmin_prefer_larger(const std::vector<double> &gammas,
                                 const std::vector<double> &scores) {
  if (scores.empty() || scores.size() != gammas.size())
    throw StructuralError("scores and γ values differ in length");
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] < scores[best] ||
        (scores[k] == scores[best] && gammas[k] > gammas[best]))
      best = k;
  return best;
}

SelectionReport holdout_select(const DataMatrix &data, const WeightGraph &graph,
                               const std::vector<double> &gammas,
                               const HoldoutPlan &plan,
                               const SolverConfig &config,
                               double fusion_tolerance) {
  if (plan.entries.empty())
    throw InvalidArgument("hold-out plan is empty");
  if (gammas.empty())
    throw InvalidArgument("no γ values to score");
  const DataMatrix train = apply_holdout(data, plan);
  SelectionReport report;
  report.criterion = "holdout";
  if (!std::is_sorted(gammas.begin(), gammas.end()))
    throw InvalidArgument("hold-out γ values must be increasing");
  // Sweep upward and keep fused blocks fused, as along the exact path; large
  // γ is otherwise out of reach of an uncompressed solve.
  MissingOptions options;
  options.fusion_tolerance = fusion_tolerance;
  for (double g : gammas) {
    const MissingSolve fit = solve_missing(train, graph, g, config, options);
    double err = 0.0;
    for (const auto &[d, i] : plan.entries) {
      const double r = fit.U(d, i) - data.values()(d, i);
      err += r * r;
    }
    report.gammas.push_back(g);
    report.scores.push_back(err / static_cast<double>(plan.entries.size()));
    report.clusters.push_back(fit.partition.K());
    report.floored.push_back(false);
    options.fused = fit.partition;
  }
  report.chosen = argmin_prefer_larger(report.gammas, report.scores);
  return report;
}

// ---------------------------------------------------------------------------

double ebic_score(double rss, Index n, Index p, Index K, double zeta) {
  const double N = static_cast<double>(n * p);
  const double df = static_cast<double>(K * p);
  return N * std::log(rss / N) + df * std::log(N) +
         2.0 * zeta * df * std::log(static_cast<double>(n));
}

SelectionReport ebic_select(const ClusterPath &path, const DataMatrix &data,
                            const EbicOptions &options) {
  if (!(options.zeta >= 0.0) || options.zeta > 1.0)
    throw InvalidArgument("ζ must lie in [0, 1]");
  if (data.has_mask())
    throw PreconditionError("eBIC needs fully observed data");
  const Matrix &X = data.values();
  const double floor =
      std::numeric_limits<double>::epsilon() * std::max(1.0, X.squaredNorm());
  SelectionReport report;
  report.criterion = "ebic";
  for (const auto &snap : path.snapshots) {
    if (snap.partition.n() != data.n())
      throw StructuralError("path and data sizes differ");
    const Index K = snap.partition.K();
    if (options.max_clusters && K > *options.max_clusters)
      continue;
    // Each observation takes the value of its group's centroid.
    const double rss =
        (X - snap.centroids(Eigen::all, snap.partition.labels())).squaredNorm();
    const bool floored = rss < floor;
    report.gammas.push_back(snap.gamma);
    report.clusters.push_back(K);
    report.floored.push_back(floored);
    report.scores.push_back(
        ebic_score(floored ? floor : rss, data.n(), data.p(), K, options.zeta));
  }
  if (report.scores.empty())
    throw InvalidArgument("no snapshot satisfies the cluster limit");
  report.chosen = argmin_prefer_larger(report.gammas, report.scores);
  return report;
}

// ---------------------------------------------------------------------------

double adjusted_rand_index(const std::vector<Index> &a,
                           const std::vector<Index> &b) {
  if (a.size() != b.size())
    throw StructuralError("label vectors differ in length");
  const Partition pa = Partition::from_labels(a), pb = Partition::from_labels(b);
  auto pairs = [](double c) { return 0.5 * c * (c - 1.0); };
  std::map<std::pair<Index, Index>, double> table;
  for (std::size_t i = 0; i < a.size(); ++i)
    table[{pa.labels()[i], pb.labels()[i]}] += 1.0;
  double index = 0.0, rows = 0.0, cols = 0.0;
  for (const auto &[key, c] : table)
    index += pairs(c);
  for (Index s : pa.sizes())
    rows += pairs(static_cast<double>(s));
  for (Index s : pb.sizes())
    cols += pairs(static_cast<double>(s));
  const double total = pairs(static_cast<double>(a.size()));
  if (total == 0.0)
    return 1.0;
  const double expected = rows * cols / total;
  const double maximum = 0.5 * (rows + cols);
  if (maximum == expected)
    return pa == pb ? 1.0 : 0.0;
  return (index - expected) / (maximum - expected);
}

FoldedPenalty FoldedPenalty::log(double delta) {
  if (!(delta > 0.0))
    throw InvalidArgument("δ must be positive");
  FoldedPenalty p;
  p.kind = Kind::log_delta;
  p.delta = delta;
  return p;
}

FoldedPenalty FoldedPenalty::gaussian(Vector local_scales) {
  if ((local_scales.array() <= 0.0).any())
    throw InvalidArgument("local scales must be positive");
  FoldedPenalty p;
  p.kind = Kind::gaussian_integral;
  p.local_scales = std::move(local_scales);
  return p;
}

double FoldedPenalty::value(double z, Index i, Index j) const {
  if (kind == Kind::log_delta)
    return std::log(z + delta) - std::log(delta);
  const double s = local_scales(i) * local_scales(j);
  constexpr double kPi = 3.141592653589793238462643383279502884;
  return 0.5 * std::sqrt(kPi * s) * std::erf(z / std::sqrt(s));
}

double FoldedPenalty::derivative(double z, Index i, Index j) const {
  if (kind == Kind::log_delta)
    return 1.0 / (z + delta);
  return std::exp(-z * z / (local_scales(i) * local_scales(j)));
}

WeightGraph lla_reweight(const Matrix &U, const WeightGraph &graph,
                         const FoldedPenalty &penalty) {
  if (U.cols() != graph.n())
    throw StructuralError("centroid count differs from graph size");
  if (penalty.kind == FoldedPenalty::Kind::gaussian_integral &&
      penalty.local_scales.size() != graph.n())
    throw StructuralError("one local scale per node is required");
  Vector w(graph.edge_count());
  for (Index l = 0; l < graph.edge_count(); ++l) {
    const auto &e = graph.edge(l);
    w(l) = std::max(std::numeric_limits<double>::min(),
                    penalty.derivative((U.col(e.i) - U.col(e.j)).norm(), e.i, e.j));
  }
  return graph.with_weights(w);
}

double folded_concave_objective(const DataMatrix &data,
                                const WeightGraph &graph, const Matrix &U,
                                double gamma, const FoldedPenalty &penalty) {
  double f = 0.5 * (data.values() - U).squaredNorm();
  for (const auto &e : graph.edges())
    f += gamma * penalty.value((U.col(e.i) - U.col(e.j)).norm(), e.i, e.j);
  return f;
}

} // namespace son
