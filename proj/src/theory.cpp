#include "son/theory.hpp"

#include "son/path.hpp"
#include "son/problem.hpp"
#include "son/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace son {

std::string to_string(RecoveryFamily f) {
  switch (f) {
  case RecoveryFamily::panahi_uniform: return "panahi_uniform";
  case RecoveryFamily::sun_weighted: return "sun_weighted";
  case RecoveryFamily::zhu_two_cubes: return "zhu_two_cubes";
  }
  return "panahi_uniform";
}

PartitionGeometry partition_geometry(const DataMatrix &data,
                                     const std::vector<Index> &labels,
                                     Index K) {
  if (data.has_mask())
    throw PreconditionError("partition geometry needs fully observed data");
  if (static_cast<Index>(labels.size()) != data.n())
    throw StructuralError("label count differs from the number of points");
  if (K < 1)
    throw StructuralError("partition needs at least one block");
  const Matrix &X = data.values();
  PartitionGeometry g;
  g.sizes.assign(static_cast<std::size_t>(K), 0);
  g.means = Matrix::Zero(X.rows(), K);
  for (Index i = 0; i < data.n(); ++i) {
    const Index k = labels[static_cast<std::size_t>(i)];
    if (k < 0 || k >= K)
      throw StructuralError("label " + std::to_string(k) + " outside [0, K)");
    ++g.sizes[static_cast<std::size_t>(k)];
    g.means.col(k) += X.col(i);
  }
  for (Index k = 0; k < K; ++k) {
    if (g.sizes[static_cast<std::size_t>(k)] == 0)
      throw StructuralError("block " + std::to_string(k) + " is empty");
    g.means.col(k) /= static_cast<double>(g.sizes[static_cast<std::size_t>(k)]);
  }
  g.diameters.assign(static_cast<std::size_t>(K), 0.0);
  g.set_distances = Matrix::Constant(K, K, std::numeric_limits<double>::infinity());
  g.set_distances.diagonal().setZero();
  for (Index i = 0; i < data.n(); ++i) {
    const Index a = labels[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < data.n(); ++j) {
      const Index b = labels[static_cast<std::size_t>(j)];
      const double d = (X.col(i) - X.col(j)).norm();
      if (a == b) {
        auto &D = g.diameters[static_cast<std::size_t>(a)];
        D = std::max(D, d);
      } else {
        g.set_distances(a, b) = std::min(g.set_distances(a, b), d);
        g.set_distances(b, a) = g.set_distances(a, b);
      }
    }
  }
  return g;
}

PartitionGeometry partition_geometry(const DataMatrix &data,
                                     const Partition &partition) {
  return partition_geometry(data, partition.labels(), partition.K());
}

RecoveryInterval panahi_interval(const PartitionGeometry &geometry, Index n) {
  const Index K = geometry.K();
  if (K < 2)
    throw InvalidArgument("a recovery interval needs at least two blocks");
  RecoveryInterval out;
  out.family = RecoveryFamily::panahi_uniform;
  for (Index k = 0; k < K; ++k)
    out.lower = std::max(out.lower,
                         geometry.diameters[static_cast<std::size_t>(k)] /
                             static_cast<double>(geometry.sizes[static_cast<std::size_t>(k)]));
  double upper = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < K; ++k)
    for (Index l = k + 1; l < K; ++l)
      upper = std::min(upper, (geometry.means.col(k) - geometry.means.col(l)).norm() /
                                  (2.0 * static_cast<double>(n)));
  out.upper = upper;
  out.feasible = out.lower < upper;
  return out;
}

RecoveryInterval sun_interval(const DataMatrix &data, const WeightGraph &graph,
                              const Partition &partition) {
  const Index n = data.n(), K = partition.K();
  if (graph.n() != n || partition.n() != n)
    throw StructuralError("graph, partition and data sizes differ");
  if (K < 2)
    throw InvalidArgument("a recovery interval needs at least two blocks");
  const PartitionGeometry geometry = partition_geometry(data, partition);

  Matrix W = Matrix::Zero(n, n);
  for (const auto &e : graph.edges()) {
    W(e.i, e.j) = e.w;
    W(e.j, e.i) = e.w;
  }
  // Row sums of W restricted to each block: S(i, l) = Σ_{p∈I_l} w_ip.
  Matrix S = Matrix::Zero(n, K);
  for (Index i = 0; i < n; ++i)
    for (Index q = 0; q < n; ++q)
      S(i, partition.label(q)) += W(i, q);
  // Total weight between blocks, w^(k,l).
  Matrix between = Matrix::Zero(K, K);
  for (Index i = 0; i < n; ++i)
    for (Index l = 0; l < K; ++l)
      if (l != partition.label(i))
        between(partition.label(i), l) += S(i, l);

  RecoveryInterval out;
  out.family = RecoveryFamily::sun_weighted;
  bool lower_defined = true;
  const auto blocks = partition.blocks();
  for (Index k = 0; k < K; ++k) {
    const auto &members = blocks[static_cast<std::size_t>(k)];
    if (members.size() < 2)
      continue;
    const double nk = static_cast<double>(members.size());
    double denominator = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const Index i = members[a], j = members[b];
        if (!(W(i, j) > 0.0))
          throw PreconditionError("points " + std::to_string(i) + " and " +
                                  std::to_string(j) +
                                  " share a block but have no edge");
        double mu = 0.0;
        for (Index l = 0; l < K; ++l)
          if (l != k)
            mu += std::abs(S(i, l) - S(j, l));
        denominator = std::min(denominator, nk * W(i, j) - mu);
      }
    if (!(denominator > 0.0)) {
      lower_defined = false;
      continue;
    }
    out.lower = std::max(out.lower,
                         geometry.diameters[static_cast<std::size_t>(k)] / denominator);
  }

  double upper = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < K; ++k)
    for (Index l = k + 1; l < K; ++l) {
      const double denominator =
          between.row(k).sum() / static_cast<double>(geometry.sizes[static_cast<std::size_t>(k)]) +
          between.row(l).sum() / static_cast<double>(geometry.sizes[static_cast<std::size_t>(l)]);
      if (denominator > 0.0)
        upper = std::min(upper,
                         (geometry.means.col(k) - geometry.means.col(l)).norm() /
                             denominator);
    }
  if (std::isfinite(upper))
    out.upper = upper;
  out.feasible = lower_defined && (!out.upper || out.lower < *out.upper);
  return out;
}

std::pair<double, double> zhu_prefactors(Index n1, Index n2) {
  const double a = static_cast<double>(n1), b = static_cast<double>(n2);
  return {2.0 * b * (a - 1.0) / (a * a) + 1.0,
          2.0 * a * (b - 1.0) / (b * b) + 1.0};
}

RecoveryInterval zhu_two_cubes(const Vector &half_lengths_1,
                               const Vector &half_lengths_2, Index n1,
                               Index n2, double distance) {
  if (n1 < 1 || n2 < 1)
    throw InvalidArgument("both cubes need at least one point");
  if (half_lengths_1.size() != half_lengths_2.size())
    throw StructuralError("cube dimensions differ");
  if ((half_lengths_1.array() < 0.0).any() ||
      (half_lengths_2.array() < 0.0).any())
    throw InvalidArgument("half-lengths must be nonnegative");
  if (!(distance >= 0.0))
    throw InvalidArgument("cube distance must be nonnegative");
  // Edge lengths are twice the half-lengths.
  const auto [c1, c2] = zhu_prefactors(n1, n2);
  const double size = std::max(c1 * 2.0 * half_lengths_1.norm(),
                               c2 * 2.0 * half_lengths_2.norm());
  const double scale = 2.0 / static_cast<double>(n1 + n2);
  RecoveryInterval out;
  out.family = RecoveryFamily::zhu_two_cubes;
  out.lower = scale * size;
  out.upper = scale * distance;
  out.feasible = out.lower < *out.upper;
  return out;
}

std::vector<double> interval_samples(const RecoveryInterval &interval,
                                     double unbounded_upper, int trials) {
  if (trials < 1)
    throw InvalidArgument("need at least one trial");
  const double lo = interval.lower;
  const double hi = interval.upper ? *interval.upper : unbounded_upper;
  if (!(hi > lo))
    throw InvalidArgument("interval is empty");
  std::vector<double> out;
  for (int t = 0; t < trials; ++t) {
    // Offsets spread over [−0.4, 0.4] around the midpoint.
    const double f =
        trials == 1 ? 0.0 : -0.4 + 0.8 * t / static_cast<double>(trials - 1);
    if (lo > 0.0)
      out.push_back(std::sqrt(lo * hi) * std::pow(hi / lo, f));
    else
      out.push_back(hi * (0.5 + f));
  }
  return out;
}

RecoveryReport verify_recovery(const DataMatrix &data, const Partition &truth,
                               const WeightGraph &graph,
                               const RecoveryInterval &interval, int trials,
                               const SolverConfig &config,
                               double fusion_tolerance, int bisection_steps) {
  if (!interval.feasible)
    throw InvalidArgument("recovery interval is infeasible");
  if (truth.n() != data.n())
    throw StructuralError("ground-truth partition size differs from data");
  const ClusteringProblem base(data, graph, 0.0);
  const Matrix &X = data.values();

  auto recovers = [&](double gamma) {
    const auto state = solve(base.with_gamma(gamma), config);
    return detect_fusions(state, graph, X, fusion_tolerance) == truth;
  };

  double unbounded = 0.0;
  if (!interval.upper)
    unbounded = 2.0 * std::max(interval.lower,
                               gamma_max(base, config, fusion_tolerance).gamma);
  RecoveryReport report;
  report.interval = interval;
  report.gammas = interval_samples(interval, unbounded, trials);
  int passed = 0;
  for (double g : report.gammas) {
    const bool ok = recovers(g);
    report.recovered.push_back(ok);
    passed += ok ? 1 : 0;
  }
  report.pass_rate = static_cast<double>(passed) / report.gammas.size();

  std::vector<double> good;
  for (std::size_t t = 0; t < report.gammas.size(); ++t)
    if (report.recovered[t])
      good.push_back(report.gammas[t]);
  if (good.empty()) {
    report.empirical_lower = interval.lower;
    report.empirical_upper = interval.upper;
    return report;
  }

  // Walk outward by factors of 2 until recovery fails, then bisect in log
  // space between the last success and the first failure.
  double inside = good.front(), outside = inside;
  bool failed = false;
  for (int k = 0; k < 40; ++k) {
    outside *= 0.5;
    if (!recovers(outside)) {
      failed = true;
      break;
    }
    inside = outside;
  }
  if (failed) {
    for (int s = 0; s < bisection_steps; ++s) {
      const double mid = std::sqrt(inside * outside);
      (recovers(mid) ? inside : outside) = mid;
    }
    report.empirical_lower = inside;
  } else {
    report.empirical_lower = 0.0;
  }

  inside = good.back();
  outside = inside;
  failed = false;
  for (int k = 0; k < 40; ++k) {
    outside *= 2.0;
    if (!recovers(outside)) {
      failed = true;
      break;
    }
    inside = outside;
  }
  if (failed) {
    for (int s = 0; s < bisection_steps; ++s) {
      const double mid = std::sqrt(inside * outside);
      (recovers(mid) ? inside : outside) = mid;
    }
    report.empirical_upper = inside;
  }
  return report;
}

LipschitzReport lipschitz_harness(const DataMatrix &data,
                                  const WeightGraph &graph, double gamma,
                                  int trials, double perturbation_scale,
                                  std::uint64_t seed,
                                  const SolverConfig &config) {
  if (!(gamma >= 0.0))
    throw InvalidArgument("γ must be nonnegative");
  if (trials < 1)
    throw InvalidArgument("need at least one trial");
  if (!(perturbation_scale >= 0.0))
    throw InvalidArgument("perturbation scale must be nonnegative");
  const ClusteringProblem base(data, graph, gamma);
  const Matrix U0 = solve(base, config).U;
  auto rng = RandomStreams(seed).stream("lipschitz");

  LipschitzReport report;
  for (int t = 0; t < trials; ++t) {
    Matrix dX(data.p(), data.n());
    for (Index j = 0; j < dX.cols(); ++j)
      for (Index d = 0; d < dX.rows(); ++d)
        dX(d, j) = perturbation_scale * standard_normal(rng);
    const ClusteringProblem moved(DataMatrix(data.values() + dX), graph, gamma);
    const Matrix U1 = solve(moved, config).U;
    const double du = (U1 - U0).norm(), dx = dX.norm();
    const double ratio = dx > 0.0 ? du / dx : 0.0;
    report.ratios.push_back(ratio);
    report.max_ratio = std::max(report.max_ratio, ratio);
    if (du > dx + 1e-8)
      report.within_bound = false;
  }
  return report;
}

} // namespace son
