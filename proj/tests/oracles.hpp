#pragma once

// Reference computations that share no code with the library.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace oracle {

struct Edge {
  long i, j;
  double w;
};

inline std::vector<Edge> complete_graph(long n, double w = 1.0) {
  std::vector<Edge> out;
  for (long j = 1; j < n; ++j)
    for (long i = 0; i < j; ++i)
      out.push_back({i, j, w});
  return out;
}

inline double objective(const Eigen::MatrixXd &X, const std::vector<Edge> &E,
                        double gamma, const Eigen::MatrixXd &U) {
  double f = 0.5 * (X - U).squaredNorm();
  for (const auto &e : E)
    f += gamma * e.w * (U.col(e.i) - U.col(e.j)).norm();
  return f;
}

/// Subgradient descent with step 1/k (the fit term is 1-strongly convex).
/// Returns the best objective among the last iterate and the averages over
/// the final 1/2, 1/4, ..., 1/32 of the run.
inline double subgradient_minimum(const Eigen::MatrixXd &X,
                                  const std::vector<Edge> &E, double gamma,
                                  long iterations = 1000000) {
  const long p = X.rows(), n = X.cols();
  Eigen::MatrixXd U = X, G(p, n);
  Eigen::VectorXd d(p);
  constexpr int kWindows = 5;
  std::vector<Eigen::MatrixXd> sums(kWindows, Eigen::MatrixXd::Zero(p, n));
  std::vector<long> counts(kWindows, 0);
  for (long k = 1; k <= iterations; ++k) {
    G = U - X;
    for (const auto &e : E) {
      d = U.col(e.i) - U.col(e.j);
      const double norm = d.norm();
      if (norm > 0.0) {
        d *= gamma * e.w / norm;
        G.col(e.i) += d;
        G.col(e.j) -= d;
      }
    }
    U -= G / static_cast<double>(k);
    for (int s = 0; s < kWindows; ++s)
      if (k > iterations - (iterations >> (s + 1))) {
        sums[s] += U;
        ++counts[s];
      }
  }
  double best = objective(X, E, gamma, U);
  for (int s = 0; s < kWindows; ++s)
    if (counts[s] > 0)
      best = std::min(best, objective(X, E, gamma,
                                      sums[s] / static_cast<double>(counts[s])));
  return best;
}

/// Two points joined by one edge of weight w: each centroid moves toward
/// the other by γw until they meet at the midpoint when γ ≥ ‖x₁ − x₂‖/(2w).
inline Eigen::MatrixXd two_point_solution(const Eigen::VectorXd &x1,
                                          const Eigen::VectorXd &x2, double w,
                                          double gamma) {
  Eigen::MatrixXd U(x1.size(), 2);
  const double d = (x1 - x2).norm();
  if (2.0 * gamma * w >= d) {
    U.col(0) = U.col(1) = 0.5 * (x1 + x2);
    return U;
  }
  const Eigen::VectorXd dir = (x1 - x2) / d;
  U.col(0) = x1 - gamma * w * dir;
  U.col(1) = x2 + gamma * w * dir;
  return U;
}

/// Adjusted Rand index from the contingency table.
inline double ari(const std::vector<long> &a, const std::vector<long> &b) {
  std::map<std::pair<long, long>, double> table;
  std::map<long, double> rows, cols;
  for (std::size_t k = 0; k < a.size(); ++k) {
    table[{a[k], b[k]}] += 1;
    rows[a[k]] += 1;
    cols[b[k]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto &[key, v] : table)
    index += c2(v);
  for (const auto &[key, v] : rows)
    sa += c2(v);
  for (const auto &[key, v] : cols)
    sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double top = 0.5 * (sa + sb);
  if (top == expected)
    return 1.0;
  return (index - expected) / (top - expected);
}

} // namespace oracle
