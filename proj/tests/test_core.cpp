#include "oracles.hpp"

#include "son/incidence.hpp"
#include "son/kernels.hpp"
#include "son/problem.hpp"
#include "son/random.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <limits>

using namespace son;

namespace {

Matrix random_matrix(std::uint64_t seed, Index p, Index n) {
  auto rng = RandomStreams(seed).stream("core-test");
  Matrix X(p, n);
  for (Index k = 0; k < X.size(); ++k)
    X(k) = standard_normal(rng);
  return X;
}

WeightGraph complete(Index n, double w = 1.0) {
  std::vector<Edge> edges;
  for (Index j = 1; j < n; ++j)
    for (Index i = 0; i < j; ++i)
      edges.push_back({i, j, w});
  return WeightGraph(n, edges);
}

} // namespace

TEST_CASE("partition labels are canonical by smallest member") {
  const Partition P = Partition::from_labels({7, 3, 7, 9, 3});
  CHECK(P.labels() == std::vector<Index>{0, 1, 0, 2, 1});
  CHECK(P.K() == 3);
  CHECK(P.sizes() == std::vector<Index>{2, 2, 1});
  CHECK(P.blocks()[1] == std::vector<Index>{1, 4});

  CHECK(Partition::singletons(5).refines(P));
  const Partition fine = Partition::from_labels({0, 1, 2, 3, 4});
  CHECK(fine.refines(P));
  CHECK_FALSE(P.refines(fine));
  CHECK(P.refines(Partition::single_block(5)));
}

TEST_CASE("weight graph normalizes and validates edges") {
  const WeightGraph g(3, {{2, 0, 0.5}, {1, 2, 2.0}});
  REQUIRE(g.edge_count() == 2);
  CHECK(g.edge(0).i < g.edge(0).j);
  CHECK(g.degrees() == std::vector<Index>{1, 1, 2});

  CHECK_THROWS_AS(WeightGraph(3, {{0, 0, 1.0}}), StructuralError);
  CHECK_THROWS_AS(WeightGraph(3, {{0, 3, 1.0}}), StructuralError);
  CHECK_THROWS_AS(WeightGraph(3, {{0, 1, 0.0}}), StructuralError);
  CHECK_THROWS_AS(WeightGraph(3, {{0, 1, -1.0}}), StructuralError);
  CHECK_THROWS_AS(
      WeightGraph(3, {{0, 1, std::numeric_limits<double>::infinity()}}),
      StructuralError);
  CHECK_THROWS(WeightGraph(3, {{0, 1, 1.0}, {1, 0, 2.0}}));
}

TEST_CASE("data matrix masks") {
  Matrix X(2, 3);
  X << 1, 2, std::nan(""), 4, 5, 6;
  Mask M = Mask::Constant(2, 3, true);
  M(0, 2) = false;
  const DataMatrix d(X, M);
  CHECK(d.observed_count() == 5);
  CHECK_FALSE(d.observed(0, 2));
  CHECK(d.entry_weights()(0, 2) == 0.0);
  CHECK_THROWS(DataMatrix(X));  // NaN without a mask
  Mask bad = Mask::Constant(2, 2, true);
  CHECK_THROWS_AS(DataMatrix(X, bad), StructuralError);
}

TEST_CASE("group soft-threshold and ball projection split the identity") {
  // Moreau: v = prox_{t‖·‖}(v) + P_{‖z‖≤t}(v).
  const Matrix V = random_matrix(1, 4, 20);
  for (Index l = 0; l < V.cols(); ++l)
    for (double t : {0.0, 0.3, 1.0, 5.0}) {
      const Vector v = V.col(l);
      const Vector sum = prox_group_norm(v, t) + project_dual_ball(v, t);
      CHECK((sum - v).norm() <= 1e-14 * (1.0 + v.norm()));
      CHECK(project_dual_ball(v, t).norm() <= t + 1e-15);
    }
  const Vector v = Vector::Constant(3, 0.1);
  CHECK(prox_group_norm(v, 1.0).norm() == 0.0);
}

TEST_CASE("incidence maps are adjoint and build the Laplacian") {
  const Index n = 7;
  const WeightGraph g(n, {{0, 1, 1}, {1, 2, 1}, {2, 6, 1}, {3, 4, 1}, {0, 5, 1},
                          {4, 6, 1}});
  const IncidenceOperator A(g);
  const Matrix U = random_matrix(2, 3, n);
  const Matrix Z = random_matrix(3, 3, g.edge_count());
  // ⟨U·Aᵀ, Z⟩ = ⟨U, Z·A⟩
  const double lhs = (A.differences(U).array() * Z.array()).sum();
  const double rhs = (U.array() * A.scatter(Z).array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));

  Matrix dense = Matrix::Zero(g.edge_count(), n);
  for (Index l = 0; l < g.edge_count(); ++l) {
    dense(l, g.edge(l).i) = 1.0;
    dense(l, g.edge(l).j) = -1.0;
  }
  CHECK((Matrix(A.laplacian()) - dense.transpose() * dense).norm() == 0.0);
  CHECK((A.differences(U) - U * dense.transpose()).norm() <= 1e-14);

  const Vector m = (Vector(n) << 1, 2, 1, 3, 1, 1, 2).finished();
  const Matrix H = dense * m.cwiseInverse().asDiagonal() * dense.transpose();
  const double top = Eigen::SelfAdjointEigenSolver<Matrix>(H).eigenvalues().maxCoeff();
  const double bound = A.spectral_bound(m);
  INFO("power iteration ", bound, " dense ", top);
  // A safe step needs an upper bound that is still tight.
  CHECK(bound >= top * (1.0 - 1e-12));
  CHECK(bound <= top * (1.0 + 1e-5));
}

TEST_CASE("objective and dual on small instances") {
  Matrix X(2, 2);
  X << 0, 3, 0, 4;  // distance 5
  const WeightGraph g(2, {{0, 1, 2.0}});
  const ClusteringProblem P(DataMatrix(X), g, 0.5);
  // U = X: only the penalty γ·w·‖x₁ − x₂‖ = 0.5·2·5.
  CHECK(objective_value(P, X) == doctest::Approx(5.0));

  SUBCASE("Z = 0 at γ = 0 gives zero gap") {
    const ClusteringProblem P0 = P.with_gamma(0.0);
    const DualReport r = dual_objective_and_gap(P0, Matrix::Zero(2, 1));
    CHECK(r.dual == 0.0);
    CHECK(r.primal == 0.0);
    REQUIRE(r.gap);
    CHECK(*r.gap == 0.0);
  }
  SUBCASE("optimal two-point dual closes the gap") {
    // Unfused: z = γw·(x₁−x₂)/‖x₁−x₂‖.
    const Vector d = X.col(0) - X.col(1);
    const Matrix Z = 0.5 * 2.0 * d / d.norm();
    const DualReport r = dual_objective_and_gap(P, Z);
    REQUIRE(r.gap);
    CHECK(*r.gap <= 1e-10);
    const Matrix U = primal_from_dual(P, Z);
    const Matrix expected =
        oracle::two_point_solution(X.col(0), X.col(1), 2.0, 0.5);
    CHECK((U - expected).norm() <= 1e-14);
  }
  SUBCASE("infeasible dual has no gap") {
    const DualReport r = dual_objective_and_gap(P, Matrix::Constant(2, 1, 10.0));
    CHECK_FALSE(r.gap);
    CHECK(r.max_violation > 0.0);
  }
}

TEST_CASE("weak duality on random feasible duals") {
  auto rng = RandomStreams(4).stream("duals");
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 3 + static_cast<Index>(uniform_index(rng, 5));
    const Matrix X = random_matrix(100 + trial, 2, n);
    const WeightGraph g = complete(n, 0.5 + uniform01(rng));
    const double gamma = 2.0 * uniform01(rng);
    const ClusteringProblem P(DataMatrix(X), g, gamma);
    Matrix Z = random_matrix(200 + trial, 2, g.edge_count());
    for (Index l = 0; l < Z.cols(); ++l)
      Z.col(l) = project_dual_ball(Vector(Z.col(l)), gamma * g.edge(l).w);
    const DualReport r = dual_objective_and_gap(P, Z);
    REQUIRE(r.gap);
    CHECK(*r.gap >= 0.0);
    CHECK(r.primal - r.dual >= -1e-12 * (1.0 + std::abs(r.primal)));
    CHECK(r.primal == doctest::Approx(objective_value(P, primal_from_dual(P, Z))));
  }
}

TEST_CASE("components and duplicate merging") {
  const WeightGraph g(6, {{0, 1, 1}, {1, 2, 1}, {3, 4, 1}});
  const Partition c = connected_components(g);
  CHECK(c.labels() == std::vector<Index>{0, 0, 0, 1, 1, 2});

  Matrix X(1, 5);
  X << 1, 2, 1, 3, 2;
  const DuplicateMerge m = merge_duplicates(DataMatrix(X));
  CHECK(m.any_merged);
  CHECK(m.reduced.n() == 3);
  CHECK(m.multiplicities.sum() == 5.0);
  const Matrix back = expand_merged(m, m.reduced.values());
  CHECK(back == X);
}

TEST_CASE("problem validation") {
  const Matrix X = random_matrix(5, 2, 3);
  const WeightGraph g(3, {{0, 1, 1.0}});
  CHECK_THROWS_AS(ClusteringProblem(DataMatrix(X), g, -1.0), InvalidArgument);
  CHECK_THROWS_AS(ClusteringProblem(DataMatrix(X), WeightGraph(4, {}), 1.0),
                  StructuralError);
  CHECK_THROWS(ClusteringProblem(DataMatrix(X), g, 1.0, Vector::Zero(3)));
}

TEST_CASE("named random streams are reproducible and independent") {
  const RandomStreams a(42), b(42), c(43);
  auto s1 = a.stream("x"), s2 = b.stream("x"), s3 = a.stream("y"),
       s4 = c.stream("x");
  const auto v1 = s1(), v2 = s2(), v3 = s3(), v4 = s4();
  CHECK(v1 == v2);
  CHECK(v1 != v3);
  CHECK(v1 != v4);
  auto r = a.stream("normal");
  double sum = 0.0, sq = 0.0;
  const int N = 200000;
  for (int k = 0; k < N; ++k) {
    const double z = standard_normal(r);
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / N) < 0.01);
  CHECK(std::abs(sq / N - 1.0) < 0.02);
}
