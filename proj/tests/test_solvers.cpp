#include "oracles.hpp"

#include "son/incidence.hpp"
#include "son/kernels.hpp"
#include "son/problem.hpp"
#include "son/random.hpp"
#include "son/solvers.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>

using namespace son;

namespace {

Matrix random_matrix(std::uint64_t seed, Index p, Index n) {
  auto rng = RandomStreams(seed).stream("solver-test");
  Matrix X(p, n);
  for (Index k = 0; k < X.size(); ++k)
    X(k) = standard_normal(rng);
  return X;
}

WeightGraph ring_with_chords(Index n, std::uint64_t seed) {
  auto rng = RandomStreams(seed).stream("edges");
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    edges.push_back({i, (i + 1) % n, 0.5 + uniform01(rng)});
  for (Index i = 0; i + 3 < n; i += 2)
    edges.push_back({i, i + 3, 0.5 + uniform01(rng)});
  return WeightGraph(n, edges);
}

SolverConfig config_for(SolverMethod m) {
  SolverConfig c;
  c.method = m;
  c.gap_tolerance = 1e-10;
  c.residual_tolerance = 1e-10;
  return c;
}

} // namespace

TEST_CASE("the three solvers agree") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix X = random_matrix(seed, 3, 16);
    const WeightGraph g = ring_with_chords(16, seed);
    for (double gamma : {0.05, 0.3, 2.0}) {
      const ClusteringProblem P(DataMatrix(X), g, gamma);
      const SolverState a = solve(P, config_for(SolverMethod::ama));
      const SolverState f = solve(P, config_for(SolverMethod::ama_accelerated));
      const SolverState d = solve(P, config_for(SolverMethod::admm));
      CHECK(a.converged);
      CHECK(f.converged);
      CHECK(d.converged);
      const double tol = 1e-6 * (1.0 + X.norm());
      CHECK((a.U - f.U).norm() <= tol);
      CHECK((a.U - d.U).norm() <= tol);
      // Edges shorter than solver precision count as fused.
      const KktReport ka = kkt_report(P, a, 1e-6, 1e-7);
      INFO("gap ", ka.duality_gap, " viol ", ka.dual_violation, " stat ",
           ka.stationarity, " split ", ka.split_residual);
      CHECK(ka.optimal);
      CHECK(kkt_report(P, d, 1e-6).optimal);
    }
  }
}

TEST_CASE("large gamma collapses to the weighted mean") {
  const Matrix X = random_matrix(7, 2, 10);
  const WeightGraph g = ring_with_chords(10, 7);
  const ClusteringProblem P(DataMatrix(X), g, 1e3);
  const SolverState s = solve(P, config_for(SolverMethod::ama_accelerated));
  const Vector mean = X.rowwise().mean();
  for (Index i = 0; i < 10; ++i)
    CHECK((s.U.col(i) - mean).norm() <= 1e-8);
}

TEST_CASE("two points match the closed form") {
  Matrix X(2, 2);
  X << 0, 1, 0, 2;
  const WeightGraph g(2, {{0, 1, 1.5}});
  const double d = std::sqrt(5.0);
  for (double gamma : {0.1, 0.5, d / 3.0 - 1e-3, d / 3.0 + 1e-3, 4.0})
    for (auto m : {SolverMethod::ama, SolverMethod::admm}) {
      const ClusteringProblem P(DataMatrix(X), g, gamma);
      const SolverState s = solve(P, config_for(m));
      const Matrix expected =
          oracle::two_point_solution(X.col(0), X.col(1), 1.5, gamma);
      CHECK((s.U - expected).norm() <= 1e-9);
    }
}

TEST_CASE("solution minimizes the objective against subgradient descent") {
  const Matrix X = random_matrix(8, 2, 6);
  const auto E = oracle::complete_graph(6);
  std::vector<Edge> edges;
  for (const auto &e : E)
    edges.push_back({e.i, e.j, e.w});
  const double gamma = 0.1;
  const ClusteringProblem P(DataMatrix(X), WeightGraph(6, edges), gamma);
  const SolverState s = solve(P, config_for(SolverMethod::ama_accelerated));
  const double best = oracle::subgradient_minimum(X, E, gamma, 100000);
  CHECK(s.primal_objective <= best + 1e-9);
  CHECK(s.primal_objective >= best - 1e-4 * std::abs(best));
}

TEST_CASE("plain AMA never decreases the dual and stays feasible") {
  const Matrix X = random_matrix(9, 3, 20);
  const WeightGraph g = ring_with_chords(20, 9);
  const ClusteringProblem P(DataMatrix(X), g, 0.4);
  SolverConfig c = config_for(SolverMethod::ama);
  c.record_history = true;
  c.polish = false;
  const SolverState s = solve(P, c);
  REQUIRE(s.dual_history.size() > 2);
  for (std::size_t k = 1; k < s.dual_history.size(); ++k)
    CHECK(s.dual_history[k] >=
          s.dual_history[k - 1] - 1e-12 * (1.0 + std::abs(s.dual_history[k])));
  for (double v : s.feasibility_history)
    CHECK(v <= kFeasibilitySlack);
}

TEST_CASE("warm starts converge faster") {
  const Matrix X = random_matrix(10, 2, 30);
  const WeightGraph g = ring_with_chords(30, 10);
  SolverConfig c = config_for(SolverMethod::ama);
  c.polish = false;
  const ClusteringProblem P0(DataMatrix(X), g, 1.0);
  const ClusteringProblem P1 = P0.with_gamma(1.01);
  const SolverState s0 = solve(P0, c);
  const SolverState cold = solve(P1, c);
  const SolverState warm = solve(P1, c, s0.Z);
  CHECK(warm.converged);
  CHECK(warm.iterations < cold.iterations);
  CHECK((warm.U - cold.U).norm() <= 1e-6);

  c.method = SolverMethod::admm;
  const SolverState a0 = solve(P0, c);
  const SolverState acold = solve(P1, c);
  const SolverState awarm = solve(P1, c, a0.Z, a0.V);
  CHECK(awarm.iterations < acold.iterations);
}

TEST_CASE("multiplicities equal expanded duplicates") {
  // Points 0 and 3 coincide; merging gives node 0 weight two.
  Matrix X(2, 4);
  X << 0, 1, 3, 0, 0, 2, 1, 0;
  const WeightGraph full(4, {{0, 1, 1}, {0, 2, 1}, {1, 2, 1}, {1, 3, 1},
                             {2, 3, 1}, {0, 3, 1}});
  const ClusteringProblem P(DataMatrix(X), full, 0.2);
  const SolverState s = solve(P, config_for(SolverMethod::admm));

  Matrix Y(2, 3);
  Y << 0, 1, 3, 0, 2, 1;
  // Edges to the duplicate fold into doubled weights; the self edge vanishes.
  const WeightGraph reduced(3, {{0, 1, 2}, {0, 2, 2}, {1, 2, 1}});
  const Vector m = (Vector(3) << 2, 1, 1).finished();
  for (auto method : {SolverMethod::ama, SolverMethod::admm}) {
    const ClusteringProblem R(DataMatrix(Y), reduced, 0.2, m);
    const SolverState r = solve(R, config_for(method));
    CHECK((r.U.col(0) - s.U.col(0)).norm() <= 1e-8);
    CHECK((r.U.col(0) - s.U.col(3)).norm() <= 1e-8);
    CHECK((r.U.col(1) - s.U.col(1)).norm() <= 1e-8);
    CHECK((r.U.col(2) - s.U.col(2)).norm() <= 1e-8);
  }
}

TEST_CASE("conjugate gradients match the Cholesky factor") {
  const WeightGraph g = ring_with_chords(25, 11);
  const Vector m = Vector::Ones(25);
  const AdmmSystem chol(g, m, 2.0);
  const AdmmSystem cg(g, m, 2.0, 0, 1e-13);
  CHECK(chol.uses_cholesky());
  CHECK_FALSE(cg.uses_cholesky());
  const Matrix rhs = random_matrix(12, 3, 25);
  const Matrix a = chol.solve(rhs), b = cg.solve(rhs);
  CHECK((a * Matrix(chol.matrix()) - rhs).norm() <= 1e-10);
  CHECK((a - b).norm() <= 1e-9);

  const Matrix X = random_matrix(13, 3, 25);
  const ClusteringProblem P(DataMatrix(X), g, 0.2);
  SolverConfig c = config_for(SolverMethod::admm);
  c.cholesky_limit = 0;
  const SolverState s = solve(P, c);
  const SolverState t = solve(P, config_for(SolverMethod::admm));
  CHECK((s.U - t.U).norm() <= 1e-7);
}

TEST_CASE("one ADMM round is the documented update") {
  const Matrix X = random_matrix(14, 2, 8);
  const WeightGraph g = ring_with_chords(8, 14);
  const ClusteringProblem P(DataMatrix(X), g, 0.3);
  const AdmmSystem sys(g, Vector::Ones(8), 1.5);
  const Matrix V = random_matrix(15, 2, g.edge_count());
  const Matrix Z = random_matrix(16, 2, g.edge_count());
  const SolverState s = admm_round(P, sys, V, Z);

  // Dense re-derivation: U(I + ρAᵀA) = X + (ρV − Z)A.
  Matrix A = Matrix::Zero(g.edge_count(), 8);
  for (Index l = 0; l < g.edge_count(); ++l) {
    A(l, g.edge(l).i) = 1;
    A(l, g.edge(l).j) = -1;
  }
  const Matrix M = Matrix::Identity(8, 8) + 1.5 * A.transpose() * A;
  const Matrix U = (X + (1.5 * V - Z) * A) * M.inverse();
  CHECK((s.U - U).norm() <= 1e-10);
  const Matrix D = U * A.transpose();
  for (Index l = 0; l < g.edge_count(); ++l) {
    const Vector q = D.col(l) + Z.col(l) / 1.5;
    const double t = 0.3 * g.edge(l).w / 1.5;
    const Vector v = q.norm() > t ? Vector((1 - t / q.norm()) * q)
                                  : Vector(Vector::Zero(2));
    CHECK((s.V.col(l) - v).norm() <= 1e-10);
    CHECK((s.Z.col(l) - (Z.col(l) + 1.5 * (D.col(l) - v))).norm() <= 1e-10);
  }
}

TEST_CASE("configuration is validated") {
  const Matrix X = random_matrix(17, 2, 4);
  const ClusteringProblem P(DataMatrix(X), WeightGraph(4, {{0, 1, 1}}), 0.1);
  auto bad = [&](auto mutate) {
    SolverConfig c;
    mutate(c);
    CHECK_THROWS_AS(solve(P, c), InvalidArgument);
  };
  bad([](SolverConfig &c) { c.rho = 0; });
  bad([](SolverConfig &c) { c.max_iterations = 0; });
  bad([](SolverConfig &c) { c.gap_tolerance = -1; });
  bad([](SolverConfig &c) { c.step_safety = 1.5; });
  bad([](SolverConfig &c) { c.check_every = 0; });
  CHECK(parse_solver_method("admm") == SolverMethod::admm);
  CHECK_THROWS_AS(parse_solver_method("sgd"), InvalidArgument);

  Matrix Y = X;
  Y(0, 0) = std::nan("");
  Mask mask = Mask::Constant(2, 4, true);
  mask(0, 0) = false;
  const ClusteringProblem masked(DataMatrix(Y, mask), P.graph(), 0.1);
  CHECK_THROWS_AS(solve(masked, SolverConfig{}), PreconditionError);
}

TEST_CASE("paired gap is nonnegative for feasible duals") {
  const Matrix Z = random_matrix(18, 3, 10);
  const Matrix D = random_matrix(19, 3, 10);
  Vector radii(10);
  Matrix Zf = Z;
  for (Index l = 0; l < 10; ++l) {
    radii(l) = 0.5 + 0.1 * static_cast<double>(l);
    Zf.col(l) = project_dual_ball(Vector(Z.col(l)), radii(l));
  }
  double direct = 0;
  for (Index l = 0; l < 10; ++l)
    direct += radii(l) * D.col(l).norm() - Zf.col(l).dot(D.col(l));
  CHECK(paired_gap(Zf, D, radii) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(paired_gap(Zf, D, radii) >= 0.0);
}
