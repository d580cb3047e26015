#include "son/solvers.hpp"

#include "son/kernels.hpp"
#include "son/problem.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <map>

namespace son {

std::string to_string(SolverMethod m) {
  switch (m) {
  case SolverMethod::ama: return "ama";
  case SolverMethod::ama_accelerated: return "ama_accelerated";
  case SolverMethod::admm: return "admm";
  }
  return "ama";
}

SolverMethod parse_solver_method(const std::string &text) {
  if (text == "ama") return SolverMethod::ama;
  if (text == "ama_accelerated" || text == "fast_ama")
    return SolverMethod::ama_accelerated;
  if (text == "admm") return SolverMethod::admm;
  throw InvalidArgument("unknown solver method '" + text + "'");
}

void SolverConfig::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw InvalidArgument("rho must be positive");
  if (max_iterations < 1)
    throw InvalidArgument("max_iterations must be >= 1");
  if (!(gap_tolerance > 0.0) || !(residual_tolerance > 0.0))
    throw InvalidArgument("tolerances must be positive");
  if (!(step_safety > 0.0) || step_safety > 1.0)
    throw InvalidArgument("step_safety must lie in (0, 1]");
  if (check_every < 1)
    throw InvalidArgument("check_every must be >= 1");
}

namespace {

void require_complete(const ClusteringProblem &problem) {
  if (problem.data().has_mask())
    throw PreconditionError(
        "solvers need fully observed data; use solve_missing for masked data");
}

Vector ball_radii(const ClusteringProblem &problem) {
  return problem.gamma() * problem.graph().weights();
}

double project_columns(Matrix &Z, const Vector &radii) {
  double worst = -std::numeric_limits<double>::infinity();
  for (Index l = 0; l < Z.cols(); ++l)
    worst = std::max(worst, project_dual_ball_inplace(Z.col(l), radii(l)) -
                                radii(l));
  return worst;
}

double max_violation(const Matrix &Z, const Vector &radii) {
  double worst = 0.0;
  for (Index l = 0; l < Z.cols(); ++l)
    worst = std::max(worst, Z.col(l).norm() - radii(l));
  return worst;
}

double max_column_norm(const Matrix &M) {
  return M.cols() == 0 ? 0.0 : M.colwise().norm().maxCoeff();
}

/// ⟨S, X⟩ − ½ Σ ‖S_i‖² / m_i with S = Z·A.
double dual_value(const Matrix &S, const Matrix &X, const Vector &inv_m) {
  return S.cwiseProduct(X).sum() -
         0.5 * S.colwise().squaredNorm().dot(inv_m.transpose());
}

double primal_value(const Matrix &X, const Matrix &U, const Vector &m,
                    const Matrix &diffs, const Vector &weights,
                    double gamma) {
  const double fit =
      0.5 * (X - U).colwise().squaredNorm().dot(m.transpose());
  return fit + gamma * diffs.colwise().norm().dot(weights.transpose());
}

} // namespace

SolverState solve_ama(const ClusteringProblem &problem,
                      const SolverConfig &config,
                      const std::optional<Matrix> &warm_Z) {
  config.validate();
  require_complete(problem);
  const Matrix &X = problem.data().values();
  const Index p = X.rows(), n = X.cols();
  const auto &graph = problem.graph();
  const Index E = graph.edge_count();
  const IncidenceOperator A(graph);
  const Vector &m = problem.multiplicities();
  const Vector inv_m = m.cwiseInverse();
  const Vector weights = graph.weights();
  const Vector radii = ball_radii(problem);
  const double gamma = problem.gamma();

  double step = config.rho;
  if (config.step_rule == StepRule::auto_spectral) {
    const double lipschitz = A.spectral_bound(m);
    step = lipschitz > 0.0 ? config.step_safety / lipschitz : 1.0;
  }

  Matrix Z = Matrix::Zero(p, E);
  if (warm_Z) {
    if (warm_Z->rows() != p || warm_Z->cols() != E)
      throw StructuralError("warm-start Z has the wrong shape");
    Z = *warm_Z;
  }
  project_columns(Z, radii);

  SolverState state;
  Matrix S, S_prev, Z_prev, U(p, n), D(p, E), Z_next, S_next;
  A.scatter(Z, S);
  double dual = dual_value(S, X, inv_m);
  if (config.record_history) {
    state.dual_history.push_back(dual);
    state.feasibility_history.push_back(max_violation(Z, radii));
  }
  Z_prev = Z;
  S_prev = S;
  double t = 1.0;
  const bool accelerated = config.method == SolverMethod::ama_accelerated;

  auto plain_step = [&]() {
    U.noalias() = X - S * inv_m.asDiagonal();
    A.differences(U, D);
    Z_next = Z + step * D;
    project_columns(Z_next, radii);
    A.scatter(Z_next, S_next);
  };

  long k = 0;
  for (; k < config.max_iterations; ++k) {
    if (k % config.check_every == 0) {
      U.noalias() = X - S * inv_m.asDiagonal();
      A.differences(U, D);
      if (paired_gap(Z, D, radii) <= config.gap_tolerance) {
        state.converged = true;
        break;
      }
    }

    double next;
    if (accelerated) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double beta = (t - 1.0) / t_next;
      // Scatter is linear, so the extrapolated S needs no extra sweep.
      const Matrix Y = Z + beta * (Z - Z_prev);
      const Matrix S_Y = S + beta * (S - S_prev);
      U.noalias() = X - S_Y * inv_m.asDiagonal();
      A.differences(U, D);
      Z_next = Y + step * D;
      project_columns(Z_next, radii);
      A.scatter(Z_next, S_next);
      next = dual_value(S_next, X, inv_m);
      if (next < dual) {
        plain_step();
        next = dual_value(S_next, X, inv_m);
        t = 1.0;
      } else {
        t = t_next;
      }
    } else {
      plain_step();
      next = dual_value(S_next, X, inv_m);
    }
    if (!std::isfinite(next))
      throw NumericalFailure("AMA produced a non-finite dual value", k + 1);

    std::swap(Z_prev, Z);
    std::swap(S_prev, S);
    std::swap(Z, Z_next);
    std::swap(S, S_next);
    dual = next;
    if (config.record_history) {
      state.dual_history.push_back(dual);
      state.feasibility_history.push_back(max_violation(Z, radii));
    }
  }

  state.iterations = k;
  U.noalias() = X - S * inv_m.asDiagonal();
  A.differences(U, D);
  state.primal_objective = primal_value(X, U, m, D, weights, gamma);
  state.dual_objective = dual;
  state.duality_gap = paired_gap(Z, D, radii);
  state.primal_residual = 0.0;
  state.dual_residual = 0.0;
  // Split variable from one more prox step: exact zeros on edges whose
  // dual stays strictly inside its ball, i.e. fused edges.
  Matrix W = Z + step * D;
  Matrix P = W;
  project_columns(P, radii);
  state.V = (W - P) / step;
  state.U = std::move(U);
  state.Z = std::move(Z);
  if (config.polish && state.converged)
    polish_solution(problem, state, config.polish_limit);
  return state;
}

AdmmSystem::AdmmSystem(const WeightGraph &graph, const Vector &multiplicities,
                       double rho, Index cholesky_limit, double cg_tolerance)
    : rho_(rho) {
  if (!(rho > 0.0))
    throw InvalidArgument("rho must be positive");
  if (multiplicities.size() != graph.n())
    throw StructuralError("multiplicity vector length differs from n");
  const IncidenceOperator A(graph);
  M_ = rho * A.laplacian();
  for (Index i = 0; i < graph.n(); ++i)
    M_.coeffRef(i, i) += multiplicities(i);
  M_.makeCompressed();
  if (graph.n() <= cholesky_limit) {
    llt_ = std::make_unique<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
    llt_->compute(M_);
    if (llt_->info() != Eigen::Success)
      throw NumericalFailure("Cholesky factorization of M failed", 0);
  } else {
    cg_ = std::make_unique<Eigen::ConjugateGradient<
        Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper>>();
    cg_->setTolerance(cg_tolerance);
    cg_->compute(M_);
  }
}

Matrix AdmmSystem::solve(const Matrix &rhs) const {
  if (rhs.cols() != M_.rows())
    throw StructuralError("right-hand side has the wrong number of columns");
  Matrix Ut;
  if (llt_) {
    Ut = llt_->solve(rhs.transpose());
  } else {
    Ut.resize(rhs.cols(), rhs.rows());
    for (Index d = 0; d < rhs.rows(); ++d)
      Ut.col(d) = cg_->solve(rhs.row(d).transpose());
  }
  if (!Ut.allFinite())
    throw NumericalFailure("U-update produced non-finite values", 0);
  return Ut.transpose();
}

namespace {

struct AdmmWork {
  const ClusteringProblem &problem;
  const AdmmSystem &system;
  IncidenceOperator A;
  Matrix Xm;
  Vector thresholds;

  AdmmWork(const ClusteringProblem &pr, const AdmmSystem &sys)
      : problem(pr), system(sys), A(pr.graph()),
        Xm(pr.data().values() * pr.multiplicities().asDiagonal()),
        thresholds(ball_radii(pr) / sys.rho()) {}

  /// One round; returns (primal residual, dual residual).
  std::pair<double, double> round(Matrix &U, Matrix &V, Matrix &Z) const {
    const double rho = system.rho();
    const Matrix S = A.scatter(rho * V - Z);
    U = system.solve(Xm + S);
    const Matrix D = A.differences(U);
    Matrix V_next = D + Z / rho;
    for (Index l = 0; l < V_next.cols(); ++l)
      V_next.col(l) = prox_group_norm(V_next.col(l), thresholds(l));
    const Matrix R = D - V_next;
    Z += rho * R;
    const double dual_res = rho * max_column_norm(A.scatter(V_next - V));
    V = std::move(V_next);
    return {max_column_norm(R), dual_res};
  }
};

void finish_admm_state(const ClusteringProblem &problem, SolverState &state) {
  const auto report = dual_objective_and_gap(problem, state.Z);
  state.dual_objective = report.dual;
  state.primal_objective = objective_value(problem, state.U);
  state.duality_gap = state.primal_objective - report.dual;
}

} // namespace

SolverState solve_admm(const ClusteringProblem &problem,
                       const SolverConfig &config,
                       const std::optional<AdmmWarmStart> &warm,
                       const AdmmSystem *system) {
  config.validate();
  require_complete(problem);
  std::optional<AdmmSystem> own;
  if (!system || system->rho() != config.rho ||
      system->matrix().rows() != problem.data().n()) {
    own.emplace(problem.graph(), problem.multiplicities(), config.rho,
                config.cholesky_limit, config.cg_tolerance);
    system = &*own;
  }
  const AdmmWork work(problem, *system);
  const Index p = problem.data().p(), E = problem.graph().edge_count();

  SolverState state;
  Matrix U, V, Z;
  if (warm) {
    if (warm->V.rows() != p || warm->V.cols() != E || warm->Z.rows() != p ||
        warm->Z.cols() != E)
      throw StructuralError("warm-start (V, Z) has the wrong shape");
    V = warm->V;
    Z = warm->Z;
  } else {
    V = work.A.differences(problem.data().values());
    Z = Matrix::Zero(p, E);
  }
  const Vector radii = ball_radii(problem);
  const Vector inv_m = problem.multiplicities().cwiseInverse();

  long k = 0;
  for (; k < config.max_iterations; ++k) {
    const auto [r, s] = work.round(U, V, Z);
    if (!std::isfinite(r) || !std::isfinite(s))
      throw NumericalFailure("ADMM produced non-finite residuals", k + 1);
    state.primal_residual = r;
    state.dual_residual = s;
    if (config.record_history) {
      state.dual_history.push_back(
          dual_value(work.A.scatter(Z), problem.data().values(), inv_m));
      state.feasibility_history.push_back(max_violation(Z, radii));
    }
    if (r <= config.residual_tolerance && s <= config.residual_tolerance) {
      state.converged = true;
      ++k;
      break;
    }
  }
  state.iterations = k;
  state.U = std::move(U);
  state.V = std::move(V);
  state.Z = std::move(Z);
  finish_admm_state(problem, state);
  if (config.polish && state.converged)
    polish_solution(problem, state, config.polish_limit);
  return state;
}

SolverState admm_round(const ClusteringProblem &problem,
                       const AdmmSystem &system, const Matrix &V,
                       const Matrix &Z) {
  require_complete(problem);
  const AdmmWork work(problem, system);
  SolverState state;
  state.V = V;
  state.Z = Z;
  const auto [r, s] = work.round(state.U, state.V, state.Z);
  state.primal_residual = r;
  state.dual_residual = s;
  state.iterations = 1;
  finish_admm_state(problem, state);
  return state;
}

double paired_gap(const Matrix &Z, const Matrix &D, const Vector &radii) {
  double gap = 0.0;
  for (Index l = 0; l < D.cols(); ++l)
    gap += std::max(0.0, radii(l) * D.col(l).norm() - Z.col(l).dot(D.col(l)));
  return gap;
}

namespace {

/// The smooth problem on a fixed fusion pattern:
///   ½ Σ_k n_k ‖x̄_k − u_k‖² + Σ_(k,l) r_kl ‖u_k − u_l‖.
struct BlockProblem {
  Matrix means;
  Vector sizes;
  std::vector<Edge> edges;  // w holds the radius γ·Σw

  double value(const Matrix &U, bool &ok) const {
    double f = 0.5 * (means - U).colwise().squaredNorm().dot(sizes.transpose());
    ok = true;
    for (const auto &e : edges) {
      const double r = (U.col(e.i) - U.col(e.j)).norm();
      if (!(r > 0.0))
        ok = false;
      f += e.w * r;
    }
    return f;
  }
};

/// Damped Newton; false when an edge difference collapses (wrong pattern).
bool newton_blocks(const BlockProblem &bp, Matrix &U) {
  const Index p = U.rows(), K = U.cols();
  const Index N = p * K;
  bool ok = true;
  double f = bp.value(U, ok);
  if (!ok)
    return false;
  for (int it = 0; it < 100; ++it) {
    Matrix G = (U - bp.means) * bp.sizes.asDiagonal();
    Matrix H = Matrix::Zero(N, N);
    for (Index k = 0; k < K; ++k)
      H.block(k * p, k * p, p, p).diagonal().array() += bp.sizes(k);
    for (const auto &e : bp.edges) {
      const Vector d = U.col(e.i) - U.col(e.j);
      const double r = d.norm();
      G.col(e.i) += e.w * d / r;
      G.col(e.j) -= e.w * d / r;
      const Matrix He =
          (e.w / r) * (Matrix::Identity(p, p) - d * d.transpose() / (r * r));
      H.block(e.i * p, e.i * p, p, p) += He;
      H.block(e.j * p, e.j * p, p, p) += He;
      H.block(e.i * p, e.j * p, p, p) -= He;
      H.block(e.j * p, e.i * p, p, p) -= He;
    }
    const Eigen::Map<const Vector> g(G.data(), N);
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success)
      return false;
    const Vector step = -llt.solve(g);
    const double decrement = -g.dot(step);
    if (!(decrement > 1e-30 * std::max(1.0, std::abs(f))))
      return true;
    const Eigen::Map<const Matrix> dU(step.data(), p, K);
    double t = 1.0;
    for (; t > 1e-12; t *= 0.5) {
      const Matrix trial = U + t * dU;
      const double ft = bp.value(trial, ok);
      if (ok && ft <= f - 1e-4 * t * decrement) {
        U = trial;
        f = ft;
        break;
      }
    }
    if (t <= 1e-12)
      return true;  // no further progress representable
  }
  return true;
}

} // namespace

bool polish_solution(const ClusteringProblem &problem, SolverState &state,
                     Index limit) {
  const auto &graph = problem.graph();
  const Matrix &X = problem.data().values();
  const Vector &m = problem.multiplicities();
  const Index p = X.rows(), n = X.cols(), E = graph.edge_count();
  if (problem.data().has_mask() || n > limit || E == 0 ||
      state.V.cols() != E || state.Z.cols() != E || !(problem.gamma() > 0.0))
    return false;

  std::vector<bool> fused(static_cast<std::size_t>(E));
  for (Index l = 0; l < E; ++l)
    fused[static_cast<std::size_t>(l)] = state.V.col(l).squaredNorm() == 0.0;
  const Partition P = connected_components(n, graph.edges(), fused);
  const Index K = P.K();
  if (K * p > limit)
    return false;

  BlockProblem bp;
  bp.sizes = Vector::Zero(K);
  bp.means = Matrix::Zero(p, K);
  Matrix Ub = Matrix::Zero(p, K);
  for (Index i = 0; i < n; ++i) {
    bp.sizes(P.label(i)) += m(i);
    bp.means.col(P.label(i)) += m(i) * X.col(i);
    Ub.col(P.label(i)) += m(i) * state.U.col(i);
  }
  for (Index k = 0; k < K; ++k) {
    bp.means.col(k) /= bp.sizes(k);
    Ub.col(k) /= bp.sizes(k);
  }
  std::map<std::pair<Index, Index>, double> total;
  for (const auto &e : graph.edges()) {
    const Index a = P.label(e.i), b = P.label(e.j);
    if (a != b)
      total[{std::min(a, b), std::max(a, b)}] += problem.gamma() * e.w;
  }
  for (const auto &[key, r] : total)
    bp.edges.push_back({key.first, key.second, r});
  if (!newton_blocks(bp, Ub))
    return false;

  Matrix U(p, n);
  for (Index i = 0; i < n; ++i)
    U.col(i) = Ub.col(P.label(i));

  // Dual certificate: forced values across blocks; inside each block the
  // solver's duals plus the radius-weighted least-norm flow correction
  // that makes stationarity exact.
  const Vector radii = ball_radii(problem);
  const IncidenceOperator A(graph);
  Matrix Z = state.Z;
  for (Index l = 0; l < E; ++l) {
    if (fused[static_cast<std::size_t>(l)])
      continue;
    const Vector d = U.col(graph.edge(l).i) - U.col(graph.edge(l).j);
    const double r = d.norm();
    if (!(r > 0.0))
      return false;
    Z.col(l) = radii(l) * d / r;
  }
  const Matrix R = (X - U) * m.asDiagonal() - A.scatter(Z);
  const auto blocks = P.blocks();
  std::vector<Index> local(static_cast<std::size_t>(n));
  for (const auto &members : blocks)
    for (std::size_t a = 0; a < members.size(); ++a)
      local[static_cast<std::size_t>(members[a])] = static_cast<Index>(a);
  std::vector<std::vector<Index>> intra(blocks.size());
  for (Index l = 0; l < E; ++l)
    if (fused[static_cast<std::size_t>(l)])
      intra[static_cast<std::size_t>(P.label(graph.edge(l).i))].push_back(l);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const Index nk = static_cast<Index>(blocks[k].size());
    if (nk == 1)
      continue;
    Matrix L = Matrix::Constant(nk, nk, 1.0 / static_cast<double>(nk));
    for (Index l : intra[k]) {
      const Index a = local[static_cast<std::size_t>(graph.edge(l).i)];
      const Index b = local[static_cast<std::size_t>(graph.edge(l).j)];
      const double w = radii(l) * radii(l);
      L(a, a) += w;
      L(b, b) += w;
      L(a, b) -= w;
      L(b, a) -= w;
    }
    Matrix Rk(p, nk);
    for (Index a = 0; a < nk; ++a)
      Rk.col(a) = R.col(blocks[k][static_cast<std::size_t>(a)]);
    Eigen::LDLT<Matrix> ldlt(L);
    if (ldlt.info() != Eigen::Success)
      return false;
    const Matrix Phi = ldlt.solve(Rk.transpose()).transpose();
    for (Index l : intra[k]) {
      const Index a = local[static_cast<std::size_t>(graph.edge(l).i)];
      const Index b = local[static_cast<std::size_t>(graph.edge(l).j)];
      Z.col(l) += radii(l) * radii(l) * (Phi.col(a) - Phi.col(b));
    }
  }

  const double slack = kFeasibilitySlack * std::max(1.0, radii.maxCoeff());
  if (max_violation(Z, radii) > slack)
    return false;
  const Matrix residual = (U - X) * m.asDiagonal() + A.scatter(Z);
  if (max_column_norm(residual) > 1e-9 * (1.0 + X.cwiseAbs().maxCoeff()) *
                                      m.maxCoeff())
    return false;

  state.U = std::move(U);
  state.V = A.differences(state.U);
  state.Z = std::move(Z);
  state.primal_objective = objective_value(problem, state.U);
  state.dual_objective =
      dual_value(A.scatter(state.Z), X, m.cwiseInverse());
  state.duality_gap = std::max(0.0, paired_gap(state.Z, state.V, radii));
  state.converged = true;
  return true;
}

SolverState solve(const ClusteringProblem &problem, const SolverConfig &config,
                  const std::optional<Matrix> &warm_Z,
                  const std::optional<Matrix> &warm_V) {
  if (config.method == SolverMethod::admm) {
    std::optional<AdmmWarmStart> warm;
    if (warm_Z && warm_V)
      warm = AdmmWarmStart{*warm_V, *warm_Z};
    return solve_admm(problem, config, warm);
  }
  return solve_ama(problem, config, warm_Z);
}

KktReport kkt_report(const ClusteringProblem &problem,
                     const SolverState &state, double tolerance,
                     double fused_tolerance) {
  KktReport out;
  const auto dual = dual_objective_and_gap(problem, state.Z);
  out.dual_violation = std::max(0.0, dual.max_violation);
  // The gap belongs to the state's own (U, Z) pair.
  out.duality_gap = objective_value(problem, state.U) - dual.dual;

  const auto &graph = problem.graph();
  const IncidenceOperator A(graph);
  const Matrix &X = problem.data().values();
  const Matrix D = A.differences(state.U);
  const double scale = 1.0 + X.cwiseAbs().maxCoeff();
  Matrix Zt(state.Z.rows(), state.Z.cols());
  for (Index l = 0; l < graph.edge_count(); ++l) {
    const double radius = problem.gamma() * graph.edge(l).w;
    const double norm = D.col(l).norm();
    if (norm > fused_tolerance * scale)
      Zt.col(l) = (radius / norm) * D.col(l);
    else
      Zt.col(l) = project_dual_ball(state.Z.col(l), radius);
  }
  const Matrix G = (state.U - X) * problem.multiplicities().asDiagonal() +
                   A.scatter(Zt);
  out.stationarity = max_column_norm(G);
  if (state.V.rows() == D.rows() && state.V.cols() == D.cols())
    out.split_residual = max_column_norm(D - state.V);
  out.optimal = out.duality_gap <= tolerance &&
                out.dual_violation <= tolerance &&
                out.stationarity <= tolerance &&
                out.split_residual <= tolerance;
  return out;
}

} // namespace son
