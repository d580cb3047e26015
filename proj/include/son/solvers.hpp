#pragma once

#include "son/core.hpp"
#include "son/incidence.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <memory>
#include <optional>

namespace son {

enum class SolverMethod { ama, ama_accelerated, admm };
enum class StepRule { fixed, auto_spectral };

std::string to_string(SolverMethod m);
SolverMethod parse_solver_method(const std::string &text);

struct SolverConfig {
  SolverMethod method = SolverMethod::ama_accelerated;
  /// ADMM penalty, or the AMA step when step_rule is fixed.
  double rho = 1.0;
  long max_iterations = 200000;
  double gap_tolerance = 1e-8;
  double residual_tolerance = 1e-8;
  StepRule step_rule = StepRule::auto_spectral;
  /// Safety factor on 1/λ_max for the AMA step.
  double step_safety = 0.95;
  /// Gap is evaluated every this many AMA iterations.
  int check_every = 10;
  /// Record dual value and feasibility at every iteration.
  bool record_history = false;
  /// Systems above this many nodes use conjugate gradients for the ADMM
  /// U-update instead of a cached Cholesky factor.
  Index cholesky_limit = 10000;
  double cg_tolerance = 1e-10;
  /// After convergence, re-solve the smooth problem on the detected fusion
  /// pattern by Newton's method and keep it only with a feasible dual
  /// certificate. Skipped when n or K·p exceeds polish_limit.
  bool polish = true;
  Index polish_limit = 400;

  void validate() const;
};

/// Dual proximal gradient ascent (AMA). A plain run keeps the dual
/// objective nondecreasing; the accelerated variant falls back to a plain
/// step whenever momentum would decrease it.
SolverState solve_ama(const ClusteringProblem &problem,
                      const SolverConfig &config,
                      const std::optional<Matrix> &warm_Z = std::nullopt);

/// The n × n system U·M = RHS with M = diag(m) + ρ·AᵀA, factored once.
class AdmmSystem {
public:
  AdmmSystem(const WeightGraph &graph, const Vector &multiplicities,
             double rho, Index cholesky_limit = 10000,
             double cg_tolerance = 1e-10);

  double rho() const { return rho_; }
  bool uses_cholesky() const { return static_cast<bool>(llt_); }
  const Eigen::SparseMatrix<double> &matrix() const { return M_; }

  /// Solve U·M = rhs for U (p × n).
  Matrix solve(const Matrix &rhs) const;

private:
  double rho_;
  Eigen::SparseMatrix<double> M_;
  std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> llt_;
  std::unique_ptr<Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                                           Eigen::Lower | Eigen::Upper>>
      cg_;
};

struct AdmmWarmStart {
  Matrix V;
  Matrix Z;
};

/// ADMM on the split problem. `system` may be shared across calls that
/// use the same graph, multiplicities and ρ.
SolverState solve_admm(const ClusteringProblem &problem,
                       const SolverConfig &config,
                       const std::optional<AdmmWarmStart> &warm = std::nullopt,
                       const AdmmSystem *system = nullptr);

/// Exactly one (U, V, Z) round from (V, Z); used for algorithmic paths.
SolverState admm_round(const ClusteringProblem &problem,
                       const AdmmSystem &system, const Matrix &V,
                       const Matrix &Z);

/// Newton refinement on the fusion pattern given by the exact zeros of
/// state.V. Returns true and overwrites (U, V, Z) when the refined point
/// comes with a dual Z that is feasible to within kFeasibilitySlack.
bool polish_solution(const ClusteringProblem &problem, SolverState &state,
                     Index limit = 400);

/// Σ_ℓ (γw_ℓ‖d_ℓ‖ − ⟨z_ℓ, d_ℓ⟩) for D = differences of U = X − Z·A·diag(m)⁻¹:
/// the duality gap written as a sum of nonnegative terms.
double paired_gap(const Matrix &Z, const Matrix &D, const Vector &radii);

/// Dispatch on config.method. Warm starts pass duals only.
SolverState solve(const ClusteringProblem &problem, const SolverConfig &config,
                  const std::optional<Matrix> &warm_Z = std::nullopt,
                  const std::optional<Matrix> &warm_V = std::nullopt);

struct KktReport {
  double duality_gap = 0.0;
  double dual_violation = 0.0;   // max_ℓ (‖z_ℓ‖ − γw_ℓ)⁺
  double stationarity = 0.0;     // max_i ‖m_i(u_i − x_i) + (Z̃A)_i‖
  double split_residual = 0.0;   // max_ℓ ‖u_i − u_j − v_ℓ‖
  bool optimal = false;
};

/// Optimality diagnostics. Stationarity uses the subgradient forced by U on
/// unfused edges (‖u_i − u_j‖ > fused_tolerance) and the state's Z, projected,
/// on fused ones.
KktReport kkt_report(const ClusteringProblem &problem,
                     const SolverState &state, double tolerance = 1e-8,
                     double fused_tolerance = 1e-12);

} // namespace son
