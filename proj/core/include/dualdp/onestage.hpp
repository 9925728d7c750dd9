#pragma once

#include "dualdp/problem.hpp"
#include "dualdp/value_approx.hpp"

namespace dualdp {

enum class SolveStatus { Optimal, Infeasible, NumericalFailure };

std::string to_string(SolveStatus s);

/// Primal solution of the epigraph one-stage problem at a fixed state.
struct OneStageSolution {
  Vector u;
  Vector x_plus;
  Vector beta;        // per epigraph variable, tight at u
  double alpha = 0.0; // V(x_plus)
  double cost = 0.0;  // J_P = 1'beta + gamma * alpha
  SolveStatus status = SolveStatus::NumericalFailure;
  int iterations = 0;
};

/// Multipliers of the one-stage problem. lambda_beta sums to one over the
/// rows of each epigraph variable and lambda_alpha sums to gamma.
struct DualSolution {
  Vector nu;
  Vector lambda_c;
  Vector lambda_beta;
  Vector lambda_alpha;
  double objective = 0.0;       // J_D
  bool objective_exact = true;  // false when the successor infimum could not be evaluated
  double kkt_residual = 0.0;
  bool degenerate_active_set = false;
};

struct SolverConfig {
  double kkt_tol = 1e-8;
  int max_iters = 200;
  double duality_gap_tol = 1e-7;
  int bruteforce_grid = 0;  // per input axis; 0 selects 2001 (m = 1) or 101 (m = 2)
  int refine_newton_steps = 5;
  bool verbose = false;
};

struct OneStageResult {
  OneStageSolution primal;
  DualSolution dual;

  bool optimal() const { return primal.status == SolveStatus::Optimal; }
  /// (J_P - J_D) / (1 + |J_P|).
  double relative_gap() const;
};

/// Interior-point solve for the convex quadratic class. The successor state is
/// eliminated, so the variables are (u, beta, alpha).
OneStageResult solve_onestage_convex(const ControlProblem& problem, const ValueApprox& value,
                                     const Vector& x_hat, const SolverConfig& cfg = {});

/// Grid search over the input box, polished locally, with multipliers read
/// back from the optimality conditions.
OneStageResult solve_onestage_bruteforce(const ControlProblem& problem, const ValueApprox& value,
                                         const Vector& x_hat, const SolverConfig& cfg = {});

/// Dispatches on problem.problem_class.
OneStageResult solve_onestage(const ControlProblem& problem, const ValueApprox& value,
                              const Vector& x_hat, const SolverConfig& cfg = {});

/// inf_u { w(x)'u + 1/2 u'Mu } with M = sum_j lambda_beta_j R_j and
/// w(x) = F_u(x)'nu + E'lambda_c + Rbar'lambda_beta. Returns -infinity when
/// w(x) leaves range(M), i.e. the multipliers are dual infeasible.
double zeta2(const ControlProblem& problem, const Vector& x, const Vector& nu,
             const Vector& lambda_c, const Vector& lambda_beta);

/// Multipliers at a (near-)optimal brute-force point: lambda_alpha and
/// lambda_beta spread over the active bounds and cost rows so that the input
/// stationarity residual is minimized, ties split evenly; lambda_c on the
/// active constraint rows.
DualSolution recover_duals_kkt(const ControlProblem& problem, const ValueApprox& value,
                               const Vector& x_hat, const OneStageSolution& primal);

struct BoundConstruction {
  LowerBound bound;
  bool strong_duality = true;  // gap within tolerance; the bound touches J_P at x_hat
  double relative_gap = 0.0;
};

/// New lower bound from a solved one-stage problem. Uses J_P as the anchor
/// value when the duality gap is within tolerance and J_D otherwise.
BoundConstruction build_lower_bound(const ProblemPtr& problem, const Vector& x_hat,
                                    const OneStageResult& solved, const SolverConfig& cfg = {});

}  // namespace dualdp
