#pragma once

#include <vector>

#include "dualdp/types.hpp"

namespace dualdp {

/// f(z) = 1/2 z_q' C z_q + a'z + b <= 0, where z_q is the leading block of
/// `quad_dims` variables. An empty `curvature` makes the row linear.
struct QuadConstraint {
  Matrix curvature;
  Vector gradient;
  double offset = 0.0;
};

/// min c'z subject to convex quadratic inequalities. Dense and intended for a
/// handful of variables with possibly thousands of rows.
struct QcqpProblem {
  Vector objective;
  int quad_dims = 0;
  std::vector<QuadConstraint> constraints;

  double row_value(std::size_t i, const Vector& z) const;
  Vector row_gradient(std::size_t i, const Vector& z) const;
};

struct QcqpOptions {
  double tol = 1e-11;             // stop target, relative
  double acceptable_tol = 1e-8;   // converged flag threshold at exit
  int max_iters = 200;
  double step_fraction = 0.995;
  bool verbose = false;
};

struct QcqpResult {
  Vector z;
  Vector multipliers;  // one per row, >= 0
  Vector slacks;       // -f(z) targets, >= 0
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  double primal_residual = 0.0;   // max(f(z), 0) over rows
  double dual_residual = 0.0;     // |c + sum lambda_i grad f_i|_inf
  double complementarity = 0.0;   // max |lambda_i f_i(z)|
};

/// Mehrotra-style primal-dual interior point with slack variables, so z0 need
/// not be feasible. A strictly feasible z0 is first moved along the log-barrier
/// path, which keeps every iterate feasible. Infeasibility is not detected
/// here; callers run a phase-one problem when the feasible set may be empty.
QcqpResult solve_qcqp(const QcqpProblem& problem, const Vector& z0, const QcqpOptions& options);

}  // namespace dualdp
