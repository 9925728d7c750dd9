#include "dualdp/certify.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "dualdp/qcqp.hpp"
#include "feasibility.hpp"

namespace dualdp {

std::string to_string(CertMethod m) {
  switch (m) {
    case CertMethod::M1: return "M1";
    case CertMethod::M2: return "M2";
    case CertMethod::Mixed: return "Mixed";
  }
  return "Unknown";
}

std::vector<double> SuboptimalityCertificate::per_step_theta() const {
  std::vector<double> out;
  for (const auto& s : steps) out.push_back(s.theta);
  return out;
}

std::vector<double> SuboptimalityCertificate::per_step_eps() const {
  std::vector<double> out;
  for (const auto& s : steps) out.push_back(s.eps);
  return out;
}

GreedyAction greedy_action(const ControlProblem& p, const ValueApprox& V, const Vector& x,
                           const SolverConfig& cfg) {
  const OneStageResult r = solve_onestage(p, V, x, cfg);
  if (r.primal.status == SolveStatus::Infeasible)
    throw Error(ErrorKind::Infeasible, "greedy action: no admissible input at this state");
  if (!r.optimal()) throw Error(ErrorKind::NumericalFailure, "greedy action: one-stage solve failed");
  return {r.primal.u, r.primal.x_plus, r.primal.cost};
}

PinnedStage pinned_stage(const ControlProblem& p, const ValueApprox& V, const Vector& x, const Vector& y,
                         const SolverConfig& cfg) {
  require(x.size() == p.n && y.size() == p.n, "pinned stage: state dimension mismatch");
  const Vector c0 = p.dynamics.drift(x);
  const Matrix F = p.dynamics.input_matrix(x);
  const Vector d = y - c0;
  const Vector h = p.constraints.rhs(x);

  Eigen::JacobiSVD<Matrix> svd(F, Eigen::ComputeFullV | Eigen::ComputeFullU);
  svd.setThreshold(1e-12);
  const int rank = static_cast<int>(svd.rank());
  const Vector up = svd.solve(d);
  if ((F * up - d).norm() > 1e-9 * (1.0 + d.norm() + c0.norm()))
    throw Error(ErrorKind::Unreachable, "pinned stage: successor is not reachable from this state");

  Vector u = up;
  if (rank < p.m) {
    const Matrix N = svd.matrixV().rightCols(p.m - rank);
    const int q = p.m - rank, K = p.cost.num_epigraph();
    const Matrix EN = p.constraints.rows() > 0 ? Matrix(p.constraints.E * N) : Matrix(0, q);
    const Vector hr = p.constraints.rows() > 0 ? Vector(h - p.constraints.E * up) : Vector(0);
    const auto z_start = detail::feasible_point(EN, hr, q);
    if (!z_start) throw Error(ErrorKind::Unreachable, "pinned stage: no admissible input reaches the successor");

    QcqpProblem prob;
    prob.quad_dims = q;
    prob.objective = Vector::Zero(q + K);
    prob.objective.tail(K).setOnes();
    for (int r = 0; r < EN.rows(); ++r) {
      QuadConstraint c;
      c.gradient = Vector::Zero(q + K);
      c.gradient.head(q) = EN.row(r).transpose();
      c.offset = -hr(r);
      prob.constraints.push_back(std::move(c));
    }
    for (const auto& t : p.cost.terms()) {
      QuadConstraint c;
      const Matrix curv = N.transpose() * t.R * N;
      if (curv.cwiseAbs().maxCoeff() > 0.0) c.curvature = curv;
      c.gradient = Vector::Zero(q + K);
      c.gradient.head(q) = N.transpose() * (t.r + t.R * up);
      c.gradient(q + t.owner) = -1.0;
      c.offset = t.phi(x) + t.input_part(up);
      prob.constraints.push_back(std::move(c));
    }
    Vector z0(q + K);
    z0.head(q) = *z_start;
    z0.tail(K) = p.cost.epigraph_values(x, up + N * *z_start).array() + 1.0;
    QcqpOptions opt;
    opt.acceptable_tol = cfg.kkt_tol;
    opt.max_iters = cfg.max_iters;
    const QcqpResult res = solve_qcqp(prob, z0, opt);
    if (!res.converged) throw Error(ErrorKind::NumericalFailure, "pinned stage: solve did not converge");
    u = up + N * res.z.head(q);
  }
  if (p.constraints.rows() > 0 &&
      (p.constraints.E * u - h).maxCoeff() > 1e-9 * (1.0 + h.lpNorm<Eigen::Infinity>()))
    throw Error(ErrorKind::Unreachable, "pinned stage: reaching the successor violates the input constraints");
  return {u, p.cost.evaluate(x, u) + p.gamma * V(y)};
}

double detour_cost(const ControlProblem& p, const ValueApprox& V, const Vector& x, const Vector& y,
                   const SolverConfig& cfg) {
  const PinnedStage pinned = pinned_stage(p, V, x, y, cfg);
  const GreedyAction free = greedy_action(p, V, x, cfg);
  return std::max(0.0, pinned.cost - free.j_p);
}

Rollout rollout_greedy(const ControlProblem& p, const ValueApprox& V, const Vector& x0, int steps,
                       const SolverConfig& cfg) {
  require(steps >= 1, "rollout: steps must be at least 1");
  Rollout out;
  Vector x = x0;
  out.trajectory.states.push_back(x);
  for (int t = 0; t < steps; ++t) {
    const OneStageResult r = solve_onestage(p, V, x, cfg);
    if (r.primal.status == SolveStatus::Infeasible) {
      out.trajectory.feasible = false;
      break;
    }
    if (!r.optimal()) throw Error(ErrorKind::NumericalFailure, "rollout: one-stage solve failed");
    out.eps.push_back(r.primal.cost - V(x));
    out.trajectory.inputs.push_back(r.primal.u);
    out.trajectory.stage_costs.push_back(p.cost.evaluate(x, r.primal.u));
    x = r.primal.x_plus;
    out.trajectory.states.push_back(x);
  }
  return out;
}

int controllability_index(const Matrix& A, const Matrix& B) {
  const int n = static_cast<int>(A.rows());
  Matrix C(n, 0);
  Matrix block = B;
  for (int k = 1; k <= n; ++k) {
    Matrix next(n, C.cols() + B.cols());
    next << C, block;
    C = std::move(next);
    if (C.colPivHouseholderQr().rank() == n) return k;
    block = A * block;
  }
  throw Error(ErrorKind::InvalidArgument, "controllability index: pair (A, B) is not controllable");
}

TailCompletion tail_completion(const ControlProblem& p, const Vector& x_near, const Vector& anchor) {
  require(p.dynamics.affine_drift() && p.dynamics.constant_input(), "tail completion needs linear dynamics");
  const Matrix& A = p.dynamics.A();
  const Matrix& B = p.dynamics.B();
  const Vector& a = p.dynamics.a();
  TailCompletion out;
  out.states.push_back(x_near);
  if ((x_near - anchor).norm() == 0.0) return out;

  const int k = controllability_index(A, B);
  const int m = p.m;
  // x_k = A^k x + sum_i A^{k-1-i}(a + B u_i)
  Matrix C(p.n, k * m);
  Vector free = x_near;
  Matrix Ai = Matrix::Identity(p.n, p.n);
  for (int i = k - 1; i >= 0; --i) {
    C.middleCols(i * m, m) = Ai * B;
    Ai = A * Ai;
  }
  for (int i = 0; i < k; ++i) free = A * free + a;
  const Vector rhs = anchor - free;
  const Vector useq = C.completeOrthogonalDecomposition().solve(rhs);

  Vector x = x_near;
  for (int i = 0; i < k; ++i) {
    const Vector u = useq.segment(i * m, m);
    if (!p.constraints.contains(x, u, 1e-9)) out.box_violated = true;
    out.inputs.push_back(u);
    x = p.dynamics(x, u);
    out.states.push_back(x);
  }
  return out;
}

void check_anchor(const ControlProblem& p, const Vector& anchor) {
  require(anchor.size() == p.n, "anchor has wrong dimension");
  const Vector u0 = Vector::Zero(p.m);
  const bool ok = std::abs(p.cost.evaluate(anchor, u0)) <= 1e-12 &&
                  (p.dynamics(anchor, u0) - anchor).norm() <= 1e-12 * (1.0 + anchor.norm()) &&
                  p.constraints.contains(anchor, u0, 0.0);
  require(ok, "anchor must be a zero-cost equilibrium with zero input admissible");
}

namespace {

/// Step with the transition pinned to y: theta from the pinned cost, eps from J_P.
CertificateStep pinned_step(const ControlProblem& p, const ValueApprox& V, const Vector& x, const Vector& y,
                            const SolverConfig& cfg, Vector& reached) {
  const PinnedStage pinned = pinned_stage(p, V, x, y, cfg);
  const GreedyAction free = greedy_action(p, V, x, cfg);
  reached = p.dynamics(x, pinned.u);
  return {x, pinned.u, std::max(0.0, pinned.cost - free.j_p), std::max(0.0, free.j_p - V(x))};
}

void accumulate(SuboptimalityCertificate& c, double gamma) {
  double sum = 0.0, discount = 1.0;
  for (const auto& s : c.steps) {
    sum += discount * (s.theta + s.eps);
    discount *= gamma;
  }
  c.upper = c.lower + sum;
}

}  // namespace

SuboptimalityCertificate certify_m1(const ControlProblem& p, const ValueApprox& V, const Vector& x,
                                    const Vector& anchor, const CertifyConfig& cfg) {
  check_anchor(p, anchor);
  SuboptimalityCertificate c;
  c.query_state = x;
  c.terminal_anchor = anchor;
  c.method = CertMethod::M1;
  c.lower = V(x);
  if ((x - anchor).norm() == 0.0) {
    c.upper = c.lower;
    return c;
  }
  require(p.dynamics.affine_drift() && p.dynamics.constant_input(),
          "M1 certificate needs linear dynamics for the tail to the anchor");

  const int horizon = cfg.horizon > 0 ? cfg.horizon : (p.n >= 8 ? 50 : 30);
  const int k = controllability_index(p.dynamics.A(), p.dynamics.B());
  const int greedy_target = std::max(horizon - k, 0);

  Vector cur = x;
  TailCompletion tail;
  for (int t = 0;; ++t) {
    if (t >= greedy_target) {
      tail = tail_completion(p, cur, anchor);
      if (!tail.box_violated) break;
      if (t >= cfg.max_steps)
        throw Error(ErrorKind::AnchorUnreachable,
                    "M1 certificate: no admissible tail to the anchor within " + std::to_string(cfg.max_steps) +
                        " greedy steps");
    }
    const OneStageResult r = solve_onestage(p, V, cur, cfg.solver);
    if (r.primal.status == SolveStatus::Infeasible)
      throw Error(ErrorKind::AnchorUnreachable, "M1 certificate: greedy rollout reached an infeasible state");
    if (!r.optimal()) throw Error(ErrorKind::NumericalFailure, "M1 certificate: one-stage solve failed");
    c.steps.push_back({cur, r.primal.u, 0.0, std::max(0.0, r.primal.cost - V(cur))});
    cur = r.primal.x_plus;
    ++c.greedy_steps;
  }
  for (std::size_t i = 0; i + 1 < tail.states.size(); ++i) {
    Vector reached;
    c.steps.push_back(pinned_step(p, V, cur, tail.states[i + 1], cfg.solver, reached));
    cur = reached;
    ++c.tail_steps;
  }
  accumulate(c, p.gamma);
  return c;
}

SuboptimalityCertificate certify_m2(const ControlProblem& p, const ValueApprox& V,
                                    const std::vector<Vector>& waypoints, const Vector& anchor,
                                    const CertifyConfig& cfg) {
  check_anchor(p, anchor);
  require(!waypoints.empty(), "M2 certificate: waypoints required");
  require((waypoints.back() - anchor).norm() <= 1e-9 * (1.0 + anchor.norm()),
          "M2 certificate: last waypoint must be the anchor");
  SuboptimalityCertificate c;
  c.query_state = waypoints.front();
  c.terminal_anchor = anchor;
  c.method = CertMethod::Mixed;
  c.lower = V(waypoints.front());
  Vector cur = waypoints.front();
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    Vector reached;
    c.steps.push_back(pinned_step(p, V, cur, waypoints[i + 1], cfg.solver, reached));
    cur = reached;
  }
  accumulate(c, p.gamma);
  return c;
}

}  // namespace dualdp
