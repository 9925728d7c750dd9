#pragma once

#include <string>
#include <vector>

#include "dualdp/onestage.hpp"

namespace dualdp {

struct Trajectory {
  std::vector<Vector> states;  // x_0 .. x_T
  std::vector<Vector> inputs;  // u_0 .. u_{T-1}
  std::vector<double> stage_costs;
  bool feasible = true;
};

enum class CertMethod { M1, M2, Mixed };

std::string to_string(CertMethod m);

struct CertificateStep {
  Vector x;
  Vector u;
  double theta = 0.0;  // detour cost of the transition taken from x
  double eps = 0.0;    // Bellman error at x
};

/// V_hat(x) <= V*(x) <= upper, where upper = lower + sum_t gamma^t (theta_t + eps_t)
/// accumulated in step order.
struct SuboptimalityCertificate {
  Vector query_state;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<CertificateStep> steps;
  Vector terminal_anchor;
  CertMethod method = CertMethod::M1;
  int greedy_steps = 0;
  int tail_steps = 0;

  std::vector<double> per_step_theta() const;
  std::vector<double> per_step_eps() const;
};

struct GreedyAction {
  Vector u;
  Vector x_plus;
  double j_p = 0.0;
};

/// One-stage minimizer. Throws Infeasible when U(x) is empty.
GreedyAction greedy_action(const ControlProblem& problem, const ValueApprox& V, const Vector& x,
                           const SolverConfig& cfg = {});

/// Cheapest one-stage cost with the successor pinned to y:
/// min { l(x,u) + gamma V(y) : f(x,u) = y, E u <= h(x) }, plus the input that
/// attains it. Throws Unreachable when no admissible input reaches y.
struct PinnedStage {
  Vector u;
  double cost = 0.0;
};
PinnedStage pinned_stage(const ControlProblem& problem, const ValueApprox& V, const Vector& x,
                         const Vector& y, const SolverConfig& cfg = {});

/// theta = pinned cost - J_P(x); clamped at zero when slightly negative.
double detour_cost(const ControlProblem& problem, const ValueApprox& V, const Vector& x, const Vector& y,
                   const SolverConfig& cfg = {});

struct Rollout {
  Trajectory trajectory;
  std::vector<double> eps;  // Bellman error at each x_t, t < T
};

/// Applies the greedy policy for `steps` steps; stops early (feasible = false)
/// if a one-stage problem is infeasible.
Rollout rollout_greedy(const ControlProblem& problem, const ValueApprox& V, const Vector& x0, int steps,
                       const SolverConfig& cfg = {});

/// Smallest k with rank [B, AB, ..., A^{k-1}B] = n; throws if uncontrollable.
int controllability_index(const Matrix& A, const Matrix& B);

struct TailCompletion {
  std::vector<Vector> inputs;
  std::vector<Vector> states;  // x_near, then each successor
  bool box_violated = false;
};

/// Minimum-norm k-step input sequence taking x_near exactly to the anchor
/// (k = controllability index). Linear dynamics only.
TailCompletion tail_completion(const ControlProblem& problem, const Vector& x_near, const Vector& anchor);

struct CertifyConfig {
  int horizon = 0;      // 0 selects 30, or 50 when n >= 8
  int max_steps = 200;  // greedy steps allowed before the tail must fit the box
  SolverConfig solver;
};

/// Throws InvalidArgument unless anchor is a zero-cost equilibrium under u = 0.
void check_anchor(const ControlProblem& problem, const Vector& anchor);

/// Greedy rollout, then an exact tail to the anchor. Throws AnchorUnreachable
/// when no tail fits the input constraints within cfg.max_steps.
SuboptimalityCertificate certify_m1(const ControlProblem& problem, const ValueApprox& V, const Vector& x,
                                    const Vector& anchor, const CertifyConfig& cfg = {});

/// Certificate along given waypoints ending at the anchor, with the Bellman
/// error measured at every waypoint and the detour cost on every transition.
SuboptimalityCertificate certify_m2(const ControlProblem& problem, const ValueApprox& V,
                                    const std::vector<Vector>& waypoints, const Vector& anchor,
                                    const CertifyConfig& cfg = {});

}  // namespace dualdp
