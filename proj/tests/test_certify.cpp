#include <gtest/gtest.h>

#include <cmath>

#include "dualdp/bench.hpp"
#include "dualdp/certify.hpp"
#include "dualdp/oracles.hpp"
#include "support.hpp"

using namespace dualdp;
using namespace dualdp::testing;

namespace {

ValueApprox riccati_value(const ControlProblem& p, Matrix* gain = nullptr) {
  const auto dare = solve_dare(p.dynamics.A(), p.dynamics.B(), p.cost.term(0).phi.hessian(), p.cost.term(0).R,
                               p.gamma);
  if (gain) *gain = dare.K;
  ValueApprox V(p.n);
  V.append(LowerBound::from_quadratic(QuadraticForm(dare.P, Vector::Zero(p.n), 0.0)));
  return V;
}

double reaccumulate(const SuboptimalityCertificate& c, double gamma) {
  double sum = 0.0, discount = 1.0;
  for (const auto& s : c.steps) {
    sum += discount * (s.theta + s.eps);
    discount *= gamma;
  }
  return c.lower + sum;
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(Greedy, WorkedStep) {
  const auto a = greedy_action(*scalar_lqr(), with_half_square(), vec({2.0}));
  EXPECT_NEAR(a.u(0), -0.5, 1e-6);
  EXPECT_NEAR(a.x_plus(0), 0.5, 1e-6);
  EXPECT_NEAR(a.j_p, 2.25, 1e-6);
}

TEST(Greedy, MatchesRiccatiGain) {
  const auto p = make_lqr(Matrix::Identity(2, 2) * 0.9, Matrix::Ones(2, 1), Matrix::Identity(2, 2), scalar(1.0),
                          1.0, 10.0);
  Matrix K;
  const ValueApprox V = riccati_value(p, &K);
  for (const Vector& x : {vec({0.1, -0.2}), vec({0.3, 0.05}), vec({-0.02, 0.01})}) {
    const auto a = greedy_action(p, V, x);
    EXPECT_LE((a.u + K * x).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(Greedy, OriginStaysPut) {
  const auto a = greedy_action(*scalar_lqr(), with_half_square(), vec({0.0}));
  EXPECT_NEAR(a.u(0), 0.0, 1e-8);
}

TEST(Greedy, InfeasibleThrows) {
  ControlProblem p = *scalar_lqr();
  p.constraints.h0 = vec({-1.0, -1.0});
  EXPECT_EQ(kind_of([&] { greedy_action(p, ValueApprox(1), vec({1.0})); }), ErrorKind::Infeasible);
}

TEST(Detour, ZeroOnGreedySuccessor) {
  EXPECT_NEAR(detour_cost(*scalar_lqr(), with_half_square(), vec({2.0}), vec({0.5})), 0.0, 1e-6);
}

TEST(Detour, ForcedZeroInput) {
  EXPECT_NEAR(detour_cost(*scalar_lqr(), with_half_square(), vec({2.0}), vec({1.0})), 0.25, 1e-6);
}

TEST(Detour, OutOfBoxUnreachable) {
  EXPECT_EQ(kind_of([] { detour_cost(*scalar_lqr(), with_half_square(), vec({2.0}), vec({10.0})); }),
            ErrorKind::Unreachable);
}

TEST(Rollout, NearOptimalValueDecreasesMonotonically) {
  const auto p = scalar_lqr();
  const ValueApprox V = riccati_value(*p);
  const auto r = rollout_greedy(*p, V, vec({2.0}), 15);
  ASSERT_TRUE(r.trajectory.feasible);
  ASSERT_EQ(r.trajectory.states.size(), 16u);
  for (std::size_t t = 1; t < r.trajectory.states.size(); ++t)
    EXPECT_LT(std::abs(r.trajectory.states[t](0)), std::abs(r.trajectory.states[t - 1](0)));
  for (double e : r.eps) EXPECT_NEAR(e, 0.0, 1e-6);
}

TEST(Rollout, OriginStaysAtOrigin) {
  const auto r = rollout_greedy(*scalar_lqr(), with_half_square(), vec({0.0}), 5);
  for (const auto& x : r.trajectory.states) EXPECT_NEAR(x(0), 0.0, 1e-9);
  for (double e : r.eps) EXPECT_NEAR(e, 0.0, 1e-9);
}

TEST(Tail, ScalarOneStep) {
  const auto t = tail_completion(*scalar_lqr(), vec({0.3}), vec({0.0}));
  ASSERT_EQ(t.inputs.size(), 1u);
  EXPECT_NEAR(t.inputs[0](0), -0.15, 1e-12);
  EXPECT_FALSE(t.box_violated);
}

TEST(Tail, AtAnchorUsesZeroInputs) {
  const auto t = tail_completion(*scalar_lqr(), vec({0.0}), vec({0.0}));
  for (const auto& u : t.inputs) EXPECT_EQ(u.norm(), 0.0);
}

TEST(Tail, TwoStateReachesAnchorExactly) {
  Rng gen(12);
  RandomSystemConfig cfg;
  cfg.n = 2;
  const auto p = generate_random_system(cfg, gen);
  EXPECT_EQ(controllability_index(p->dynamics.A(), p->dynamics.B()), 2);
  Rng rng(13);
  for (const auto& x : sample_states(2, 10, 0.1, rng)) {
    const auto t = tail_completion(*p, x, Vector::Zero(2));
    ASSERT_EQ(t.inputs.size(), 2u);
    Vector cur = x;
    for (const auto& u : t.inputs) cur = eval_dynamics(*p, cur, u);
    EXPECT_LE(cur.norm(), 1e-10);
  }
}

TEST(Tail, BoxViolationFlagged) {
  EXPECT_TRUE(tail_completion(*scalar_lqr(), vec({4.0}), vec({0.0})).box_violated);
}

TEST(CertifyM1, ConvergedScalarValueGivesTightSandwich) {
  const auto p = scalar_lqr();
  GddpConfig cfg;
  cfg.picker = Picker::MaxBellmanError;
  cfg.check_every = 1;
  cfg.delta = 1e-5;
  const auto r = run_gddp(p, {vec({2.0}), vec({1.0}), vec({0.5}), vec({0.25}), vec({-2.0})}, cfg);
  ASSERT_TRUE(r.converged);
  const auto c = certify_m1(*p, r.V, vec({2.0}), vec({0.0}));
  EXPECT_LE(c.lower, c.upper);
  EXPECT_LE(c.upper - c.lower, 0.05 * c.lower);
}

TEST(CertifyM1, OriginIsExact) {
  const auto c = certify_m1(*scalar_lqr(), with_half_square(), vec({0.0}), vec({0.0}));
  EXPECT_EQ(c.lower, 0.0);
  EXPECT_EQ(c.upper, 0.0);
}

TEST(CertifyM1, RiccatiValueHasNegligibleGap) {
  Matrix A(2, 2);
  A << 0.8, 0.2, 0.0, 0.7;
  const auto p = make_lqr(A, (Matrix(2, 1) << 0.0, 1.0).finished(), Matrix::Identity(2, 2), scalar(1.0), 1.0, 1e3);
  const ValueApprox V = riccati_value(p);
  for (const Vector& x : {vec({1.0, -0.5}), vec({2.0, 3.0})}) {
    const auto c = certify_m1(p, V, x, Vector::Zero(2));
    EXPECT_LE(c.upper - c.lower, 1e-4 * (1.0 + c.lower));
    EXPECT_EQ(c.upper, reaccumulate(c, p.gamma));
  }
}

TEST(CertifyM1, RejectsCostlyAnchor) {
  EXPECT_EQ(kind_of([] { certify_m1(*scalar_lqr(), with_half_square(), vec({2.0}), vec({1.0})); }),
            ErrorKind::InvalidArgument);
}

TEST(CertifyM2, ThreeWaypointPath) {
  const auto p = scalar_lqr();
  const ValueApprox V = with_half_square();
  const auto c = certify_m2(*p, V, {vec({2.0}), vec({1.0}), vec({0.5}), vec({0.0})}, vec({0.0}));
  ASSERT_EQ(c.steps.size(), 3u);
  for (const auto& s : c.steps) {
    EXPECT_GE(s.theta, 0.0);
    EXPECT_GE(s.eps, 0.0);
  }
  EXPECT_NEAR(c.steps[0].theta, 0.25, 1e-6);
  EXPECT_TRUE(std::isfinite(c.upper));
  EXPECT_EQ(c.upper, reaccumulate(c, p->gamma));
  EXPECT_EQ(c.method, CertMethod::Mixed);
}

TEST(CertifyM2, GreedyWaypointsHaveZeroDetours) {
  const auto p = scalar_lqr();
  const ValueApprox V = riccati_value(*p);
  auto r = rollout_greedy(*p, V, vec({2.0}), 20);
  auto waypoints = r.trajectory.states;
  waypoints.push_back(vec({0.0}));
  const auto c = certify_m2(*p, V, waypoints, vec({0.0}));
  for (std::size_t i = 0; i + 1 < c.steps.size(); ++i) EXPECT_NEAR(c.steps[i].theta, 0.0, 1e-6);
}

TEST(CertifyM2, UnreachableJump) {
  EXPECT_EQ(kind_of([] {
              certify_m2(*scalar_lqr(), with_half_square(), {vec({2.0}), vec({10.0}), vec({0.0})}, vec({0.0}));
            }),
            ErrorKind::Unreachable);
}
