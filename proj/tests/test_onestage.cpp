#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dualdp/bench.hpp"
#include "dualdp/oracles.hpp"
#include "support.hpp"

using namespace dualdp;
using namespace dualdp::testing;

namespace {

void expect_kkt_consistent(const ControlProblem& p, const ValueApprox& V, const Vector& x_hat,
                           const OneStageResult& r) {
  const double jp = r.primal.cost;
  EXPECT_NEAR(r.primal.beta.sum() + p.gamma * r.primal.alpha, jp, 1e-12 * (1.0 + std::abs(jp)));
  const double direct = eval_stage_cost(p, x_hat, r.primal.u) + p.gamma * V(eval_dynamics(p, x_hat, r.primal.u));
  EXPECT_NEAR(direct, jp, 1e-6 * (1.0 + std::abs(jp)));
  EXPECT_LE(r.dual.objective, jp + 1e-6 * (1.0 + std::abs(jp)));
  EXPECT_NEAR(r.dual.lambda_alpha.sum(), p.gamma, 1e-8);
}

ControlProblem zero_input_curvature() {
  ControlProblem p = make_lqr(scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.0), 1.0, 1.0);
  return p;
}

}  // namespace

TEST(OneStageConvex, FirstStepFromTwo) {
  const auto p = scalar_lqr();
  const ValueApprox V(1);
  const auto r = solve_onestage_convex(*p, V, vec({2.0}));
  ASSERT_TRUE(r.optimal());
  EXPECT_NEAR(r.primal.cost, 2.0, 1e-6);
  EXPECT_NEAR(r.primal.u(0), 0.0, 1e-6);
  EXPECT_NEAR(r.primal.x_plus(0), 1.0, 1e-6);
  EXPECT_NEAR(r.dual.nu(0), 0.0, 1e-6);
  EXPECT_NEAR(r.dual.lambda_alpha(0), 1.0, 1e-6);
  EXPECT_NEAR(r.dual.lambda_beta(0), 1.0, 1e-6);
  EXPECT_NEAR(r.dual.lambda_c.cwiseAbs().maxCoeff(), 0.0, 1e-6);
  EXPECT_LE(r.relative_gap(), 1e-7);
  expect_kkt_consistent(*p, V, vec({2.0}), r);
}

TEST(OneStageConvex, SecondStepFromTwo) {
  const auto p = scalar_lqr();
  const ValueApprox V = with_half_square();
  const auto r = solve_onestage_convex(*p, V, vec({2.0}));
  ASSERT_TRUE(r.optimal());
  EXPECT_NEAR(r.primal.cost, 2.25, 1e-6);
  EXPECT_NEAR(r.primal.u(0), -0.5, 1e-6);
  EXPECT_NEAR(r.primal.x_plus(0), 0.5, 1e-6);
  EXPECT_NEAR(r.dual.nu(0), 0.5, 1e-6);
  EXPECT_NEAR(r.dual.lambda_alpha(0), 0.0, 1e-6);
  EXPECT_NEAR(r.dual.lambda_alpha(1), 1.0, 1e-6);
  expect_kkt_consistent(*p, V, vec({2.0}), r);
}

TEST(OneStageConvex, OriginIsTrivial) {
  const auto p = scalar_lqr();
  const ValueApprox V(1);
  const auto r = solve_onestage_convex(*p, V, vec({0.0}));
  ASSERT_TRUE(r.optimal());
  EXPECT_NEAR(r.primal.cost, 0.0, 1e-8);
  EXPECT_NEAR(r.primal.u(0), 0.0, 1e-6);
  EXPECT_NEAR(r.dual.nu(0), 0.0, 1e-6);
  EXPECT_NEAR(r.dual.lambda_beta(0), 1.0, 1e-6);
  EXPECT_NEAR(r.dual.lambda_alpha(0), 1.0, 1e-6);
}

TEST(OneStageConvex, InfeasibleWhenConstraintsEmpty) {
  ControlProblem p = *scalar_lqr();
  // u <= -1 and -u <= -1
  p.constraints.h0 = vec({-1.0, -1.0});
  const auto r = solve_onestage_convex(p, ValueApprox(1), vec({1.0}));
  EXPECT_EQ(r.primal.status, SolveStatus::Infeasible);
}

TEST(OneStageConvex, DiscountScalesSuccessorMultipliers) {
  const auto p = scalar_lqr(1.0, 0.5, 0.9);
  const ValueApprox V = with_half_square();
  const auto r = solve_onestage_convex(*p, V, vec({2.0}));
  ASSERT_TRUE(r.optimal());
  // minimize 2 + u^2/2 + 0.45 (1 + u)^2
  const double u = -0.9 / 1.9;
  EXPECT_NEAR(r.primal.u(0), u, 1e-6);
  EXPECT_NEAR(r.primal.cost, 2.0 + 0.5 * u * u + 0.45 * (1 + u) * (1 + u), 1e-6);
  EXPECT_NEAR(r.dual.nu(0), 0.9 * (1 + u), 1e-6);
  expect_kkt_consistent(*p, V, vec({2.0}), r);
}

TEST(Zeta2, ScalarExamples) {
  const auto p = scalar_lqr();
  const Vector none = Vector::Zero(2);
  EXPECT_NEAR(zeta2(*p, vec({2.0}), vec({0.5}), none, vec({1.0})), -0.125, 1e-12);
  EXPECT_EQ(zeta2(*p, vec({2.0}), vec({0.0}), none, vec({0.0})), 0.0);
}

TEST(Zeta2, RangeViolationIsMinusInfinity) {
  const ControlProblem p = zero_input_curvature();
  const double z = zeta2(p, vec({1.0}), vec({0.5}), Vector::Zero(2), vec({1.0}));
  EXPECT_EQ(z, -std::numeric_limits<double>::infinity());
}

TEST(BuildLowerBound, WorkedBounds) {
  const auto p = scalar_lqr();
  ValueApprox V(1);
  const auto r1 = solve_onestage(*p, V, vec({2.0}));
  const auto b1 = build_lower_bound(p, vec({2.0}), r1);
  EXPECT_TRUE(b1.strong_duality);
  ASSERT_TRUE(b1.bound.materialized().has_value());
  const auto& g1 = *b1.bound.materialized();
  EXPECT_NEAR(g1.hessian()(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(g1.linear()(0), 0.0, 1e-6);
  EXPECT_NEAR(g1.constant(), 0.0, 1e-6);
  V.append(b1.bound);

  const auto r2 = solve_onestage(*p, V, vec({2.0}));
  const auto b2 = build_lower_bound(p, vec({2.0}), r2);
  const auto& g2 = *b2.bound.materialized();
  EXPECT_NEAR(g2.hessian()(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(g2.linear()(0), 0.25, 1e-6);
  EXPECT_NEAR(g2.constant(), -0.25, 1e-6);
  EXPECT_NEAR(b2.bound.evaluate(vec({2.0})), 2.25, 1e-6);
}

TEST(BuildLowerBound, OriginGivesStageCost) {
  const auto p = make_lqr(Matrix::Identity(2, 2) * 0.5, Matrix::Identity(2, 1), Matrix::Identity(2, 2) * 3.0,
                          scalar(1.0), 1.0, 1.0);
  const auto pp = std::make_shared<const ControlProblem>(p);
  const auto r = solve_onestage(p, ValueApprox(2), Vector::Zero(2));
  const auto b = build_lower_bound(pp, Vector::Zero(2), r);
  const auto& g = *b.bound.materialized();
  EXPECT_TRUE(g.hessian().isApprox(p.cost.term(0).phi.hessian(), 1e-6));
  EXPECT_LE(g.linear().norm(), 1e-6);
  EXPECT_NEAR(g.constant(), 0.0, 1e-6);
}

TEST(BuildLowerBound, HessianIsWeightedCostCurvature) {
  Rng gen(3);
  RandomSystemConfig cfg;
  cfg.n = 3;
  const ProblemPtr p = generate_random_system(cfg, gen);
  ValueApprox V(3);
  Rng rng(4);
  for (const auto& x : sample_states(3, 6, 3.0, rng)) {
    const auto r = solve_onestage(*p, V, x);
    const auto b = build_lower_bound(p, x, r);
    const auto& g = *b.bound.materialized();
    EXPECT_TRUE(g.hessian().isApprox(r.dual.lambda_beta(0) * p->cost.term(0).phi.hessian(), 1e-9));
    EXPECT_NEAR(b.bound.evaluate(x), r.primal.cost, 1e-6 * (1.0 + r.primal.cost));
    V.append(b.bound);
  }
}

TEST(OneStageBruteForce, BallAndBeamOrigin) {
  const auto p = ball_and_beam_problem();
  const auto r = solve_onestage_bruteforce(*p, ValueApprox(4), Vector::Zero(4));
  ASSERT_TRUE(r.optimal());
  EXPECT_NEAR(r.primal.u(0), 0.0, 1e-9);
  EXPECT_NEAR(r.primal.cost, 0.0, 1e-12);
}

TEST(OneStageBruteForce, MatchesConvexOnScalarLqr) {
  const auto p = scalar_lqr();
  const auto bf = as_bruteforce(p);
  const ValueApprox V = with_half_square();
  const auto a = solve_onestage_convex(*p, V, vec({2.0}));
  const auto b = solve_onestage_bruteforce(*bf, V, vec({2.0}));
  ASSERT_TRUE(b.optimal());
  EXPECT_NEAR(b.primal.cost, a.primal.cost, 1e-3);
  EXPECT_NEAR(b.primal.u(0), -0.5, 1e-3);
  EXPECT_NEAR(b.dual.nu(0), 0.5, 1e-2);
  EXPECT_NEAR(b.dual.lambda_alpha(1), 1.0, 1e-6);
  EXPECT_NEAR(b.dual.lambda_c.cwiseAbs().maxCoeff(), 0.0, 1e-6);
}

TEST(OneStageBruteForce, BoxBindsAtUpperLimit) {
  const auto bf = as_bruteforce(scalar_lqr());
  const ValueApprox V = with_half_square();
  const auto r = solve_onestage_bruteforce(*bf, V, vec({-10.0}));
  ASSERT_TRUE(r.optimal());
  EXPECT_NEAR(r.primal.u(0), 1.0, 1e-9);
  EXPECT_GT(r.dual.lambda_c.maxCoeff(), 0.0);
  // stationarity: u + (x+ ) + lambda_c = 0 with x+ = -4 -> lambda_c = 3
  EXPECT_NEAR(r.dual.lambda_c(0), 3.0, 1e-6);

  const auto c = solve_onestage_convex(*scalar_lqr(), V, vec({-10.0}));
  EXPECT_NEAR(c.primal.u(0), 1.0, 1e-6);
  EXPECT_NEAR(c.dual.lambda_c(0), 3.0, 1e-5);
}

TEST(RecoverDuals, WorkedSecondStep) {
  const auto bf = as_bruteforce(scalar_lqr());
  const ValueApprox V = with_half_square();
  OneStageSolution primal;
  primal.u = vec({-0.5});
  primal.x_plus = vec({0.5});
  primal.beta = vec({2.125});
  primal.alpha = 0.125;
  primal.cost = 2.25;
  primal.status = SolveStatus::Optimal;
  const auto d = recover_duals_kkt(*bf, V, vec({2.0}), primal);
  EXPECT_NEAR(d.nu(0), 0.5, 1e-12);
  EXPECT_NEAR(d.lambda_alpha(0), 0.0, 1e-12);
  EXPECT_NEAR(d.lambda_alpha(1), 1.0, 1e-12);
  EXPECT_NEAR(d.lambda_c.cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR(d.lambda_beta(0), 1.0, 1e-12);
}

TEST(RecoverDuals, OriginWithZeroBound) {
  const auto bf = as_bruteforce(scalar_lqr());
  OneStageSolution primal;
  primal.u = vec({0.0});
  primal.x_plus = vec({0.0});
  primal.beta = vec({0.0});
  primal.status = SolveStatus::Optimal;
  const auto d = recover_duals_kkt(*bf, ValueApprox(1), vec({0.0}), primal);
  EXPECT_EQ(d.nu(0), 0.0);
  EXPECT_EQ(d.lambda_c.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(d.lambda_beta(0), 1.0);
  EXPECT_DOUBLE_EQ(d.lambda_alpha(0), 1.0);
}

TEST(RecoverDuals, TiesSplitEvenly) {
  const auto bf = as_bruteforce(scalar_lqr(1.0, 0.5, 0.8));
  const ValueApprox V = with_half_square();
  OneStageSolution primal;
  primal.u = vec({0.0});
  primal.x_plus = vec({0.0});
  primal.beta = vec({0.0});
  primal.status = SolveStatus::Optimal;
  const auto d = recover_duals_kkt(*bf, V, vec({0.0}), primal);
  EXPECT_DOUBLE_EQ(d.lambda_alpha(0), 0.4);
  EXPECT_DOUBLE_EQ(d.lambda_alpha(1), 0.4);
}

TEST(OneStageProperties, CrossSolverOnRandomCases) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 15; ++trial) {
    const double a = 0.3 + 0.6 * (trial % 4) / 3.0;
    const auto p = scalar_lqr(1.0, a, 1.0);
    const auto bf = as_bruteforce(p);
    ValueApprox V(1);
    for (int k = 0; k < 3; ++k) V.append(LowerBound::from_quadratic(quad(1.0 + std::abs(nd(rng)), nd(rng), -std::abs(nd(rng)))));
    const Vector x = vec({4.0 * nd(rng)});
    const auto c = solve_onestage_convex(*p, V, x);
    const auto b = solve_onestage_bruteforce(*bf, V, x);
    ASSERT_TRUE(c.optimal() && b.optimal());
    EXPECT_NEAR(b.primal.cost, c.primal.cost, 1e-3);
    EXPECT_NEAR(b.dual.nu(0), c.dual.nu(0), 1e-2);
  }
}

TEST(OneStageProperties, BoundsStayBelowRiccatiValue) {
  for (int n : {1, 2}) {
    Rng gen(40 + n);
    RandomSystemConfig cfg;
    cfg.n = n;
    cfg.input_bound = 1e3;
    const ProblemPtr p = generate_random_system(cfg, gen);
    const auto dare = solve_dare(p->dynamics.A(), p->dynamics.B(), p->cost.term(0).phi.hessian(),
                                 p->cost.term(0).R, p->gamma);
    ValueApprox V(n);
    Rng rng(50 + n);
    const auto samples = sample_states(n, 5, 5.0, rng);
    for (int it = 0; it < 30; ++it) {
      const Vector& x = samples[it % samples.size()];
      const auto r = solve_onestage(*p, V, x);
      ASSERT_TRUE(r.optimal());
      V.append(build_lower_bound(p, x, r).bound);
    }
    const auto probes = sample_states(n, 1000, 5.0, rng);
    for (std::size_t i = 1; i < V.size(); ++i)
      for (const auto& x : probes) EXPECT_LE(V[i].evaluate(x), 0.5 * x.dot(dare.P * x) + 1e-6);
  }
}
