#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dualdp/bench.hpp"
#include "dualdp/onestage.hpp"
#include "support.hpp"

using namespace dualdp;
using namespace dualdp::testing;

TEST(QuadraticForm, SymmetrizesAndEvaluates) {
  Matrix H(2, 2);
  H << 2.0, 1.0, 3.0, 4.0;
  const QuadraticForm q(H, vec({1.0, -1.0}), 0.5);
  EXPECT_DOUBLE_EQ(q.hessian()(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(q.hessian()(1, 0), 2.0);
  const Vector z = vec({1.0, 2.0});
  // 1/2 (2 + 2*2*2 + 4*4) + (1 - 2) + 0.5
  EXPECT_DOUBLE_EQ(q(z), 0.5 * (2.0 + 8.0 + 16.0) - 1.0 + 0.5);
  EXPECT_TRUE(q.gradient(z).isApprox(q.hessian() * z + vec({1.0, -1.0})));
}

TEST(Validate, ScalarLqrAcceptedAsConvex) {
  const auto report = validate_problem(*scalar_lqr());
  EXPECT_TRUE(report.accepted);
  EXPECT_EQ(report.summary(), "ACCEPT ConvexQuadratic");
}

TEST(Validate, SemidefiniteCurvatureWithStateDependentInputRejected) {
  ControlProblem p;
  p.n = 1;
  p.m = 1;
  p.dynamics = DynamicsModel::bilinear(scalar(0.5), vec({0.0}), scalar(0.0), {scalar(1.0)});
  CostTerm t;
  t.phi = quad(1.0, 0.0, 0.0);
  t.r = vec({0.0});
  t.R = scalar(0.0);
  p.cost = StageCost(1, {t});
  p.constraints = InputConstraintSet::box_bound(1, 1, 1.0);
  const auto report = validate_problem(p);
  EXPECT_FALSE(report.accepted);
  ASSERT_FALSE(report.violations.empty());
  EXPECT_NE(report.violations[0].find("positive definite input curvature"), std::string::npos);
}

TEST(Validate, BallAndBeamIsBruteForce) {
  const auto report = validate_problem(*ball_and_beam_problem());
  EXPECT_TRUE(report.accepted) << report.summary();
  EXPECT_EQ(report.problem_class, ProblemClass::NonlinearBruteForce);
}

TEST(Validate, UnownedEpigraphVariableRejected) {
  ControlProblem p = *scalar_lqr();
  CostTerm t = p.cost.term(0);
  p.cost = StageCost(2, {t});
  EXPECT_FALSE(validate_problem(p).accepted);
}

TEST(Validate, NegativeCostRejected) {
  ControlProblem p = *scalar_lqr();
  CostTerm t = p.cost.term(0);
  t.phi = quad(1.0, 0.0, -1.0);
  p.cost = StageCost(1, {t});
  EXPECT_FALSE(validate_problem(p).accepted);
}

TEST(Dynamics, ScalarLqr) {
  EXPECT_DOUBLE_EQ(eval_dynamics(*scalar_lqr(), vec({2.0}), vec({-0.5}))(0), 0.5);
}

TEST(Dynamics, BallAndBeamInputAtOrigin) {
  const auto p = ball_and_beam_problem();
  const Vector x = eval_dynamics(*p, Vector::Zero(4), vec({1.0}));
  EXPECT_TRUE(x.isApprox(vec({0.0, 0.0, 0.0, 0.2}), 1e-14)) << x.transpose();
  EXPECT_TRUE(p->dynamics.drift(Vector::Zero(4)).isZero(0.0));
}

TEST(Dynamics, BallAndBeamFreeStepFromStart) {
  const auto p = ball_and_beam_problem();
  const Vector x = eval_dynamics(*p, ball_and_beam_start(), vec({0.0}));
  const double rdot = -9.81 * std::sin(-0.1745) * 0.1;
  const double thetadot = -(0.1 * 9.81 * std::cos(-0.1745)) / (0.1 + 0.5) * 0.1;
  EXPECT_NEAR(x(0), 1.0, 1e-12);
  EXPECT_NEAR(x(1), rdot, 1e-12);
  EXPECT_NEAR(x(2), -0.1745, 1e-12);
  EXPECT_NEAR(x(3), thetadot, 1e-12);
  // hand-rounded reference values
  EXPECT_NEAR(x(1), 0.17034, 5e-5);
  EXPECT_NEAR(x(3), -0.16101, 5e-5);
}

TEST(Dynamics, BallAndBeamJacobianMatchesCentralDifferences) {
  const auto p = ball_and_beam_problem();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 0.7);
  for (int trial = 0; trial < 50; ++trial) {
    Vector x(4);
    for (int i = 0; i < 4; ++i) x(i) = nd(rng);
    const Matrix J = p->dynamics.drift_jacobian(x);
    const auto partials = p->dynamics.input_partials(x);
    for (int i = 0; i < 4; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x(i)));
      Vector xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const Vector fd = (p->dynamics.drift(xp) - p->dynamics.drift(xm)) / (2 * h);
      EXPECT_LE((fd - J.col(i)).norm(), 1e-6 * (1.0 + J.col(i).norm())) << "column " << i;
      const Matrix fdu = (p->dynamics.input_matrix(xp) - p->dynamics.input_matrix(xm)) / (2 * h);
      EXPECT_LE((fdu - partials[i]).norm(), 1e-6 * (1.0 + partials[i].norm()));
    }
  }
}

TEST(StageCost, ScalarLqr) {
  const auto p = scalar_lqr();
  EXPECT_DOUBLE_EQ(eval_stage_cost(*p, vec({2.0}), vec({0.0})), 2.0);
  EXPECT_DOUBLE_EQ(eval_stage_cost(*p, vec({2.0}), vec({-0.5})), 2.125);
}

TEST(StageCost, BallAndBeamAtStart) {
  const auto p = ball_and_beam_problem();
  EXPECT_NEAR(eval_stage_cost(*p, ball_and_beam_start(), vec({0.0})), 0.5 * (10.0 + 0.1745 * 0.1745), 1e-12);
}

TEST(StageCost, PerEpigraphMaximaAgreeWithBruteForce) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = dim(rng), m = dim(rng);
    const int K = 1 + trial % 5;
    const int J = K + trial % 3;
    std::vector<CostTerm> terms;
    for (int j = 0; j < J; ++j) {
      CostTerm t;
      t.owner = j < K ? j : static_cast<int>(rng() % K);
      Matrix A = Matrix::NullaryExpr(n, n, [&] { return nd(rng); });
      Vector q = Vector::NullaryExpr(n, [&] { return nd(rng); });
      t.phi = QuadraticForm(A * A.transpose(), q, nd(rng));
      t.r = Vector::NullaryExpr(m, [&] { return nd(rng); });
      Matrix B = Matrix::NullaryExpr(m, m, [&] { return nd(rng); });
      t.R = B * B.transpose();
      terms.push_back(t);
    }
    const StageCost cost(K, terms);
    const Vector x = Vector::NullaryExpr(n, [&] { return nd(rng); });
    const Vector u = Vector::NullaryExpr(m, [&] { return nd(rng); });
    double expected = 0.0;
    for (int k = 0; k < K; ++k) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& t : terms)
        if (t.owner == k) best = std::max(best, t.phi(x) + t.r.dot(u) + 0.5 * u.dot(t.R * u));
      expected += best;
    }
    EXPECT_NEAR(cost.evaluate(x, u), expected, 1e-12 * (1.0 + std::abs(expected)));
    EXPECT_NEAR(cost.epigraph_values(x, u).sum(), expected, 1e-12 * (1.0 + std::abs(expected)));
  }
}

TEST(ValueApprox, ZeroBoundOnly) {
  const ValueApprox V(1);
  const auto e = V.evaluate(vec({3.7}));
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.active_index, 0u);
}

TEST(ValueApprox, WorkedSequenceEvaluations) {
  ValueApprox V = with_half_square();
  auto e = V.evaluate(vec({2.0}));
  EXPECT_DOUBLE_EQ(e.value, 2.0);
  EXPECT_EQ(e.active_index, 1u);
  V.append(LowerBound::from_quadratic(quad(1.0, 0.25, -0.25)));
  e = V.evaluate(vec({2.0}));
  EXPECT_DOUBLE_EQ(e.value, 2.25);
  EXPECT_EQ(e.active_index, 2u);
}

TEST(ValueApprox, TiesResolveToSmallestIndex) {
  ValueApprox V(1);
  V.append(LowerBound::from_quadratic(quad(1.0, 0.0, 0.0)));
  V.append(LowerBound::from_quadratic(quad(1.0, 0.0, 0.0)));
  EXPECT_EQ(V.evaluate(vec({1.0})).active_index, 1u);
  EXPECT_EQ(V.evaluate(vec({0.0})).active_index, 0u);
}

TEST(ValueApprox, MonotoneAndNonnegativeUnderAppends) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, 2.0);
  ValueApprox V(2);
  std::vector<Vector> probes;
  for (int i = 0; i < 200; ++i) probes.push_back(Vector::NullaryExpr(2, [&] { return nd(rng); }));
  std::vector<double> previous(probes.size(), 0.0);
  for (int round = 0; round < 30; ++round) {
    Matrix A = Matrix::NullaryExpr(2, 2, [&] { return nd(rng); });
    V.append(LowerBound::from_quadratic(
        QuadraticForm(A * A.transpose() - Matrix::Identity(2, 2), Vector::NullaryExpr(2, [&] { return nd(rng); }),
                      nd(rng))));
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const double v = V(probes[i]);
      EXPECT_GE(v, previous[i]);
      EXPECT_GE(v, 0.0);
      previous[i] = v;
    }
  }
}

TEST(ValueApprox, SnapshotUnaffectedByLaterAppends) {
  ValueApprox V = with_half_square();
  const ValueApprox snapshot = V;
  V.append(LowerBound::from_quadratic(quad(4.0, 0.0, 0.0)));
  EXPECT_EQ(snapshot.size(), 2u);
  EXPECT_DOUBLE_EQ(snapshot(vec({1.0})), 0.5);
  EXPECT_DOUBLE_EQ(V(vec({1.0})), 2.0);
}

TEST(LowerBound, CoefficientsMatchMaterializedOnConvexProblems) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    RandomSystemConfig cfg;
    cfg.n = 1 + trial % 3;
    Rng gen(100 + trial);
    const ProblemPtr p = generate_random_system(cfg, gen);
    ValueApprox V(p->n);
    for (int k = 0; k < 4; ++k) {
      const Vector x_hat = Vector::NullaryExpr(p->n, [&] { return 3.0 * nd(rng); });
      const auto solved = solve_onestage(*p, V, x_hat);
      ASSERT_TRUE(solved.optimal());
      V.append(build_lower_bound(p, x_hat, solved).bound);
    }
    for (std::size_t i = 1; i < V.size(); ++i) {
      ASSERT_TRUE(V[i].materialized().has_value());
      for (int probe = 0; probe < 100; ++probe) {
        const Vector x = Vector::NullaryExpr(p->n, [&] { return 5.0 * nd(rng); });
        const double a = V[i].evaluate(x), b = V[i].evaluate_coefficients(x);
        EXPECT_NEAR(a, b, 1e-9 * (1.0 + std::abs(a)));
      }
    }
  }
}

TEST(InputBox, DerivedFromUnitRows) {
  const auto box = input_box(*scalar_lqr(2.5));
  ASSERT_TRUE(box.has_value());
  EXPECT_DOUBLE_EQ(box->lower(0), -2.5);
  EXPECT_DOUBLE_EQ(box->upper(0), 2.5);
  EXPECT_FALSE(input_box(*scalar_lqr(std::nullopt)).has_value());
}
