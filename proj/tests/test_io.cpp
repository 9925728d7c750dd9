#include <gtest/gtest.h>

#include "dualdp/bench.hpp"
#include "dualdp/io.hpp"
#include "support.hpp"

using namespace dualdp;
using namespace dualdp::testing;

TEST(ProblemJson, LoadsScalarFile) {
  const auto p = load_problem(DUALDP_TEST_DATA_DIR "/lqr1.json");
  EXPECT_EQ(p.n, 1);
  EXPECT_EQ(p.m, 1);
  EXPECT_EQ(p.name, "scalar-lqr");
  EXPECT_DOUBLE_EQ(eval_dynamics(p, vec({2.0}), vec({-0.5}))(0), 0.5);
  EXPECT_DOUBLE_EQ(eval_stage_cost(p, vec({2.0}), vec({-0.5})), 2.125);
  EXPECT_EQ(validate_problem(p).summary(), "ACCEPT ConvexQuadratic");
}

TEST(ProblemJson, RoundTrip) {
  Rng rng(5);
  RandomSystemConfig cfg;
  cfg.n = 3;
  cfg.m = 2;
  const auto p = generate_random_system(cfg, rng);
  const std::string text = problem_to_json(*p);
  const auto q = parse_problem(text);
  EXPECT_EQ(q.dynamics.A(), p->dynamics.A());
  EXPECT_EQ(q.dynamics.B(), p->dynamics.B());
  EXPECT_EQ(q.constraints.E, p->constraints.E);
  EXPECT_EQ(q.constraints.h0, p->constraints.h0);
  EXPECT_EQ(q.cost.num_terms(), p->cost.num_terms());
  EXPECT_EQ(problem_to_json(q), text);
}

TEST(ProblemJson, StateDependentInputMatrix) {
  const std::string text = R"({"n":1,"m":1,"gamma":1,
    "dynamics":{"form":"state_dependent","A":[[0.5]],"B":[[1.0]],"Bx":[[[0.25]]]},
    "cost":{"K":1,"terms":[{"owner":1,"Q":[[1.0]],"R":[[1.0]]}]}})";
  const auto p = parse_problem(text);
  EXPECT_FALSE(p.dynamics.constant_input());
  EXPECT_DOUBLE_EQ(eval_dynamics(p, vec({2.0}), vec({1.0}))(0), 1.0 + 1.5);
  EXPECT_EQ(validate_problem(p).problem_class, ProblemClass::ConvexQuadratic);
}

TEST(ProblemJson, BuiltinBallAndBeam) {
  const auto p = parse_problem(R"({"builtin":"ball-and-beam"})");
  EXPECT_EQ(p.n, 4);
  EXPECT_EQ(p.problem_class, ProblemClass::NonlinearBruteForce);
}

TEST(ProblemJson, MalformedReportsByteOffset) {
  try {
    load_problem(DUALDP_TEST_DATA_DIR "/malformed.json");
    FAIL() << "expected a parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos) << e.what();
  }
}

TEST(ProblemJson, MissingFieldIsUserError) {
  try {
    parse_problem(R"({"n":1,"m":1})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_user_error());
  }
}

TEST(ValueJson, RoundTripPreservesEvaluation) {
  const auto p = scalar_lqr();
  GddpConfig cfg;
  cfg.max_iterations = 6;
  cfg.check_every = 0;
  const auto r = run_gddp(p, {vec({2.0}), vec({-1.5}), vec({0.7})}, cfg);
  ValueApprox V = r.V;
  V.append(LowerBound::from_quadratic(quad(0.1, 0.2, -3.0)));
  const std::string text = value_approx_to_json(V);
  const auto back = value_approx_from_json(text, p);
  ASSERT_EQ(back.size(), V.size());
  for (double x = -5.0; x <= 5.0; x += 0.37) EXPECT_EQ(back(vec({x})), V(vec({x})));
  EXPECT_EQ(value_approx_to_json(back), text);
}

TEST(CertificateJson, HasDeclaredFields) {
  const auto c = certify_m1(*scalar_lqr(), with_half_square(), vec({2.0}), vec({0.0}));
  const std::string text = certificate_to_json(c);
  for (const char* key : {"\"query_state\"", "\"lower\"", "\"upper\"", "\"method\"", "\"steps\"", "\"theta\""})
    EXPECT_NE(text.find(key), std::string::npos) << key;
}
