#pragma once

#include <memory>
#include <optional>

#include "dualdp/problem.hpp"
#include "dualdp/value_approx.hpp"

namespace dualdp::testing {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// x+ = 0.5 x + u, cost 1/2 x^2 + 1/2 u^2, |u| <= bound.
inline ProblemPtr scalar_lqr(std::optional<double> bound = 1.0, double a = 0.5, double gamma = 1.0) {
  return std::make_shared<const ControlProblem>(
      make_lqr(scalar(a), scalar(1.0), scalar(1.0), scalar(1.0), gamma, bound));
}

inline ProblemPtr as_bruteforce(const ProblemPtr& p) {
  auto q = std::make_shared<ControlProblem>(*p);
  q->problem_class = ProblemClass::NonlinearBruteForce;
  if (!q->constraints.box) q->constraints.box = input_box(*q);
  return q;
}

/// V = {g0, 1/2 x^2}
inline ValueApprox with_half_square(int n = 1) {
  ValueApprox V(n);
  V.append(LowerBound::from_quadratic(QuadraticForm(Matrix::Identity(n, n), Vector::Zero(n), 0.0)));
  return V;
}

inline QuadraticForm quad(double h, double l, double c) { return QuadraticForm(scalar(h), vec({l}), c); }

}  // namespace dualdp::testing
