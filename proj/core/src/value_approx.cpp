#include "dualdp/value_approx.hpp"

#include <limits>

#include "linalg.hpp"

namespace dualdp {

StateFeatures StateFeatures::compute(const ControlProblem& problem, const Vector& x) {
  StateFeatures f;
  f.phi = problem.cost.phi(x);
  f.h = problem.constraints.rhs(x);
  f.drift = problem.dynamics.drift(x);
  f.input = problem.dynamics.input_matrix(x);
  return f;
}

double InputCurvatureTerm::evaluate(const Matrix& input_matrix, const Vector& nu) const {
  const Vector w = input_matrix.transpose() * nu + w0;
  return -0.5 * w.dot(curvature_pinv * w);
}

// ---------------------------------------------------------------------------

LowerBound LowerBound::zero(int n) { return from_quadratic(QuadraticForm::zero(n)); }

LowerBound LowerBound::from_quadratic(QuadraticForm q) {
  LowerBound b;
  b.anchor_ = Vector::Zero(q.dim());
  b.materialized_ = std::move(q);
  return b;
}

LowerBound LowerBound::from_multipliers(ProblemPtr problem, const Vector& anchor,
                                        double anchor_value, Vector lambda_beta, Vector lambda_c,
                                        Vector nu) {
  return assemble(std::move(problem), anchor, std::move(lambda_beta), std::move(lambda_c), std::move(nu),
                  anchor_value, 0.0);
}

LowerBound LowerBound::restore(ProblemPtr problem, const Vector& anchor, double offset, Vector lambda_beta,
                               Vector lambda_c, Vector nu) {
  return assemble(std::move(problem), anchor, std::move(lambda_beta), std::move(lambda_c), std::move(nu),
                  std::nullopt, offset);
}

LowerBound LowerBound::assemble(ProblemPtr problem, const Vector& anchor, Vector lambda_beta,
                                Vector lambda_c, Vector nu, std::optional<double> anchor_value,
                                double offset) {
  require(problem != nullptr, "lower bound: problem required");
  const ControlProblem& p = *problem;
  require(lambda_beta.size() == p.cost.num_terms() && lambda_c.size() == p.constraints.rows() &&
              nu.size() == p.n,
          "lower bound: multiplier dimensions do not match the problem");

  LowerBound b;
  b.problem_ = problem;
  b.anchor_ = anchor;
  b.lambda_beta_ = std::move(lambda_beta);
  b.lambda_c_ = std::move(lambda_c);
  b.nu_ = std::move(nu);

  const StateFeatures at = StateFeatures::compute(p, anchor);
  double base = b.lambda_beta_.dot(at.phi) - b.lambda_c_.dot(at.h) + b.nu_.dot(at.drift);

  if (!p.dynamics.constant_input()) {
    Matrix M = Matrix::Zero(p.m, p.m);
    Vector w0 = p.constraints.rows() > 0 ? Vector(p.constraints.E.transpose() * b.lambda_c_)
                                         : Vector(Vector::Zero(p.m));
    for (int j = 0; j < p.cost.num_terms(); ++j) {
      M += b.lambda_beta_(j) * p.cost.term(j).R;
      w0 += b.lambda_beta_(j) * p.cost.term(j).r;
    }
    InputCurvatureTerm term{detail::symmetric_pinv(M), std::move(w0)};
    base += term.evaluate(at.input, b.nu_);
    b.curvature_term_ = std::move(term);
  }
  b.offset_ = anchor_value ? *anchor_value - base : offset;

  if (p.dynamics.affine_drift() && p.dynamics.constant_input()) {
    Matrix hess = Matrix::Zero(p.n, p.n);
    Vector lin = p.dynamics.A().transpose() * b.nu_;
    double c = b.offset_ + b.nu_.dot(p.dynamics.a());
    for (int j = 0; j < p.cost.num_terms(); ++j) {
      const auto& phi = p.cost.term(j).phi;
      hess += b.lambda_beta_(j) * phi.hessian();
      lin += b.lambda_beta_(j) * phi.linear();
      c += b.lambda_beta_(j) * phi.constant();
    }
    if (p.constraints.rows() > 0) {
      lin -= p.constraints.H.transpose() * b.lambda_c_;
      c -= b.lambda_c_.dot(p.constraints.h0);
    }
    b.materialized_ = QuadraticForm(std::move(hess), std::move(lin), c);
  }
  return b;
}

double LowerBound::evaluate(const Vector& x) const {
  if (materialized_) return (*materialized_)(x);
  return evaluate_coefficients(x);
}

double LowerBound::evaluate(const Vector& x, const StateFeatures& f) const {
  if (materialized_) return (*materialized_)(x);
  double v = lambda_beta_.dot(f.phi) - lambda_c_.dot(f.h) + nu_.dot(f.drift) + offset_;
  if (curvature_term_) v += curvature_term_->evaluate(f.input, nu_);
  return v;
}

double LowerBound::evaluate_coefficients(const Vector& x) const {
  if (!problem_) return (*materialized_)(x);
  const StateFeatures f = StateFeatures::compute(*problem_, x);
  double v = lambda_beta_.dot(f.phi) - lambda_c_.dot(f.h) + nu_.dot(f.drift) + offset_;
  if (curvature_term_) v += curvature_term_->evaluate(f.input, nu_);
  return v;
}

Vector LowerBound::gradient(const Vector& x) const {
  if (materialized_) return materialized_->gradient(x);
  const ControlProblem& p = *problem_;
  Vector g = p.dynamics.drift_jacobian(x).transpose() * nu_;
  for (int j = 0; j < p.cost.num_terms(); ++j)
    g += lambda_beta_(j) * p.cost.term(j).phi.gradient(x);
  if (p.constraints.rows() > 0) g -= p.constraints.H.transpose() * lambda_c_;
  if (curvature_term_) {
    const Matrix F = p.dynamics.input_matrix(x);
    const Vector w = F.transpose() * nu_ + curvature_term_->w0;
    const Vector Mw = curvature_term_->curvature_pinv * w;
    const auto partials = p.dynamics.input_partials(x);
    for (int s = 0; s < p.n; ++s) g(s) -= (partials[s].transpose() * nu_).dot(Mw);
  }
  return g;
}

// ---------------------------------------------------------------------------

ValueApprox::ValueApprox(int n) : n_(n) {
  bounds_.push_back(std::make_shared<const LowerBound>(LowerBound::zero(n)));
}

std::size_t ValueApprox::append(LowerBound bound) {
  bound.set_id(next_id_++);
  bounds_.push_back(std::make_shared<const LowerBound>(std::move(bound)));
  return bounds_.size() - 1;
}

ValueApprox ValueApprox::from_bounds(int n, std::vector<std::shared_ptr<const LowerBound>> bounds) {
  require(!bounds.empty() && bounds.front()->id() == 0, "value approximation must start with g_0");
  ValueApprox v(n);
  v.bounds_ = std::move(bounds);
  for (const auto& b : v.bounds_) v.next_id_ = std::max(v.next_id_, b->id() + 1);
  return v;
}

ValueApprox::Evaluation ValueApprox::evaluate(const Vector& x) const {
  Evaluation best{-std::numeric_limits<double>::infinity(), 0};
  std::optional<StateFeatures> features;
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    const LowerBound& b = *bounds_[i];
    double v;
    if (b.materialized()) {
      v = (*b.materialized())(x);
    } else {
      if (!features) features = StateFeatures::compute(*b.problem(), x);
      v = b.evaluate(x, *features);
    }
    if (v > best.value) best = {v, i};
  }
  return best;
}

std::vector<double> ValueApprox::evaluate_all(const Vector& x) const {
  std::vector<double> out(bounds_.size());
  std::optional<StateFeatures> features;
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    const LowerBound& b = *bounds_[i];
    if (b.materialized()) {
      out[i] = (*b.materialized())(x);
    } else {
      if (!features) features = StateFeatures::compute(*b.problem(), x);
      out[i] = b.evaluate(x, *features);
    }
  }
  return out;
}

}  // namespace dualdp
