#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "dualdp/problem.hpp"

namespace dualdp {

/// Quantities of a state shared by every bound of one problem, computed once
/// per evaluation point.
struct StateFeatures {
  Vector phi;     // phi_j(x), one per cost row
  Vector h;       // h(x)
  Vector drift;   // f_x(x)
  Matrix input;   // F_u(x)

  static StateFeatures compute(const ControlProblem& problem, const Vector& x);
};

/// Input-curvature term of a bound, -1/2 w(x)' M^+ w(x) with
/// w(x) = F_u(x)'nu + w0. Only kept for state-dependent input matrices; for a
/// constant input matrix it is the same at every x and folds into the offset.
struct InputCurvatureTerm {
  Matrix curvature_pinv;  // M^+
  Vector w0;              // E'lambda_c + Rbar'lambda_beta

  double evaluate(const Matrix& input_matrix, const Vector& nu) const;
};

/// One lower-bounding function
///   g(x) = lambda_beta'phi(x) - lambda_c'h(x) + nu'f_x(x) + offset + zeta2(x).
class LowerBound {
 public:
  /// The zero function g_0.
  static LowerBound zero(int n);
  /// A bound given directly as a quadratic (e.g. a known value function).
  static LowerBound from_quadratic(QuadraticForm q);
  /// Bound built from dual multipliers at `anchor`, normalized so that
  /// g(anchor) == anchor_value.
  static LowerBound from_multipliers(ProblemPtr problem, const Vector& anchor, double anchor_value,
                                     Vector lambda_beta, Vector lambda_c, Vector nu);
  /// Rebuilds a stored bound from its multipliers and offset.
  static LowerBound restore(ProblemPtr problem, const Vector& anchor, double offset, Vector lambda_beta,
                            Vector lambda_c, Vector nu);

  int id() const { return id_; }
  void set_id(int id) { id_ = id; }

  const Vector& anchor() const { return anchor_; }
  const Vector& lambda_beta() const { return lambda_beta_; }
  const Vector& lambda_c() const { return lambda_c_; }
  const Vector& nu() const { return nu_; }
  double offset() const { return offset_; }
  const std::optional<InputCurvatureTerm>& curvature_term() const { return curvature_term_; }
  const std::optional<QuadraticForm>& materialized() const { return materialized_; }
  bool has_coefficients() const { return problem_ != nullptr; }
  const ProblemPtr& problem() const { return problem_; }

  /// Fast path: materialized quadratic when available.
  double evaluate(const Vector& x) const;
  double evaluate(const Vector& x, const StateFeatures& features) const;
  /// Direct evaluation from multipliers.
  double evaluate_coefficients(const Vector& x) const;
  Vector gradient(const Vector& x) const;

 private:
  static LowerBound assemble(ProblemPtr problem, const Vector& anchor, Vector lambda_beta, Vector lambda_c,
                             Vector nu, std::optional<double> anchor_value, double offset);

  int id_ = 0;
  ProblemPtr problem_;
  Vector anchor_;
  Vector lambda_beta_;
  Vector lambda_c_;
  Vector nu_;
  double offset_ = 0.0;
  std::optional<InputCurvatureTerm> curvature_term_;
  std::optional<QuadraticForm> materialized_;
};

/// Pointwise maximum of lower bounds. Always holds g_0 at index 0 and only
/// grows by append; copies share the immutable bounds, so a copy is a cheap
/// snapshot that stays valid while the original keeps growing.
class ValueApprox {
 public:
  struct Evaluation {
    double value;
    std::size_t active_index;
  };

  explicit ValueApprox(int n);

  int dim() const { return n_; }
  std::size_t size() const { return bounds_.size(); }
  const LowerBound& operator[](std::size_t i) const { return *bounds_[i]; }
  std::shared_ptr<const LowerBound> share(std::size_t i) const { return bounds_[i]; }

  /// Number of bounds appended so far (the iteration counter I).
  int iteration() const { return static_cast<int>(bounds_.size()) - 1; }

  /// Assigns the next id and appends. Returns the new index.
  std::size_t append(LowerBound bound);
  /// Replaces the bound list (used by pruning); index 0 must remain g_0.
  static ValueApprox from_bounds(int n, std::vector<std::shared_ptr<const LowerBound>> bounds);

  /// max_i g_i(x); ties resolve to the smallest index.
  Evaluation evaluate(const Vector& x) const;
  double operator()(const Vector& x) const { return evaluate(x).value; }
  /// Every g_i(x) in index order.
  std::vector<double> evaluate_all(const Vector& x) const;

 private:
  int n_;
  std::vector<std::shared_ptr<const LowerBound>> bounds_;
  int next_id_ = 1;
};

}  // namespace dualdp
