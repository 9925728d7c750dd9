#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dualdp/types.hpp"

namespace dualdp {

/// q(z) = 1/2 z'Hz + l'z + c. The Hessian is symmetrized on construction.
class QuadraticForm {
 public:
  QuadraticForm() = default;
  QuadraticForm(Matrix hessian, Vector linear, double constant);

  static QuadraticForm zero(int dim);

  int dim() const { return static_cast<int>(linear_.size()); }
  const Matrix& hessian() const { return hessian_; }
  const Vector& linear() const { return linear_; }
  double constant() const { return constant_; }

  double operator()(const Vector& z) const;
  Vector gradient(const Vector& z) const;

 private:
  Matrix hessian_;
  Vector linear_;
  double constant_ = 0.0;
};

/// One epigraph row: beta[owner] >= phi(x) + r'u + 1/2 u'Ru.
struct CostTerm {
  int owner = 0;  // zero-based epigraph index
  QuadraticForm phi;
  Vector r;
  Matrix R;

  double evaluate(const Vector& x, const Vector& u) const;
  double input_part(const Vector& u) const { return r.dot(u) + 0.5 * u.dot(R * u); }
};

/// Stage cost as a sum over K epigraph variables of the max over the rows
/// each variable owns.
class StageCost {
 public:
  StageCost() = default;
  StageCost(int num_epigraph, std::vector<CostTerm> terms);

  /// The classic 1/2 x'Qx + 1/2 u'Ru cost with a single row.
  static StageCost quadratic(const Matrix& Q, const Matrix& R);

  int num_epigraph() const { return num_epigraph_; }
  int num_terms() const { return static_cast<int>(terms_.size()); }
  const std::vector<CostTerm>& terms() const { return terms_; }
  const CostTerm& term(int j) const { return terms_[j]; }

  double evaluate(const Vector& x, const Vector& u) const;
  /// Per-epigraph-variable maxima; sums to evaluate(x, u).
  Vector epigraph_values(const Vector& x, const Vector& u) const;
  /// phi_j(x) stacked over all rows.
  Vector phi(const Vector& x) const;

 private:
  int num_epigraph_ = 0;
  std::vector<CostTerm> terms_;
};

struct InputBox {
  Vector lower;
  Vector upper;
};

/// E u <= h0 + H x.
struct InputConstraintSet {
  Matrix E;
  Vector h0;
  Matrix H;
  std::optional<InputBox> box;  // explicit box for grid-based solvers

  static InputConstraintSet none(int n, int m);
  static InputConstraintSet box_bound(int n, int m, double bound);

  int rows() const { return static_cast<int>(E.rows()); }
  Vector rhs(const Vector& x) const;
  bool contains(const Vector& x, const Vector& u, double tol = 1e-8) const;
};

/// f(x, u) = f_x(x) + F_u(x) u.
class DynamicsModel {
 public:
  using VectorMap = std::function<Vector(const Vector&)>;
  using MatrixMap = std::function<Matrix(const Vector&)>;
  using PartialsMap = std::function<std::vector<Matrix>(const Vector&)>;

  /// f(x, u) = A x + a + B u.
  static DynamicsModel linear(Matrix A, Vector a, Matrix B);
  /// f(x, u) = A x + a + (B0 + sum_i x_i Bx[i]) u.
  static DynamicsModel bilinear(Matrix A, Vector a, Matrix B0, std::vector<Matrix> Bx);
  /// General drift and input matrix, each with analytic derivatives.
  /// input_partials(x)[i] is dF_u/dx_i.
  static DynamicsModel nonlinear(int n, int m, VectorMap drift, MatrixMap drift_jacobian,
                                 MatrixMap input_matrix, PartialsMap input_partials);

  int n() const { return n_; }
  int m() const { return m_; }
  bool constant_input() const { return constant_input_; }
  bool affine_drift() const { return affine_drift_; }

  // Only meaningful when affine_drift() / constant_input() respectively.
  const Matrix& A() const { return A_; }
  const Vector& a() const { return a_; }
  const Matrix& B() const { return B0_; }
  const std::vector<Matrix>& Bx() const { return Bx_; }

  Vector drift(const Vector& x) const;
  Matrix drift_jacobian(const Vector& x) const;
  Matrix input_matrix(const Vector& x) const;
  std::vector<Matrix> input_partials(const Vector& x) const;
  Vector operator()(const Vector& x, const Vector& u) const;

 private:
  int n_ = 0;
  int m_ = 0;
  bool constant_input_ = true;
  bool affine_drift_ = true;
  Matrix A_;
  Vector a_;
  Matrix B0_;
  std::vector<Matrix> Bx_;
  VectorMap drift_;
  MatrixMap drift_jacobian_;
  MatrixMap input_matrix_;
  PartialsMap input_partials_;
};

enum class ProblemClass { ConvexQuadratic, NonlinearBruteForce };

std::string to_string(ProblemClass c);

struct ControlProblem {
  int n = 0;
  int m = 0;
  double gamma = 1.0;
  DynamicsModel dynamics;
  StageCost cost;
  InputConstraintSet constraints;
  ProblemClass problem_class = ProblemClass::ConvexQuadratic;
  std::string name;
};

using ProblemPtr = std::shared_ptr<const ControlProblem>;

struct ValidationReport {
  bool accepted = false;
  ProblemClass problem_class = ProblemClass::ConvexQuadratic;
  std::vector<std::string> violations;

  /// "ACCEPT <class>" or "REJECT: <first violation>; ...".
  std::string summary() const;
};

/// Checks structural well-formedness and class eligibility. The reported class
/// is the one stored on the problem if it is eligible.
ValidationReport validate_problem(const ControlProblem& problem);

/// Highest class the problem is eligible for, ignoring its stored tag.
std::optional<ProblemClass> eligible_class(const ControlProblem& problem);

Vector eval_dynamics(const ControlProblem& problem, const Vector& x, const Vector& u);
double eval_stage_cost(const ControlProblem& problem, const Vector& x, const Vector& u);

/// Explicit box if present, else one derived from +-unit rows of E with
/// state-independent right-hand sides.
std::optional<InputBox> input_box(const ControlProblem& problem);

/// Scalar or diagonal-Q LQR helper: f = A x + B u, cost 1/2 x'Qx + 1/2 u'Ru,
/// optional |u|_inf <= bound.
ControlProblem make_lqr(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                        double gamma, std::optional<double> input_bound);

}  // namespace dualdp
