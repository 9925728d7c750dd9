#include "dualdp/problem.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace dualdp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Validation: return "Validation";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::AnchorUnreachable: return "AnchorUnreachable";
    case ErrorKind::GenerationFailed: return "GenerationFailed";
    case ErrorKind::Exhausted: return "Exhausted";
  }
  return "Unknown";
}

namespace {

bool all_finite(const Matrix& M) { return M.allFinite(); }

double min_eigenvalue(const Matrix& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double psd_tolerance(const Matrix& S) {
  return 1e-10 * std::max(1.0, S.cwiseAbs().maxCoeff());
}

bool is_psd(const Matrix& S) { return min_eigenvalue(S) >= -psd_tolerance(S); }
bool is_pd(const Matrix& S) { return S.size() > 0 && min_eigenvalue(S) > psd_tolerance(S); }

}  // namespace

// ---------------------------------------------------------------------------
// QuadraticForm

QuadraticForm::QuadraticForm(Matrix hessian, Vector linear, double constant)
    : hessian_(std::move(hessian)), linear_(std::move(linear)), constant_(constant) {
  require(hessian_.rows() == hessian_.cols(), "quadratic form: Hessian must be square");
  require(hessian_.rows() == linear_.size(), "quadratic form: Hessian/linear size mismatch");
  require(all_finite(hessian_) && linear_.allFinite() && std::isfinite(constant_),
          "quadratic form: non-finite coefficients");
  hessian_ = 0.5 * (hessian_ + hessian_.transpose()).eval();
}

QuadraticForm QuadraticForm::zero(int dim) {
  return QuadraticForm(Matrix::Zero(dim, dim), Vector::Zero(dim), 0.0);
}

double QuadraticForm::operator()(const Vector& z) const {
  return 0.5 * z.dot(hessian_ * z) + linear_.dot(z) + constant_;
}

Vector QuadraticForm::gradient(const Vector& z) const { return hessian_ * z + linear_; }

// ---------------------------------------------------------------------------
// Stage cost

double CostTerm::evaluate(const Vector& x, const Vector& u) const {
  return phi(x) + input_part(u);
}

StageCost::StageCost(int num_epigraph, std::vector<CostTerm> terms)
    : num_epigraph_(num_epigraph), terms_(std::move(terms)) {
  for (auto& t : terms_) t.R = 0.5 * (t.R + t.R.transpose()).eval();
}

StageCost StageCost::quadratic(const Matrix& Q, const Matrix& R) {
  CostTerm t;
  t.owner = 0;
  t.phi = QuadraticForm(Q, Vector::Zero(Q.rows()), 0.0);
  t.r = Vector::Zero(R.rows());
  t.R = R;
  return StageCost(1, {t});
}

Vector StageCost::epigraph_values(const Vector& x, const Vector& u) const {
  Vector beta = Vector::Constant(num_epigraph_, -std::numeric_limits<double>::infinity());
  for (const auto& t : terms_) beta(t.owner) = std::max(beta(t.owner), t.evaluate(x, u));
  return beta;
}

double StageCost::evaluate(const Vector& x, const Vector& u) const {
  return epigraph_values(x, u).sum();
}

Vector StageCost::phi(const Vector& x) const {
  Vector out(num_terms());
  for (int j = 0; j < num_terms(); ++j) out(j) = terms_[j].phi(x);
  return out;
}

// ---------------------------------------------------------------------------
// Input constraints

InputConstraintSet InputConstraintSet::none(int n, int m) {
  return {Matrix::Zero(0, m), Vector::Zero(0), Matrix::Zero(0, n), std::nullopt};
}

InputConstraintSet InputConstraintSet::box_bound(int n, int m, double bound) {
  InputConstraintSet c;
  c.E.resize(2 * m, m);
  c.E << Matrix::Identity(m, m), -Matrix::Identity(m, m);
  c.h0 = Vector::Constant(2 * m, bound);
  c.H = Matrix::Zero(2 * m, n);
  c.box = InputBox{Vector::Constant(m, -bound), Vector::Constant(m, bound)};
  return c;
}

Vector InputConstraintSet::rhs(const Vector& x) const {
  if (rows() == 0) return Vector::Zero(0);
  return h0 + H * x;
}

bool InputConstraintSet::contains(const Vector& x, const Vector& u, double tol) const {
  if (rows() == 0) return true;
  return ((E * u - rhs(x)).array() <= tol).all();
}

// ---------------------------------------------------------------------------
// Dynamics

DynamicsModel DynamicsModel::linear(Matrix A, Vector a, Matrix B) {
  DynamicsModel d;
  d.n_ = static_cast<int>(A.rows());
  d.m_ = static_cast<int>(B.cols());
  require(A.cols() == d.n_ && a.size() == d.n_ && B.rows() == d.n_,
          "dynamics: inconsistent A/a/B dimensions");
  d.A_ = std::move(A);
  d.a_ = std::move(a);
  d.B0_ = std::move(B);
  return d;
}

DynamicsModel DynamicsModel::bilinear(Matrix A, Vector a, Matrix B0, std::vector<Matrix> Bx) {
  DynamicsModel d = linear(std::move(A), std::move(a), std::move(B0));
  require(static_cast<int>(Bx.size()) == d.n_, "dynamics: need one input-matrix slope per state");
  for (const auto& M : Bx)
    require(M.rows() == d.n_ && M.cols() == d.m_, "dynamics: input-matrix slope has wrong shape");
  d.constant_input_ = false;
  d.Bx_ = std::move(Bx);
  return d;
}

DynamicsModel DynamicsModel::nonlinear(int n, int m, VectorMap drift, MatrixMap drift_jacobian,
                                       MatrixMap input_matrix, PartialsMap input_partials) {
  DynamicsModel d;
  d.n_ = n;
  d.m_ = m;
  d.constant_input_ = false;
  d.affine_drift_ = false;
  d.drift_ = std::move(drift);
  d.drift_jacobian_ = std::move(drift_jacobian);
  d.input_matrix_ = std::move(input_matrix);
  d.input_partials_ = std::move(input_partials);
  return d;
}

Vector DynamicsModel::drift(const Vector& x) const {
  if (affine_drift_) return A_ * x + a_;
  return drift_(x);
}

Matrix DynamicsModel::drift_jacobian(const Vector& x) const {
  if (affine_drift_) return A_;
  return drift_jacobian_(x);
}

Matrix DynamicsModel::input_matrix(const Vector& x) const {
  if (input_matrix_) return input_matrix_(x);
  if (constant_input_) return B0_;
  Matrix F = B0_;
  for (int i = 0; i < n_; ++i) F += x(i) * Bx_[i];
  return F;
}

std::vector<Matrix> DynamicsModel::input_partials(const Vector& x) const {
  if (input_partials_) return input_partials_(x);
  if (constant_input_) return std::vector<Matrix>(n_, Matrix::Zero(n_, m_));
  return Bx_;
}

Vector DynamicsModel::operator()(const Vector& x, const Vector& u) const {
  return drift(x) + input_matrix(x) * u;
}

// ---------------------------------------------------------------------------
// Problem-level operations

std::string to_string(ProblemClass c) {
  return c == ProblemClass::ConvexQuadratic ? "ConvexQuadratic" : "NonlinearBruteForce";
}

std::string ValidationReport::summary() const {
  if (accepted) return "ACCEPT " + to_string(problem_class);
  std::ostringstream os;
  os << "REJECT:";
  for (std::size_t i = 0; i < violations.size(); ++i) os << (i ? "; " : " ") << violations[i];
  return os.str();
}

Vector eval_dynamics(const ControlProblem& problem, const Vector& x, const Vector& u) {
  require(x.size() == problem.n && u.size() == problem.m, "eval_dynamics: dimension mismatch");
  Vector out = problem.dynamics(x, u);
  if (!out.allFinite()) throw Error(ErrorKind::NumericalFailure, "dynamics produced a non-finite state");
  return out;
}

double eval_stage_cost(const ControlProblem& problem, const Vector& x, const Vector& u) {
  require(x.size() == problem.n && u.size() == problem.m, "eval_stage_cost: dimension mismatch");
  return problem.cost.evaluate(x, u);
}

std::optional<InputBox> input_box(const ControlProblem& problem) {
  const auto& c = problem.constraints;
  if (c.box) return c.box;
  const double inf = std::numeric_limits<double>::infinity();
  InputBox box{Vector::Constant(problem.m, -inf), Vector::Constant(problem.m, inf)};
  for (int row = 0; row < c.rows(); ++row) {
    if (c.H.rows() == c.rows() && c.H.row(row).cwiseAbs().maxCoeff() > 0.0) continue;
    int nonzero = -1;
    int count = 0;
    for (int i = 0; i < problem.m; ++i) {
      if (c.E(row, i) != 0.0) {
        nonzero = i;
        ++count;
      }
    }
    if (count != 1) continue;
    const double s = c.E(row, nonzero);
    const double bound = c.h0(row) / s;
    if (s > 0) box.upper(nonzero) = std::min(box.upper(nonzero), bound);
    else box.lower(nonzero) = std::max(box.lower(nonzero), bound);
  }
  if (!box.lower.allFinite() || !box.upper.allFinite()) return std::nullopt;
  return box;
}

namespace {

void check_structure(const ControlProblem& p, std::vector<std::string>& v) {
  if (p.n < 1 || p.m < 1) {
    v.push_back("state and input dimensions must be positive");
    return;
  }
  if (!(p.gamma > 0.0 && p.gamma <= 1.0)) v.push_back("discount factor must lie in (0, 1]");
  if (p.dynamics.n() != p.n || p.dynamics.m() != p.m) v.push_back("dynamics dimensions do not match n, m");

  const auto& cost = p.cost;
  const int K = cost.num_epigraph();
  const int J = cost.num_terms();
  if (K < 1) v.push_back("stage cost needs at least one epigraph variable");
  if (J < K) v.push_back("stage cost needs at least as many rows as epigraph variables");
  std::vector<bool> owned(std::max(K, 0), false);
  for (int j = 0; j < J; ++j) {
    const auto& t = cost.term(j);
    const std::string tag = "cost row " + std::to_string(j + 1) + ": ";
    if (t.owner < 0 || t.owner >= K) {
      v.push_back(tag + "owner index out of range");
    } else {
      owned[t.owner] = true;
    }
    if (t.phi.dim() != p.n) v.push_back(tag + "state quadratic has wrong dimension");
    if (t.r.size() != p.m || t.R.rows() != p.m || t.R.cols() != p.m) {
      v.push_back(tag + "input terms have wrong dimension");
      continue;
    }
    if (!t.r.allFinite() || !t.R.allFinite()) v.push_back(tag + "non-finite input terms");
    else if (!is_psd(t.R)) v.push_back(tag + "input curvature R is not positive semidefinite");
  }
  for (int k = 0; k < K; ++k)
    if (!owned[k]) v.push_back("epigraph variable " + std::to_string(k + 1) + " owns no cost row");

  const auto& c = p.constraints;
  if (c.E.cols() != p.m && c.rows() > 0) v.push_back("constraint matrix E has wrong column count");
  if (c.h0.size() != c.rows()) v.push_back("constraint offset h0 has wrong length");
  if (c.rows() > 0 && (c.H.rows() != c.rows() || c.H.cols() != p.n))
    v.push_back("constraint slope H has wrong shape");
  if (!c.E.allFinite() || !c.h0.allFinite() || !c.H.allFinite())
    v.push_back("constraint data must be finite");

  bool all_pd = true;
  for (const auto& t : cost.terms())
    if (t.R.rows() == p.m && !is_pd(t.R)) all_pd = false;
  if (!all_pd && !p.dynamics.constant_input())
    v.push_back(
        "state-dependent input matrix requires positive definite input curvature on every cost row");
}

void check_nonnegative_cost(const ControlProblem& p, std::vector<std::string>& v) {
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> nx(0.0, 5.0);
  std::normal_distribution<double> nu(0.0, 2.0);
  Vector x(p.n), u(p.m);
  for (int s = 0; s < 500; ++s) {
    for (int i = 0; i < p.n; ++i) x(i) = s == 0 ? 0.0 : nx(rng);
    for (int i = 0; i < p.m; ++i) u(i) = s == 0 ? 0.0 : nu(rng);
    const double l = p.cost.evaluate(x, u);
    if (!std::isfinite(l) || l < -1e-9 * (1.0 + std::abs(l))) {
      v.push_back("stage cost is negative at a sampled point");
      return;
    }
  }
}

}  // namespace

std::optional<ProblemClass> eligible_class(const ControlProblem& p) {
  bool convex = p.dynamics.affine_drift() && p.dynamics.constant_input();
  for (const auto& t : p.cost.terms()) {
    if (!is_psd(t.phi.hessian())) convex = false;
  }
  if (convex) return ProblemClass::ConvexQuadratic;
  if (p.m <= 2 && input_box(p)) return ProblemClass::NonlinearBruteForce;
  return std::nullopt;
}

ValidationReport validate_problem(const ControlProblem& problem) {
  ValidationReport report;
  report.problem_class = problem.problem_class;
  check_structure(problem, report.violations);
  if (report.violations.empty()) check_nonnegative_cost(problem, report.violations);
  if (report.violations.empty()) {
    const auto best = eligible_class(problem);
    if (!best) {
      report.violations.push_back(
          "not eligible for any solver class (needs affine drift, constant input matrix and convex "
          "state costs, or at most two inputs with a bounded input box)");
    } else if (problem.problem_class == ProblemClass::ConvexQuadratic &&
               *best != ProblemClass::ConvexQuadratic) {
      report.violations.push_back("tagged ConvexQuadratic but dynamics or state costs are not convex quadratic");
    } else if (problem.problem_class == ProblemClass::NonlinearBruteForce &&
               !(problem.m <= 2 && input_box(problem))) {
      report.violations.push_back("brute-force class needs at most two inputs and a bounded input box");
    }
  }
  report.accepted = report.violations.empty();
  return report;
}

ControlProblem make_lqr(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                        double gamma, std::optional<double> input_bound) {
  ControlProblem p;
  p.n = static_cast<int>(A.rows());
  p.m = static_cast<int>(B.cols());
  p.gamma = gamma;
  p.dynamics = DynamicsModel::linear(A, Vector::Zero(p.n), B);
  p.cost = StageCost::quadratic(Q, R);
  p.constraints = input_bound ? InputConstraintSet::box_bound(p.n, p.m, *input_bound)
                              : InputConstraintSet::none(p.n, p.m);
  p.problem_class = ProblemClass::ConvexQuadratic;
  p.name = "lqr";
  return p;
}

}  // namespace dualdp
