#include "dualdp/onestage.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/QR>
#include <boost/math/tools/minima.hpp>

#include "dualdp/qcqp.hpp"
#include "feasibility.hpp"
#include "linalg.hpp"

namespace dualdp {

namespace detail {

std::optional<Vector> feasible_point(const Matrix& E, const Vector& h, int m) {
  if (E.rows() == 0 || h.minCoeff() > 0.0) return Vector::Zero(m);
  const int rows = static_cast<int>(E.rows());
  QcqpProblem prob;
  prob.objective = Vector::Zero(m + 1);
  prob.objective(m) = 1.0;
  for (int r = 0; r < rows; ++r) {
    QuadConstraint c;
    c.gradient = Vector::Zero(m + 1);
    c.gradient.head(m) = E.row(r).transpose();
    c.gradient(m) = -1.0;
    c.offset = -h(r);
    prob.constraints.push_back(std::move(c));
  }
  QuadConstraint floor;
  floor.gradient = Vector::Zero(m + 1);
  floor.gradient(m) = -1.0;
  floor.offset = -1.0;
  prob.constraints.push_back(std::move(floor));

  Vector z0 = Vector::Zero(m + 1);
  z0(m) = (-h).maxCoeff() + 1.0;
  QcqpOptions opt;
  opt.tol = 1e-12;
  const QcqpResult res = solve_qcqp(prob, z0, opt);
  const Vector u = res.z.head(m);
  const double violation = (E * u - h).maxCoeff();
  if (violation > 1e-9 * (1.0 + h.lpNorm<Eigen::Infinity>())) return std::nullopt;
  return u;
}

}  // namespace detail

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

double OneStageResult::relative_gap() const {
  return (primal.cost - dual.objective) / (1.0 + std::abs(primal.cost));
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Lawson-Hanson non-negative least squares.
Vector nnls(const Matrix& A, const Vector& b) {
  const int n = static_cast<int>(A.cols());
  Vector x = Vector::Zero(n);
  std::vector<bool> passive(n, false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                     std::max(1.0, A.cwiseAbs().maxCoeff()) * std::max(A.rows(), A.cols());
  Vector w = A.transpose() * (b - A * x);
  for (int outer = 0; outer < 3 * n + 10; ++outer) {
    int t = -1;
    double best = tol;
    for (int j = 0; j < n; ++j)
      if (!passive[j] && w(j) > best) best = w(j), t = j;
    if (t < 0) break;
    passive[t] = true;
    for (int inner = 0; inner < 3 * n + 10; ++inner) {
      std::vector<int> idx;
      for (int j = 0; j < n; ++j)
        if (passive[j]) idx.push_back(j);
      Matrix Ap(A.rows(), idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(k) = A.col(idx[k]);
      const Vector sp = Ap.colPivHouseholderQr().solve(b);
      bool positive = true;
      for (std::size_t k = 0; k < idx.size(); ++k) positive &= sp(k) > tol;
      if (positive) {
        x.setZero();
        for (std::size_t k = 0; k < idx.size(); ++k) x(idx[k]) = sp(k);
        break;
      }
      double alpha = 1.0;
      for (std::size_t k = 0; k < idx.size(); ++k)
        if (sp(k) <= tol) alpha = std::min(alpha, x(idx[k]) / (x(idx[k]) - sp(k)));
      for (std::size_t k = 0; k < idx.size(); ++k) x(idx[k]) += alpha * (sp(k) - x(idx[k]));
      for (int j = 0; j < n; ++j)
        if (passive[j] && x(j) <= tol) passive[j] = false, x(j) = 0.0;
    }
    w = A.transpose() * (b - A * x);
  }
  return x;
}

/// beta, alpha and J_P at a given input.
OneStageSolution primal_at(const ControlProblem& p, const ValueApprox& value, const Vector& x_hat,
                           const Vector& u, SolveStatus status) {
  OneStageSolution sol;
  sol.u = u;
  sol.x_plus = p.dynamics(x_hat, u);
  sol.beta = p.cost.epigraph_values(x_hat, u);
  sol.alpha = value(sol.x_plus);
  sol.cost = sol.beta.sum() + p.gamma * sol.alpha;
  sol.status = status;
  return sol;
}

bool convex_successor_terms(const ValueApprox& value, const Vector& lambda_alpha) {
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (lambda_alpha(i) <= 0.0) continue;
    const auto& q = value[i].materialized();
    if (!q) return false;
  }
  return true;
}

/// Fills nu, J_D and the KKT residual from the other multipliers.
void complete_duals(const ControlProblem& p, const ValueApprox& value, const Vector& x_hat,
                    const OneStageSolution& primal, DualSolution& dual) {
  const auto& x_plus = primal.x_plus;
  const std::vector<double> g = value.evaluate_all(x_plus);

  dual.nu = Vector::Zero(p.n);
  double successor_mix = 0.0;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (dual.lambda_alpha(i) == 0.0) continue;
    dual.nu += dual.lambda_alpha(i) * value[i].gradient(x_plus);
    successor_mix += dual.lambda_alpha(i) * g[i];
  }

  const StateFeatures f = StateFeatures::compute(p, x_hat);
  const double z2 = zeta2(p, x_hat, dual.nu, dual.lambda_c, dual.lambda_beta);
  if (convex_successor_terms(value, dual.lambda_alpha)) {
    const double z1 = -dual.nu.dot(x_plus) + successor_mix;
    dual.objective = dual.lambda_beta.dot(f.phi) - dual.lambda_c.dot(f.h) + dual.nu.dot(f.drift) + z1 + z2;
    dual.objective_exact = true;
  } else {
    dual.objective = primal.cost;
    dual.objective_exact = false;
  }

  // Stationarity in u, primal feasibility and complementarity.
  Vector stat = f.input.transpose() * dual.nu;
  if (p.constraints.rows() > 0) stat += p.constraints.E.transpose() * dual.lambda_c;
  double comp = 0.0;
  for (int j = 0; j < p.cost.num_terms(); ++j) {
    const auto& t = p.cost.term(j);
    stat += dual.lambda_beta(j) * (t.r + t.R * primal.u);
    comp = std::max(comp, std::abs(dual.lambda_beta(j) * (primal.beta(t.owner) - t.evaluate(x_hat, primal.u))));
  }
  for (std::size_t i = 0; i < value.size(); ++i)
    comp = std::max(comp, std::abs(dual.lambda_alpha(i) * (primal.alpha - g[i])));
  double infeas = 0.0;
  if (p.constraints.rows() > 0) {
    const Vector slack = f.h - p.constraints.E * primal.u;
    infeas = std::max(0.0, -slack.minCoeff());
    comp = std::max(comp, dual.lambda_c.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  dual.kkt_residual = std::max({stat.lpNorm<Eigen::Infinity>(), comp, infeas});
}

void normalize_multipliers(const ControlProblem& p, DualSolution& dual) {
  Vector sums = Vector::Zero(p.cost.num_epigraph());
  for (int j = 0; j < p.cost.num_terms(); ++j) sums(p.cost.term(j).owner) += dual.lambda_beta(j);
  for (int j = 0; j < p.cost.num_terms(); ++j) {
    const int k = p.cost.term(j).owner;
    if (sums(k) > 0.0) dual.lambda_beta(j) /= sums(k);
  }
  const double total = dual.lambda_alpha.sum();
  if (total > 0.0) dual.lambda_alpha *= p.gamma / total;
  dual.lambda_c = dual.lambda_c.cwiseMax(0.0);
}

OneStageResult infeasible_result(const ControlProblem& p, const ValueApprox& value) {
  OneStageResult r;
  r.primal.status = SolveStatus::Infeasible;
  r.primal.u = Vector::Zero(p.m);
  r.primal.x_plus = Vector::Zero(p.n);
  r.primal.beta = Vector::Zero(p.cost.num_epigraph());
  r.primal.cost = kInf;
  r.dual.nu = Vector::Zero(p.n);
  r.dual.lambda_c = Vector::Zero(p.constraints.rows());
  r.dual.lambda_beta = Vector::Zero(p.cost.num_terms());
  r.dual.lambda_alpha = Vector::Zero(value.size());
  r.dual.objective = kInf;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

double zeta2(const ControlProblem& p, const Vector& x, const Vector& nu, const Vector& lambda_c,
             const Vector& lambda_beta) {
  Matrix M = Matrix::Zero(p.m, p.m);
  Vector w = p.dynamics.input_matrix(x).transpose() * nu;
  if (p.constraints.rows() > 0) w += p.constraints.E.transpose() * lambda_c;
  for (int j = 0; j < p.cost.num_terms(); ++j) {
    M += lambda_beta(j) * p.cost.term(j).R;
    w += lambda_beta(j) * p.cost.term(j).r;
  }
  if (w.squaredNorm() == 0.0) return 0.0;
  const Matrix Mp = detail::symmetric_pinv(M);
  if (detail::range_residual(M, Mp, w) > 1e-8) return -kInf;
  return -0.5 * w.dot(Mp * w);
}

OneStageResult solve_onestage_convex(const ControlProblem& p, const ValueApprox& value,
                                     const Vector& x_hat, const SolverConfig& cfg) {
  require(p.problem_class == ProblemClass::ConvexQuadratic,
          "convex one-stage solver needs a ConvexQuadratic problem");
  require(x_hat.size() == p.n, "one-stage: state has wrong dimension");
  for (std::size_t i = 0; i < value.size(); ++i)
    require(value[i].materialized().has_value(), "convex one-stage solver needs materialized bounds");

  const int m = p.m, K = p.cost.num_epigraph(), J = p.cost.num_terms();
  const int nc = p.constraints.rows();
  const int nb = static_cast<int>(value.size());
  const int d = m + K + 1;
  const Vector h = p.constraints.rhs(x_hat);
  const Matrix& B = p.dynamics.B();
  const Vector c0 = p.dynamics.drift(x_hat);

  const auto start = detail::feasible_point(p.constraints.E, h, m);
  if (!start) return infeasible_result(p, value);

  QcqpProblem prob;
  prob.quad_dims = m;
  prob.objective = Vector::Zero(d);
  prob.objective.segment(m, K).setOnes();
  prob.objective(d - 1) = p.gamma;
  prob.constraints.reserve(nc + J + nb);
  for (int r = 0; r < nc; ++r) {
    QuadConstraint c;
    c.gradient = Vector::Zero(d);
    c.gradient.head(m) = p.constraints.E.row(r).transpose();
    c.offset = -h(r);
    prob.constraints.push_back(std::move(c));
  }
  for (int j = 0; j < J; ++j) {
    const auto& t = p.cost.term(j);
    QuadConstraint c;
    if (t.R.cwiseAbs().maxCoeff() > 0.0) c.curvature = t.R;
    c.gradient = Vector::Zero(d);
    c.gradient.head(m) = t.r;
    c.gradient(m + t.owner) = -1.0;
    c.offset = t.phi(x_hat);
    prob.constraints.push_back(std::move(c));
  }
  for (int i = 0; i < nb; ++i) {
    const QuadraticForm& q = *value[i].materialized();
    QuadConstraint c;
    const Matrix curv = B.transpose() * q.hessian() * B;
    if (curv.cwiseAbs().maxCoeff() > 0.0) c.curvature = curv;
    c.gradient = Vector::Zero(d);
    c.gradient.head(m) = B.transpose() * q.gradient(c0);
    c.gradient(d - 1) = -1.0;
    c.offset = q(c0);
    prob.constraints.push_back(std::move(c));
  }

  Vector z0(d);
  z0.head(m) = *start;
  z0.segment(m, K) = p.cost.epigraph_values(x_hat, *start).array() + 1.0;
  z0(d - 1) = value(p.dynamics(x_hat, *start)) + 1.0;

  QcqpOptions opt;
  opt.tol = std::min(1e-11, 1e-3 * cfg.kkt_tol);
  opt.acceptable_tol = cfg.kkt_tol;
  opt.max_iters = cfg.max_iters;
  opt.verbose = cfg.verbose;
  const QcqpResult res = solve_qcqp(prob, z0, opt);

  OneStageResult out;
  out.primal = primal_at(p, value, x_hat, res.z.head(m),
                         res.converged ? SolveStatus::Optimal : SolveStatus::NumericalFailure);
  out.primal.iterations = res.iterations;
  out.dual.lambda_c = res.multipliers.segment(0, nc);
  out.dual.lambda_beta = res.multipliers.segment(nc, J);
  out.dual.lambda_alpha = res.multipliers.segment(nc + J, nb);
  normalize_multipliers(p, out.dual);
  complete_duals(p, value, x_hat, out.primal, out.dual);
  if (out.primal.status == SolveStatus::Optimal &&
      out.dual.kkt_residual > 10.0 * cfg.kkt_tol * (1.0 + std::abs(out.primal.cost)))
    out.primal.status = SolveStatus::NumericalFailure;
  return out;
}

// ---------------------------------------------------------------------------

DualSolution recover_duals_kkt(const ControlProblem& p, const ValueApprox& value, const Vector& x_hat,
                               const OneStageSolution& primal) {
  const int m = p.m, J = p.cost.num_terms(), nc = p.constraints.rows();
  const int nb = static_cast<int>(value.size());
  const Vector& u = primal.u;
  const Vector& xp = primal.x_plus;
  const Matrix F = p.dynamics.input_matrix(x_hat);
  const Vector h = p.constraints.rhs(x_hat);

  const std::vector<double> g = value.evaluate_all(xp);
  const double vmax = *std::max_element(g.begin(), g.end());
  std::vector<int> act_alpha, act_beta, act_c;
  for (int i = 0; i < nb; ++i)
    if (g[i] >= vmax - 1e-6 * (1.0 + std::abs(vmax))) act_alpha.push_back(i);
  for (int j = 0; j < J; ++j) {
    const auto& t = p.cost.term(j);
    const double b = primal.beta(t.owner);
    if (t.evaluate(x_hat, u) >= b - 1e-7 * (1.0 + std::abs(b))) act_beta.push_back(j);
  }
  for (int r = 0; r < nc; ++r)
    if (p.constraints.E.row(r).dot(u) - h(r) >= -1e-7 * (1.0 + std::abs(h(r)))) act_c.push_back(r);

  const int na = static_cast<int>(act_alpha.size());
  const int nbeta = static_cast<int>(act_beta.size());
  const int ncc = static_cast<int>(act_c.size());
  const int nv = na + nbeta + ncc;
  const int K = p.cost.num_epigraph();

  Matrix G(m, nv);
  for (int a = 0; a < na; ++a) G.col(a) = F.transpose() * value[act_alpha[a]].gradient(xp);
  for (int b = 0; b < nbeta; ++b) {
    const auto& t = p.cost.term(act_beta[b]);
    G.col(na + b) = t.r + t.R * u;
  }
  for (int c = 0; c < ncc; ++c) G.col(na + nbeta + c) = p.constraints.E.row(act_c[c]).transpose();

  // Simplex rows: one for lambda_alpha, one per epigraph variable.
  Matrix Eq = Matrix::Zero(1 + K, nv);
  Vector eq_rhs(1 + K);
  eq_rhs(0) = p.gamma;
  eq_rhs.tail(K).setOnes();
  Eq.row(0).head(na).setOnes();
  Vector target = Vector::Zero(nv);
  for (int a = 0; a < na; ++a) target(a) = p.gamma / na;
  std::vector<int> per_k(K, 0);
  for (int b = 0; b < nbeta; ++b) ++per_k[p.cost.term(act_beta[b]).owner];
  for (int b = 0; b < nbeta; ++b) {
    const int k = p.cost.term(act_beta[b]).owner;
    Eq(1 + k, na + b) = 1.0;
    target(na + b) = 1.0 / per_k[k];
  }

  const double scale = std::max(1.0, G.size() ? G.cwiseAbs().maxCoeff() : 1.0);
  const double w = 1e6 * scale;
  const double reg = 1e-6 * scale;
  Matrix A(m + 1 + K + nv, nv);
  Vector rhs(m + 1 + K + nv);
  A << G, w * Eq, reg * Matrix::Identity(nv, nv);
  rhs << Vector::Zero(m), w * eq_rhs, reg * target;
  Vector lam = nv > 0 ? nnls(A, rhs) : Vector();

  // NNLS settles on one column of a group of identical ones; spread the mass
  // evenly, which leaves stationarity and nu unchanged.
  auto split_ties = [&](int offset, int count, const std::function<Vector(int)>& column,
                        const std::function<int(int)>& group_key) {
    std::vector<bool> done(count, false);
    for (int a = 0; a < count; ++a) {
      if (done[a]) continue;
      const Vector ca = column(a);
      std::vector<int> members{a};
      for (int b = a + 1; b < count; ++b)
        if (!done[b] && group_key(b) == group_key(a) &&
            (column(b) - ca).lpNorm<Eigen::Infinity>() <= 1e-7 * (1.0 + ca.lpNorm<Eigen::Infinity>()))
          members.push_back(b);
      double mass = 0.0;
      for (int b : members) mass += lam(offset + b), done[b] = true;
      for (int b : members) lam(offset + b) = mass / static_cast<double>(members.size());
    }
  };
  if (nv > 0) {
    split_ties(0, na, [&](int a) { return value[act_alpha[a]].gradient(xp); }, [](int) { return 0; });
    split_ties(na, nbeta, [&](int b) -> Vector { return G.col(na + b); },
               [&](int b) { return p.cost.term(act_beta[b]).owner; });
  }

  DualSolution dual;
  dual.lambda_alpha = Vector::Zero(nb);
  dual.lambda_beta = Vector::Zero(J);
  dual.lambda_c = Vector::Zero(nc);
  for (int a = 0; a < na; ++a) dual.lambda_alpha(act_alpha[a]) = lam(a);
  for (int b = 0; b < nbeta; ++b) dual.lambda_beta(act_beta[b]) = lam(na + b);
  for (int c = 0; c < ncc; ++c) dual.lambda_c(act_c[c]) = lam(na + nbeta + c);
  normalize_multipliers(p, dual);

  Matrix stacked(m + 1 + K, nv);
  stacked << G, Eq;
  dual.degenerate_active_set = nv > 0 && stacked.colPivHouseholderQr().rank() < nv;
  complete_duals(p, value, x_hat, primal, dual);
  return dual;
}

namespace {

struct Feasible1D {
  double lo, hi;
};

Feasible1D feasible_interval(const ControlProblem& p, const InputBox& box, const Vector& h) {
  Feasible1D iv{box.lower(0), box.upper(0)};
  for (int r = 0; r < p.constraints.rows(); ++r) {
    const double e = p.constraints.E(r, 0);
    if (e > 0) iv.hi = std::min(iv.hi, h(r) / e);
    else if (e < 0) iv.lo = std::max(iv.lo, h(r) / e);
  }
  return iv;
}

}  // namespace

OneStageResult solve_onestage_bruteforce(const ControlProblem& p, const ValueApprox& value,
                                         const Vector& x_hat, const SolverConfig& cfg) {
  require(p.m <= 2, "brute-force one-stage solver supports at most two inputs");
  require(x_hat.size() == p.n, "one-stage: state has wrong dimension");
  const auto box = input_box(p);
  require(box.has_value(), "brute-force one-stage solver needs a bounded input box");

  const int m = p.m;
  const Vector h = p.constraints.rhs(x_hat);
  const Vector c0 = p.dynamics.drift(x_hat);
  const Matrix F = p.dynamics.input_matrix(x_hat);
  const double feas_tol = 1e-12 * (1.0 + (h.size() ? h.lpNorm<Eigen::Infinity>() : 0.0));

  auto feasible = [&](const Vector& u) {
    if ((u.array() < box->lower.array() - 1e-15).any() || (u.array() > box->upper.array() + 1e-15).any())
      return false;
    return p.constraints.rows() == 0 || (p.constraints.E * u - h).maxCoeff() <= feas_tol;
  };
  auto objective = [&](const Vector& u) {
    return p.cost.evaluate(x_hat, u) + p.gamma * value(c0 + F * u);
  };

  const int pts = cfg.bruteforce_grid > 0 ? cfg.bruteforce_grid : (m == 1 ? 2001 : 101);
  Vector spacing = (box->upper - box->lower) / std::max(pts - 1, 1);
  Vector best_u;
  double best = kInf;
  Vector u(m);
  const long total = m == 1 ? pts : static_cast<long>(pts) * pts;
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int i = 0; i < m; ++i) {
      const long k = rem % pts;
      rem /= pts;
      u(i) = k == pts - 1 ? box->upper(i) : box->lower(i) + spacing(i) * static_cast<double>(k);
    }
    if (!feasible(u)) continue;
    const double v = objective(u);
    if (v < best) best = v, best_u = u;
  }
  if (!std::isfinite(best)) return infeasible_result(p, value);

  // Local polish. Brent on the full objective handles kinks; Newton steps on
  // the active piece then sharpen smooth minima.
  if (m == 1) {
    const Feasible1D iv = feasible_interval(p, *box, h);
    const double lo = std::max(iv.lo, best_u(0) - spacing(0));
    const double hi = std::min(iv.hi, best_u(0) + spacing(0));
    if (hi > lo) {
      Vector tmp(1);
      auto f1 = [&](double v) {
        tmp(0) = v;
        return objective(tmp);
      };
      const auto r = boost::math::tools::brent_find_minima(f1, lo, hi, std::numeric_limits<double>::digits / 2 + 4);
      for (double cand : {r.first, lo, hi}) {
        const double v = f1(cand);
        if (v < best) best = v, best_u(0) = cand;
      }
    }
  } else {
    Vector step = spacing;
    while (step.maxCoeff() > 1e-11) {
      bool improved = false;
      for (int i = 0; i < m; ++i)
        for (double sgn : {-1.0, 1.0}) {
          Vector cand = best_u;
          cand(i) = std::clamp(cand(i) + sgn * step(i), box->lower(i), box->upper(i));
          if (!feasible(cand)) continue;
          const double v = objective(cand);
          if (v < best) best = v, best_u = cand, improved = true;
        }
      if (!improved) step *= 0.5;
    }
  }

  for (int it = 0; it < cfg.refine_newton_steps; ++it) {
    const Vector xp = c0 + F * best_u;
    const auto ev = value.evaluate(xp);
    const LowerBound& piece = value[ev.active_index];
    const Vector beta = p.cost.epigraph_values(x_hat, best_u);
    Vector grad = p.gamma * F.transpose() * piece.gradient(xp);
    Matrix hess = Matrix::Zero(m, m);
    for (int k = 0; k < p.cost.num_epigraph(); ++k) {
      for (int j = 0; j < p.cost.num_terms(); ++j) {
        const auto& t = p.cost.term(j);
        if (t.owner != k || t.evaluate(x_hat, best_u) < beta(k)) continue;
        grad += t.r + t.R * best_u;
        hess += t.R;
        break;
      }
    }
    if (piece.materialized()) {
      hess += p.gamma * F.transpose() * piece.materialized()->hessian() * F;
    } else {
      Matrix Hg(p.n, p.n);
      for (int s = 0; s < p.n; ++s) {
        const double e = 1e-6 * (1.0 + std::abs(xp(s)));
        Vector a = xp, b = xp;
        a(s) += e;
        b(s) -= e;
        Hg.col(s) = (piece.gradient(a) - piece.gradient(b)) / (2 * e);
      }
      hess += p.gamma * F.transpose() * (0.5 * (Hg + Hg.transpose())) * F;
    }
    Eigen::LDLT<Matrix> ldlt(hess);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0).all()) break;
    Vector delta = -ldlt.solve(grad);
    bool accepted = false;
    for (int ls = 0; ls < 20 && !accepted; ++ls, delta *= 0.5) {
      Vector cand = (best_u + delta).cwiseMax(box->lower).cwiseMin(box->upper);
      if (!feasible(cand)) continue;
      const double v = objective(cand);
      if (v <= best) best = v, best_u = cand, accepted = true;
    }
    if (!accepted || delta.norm() < 1e-15) break;
  }

  OneStageResult out;
  out.primal = primal_at(p, value, x_hat, best_u, SolveStatus::Optimal);
  out.dual = recover_duals_kkt(p, value, x_hat, out.primal);
  return out;
}

OneStageResult solve_onestage(const ControlProblem& p, const ValueApprox& value, const Vector& x_hat,
                              const SolverConfig& cfg) {
  return p.problem_class == ProblemClass::ConvexQuadratic ? solve_onestage_convex(p, value, x_hat, cfg)
                                                          : solve_onestage_bruteforce(p, value, x_hat, cfg);
}

BoundConstruction build_lower_bound(const ProblemPtr& problem, const Vector& x_hat,
                                    const OneStageResult& solved, const SolverConfig& cfg) {
  require(solved.optimal(), "lower bound needs an optimal one-stage solution");
  const double gap = solved.relative_gap();
  const double tol =
      problem->problem_class == ProblemClass::ConvexQuadratic ? cfg.duality_gap_tol : 1e-4;
  const bool strong = !solved.dual.objective_exact || gap <= tol;
  const double anchor_value = strong ? solved.primal.cost : solved.dual.objective;
  if (!std::isfinite(anchor_value))
    throw Error(ErrorKind::NumericalFailure, "one-stage dual objective is not finite");

  BoundConstruction out{LowerBound::from_multipliers(problem, x_hat, anchor_value, solved.dual.lambda_beta,
                                                     solved.dual.lambda_c, solved.dual.nu),
                        strong, gap};
  const double at_anchor = out.bound.evaluate(x_hat);
  if (std::abs(at_anchor - anchor_value) > 1e-6 * (1.0 + std::abs(anchor_value)))
    throw Error(ErrorKind::NumericalFailure, "new lower bound does not reproduce its anchor value");
  return out;
}

}  // namespace dualdp
