#include "dualdp/qcqp.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include <Eigen/Cholesky>

namespace dualdp {

double QcqpProblem::row_value(std::size_t i, const Vector& z) const {
  const auto& c = constraints[i];
  double v = c.gradient.dot(z) + c.offset;
  if (c.curvature.size() > 0) {
    const auto zq = z.head(quad_dims);
    v += 0.5 * zq.dot(c.curvature * zq);
  }
  return v;
}

Vector QcqpProblem::row_gradient(std::size_t i, const Vector& z) const {
  const auto& c = constraints[i];
  Vector g = c.gradient;
  if (c.curvature.size() > 0) g.head(quad_dims) += c.curvature * z.head(quad_dims);
  return g;
}

namespace {

double max_step(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (int i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  return alpha;
}

struct Linearization {
  Vector f;
  Matrix Df;
};

Linearization linearize(const QcqpProblem& prob, const Vector& z) {
  const int p = static_cast<int>(prob.constraints.size());
  Linearization lin{Vector(p), Matrix(p, z.size())};
  for (int i = 0; i < p; ++i) {
    lin.f(i) = prob.row_value(i, z);
    lin.Df.row(i) = prob.row_gradient(i, z).transpose();
  }
  return lin;
}


// Central multipliers and the convergence flag, shared by both methods.
QcqpResult finish(const QcqpProblem& prob, const Vector& z, const Vector& s, const Vector& lambda,
                  const QcqpOptions& opt, int iterations) {
  const int p = static_cast<int>(prob.constraints.size());
  const double c_scale = 1.0 + prob.objective.lpNorm<Eigen::Infinity>();
  const Linearization lin = linearize(prob, z);
  QcqpResult res;
  res.iterations = iterations;
  res.z = z;
  res.multipliers = lambda;
  res.slacks = s;
  res.objective = prob.objective.dot(z);
  const Vector rd = prob.objective + lin.Df.transpose() * lambda;
  res.dual_residual = rd.lpNorm<Eigen::Infinity>();
  res.primal_residual = p ? std::max(0.0, lin.f.maxCoeff()) : 0.0;
  res.complementarity = p ? lambda.cwiseProduct(lin.f).cwiseAbs().maxCoeff() : 0.0;
  const double scale = 1.0 + std::abs(res.objective);
  res.converged = res.dual_residual <= opt.acceptable_tol * c_scale &&
                  res.primal_residual <= opt.acceptable_tol * scale &&
                  s.dot(lambda) <= opt.acceptable_tol * scale * std::max(1, p) &&
                  res.complementarity <= opt.acceptable_tol * scale;
  return res;
}

struct Iterate {
  Vector z, s, lambda;
  int iterations = 0;
};

// Log-barrier path following from a strictly feasible point, stopped at a
// moderate gap. Primal-dual steps from a cold start overshoot curved rows
// whose multipliers are still small; the barrier Hessian weights each row's
// curvature by its own slack. Past this gap the slacks of active rows are
// below the rounding error of f, so the primal-dual method takes over.
Iterate barrier(const QcqpProblem& prob, const Vector& z0, const QcqpOptions& opt) {
  const int p = static_cast<int>(prob.constraints.size());
  const int nq = prob.quad_dims;
  const Vector& c = prob.objective;

  Vector z = z0;
  Linearization lin = linearize(prob, z);
  double t = p / (1.0 + std::abs(c.dot(z)));
  int newton = 0;
  const int budget = 2 * opt.max_iters;

  // Change of the barrier objective, scaled by 1/t. Row-wise log ratios keep
  // it accurate when t is large.
  auto change = [&](const Linearization& at, const Vector& step) {
    return c.dot(step) - at.f.cwiseQuotient(lin.f).array().log().sum() / t;
  };

  while (newton < budget) {
    for (; newton < budget; ++newton) {
      const Vector inv = (-lin.f).cwiseInverse();
      const Vector lambda = inv / t;
      const Vector grad = c + lin.Df.transpose() * lambda;
      Matrix H = lin.Df.transpose() * (lambda.cwiseProduct(inv)).asDiagonal() * lin.Df;
      for (int i = 0; i < p; ++i) {
        const auto& row = prob.constraints[i];
        if (row.curvature.size() > 0) H.topLeftCorner(nq, nq) += lambda(i) * row.curvature;
      }
      H.diagonal().array() += 1e-14 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
      Eigen::LDLT<Matrix> ldlt(H);
      if (ldlt.info() != Eigen::Success) break;
      const Vector dz = ldlt.solve(-grad);
      const double decrement = -grad.dot(dz) * t;
      if (opt.verbose) std::cerr << "barrier t=" << t << " newton=" << newton << " dec=" << decrement << "\n";
      if (!(decrement > 1e-9)) break;

      // Backtracking with sufficient decrease, staying strictly feasible.
      const double slope = grad.dot(dz);
      double a = 1.0;
      Linearization next = linearize(prob, z + a * dz);
      auto rejected = [&] { return next.f.maxCoeff() >= 0.0 || change(next, a * dz) > 0.25 * a * slope; };
      for (int k = 0; k < 40 && rejected(); ++k) {
        a *= 0.5;
        next = linearize(prob, z + a * dz);
      }
      // No decrease left at this precision: as centred as it gets.
      if (rejected()) break;
      z += a * dz;
      lin = std::move(next);
    }
    if (p / t <= 1e-6 * (1.0 + std::abs(c.dot(z)))) break;
    t *= 10.0;
  }
  const Vector s = -lin.f;
  return {z, s, s.cwiseInverse() / t, newton};
}

QcqpResult primal_dual(const QcqpProblem& prob, Iterate start, const QcqpOptions& opt) {
  const int d = static_cast<int>(prob.objective.size());
  const int p = static_cast<int>(prob.constraints.size());
  const int nq = prob.quad_dims;
  Vector z = std::move(start.z), s = std::move(start.s), lambda = std::move(start.lambda);
  Linearization lin = linearize(prob, z);

  const double c_scale = 1.0 + prob.objective.lpNorm<Eigen::Infinity>();
  double best_merit = std::numeric_limits<double>::infinity();
  int stall = 0;
  // Normal equations lose accuracy once the slacks of active rows underflow,
  // so the best iterate seen is what gets returned.
  Vector best_z = z, best_s = s, best_lambda = lambda;
  double best_seen = std::numeric_limits<double>::infinity();

  int it = 0;
  for (; it < opt.max_iters; ++it) {
    const Vector rd = prob.objective + lin.Df.transpose() * lambda;
    const Vector rp = lin.f + s;
    const double gap = s.dot(lambda);
    const double scale = 1.0 + std::abs(prob.objective.dot(z));
    const double merit = std::max({rd.lpNorm<Eigen::Infinity>() / c_scale,
                                   p ? rp.lpNorm<Eigen::Infinity>() / scale : 0.0, gap / scale});
    if (opt.verbose)
      std::cerr << "qcqp it=" << it << " rd=" << rd.lpNorm<Eigen::Infinity>()
                << " rp=" << (p ? rp.lpNorm<Eigen::Infinity>() : 0.0) << " gap=" << gap << "\n";
    if (merit < best_seen) {
      best_seen = merit;
      best_z = z;
      best_s = s;
      best_lambda = lambda;
    }
    if (merit <= opt.tol) break;
    if (merit < 0.5 * best_merit) {
      best_merit = merit;
      stall = 0;
    } else if (++stall > 15) {
      break;
    }

    Matrix W = Matrix::Zero(d, d);
    for (int i = 0; i < p; ++i) {
      const auto& c = prob.constraints[i];
      if (c.curvature.size() > 0) W.topLeftCorner(nq, nq) += lambda(i) * c.curvature;
    }
    const Vector ratio = lambda.cwiseQuotient(s);
    W.noalias() += lin.Df.transpose() * ratio.asDiagonal() * lin.Df;
    W.diagonal().array() += 1e-14;
    Eigen::LDLT<Matrix> ldlt(W);
    if (ldlt.info() != Eigen::Success) break;

    auto direction = [&](const Vector& rc, Vector& dz, Vector& ds, Vector& dl) {
      const Vector tmp = (lambda.cwiseProduct(rp) - rc).cwiseQuotient(s);
      dz = ldlt.solve(-rd - lin.Df.transpose() * tmp);
      const Vector Ddz = lin.Df * dz;
      ds = -rp - Ddz;
      dl = (lambda.cwiseProduct(Ddz + rp) - rc).cwiseQuotient(s);
    };

    Vector dz, ds, dl;
    const double mu = p ? gap / p : 0.0;
    const Vector rc_aff = lambda.cwiseProduct(s);
    direction(rc_aff, dz, ds, dl);
    const double ap_aff = max_step(s, ds);
    const double ad_aff = max_step(lambda, dl);
    const double mu_aff = p ? (s + ap_aff * ds).dot(lambda + ad_aff * dl) / p : 0.0;
    const double sigma = mu > 0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;

    const Vector rc = rc_aff + ds.cwiseProduct(dl) - Vector::Constant(p, sigma * mu);
    direction(rc, dz, ds, dl);
    // One step length for all blocks: the rows are nonlinear in z, so split
    // primal and dual steps leave the dual residual unreduced.
    const double step = std::min(1.0, opt.step_fraction * std::min(max_step(s, ds), max_step(lambda, dl)));

    z += step * dz;
    s += step * ds;
    lambda += step * dl;
    s = s.cwiseMax(1e-300);
    lambda = lambda.cwiseMax(1e-300);
    lin = linearize(prob, z);
  }

  return finish(prob, best_z, best_s, best_lambda, opt, start.iterations + it);
}

}  // namespace

QcqpResult solve_qcqp(const QcqpProblem& prob, const Vector& z0, const QcqpOptions& opt) {
  require(z0.size() == prob.objective.size(), "qcqp: start point has wrong dimension");
  const Vector f0 = linearize(prob, z0).f;
  if (f0.size() > 0 && f0.maxCoeff() < 0.0) return primal_dual(prob, barrier(prob, z0, opt), opt);
  const Vector s = (-f0).cwiseMax(1.0);
  return primal_dual(prob, {z0, s, s.cwiseInverse(), 0}, opt);
}

}  // namespace dualdp
