#pragma once

// Small dense helpers shared by the solvers. Not installed.

#include <Eigen/Eigenvalues>

#include "dualdp/types.hpp"

namespace dualdp::detail {

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix; eigenvalues below
/// rel_tol * max eigenvalue are treated as zero.
inline Matrix symmetric_pinv(const Matrix& S, double rel_tol = 1e-12) {
  if (S.size() == 0) return S;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
  const Vector& ev = es.eigenvalues();
  const double cutoff = rel_tol * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Vector inv = Vector::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > cutoff) inv(i) = 1.0 / ev(i);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

/// Residual of projecting w onto range(S), relative to |w|.
inline double range_residual(const Matrix& S, const Matrix& S_pinv, const Vector& w) {
  const double norm = w.norm();
  if (norm == 0.0) return 0.0;
  return (w - S * (S_pinv * w)).norm() / norm;
}

}  // namespace dualdp::detail
