#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "dualdp/problem.hpp"

namespace dualdp {

struct RiccatiSolution {
  Matrix P;
  Matrix K;  // optimal policy u = -K x
  double residual = 0.0;
  int iterations = 0;
};

/// Discounted DARE by fixed-point iteration on (sqrt(gamma) A, sqrt(gamma) B),
/// starting from P = Q. Throws NoConvergence when the residual stays above tol.
RiccatiSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, double gamma,
                           double tol = 1e-10, int max_iters = 200000);

/// |P - (Q + A'PA - A'PB (R + B'PB)^{-1} B'PA)|_inf with the scaled pair.
double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, double gamma,
                     const Matrix& P);

struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  int count = 2;

  double spacing() const { return (hi - lo) / (count - 1); }
  double point(int i) const { return i == count - 1 ? hi : lo + spacing() * i; }
};

/// Tensor grid of values with multilinear interpolation. Queries outside the
/// grid are clamped to it.
class GridValueFunction {
 public:
  GridValueFunction() = default;
  GridValueFunction(std::vector<GridAxis> axes, std::vector<double> values);

  int dim() const { return static_cast<int>(axes_.size()); }
  const std::vector<GridAxis>& axes() const { return axes_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  /// State at a flat index (first axis varies fastest).
  Vector point(std::size_t flat) const;
  double operator()(const Vector& x) const;

  /// "GVF1", uint32 dims, per axis (f64 lo, f64 hi, u32 count), u64 total,
  /// then the values; all little-endian.
  void save(std::ostream& os) const;
  static GridValueFunction load(std::istream& is);

 private:
  std::vector<GridAxis> axes_;
  std::vector<double> values_;
};

/// Bellman operator restricted to a state grid and an input grid, with the
/// successor value read by multilinear interpolation. Successors leaving the
/// grid are clamped to its edge and counted.
class GridBellmanOperator {
 public:
  GridBellmanOperator(const ControlProblem& problem, std::vector<GridAxis> state_axes, int input_points);

  std::size_t size() const { return stage_.size(); }
  const std::vector<GridAxis>& axes() const { return axes_; }
  std::size_t clamped_successors() const { return clamped_; }

  std::vector<double> apply(const std::vector<double>& V, int jobs = 1) const;

 private:
  struct Candidate {
    double stage_cost;
    std::size_t base;  // flat index of the lower corner
    std::vector<double> frac;  // per-axis position inside the cell
  };
  std::vector<GridAxis> axes_;
  std::vector<std::size_t> strides_;
  std::vector<std::vector<Candidate>> stage_;  // per grid point, admissible inputs
  double gamma_ = 1.0;
  std::size_t clamped_ = 0;

  double interpolate(const std::vector<double>& V, const Candidate& c) const;
};

struct GridViResult {
  GridValueFunction value;
  int sweeps = 0;
  double final_change = 0.0;
  std::size_t clamped_successors = 0;
};

/// Synchronous value iteration from V = 0 until the largest change is below
/// stop_tol. n <= 3. Throws NoConvergence at the sweep cap.
GridViResult grid_value_iteration(const ControlProblem& problem, const Vector& lower, const Vector& upper,
                                  int state_points = 51, int input_points = 11, double stop_tol = 1e-3,
                                  int max_sweeps = 100000, int jobs = 1);

}  // namespace dualdp
