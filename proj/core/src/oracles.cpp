#include "dualdp/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include <Eigen/Cholesky>

#include "parallel.hpp"

namespace dualdp {

namespace {

Matrix riccati_map(const Matrix& At, const Matrix& Bt, const Matrix& Q, const Matrix& R, const Matrix& P) {
  const Matrix BtP = Bt.transpose() * P;
  const Matrix gain = (R + BtP * Bt).ldlt().solve(BtP * At);
  Matrix next = Q + At.transpose() * P * At - At.transpose() * P * Bt * gain;
  return 0.5 * (next + next.transpose());
}

}  // namespace

double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, double gamma,
                     const Matrix& P) {
  const double s = std::sqrt(gamma);
  return (P - riccati_map(s * A, s * B, Q, R, P)).lpNorm<Eigen::Infinity>();
}

RiccatiSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, double gamma,
                           double tol, int max_iters) {
  require(A.rows() == A.cols() && B.rows() == A.rows() && Q.rows() == A.rows() && R.rows() == B.cols(),
          "dare: dimension mismatch");
  require(gamma > 0.0 && gamma <= 1.0, "dare: gamma must lie in (0, 1]");
  const double s = std::sqrt(gamma);
  const Matrix At = s * A, Bt = s * B;
  RiccatiSolution out;
  out.P = 0.5 * (Q + Q.transpose());
  for (out.iterations = 0; out.iterations < max_iters; ++out.iterations) {
    Matrix next = riccati_map(At, Bt, Q, R, out.P);
    const double change = (next - out.P).lpNorm<Eigen::Infinity>();
    out.P = std::move(next);
    if (!out.P.allFinite()) break;
    if (change <= 0.1 * tol) break;
  }
  out.residual = dare_residual(A, B, Q, R, gamma, out.P);
  if (!(out.residual <= tol))
    throw Error(ErrorKind::NoConvergence, "dare: fixed-point iteration did not reach the residual target");
  // Optimal input for the original pair: u = -(R + gamma B'PB)^{-1} gamma B'PA x.
  const Matrix BtP = gamma * B.transpose() * out.P;
  out.K = (R + BtP * B).ldlt().solve(BtP * A);
  return out;
}

// ---------------------------------------------------------------------------

GridValueFunction::GridValueFunction(std::vector<GridAxis> axes, std::vector<double> values)
    : axes_(std::move(axes)), values_(std::move(values)) {
  std::size_t total = 1;
  for (const auto& a : axes_) {
    require(a.count >= 2 && a.hi > a.lo, "grid axis needs two points and positive width");
    total *= static_cast<std::size_t>(a.count);
  }
  require(values_.size() == total, "grid value count does not match the axes");
}

Vector GridValueFunction::point(std::size_t flat) const {
  Vector x(dim());
  for (int d = 0; d < dim(); ++d) {
    const auto c = static_cast<std::size_t>(axes_[d].count);
    x(d) = axes_[d].point(static_cast<int>(flat % c));
    flat /= c;
  }
  return x;
}

double GridValueFunction::operator()(const Vector& x) const {
  require(x.size() == dim(), "grid value: query has wrong dimension");
  std::size_t base = 0, stride = 1;
  std::vector<double> frac(dim());
  std::vector<std::size_t> strides(dim());
  for (int d = 0; d < dim(); ++d) {
    const auto& a = axes_[d];
    const double t = std::clamp((x(d) - a.lo) / a.spacing(), 0.0, static_cast<double>(a.count - 1));
    const int i = std::min(static_cast<int>(t), a.count - 2);
    frac[d] = t - i;
    base += stride * static_cast<std::size_t>(i);
    strides[d] = stride;
    stride *= static_cast<std::size_t>(a.count);
  }
  double v = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << dim()); ++corner) {
    double w = 1.0;
    std::size_t idx = base;
    for (int d = 0; d < dim(); ++d) {
      const bool up = (corner >> d) & 1U;
      w *= up ? frac[d] : 1.0 - frac[d];
      if (up) idx += strides[d];
    }
    if (w != 0.0) v += w * values_[idx];
  }
  return v;
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary grid format assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw Error(ErrorKind::Parse, "grid value file is truncated");
  return v;
}

}  // namespace

void GridValueFunction::save(std::ostream& os) const {
  os.write("GVF1", 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(dim()));
  for (const auto& a : axes_) {
    put<double>(os, a.lo);
    put<double>(os, a.hi);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(a.count));
  }
  put<std::uint64_t>(os, values_.size());
  os.write(reinterpret_cast<const char*>(values_.data()),
           static_cast<std::streamsize>(values_.size() * sizeof(double)));
}

GridValueFunction GridValueFunction::load(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "GVF1", 4) != 0)
    throw Error(ErrorKind::Parse, "not a grid value file (bad magic)");
  const auto dims = get<std::uint32_t>(is);
  if (dims == 0 || dims > 8) throw Error(ErrorKind::Parse, "grid value file: bad dimension count");
  std::vector<GridAxis> axes(dims);
  for (auto& a : axes) {
    a.lo = get<double>(is);
    a.hi = get<double>(is);
    a.count = static_cast<int>(get<std::uint32_t>(is));
  }
  const auto total = get<std::uint64_t>(is);
  std::vector<double> values(total);
  for (auto& v : values) v = get<double>(is);
  try {
    return GridValueFunction(std::move(axes), std::move(values));
  } catch (const Error& e) {
    throw Error(ErrorKind::Parse, std::string("grid value file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

GridBellmanOperator::GridBellmanOperator(const ControlProblem& p, std::vector<GridAxis> state_axes,
                                         int input_points)
    : axes_(std::move(state_axes)), gamma_(p.gamma) {
  require(static_cast<int>(axes_.size()) == p.n, "grid operator: one axis per state");
  require(p.n <= 3, "grid operator: at most three states");
  require(input_points >= 2, "grid operator: at least two input points per axis");
  const auto box = input_box(p);
  require(box.has_value(), "grid operator: problem needs a bounded input box");

  std::size_t total = 1;
  for (const auto& a : axes_) {
    require(a.count >= 2 && a.hi > a.lo, "grid axis needs two points and positive width");
    strides_.push_back(total);
    total *= static_cast<std::size_t>(a.count);
  }
  std::size_t input_total = 1;
  for (int i = 0; i < p.m; ++i) input_total *= static_cast<std::size_t>(input_points);

  GridValueFunction shape(axes_, std::vector<double>(total, 0.0));
  stage_.resize(total);
  for (std::size_t s = 0; s < total; ++s) {
    const Vector x = shape.point(s);
    for (std::size_t k = 0; k < input_total; ++k) {
      Vector u(p.m);
      std::size_t rem = k;
      for (int i = 0; i < p.m; ++i) {
        const GridAxis ax{box->lower(i), box->upper(i), input_points};
        u(i) = ax.point(static_cast<int>(rem % input_points));
        rem /= input_points;
      }
      if (!p.constraints.contains(x, u, 1e-12)) continue;
      const Vector xp = p.dynamics(x, u);
      Candidate c{p.cost.evaluate(x, u), 0, std::vector<double>(p.n)};
      bool clamped = false;
      for (int d = 0; d < p.n; ++d) {
        const auto& a = axes_[d];
        const double raw = (xp(d) - a.lo) / a.spacing();
        const double t = std::clamp(raw, 0.0, static_cast<double>(a.count - 1));
        clamped |= t != raw;
        const int i = std::min(static_cast<int>(t), a.count - 2);
        c.frac[d] = t - i;
        c.base += strides_[d] * static_cast<std::size_t>(i);
      }
      clamped_ += clamped;
      stage_[s].push_back(std::move(c));
    }
  }
}

double GridBellmanOperator::interpolate(const std::vector<double>& V, const Candidate& c) const {
  const int n = static_cast<int>(axes_.size());
  double v = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << n); ++corner) {
    double w = 1.0;
    std::size_t idx = c.base;
    for (int d = 0; d < n; ++d) {
      const bool up = (corner >> d) & 1U;
      w *= up ? c.frac[d] : 1.0 - c.frac[d];
      if (up) idx += strides_[d];
    }
    if (w != 0.0) v += w * V[idx];
  }
  return v;
}

std::vector<double> GridBellmanOperator::apply(const std::vector<double>& V, int jobs) const {
  require(V.size() == stage_.size(), "grid operator: value array has wrong size");
  std::vector<double> out(V.size());
  detail::parallel_for(V.size(), jobs, [&](std::size_t s) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : stage_[s]) best = std::min(best, c.stage_cost + gamma_ * interpolate(V, c));
    out[s] = best;
  });
  return out;
}

GridViResult grid_value_iteration(const ControlProblem& p, const Vector& lower, const Vector& upper,
                                  int state_points, int input_points, double stop_tol, int max_sweeps,
                                  int jobs) {
  require(lower.size() == p.n && upper.size() == p.n, "grid value iteration: box has wrong dimension");
  require(stop_tol > 0.0, "grid value iteration: stop tolerance must be positive");
  std::vector<GridAxis> axes;
  for (int d = 0; d < p.n; ++d) axes.push_back({lower(d), upper(d), state_points});
  const GridBellmanOperator T(p, axes, input_points);

  GridViResult out;
  std::vector<double> V(T.size(), 0.0);
  for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
    std::vector<double> next = T.apply(V, jobs);
    double change = 0.0;
    for (std::size_t i = 0; i < V.size(); ++i) change = std::max(change, std::abs(next[i] - V[i]));
    V = std::move(next);
    out.final_change = change;
    if (change < stop_tol) break;
  }
  if (out.final_change >= stop_tol)
    throw Error(ErrorKind::NoConvergence, "grid value iteration: sweep cap reached");
  out.value = GridValueFunction(std::move(axes), std::move(V));
  out.clamped_successors = T.clamped_successors();
  return out;
}

}  // namespace dualdp
