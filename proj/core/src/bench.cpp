#include "dualdp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "parallel.hpp"

namespace dualdp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse, "csv: not a number: '" + s + "'");
  }
}

int parse_int(const std::string& s) {
  const double v = parse_double(s);
  if (v != std::floor(v)) throw Error(ErrorKind::Parse, "csv: not an integer: '" + s + "'");
  return static_cast<int>(v);
}

template <class Row, class ParseRow>
std::vector<Row> read_csv(std::istream& is, const std::string& expected_header, std::size_t columns,
                          ParseRow parse_row) {
  std::string line;
  if (!std::getline(is, line) || line != expected_header)
    throw Error(ErrorKind::Parse, "csv: unexpected header");
  std::vector<Row> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != columns) throw Error(ErrorKind::Parse, "csv: wrong column count");
    rows.push_back(parse_row(cells));
  }
  return rows;
}

}  // namespace

Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (auto l : labels) {
    words.push_back(static_cast<std::uint32_t>(l));
    words.push_back(static_cast<std::uint32_t>(l >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

double spectral_radius(const Matrix& A) {
  return Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

ProblemPtr generate_random_system(const RandomSystemConfig& cfg, Rng& rng) {
  require(cfg.n >= 1 && cfg.m >= 1, "random system: dimensions must be positive");
  require(cfg.spectral_radius_cap > 0.0 && cfg.input_bound > 0.0, "random system: caps must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    Matrix A(cfg.n, cfg.n), B(cfg.n, cfg.m);
    for (int i = 0; i < A.size(); ++i) A.data()[i] = normal(rng);
    for (int i = 0; i < B.size(); ++i) B.data()[i] = normal(rng);
    const double rho = spectral_radius(A);
    if (rho > cfg.spectral_radius_cap) A *= cfg.spectral_radius_cap / rho;
    try {
      controllability_index(A, B);
    } catch (const Error&) {
      continue;
    }
    auto p = std::make_shared<ControlProblem>(make_lqr(A, B, Matrix::Identity(cfg.n, cfg.n),
                                                       Matrix::Identity(cfg.m, cfg.m), cfg.gamma,
                                                       cfg.input_bound));
    p->name = "random-" + std::to_string(cfg.n) + "x" + std::to_string(cfg.m);
    return p;
  }
  throw Error(ErrorKind::GenerationFailed, "random system: no controllable pair after " +
                                               std::to_string(cfg.max_attempts) + " attempts");
}

std::vector<Vector> sample_states(int n, int count, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  std::vector<Vector> out(count, Vector(n));
  for (auto& x : out)
    for (int i = 0; i < n; ++i) x(i) = normal(rng);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<IterationsCell> run_iterations_experiment(const IterationsExperimentConfig& cfg) {
  for (int M : cfg.sample_counts) require(M >= 1, "iterations experiment: sample counts must be at least 1");
  require(!cfg.sample_counts.empty(), "iterations experiment: no sample counts");
  const int largest = *std::max_element(cfg.sample_counts.begin(), cfg.sample_counts.end());

  std::vector<IterationsCell> cells;
  for (const auto& [n, m] : cfg.dims) {
    Rng rng = derive_rng(cfg.seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(m)});
    RandomSystemConfig sys;
    sys.n = n;
    sys.m = m;
    sys.gamma = cfg.gamma;
    const ProblemPtr problem = generate_random_system(sys, rng);
    const auto pool = sample_states(n, largest, cfg.sample_stddev, rng);

    for (int M : cfg.sample_counts) {
      GddpConfig g;
      g.delta = cfg.delta;
      g.max_iterations = cfg.max_iterations;
      g.picker = Picker::MaxBellmanError;
      g.check_every = 1;
      const auto t0 = std::chrono::steady_clock::now();
      const GddpResult r = run_gddp(problem, {pool.begin(), pool.begin() + M}, g);
      cells.push_back({n, m, M, r.iterations, r.converged, cfg.record_timing ? seconds_since(t0) : 0.0});
    }
  }
  return cells;
}

void write_iterations_csv(std::ostream& os, const std::vector<IterationsCell>& cells) {
  os << "n,m,M,iterations,converged,wall_seconds\n";
  for (const auto& c : cells)
    os << c.n << ',' << c.m << ',' << c.M << ',' << c.iterations << ',' << (c.converged ? 1 : 0) << ','
       << fmt(c.wall_seconds) << '\n';
}

std::vector<IterationsCell> read_iterations_csv(std::istream& is) {
  return read_csv<IterationsCell>(is, "n,m,M,iterations,converged,wall_seconds", 6, [](const auto& c) {
    return IterationsCell{parse_int(c[0]), parse_int(c[1]), parse_int(c[2]), parse_int(c[3]),
                          parse_int(c[4]) != 0, parse_double(c[5])};
  });
}

// ---------------------------------------------------------------------------

QualityMetrics evaluate_quality(const ControlProblem& problem, const ValueApprox& V,
                                const std::vector<Vector>& states, const CertifyConfig& cfg, int jobs) {
  struct PerState {
    double value = 0.0, eps = 0.0, upper = 0.0;
    bool certified = false;
  };
  std::vector<PerState> per(states.size());
  const Vector anchor = Vector::Zero(problem.n);
  detail::parallel_for(states.size(), jobs, [&](std::size_t i) {
    PerState& s = per[i];
    s.value = V(states[i]);
    s.eps = bellman_error(problem, V, states[i], cfg.solver).value;
    try {
      s.upper = certify_m1(problem, V, states[i], anchor, cfg).upper;
      s.certified = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::AnchorUnreachable) throw;
    }
  });

  QualityMetrics q;
  double rbe_sum = 0.0, gap_sum = 0.0, value_sum = 0.0;
  int rbe_count = 0;
  for (const auto& s : per) {
    if (s.value < 1e-9) {
      ++q.excluded;
      continue;
    }
    rbe_sum += s.eps / s.value;
    ++rbe_count;
    if (!s.certified) {
      ++q.cert_failures;
      continue;
    }
    gap_sum += s.upper - s.value;
    value_sum += s.value;
  }
  q.rbe = rbe_count ? 100.0 * rbe_sum / rbe_count : kNaN;
  q.subopt = value_sum > 0.0 ? 100.0 * gap_sum / value_sum : kNaN;
  return q;
}

ExperimentRow run_quality_experiment(const QualityConfig& cfg) {
  require(cfg.M >= 1 && cfg.iterations >= 0 && cfg.eval_samples >= 1, "quality experiment: bad sizes");
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = derive_rng(cfg.seed, {static_cast<std::uint64_t>(cfg.n), static_cast<std::uint64_t>(cfg.m)});
  RandomSystemConfig sys;
  sys.n = cfg.n;
  sys.m = cfg.m;
  sys.gamma = cfg.gamma;
  const ProblemPtr problem = generate_random_system(sys, rng);
  const auto in_sample = sample_states(cfg.n, cfg.M, cfg.sample_stddev, rng);
  const auto out_sample = sample_states(cfg.n, cfg.eval_samples, cfg.sample_stddev, rng);

  GddpConfig g;
  g.picker = Picker::RandomUniform;
  g.check_every = 0;
  g.max_iterations = cfg.iterations;
  g.rng_seed = rng();
  const GddpResult r = run_gddp(problem, in_sample, g);

  const QualityMetrics qi = evaluate_quality(*problem, r.V, in_sample, cfg.certify, cfg.jobs);
  const QualityMetrics qo = evaluate_quality(*problem, r.V, out_sample, cfg.certify, cfg.jobs);
  ExperimentRow row;
  row.n = cfg.n;
  row.m = cfg.m;
  row.M = cfg.M;
  row.iterations = r.iterations;
  row.rbe_in = qi.rbe;
  row.subopt_in = qi.subopt;
  row.rbe_out = qo.rbe;
  row.subopt_out = qo.subopt;
  row.excluded_in = qi.excluded;
  row.excluded_out = qo.excluded;
  row.cert_failures_in = qi.cert_failures;
  row.cert_failures_out = qo.cert_failures;
  row.wall_seconds = cfg.record_timing ? seconds_since(t0) : 0.0;
  return row;
}

namespace {
const char* kQualityHeader =
    "n,m,M,iterations,rbe_in_pct,subopt_in_pct,rbe_out_pct,subopt_out_pct,excluded_in,excluded_out,"
    "cert_failures_in,cert_failures_out,wall_seconds";
}

void write_quality_csv(std::ostream& os, const std::vector<ExperimentRow>& rows) {
  os << kQualityHeader << '\n';
  for (const auto& r : rows)
    os << r.n << ',' << r.m << ',' << r.M << ',' << r.iterations << ',' << fmt(r.rbe_in) << ','
       << fmt(r.subopt_in) << ',' << fmt(r.rbe_out) << ',' << fmt(r.subopt_out) << ',' << r.excluded_in << ','
       << r.excluded_out << ',' << r.cert_failures_in << ',' << r.cert_failures_out << ','
       << fmt(r.wall_seconds) << '\n';
}

std::vector<ExperimentRow> read_quality_csv(std::istream& is) {
  return read_csv<ExperimentRow>(is, kQualityHeader, 13, [](const auto& c) {
    ExperimentRow r;
    r.n = parse_int(c[0]);
    r.m = parse_int(c[1]);
    r.M = parse_int(c[2]);
    r.iterations = parse_int(c[3]);
    r.rbe_in = parse_double(c[4]);
    r.subopt_in = parse_double(c[5]);
    r.rbe_out = parse_double(c[6]);
    r.subopt_out = parse_double(c[7]);
    r.excluded_in = parse_int(c[8]);
    r.excluded_out = parse_int(c[9]);
    r.cert_failures_in = parse_int(c[10]);
    r.cert_failures_out = parse_int(c[11]);
    r.wall_seconds = parse_double(c[12]);
    return r;
  });
}

// ---------------------------------------------------------------------------

ProblemPtr ball_and_beam_problem(const BallBeamParams& bp) {
  const double mb = bp.mass, Jb = bp.beam_inertia, g = bp.gravity, dt = bp.dt;
  auto drift = [=](const Vector& x) {
    const double r = x(0), rd = x(1), th = x(2), thd = x(3);
    const double D = mb * r * r + Jb;
    Vector out = x;
    out(0) += dt * rd;
    out(1) += dt * (r * thd * thd - g * std::sin(th));
    out(2) += dt * thd;
    out(3) += dt * (-(2.0 * mb * r * rd + mb * g * r * std::cos(th)) / D);
    return out;
  };
  auto jacobian = [=](const Vector& x) {
    const double r = x(0), rd = x(1), th = x(2), thd = x(3);
    const double D = mb * r * r + Jb;
    const double N = 2.0 * mb * r * rd + mb * g * r * std::cos(th);
    Matrix J = Matrix::Identity(4, 4);
    J(0, 1) += dt;
    J(1, 0) += dt * thd * thd;
    J(1, 2) += dt * (-g * std::cos(th));
    J(1, 3) += dt * 2.0 * r * thd;
    J(2, 3) += dt;
    J(3, 0) += dt * (-((2.0 * mb * rd + mb * g * std::cos(th)) * D - N * 2.0 * mb * r) / (D * D));
    J(3, 1) += dt * (-2.0 * mb * r / D);
    J(3, 2) += dt * (mb * g * r * std::sin(th) / D);
    return J;
  };
  auto input = [=](const Vector& x) {
    Matrix F = Matrix::Zero(4, 1);
    F(3, 0) = dt / (mb * x(0) * x(0) + Jb);
    return F;
  };
  auto partials = [=](const Vector& x) {
    std::vector<Matrix> P(4, Matrix::Zero(4, 1));
    const double D = mb * x(0) * x(0) + Jb;
    P[0](3, 0) = -dt * 2.0 * mb * x(0) / (D * D);
    return P;
  };

  auto p = std::make_shared<ControlProblem>();
  p->n = 4;
  p->m = 1;
  p->gamma = bp.gamma;
  p->dynamics = DynamicsModel::nonlinear(4, 1, drift, jacobian, input, partials);
  Matrix Q = Matrix::Zero(4, 4);
  Q.diagonal() << 10.0, 1.0, 1.0, 1.0;
  p->cost = StageCost::quadratic(Q, Matrix::Constant(1, 1, 0.01));
  p->constraints = InputConstraintSet::box_bound(4, 1, bp.tau_max);
  p->problem_class = ProblemClass::NonlinearBruteForce;
  p->name = "ball-and-beam";
  return p;
}

Vector ball_and_beam_start() {
  Vector x(4);
  x << 1.0, 0.0, -0.1745, 0.0;
  return x;
}

std::vector<BallBeamRun> run_ball_and_beam(const BallBeamConfig& cfg) {
  require(cfg.samples >= 2, "ball and beam: need at least two samples");
  for (int b : cfg.budgets) require(b >= 0, "ball and beam: budgets must be nonnegative");
  require(cfg.rollout_steps >= 1, "ball and beam: rollout needs at least one step");
  const ProblemPtr problem = ball_and_beam_problem(cfg.params);
  Rng rng = derive_rng(cfg.seed, {4, 1});
  auto samples = sample_states(4, cfg.samples / 2, 0.5, rng);
  const auto near = sample_states(4, cfg.samples - cfg.samples / 2, 0.1, rng);
  samples.insert(samples.end(), near.begin(), near.end());

  GddpConfig g;
  g.picker = Picker::RandomUniform;
  g.check_every = 0;
  g.solver = cfg.solver;
  g.rng_seed = rng();
  Rng picker_rng(g.rng_seed);
  GddpState state(4, std::move(samples));

  std::vector<int> budgets = cfg.budgets;
  std::sort(budgets.begin(), budgets.end());
  std::vector<BallBeamRun> runs;
  for (int budget : budgets) {
    while (state.iteration < budget) gddp_iterate(problem, state, g, picker_rng);
    BallBeamRun run;
    run.budget = budget;
    run.trajectory = rollout_greedy(*problem, state.V, ball_and_beam_start(), cfg.rollout_steps, cfg.solver).trajectory;
    run.final_norm = run.trajectory.states.back().norm();
    runs.push_back(std::move(run));
  }
  return runs;
}

void write_trajectories_jsonl(std::ostream& os, const std::vector<BallBeamRun>& runs) {
  for (const auto& run : runs) {
    nlohmann::json j;
    j["budget"] = run.budget;
    j["final_norm"] = run.final_norm;
    j["feasible"] = run.trajectory.feasible;
    auto& states = j["states"] = nlohmann::json::array();
    for (const auto& x : run.trajectory.states) states.push_back(std::vector<double>(x.data(), x.data() + x.size()));
    auto& inputs = j["inputs"] = nlohmann::json::array();
    for (const auto& u : run.trajectory.inputs) inputs.push_back(std::vector<double>(u.data(), u.data() + u.size()));
    os << j.dump() << '\n';
  }
}

}  // namespace dualdp
