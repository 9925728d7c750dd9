#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "dualdp/certify.hpp"
#include "dualdp/gddp.hpp"

namespace dualdp {

struct RandomSystemConfig {
  int n = 2;
  int m = 1;
  double spectral_radius_cap = 0.99;
  double gamma = 1.0;
  double input_bound = 1.0;
  int max_attempts = 100;
};

/// A, B with standard normal entries, A rescaled so its spectral radius is at
/// most the cap, controllable; cost 1/2 x'x + 1/2 u'u; |u|_inf <= input_bound.
/// Throws GenerationFailed if no controllable pair turns up.
ProblemPtr generate_random_system(const RandomSystemConfig& cfg, Rng& rng);

double spectral_radius(const Matrix& A);

/// `count` draws from N(0, stddev^2 I).
std::vector<Vector> sample_states(int n, int count, double stddev, Rng& rng);

/// Deterministic per-cell stream derived from a base seed and labels.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> labels);

// ---------------------------------------------------------------------------
// Iteration counts to a Bellman tolerance (one system per (n, m), nested
// sample sets across M).

struct IterationsExperimentConfig {
  std::vector<std::pair<int, int>> dims{{1, 1}, {2, 1}, {3, 1}};
  std::vector<int> sample_counts{1, 2, 5, 10};
  double delta = 1e-3;
  std::uint64_t seed = 1;
  int max_iterations = 2000;
  double sample_stddev = 5.0;
  double gamma = 1.0;
  bool record_timing = false;
};

struct IterationsCell {
  int n = 0;
  int m = 0;
  int M = 0;
  int iterations = 0;
  bool converged = false;
  double wall_seconds = 0.0;
};

std::vector<IterationsCell> run_iterations_experiment(const IterationsExperimentConfig& cfg);

void write_iterations_csv(std::ostream& os, const std::vector<IterationsCell>& cells);
std::vector<IterationsCell> read_iterations_csv(std::istream& is);

// ---------------------------------------------------------------------------
// Approximation quality after a fixed iteration budget.

struct QualityConfig {
  int n = 2;
  int m = 1;
  int M = 50;
  int iterations = 50;
  int eval_samples = 200;
  std::uint64_t seed = 1;
  double sample_stddev = 5.0;
  double gamma = 1.0;
  int jobs = 1;
  bool record_timing = false;
  CertifyConfig certify;
};

/// Relative Bellman errors are means of (T V - V)/V; suboptimality bounds are
/// sum(upper - V) / sum(V). All in percent. Samples with V < 1e-9 are left
/// out of both and counted; metrics with no usable sample are NaN.
struct ExperimentRow {
  int n = 0;
  int m = 0;
  int M = 0;
  int iterations = 0;
  double rbe_in = 0.0;
  double subopt_in = 0.0;
  double rbe_out = 0.0;
  double subopt_out = 0.0;
  int excluded_in = 0;
  int excluded_out = 0;
  int cert_failures_in = 0;
  int cert_failures_out = 0;
  double wall_seconds = 0.0;
};

struct QualityMetrics {
  double rbe = 0.0;
  double subopt = 0.0;
  int excluded = 0;
  int cert_failures = 0;
};

/// Relative Bellman error and M1 suboptimality bound over a set of states.
QualityMetrics evaluate_quality(const ControlProblem& problem, const ValueApprox& V,
                                const std::vector<Vector>& states, const CertifyConfig& cfg, int jobs = 1);

ExperimentRow run_quality_experiment(const QualityConfig& cfg);

void write_quality_csv(std::ostream& os, const std::vector<ExperimentRow>& rows);
std::vector<ExperimentRow> read_quality_csv(std::istream& is);

// ---------------------------------------------------------------------------
// Ball and beam.

struct BallBeamParams {
  double mass = 0.1;
  double beam_inertia = 0.5;
  double gravity = 9.81;
  double dt = 0.1;
  double tau_max = 3.0;
  double gamma = 1.0;
};

/// State (r, r_dot, theta, theta_dot), torque input, Euler-discretized
/// dynamics, cost 1/2 x'diag(10,1,1,1)x + 1/2 0.01 u^2, |u| <= tau_max.
ProblemPtr ball_and_beam_problem(const BallBeamParams& params = {});

/// (1, 0, -0.1745, 0).
Vector ball_and_beam_start();

struct BallBeamConfig {
  int samples = 100;
  std::vector<int> budgets{50, 100, 150, 200};
  std::uint64_t seed = 1;
  int rollout_steps = 100;
  SolverConfig solver;
  BallBeamParams params;
};

struct BallBeamRun {
  int budget = 0;
  Trajectory trajectory;
  double final_norm = 0.0;
};

/// One GDDP run with a random-uniform picker; a greedy rollout from the start
/// state is recorded each time the iteration count reaches a budget.
std::vector<BallBeamRun> run_ball_and_beam(const BallBeamConfig& cfg);

/// One JSON object per line: {"budget", "final_norm", "states", "inputs"}.
void write_trajectories_jsonl(std::ostream& os, const std::vector<BallBeamRun>& runs);

}  // namespace dualdp
