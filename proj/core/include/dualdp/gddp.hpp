#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dualdp/onestage.hpp"

namespace dualdp {

enum class Picker { RandomUniform, RoundRobin, MaxBellmanError, RepeatUntilTol };

/// CLI spellings: random-uniform, round-robin, max-error, repeat-until-tol.
std::string to_string(Picker p);
std::optional<Picker> parse_picker(const std::string& name);

using Rng = std::mt19937_64;

struct GddpConfig {
  double delta = 1e-3;
  int max_iterations = 1000;
  Picker picker = Picker::RandomUniform;
  int check_every = 5;  // 0 disables measurement; the run then stops at max_iterations
  std::uint64_t rng_seed = 0x5eed0fdd9ULL;
  bool prune = false;
  int jobs = 1;  // workers for the all-sample error measurement
  bool record_timing = false;  // wall_ms stays 0 otherwise, keeping traces reproducible
  SolverConfig solver;
};

struct IterationRecord {
  int iteration = 0;  // I after the step
  int picked_index = -1;
  double j_p = 0.0;
  double duality_gap = 0.0;
  double error_before = 0.0;  // J_P - V_I(x_hat)
  double value_before = 0.0;  // V_I(x_hat)
  double value_after = 0.0;   // V_{I+1}(x_hat)
  bool strong_duality = true;
  bool infeasible = false;
  double max_bellman_error = 0.0;  // ||eps(V_I)|| if checked at I, else last measured; NaN before any check
  double wall_ms = 0.0;
};

struct GddpState {
  ValueApprox V;
  std::vector<Vector> samples;
  Vector errors;                  // last measured (possibly stale) Bellman errors
  std::vector<bool> infeasible;   // one-stage problem found infeasible; never picked again
  int iteration = 0;
  int cursor = 0;                 // RoundRobin / RepeatUntilTol position
  double last_max_error;
  std::vector<IterationRecord> history;

  GddpState(int n, std::vector<Vector> samples);
};

struct GddpResult {
  ValueApprox V;
  int iterations = 0;
  bool converged = false;
  Vector final_errors;
  std::vector<bool> infeasible;
  std::vector<IterationRecord> trace;
};

struct BellmanErrorResult {
  double value = 0.0;    // J_P - V(x); 0 when infeasible
  bool infeasible = false;
  OneStageResult solve;
};

/// T V(x) - V(x) with the class-appropriate one-stage solver.
BellmanErrorResult bellman_error(const ControlProblem& problem, const ValueApprox& V, const Vector& x,
                                 const SolverConfig& cfg = {});

/// Next sample to solve at. Throws Exhausted when every sample is infeasible.
std::size_t pick_next_state(GddpState& state, const GddpConfig& cfg, Rng& rng);

/// One pick, one solve, one bound (or an infeasibility mark).
void gddp_iterate(const ProblemPtr& problem, GddpState& state, const GddpConfig& cfg, Rng& rng);

/// Solves at every feasible sample, refreshes state.errors and the mask, and
/// returns the largest error over feasible samples.
double measure_errors(const ControlProblem& problem, GddpState& state, const GddpConfig& cfg);

/// Algorithm loop: measure (on cadence), stop on ||eps||_inf <= delta, pick,
/// solve, append. `initial` seeds the approximation when given.
GddpResult run_gddp(const ProblemPtr& problem, std::vector<Vector> samples, const GddpConfig& cfg,
                    std::optional<ValueApprox> initial = std::nullopt);

/// Drops bounds that are dominated by another bound with the same curvature
/// and linear term, after checking at `probes` that the maximum is unchanged
/// bit for bit. g_0 is always kept.
ValueApprox prune_redundant(const ValueApprox& V, const std::vector<Vector>& probes);

/// iteration,picked_index,J_P,duality_gap,max_bellman_error,wall_ms
void write_trace_csv(std::ostream& os, const std::vector<IterationRecord>& trace);

}  // namespace dualdp
