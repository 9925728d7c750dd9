#include "dualdp/gddp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "parallel.hpp"

namespace dualdp {

std::string to_string(Picker p) {
  switch (p) {
    case Picker::RandomUniform: return "random-uniform";
    case Picker::RoundRobin: return "round-robin";
    case Picker::MaxBellmanError: return "max-error";
    case Picker::RepeatUntilTol: return "repeat-until-tol";
  }
  return "unknown";
}

std::optional<Picker> parse_picker(const std::string& name) {
  for (Picker p : {Picker::RandomUniform, Picker::RoundRobin, Picker::MaxBellmanError, Picker::RepeatUntilTol})
    if (to_string(p) == name) return p;
  return std::nullopt;
}

GddpState::GddpState(int n, std::vector<Vector> s)
    : V(n),
      samples(std::move(s)),
      errors(Vector::Zero(static_cast<int>(samples.size()))),
      infeasible(samples.size(), false),
      last_max_error(std::numeric_limits<double>::quiet_NaN()) {}

BellmanErrorResult bellman_error(const ControlProblem& problem, const ValueApprox& V, const Vector& x,
                                 const SolverConfig& cfg) {
  BellmanErrorResult out;
  out.solve = solve_onestage(problem, V, x, cfg);
  if (out.solve.primal.status == SolveStatus::Infeasible) {
    out.infeasible = true;
    return out;
  }
  if (!out.solve.optimal())
    throw Error(ErrorKind::NumericalFailure, "bellman error: one-stage solve did not converge");
  out.value = out.solve.primal.cost - V(x);
  return out;
}

namespace {

int next_feasible(const GddpState& s, int from) {
  const int M = static_cast<int>(s.samples.size());
  for (int k = 0; k < M; ++k) {
    const int i = (from + k) % M;
    if (!s.infeasible[i]) return i;
  }
  return -1;
}

bool stale_errors_uninformative(const GddpState& s, double delta) {
  for (std::size_t i = 0; i < s.samples.size(); ++i)
    if (!s.infeasible[i] && s.errors(i) > delta) return false;
  return true;
}

}  // namespace

std::size_t pick_next_state(GddpState& s, const GddpConfig& cfg, Rng& rng) {
  const int M = static_cast<int>(s.samples.size());
  std::vector<int> feasible;
  for (int i = 0; i < M; ++i)
    if (!s.infeasible[i]) feasible.push_back(i);
  if (feasible.empty()) throw Error(ErrorKind::Exhausted, "every sample is infeasible");

  switch (cfg.picker) {
    case Picker::RandomUniform: {
      std::uniform_int_distribution<std::size_t> dist(0, feasible.size() - 1);
      return static_cast<std::size_t>(feasible[dist(rng)]);
    }
    case Picker::RoundRobin: {
      const int i = next_feasible(s, s.cursor);
      s.cursor = (i + 1) % M;
      return static_cast<std::size_t>(i);
    }
    case Picker::MaxBellmanError: {
      int best = feasible.front();
      for (int i : feasible)
        if (s.errors(i) > s.errors(best)) best = i;
      return static_cast<std::size_t>(best);
    }
    case Picker::RepeatUntilTol:
      return static_cast<std::size_t>(next_feasible(s, s.cursor));
  }
  return 0;
}

void gddp_iterate(const ProblemPtr& problem, GddpState& s, const GddpConfig& cfg, Rng& rng) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t idx = pick_next_state(s, cfg, rng);
  const Vector& x = s.samples[idx];

  IterationRecord rec;
  rec.picked_index = static_cast<int>(idx);
  rec.value_before = s.V(x);
  const OneStageResult res = solve_onestage(*problem, s.V, x, cfg.solver);
  if (res.primal.status == SolveStatus::Infeasible) {
    s.infeasible[idx] = true;
    rec.infeasible = true;
    rec.j_p = std::numeric_limits<double>::infinity();
    rec.value_after = rec.value_before;
  } else if (!res.optimal()) {
    throw Error(ErrorKind::NumericalFailure, "iteration " + std::to_string(s.iteration + 1) +
                                                 ": one-stage solve at sample " + std::to_string(idx) +
                                                 " failed (" + to_string(res.primal.status) + ")");
  } else {
    const BoundConstruction bc = build_lower_bound(problem, x, res, cfg.solver);
    s.V.append(bc.bound);
    rec.j_p = res.primal.cost;
    rec.duality_gap = bc.relative_gap;
    rec.strong_duality = bc.strong_duality;
    rec.error_before = res.primal.cost - rec.value_before;
    rec.value_after = s.V(x);
  }
  // The picked point is freshly tightened; its stale error is no longer informative.
  s.errors(idx) = 0.0;
  if (cfg.picker == Picker::RepeatUntilTol && (rec.infeasible || rec.error_before <= cfg.delta))
    s.cursor = (static_cast<int>(idx) + 1) % static_cast<int>(s.samples.size());

  ++s.iteration;
  rec.iteration = s.iteration;
  rec.max_bellman_error = s.last_max_error;
  if (cfg.record_timing)
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  s.history.push_back(rec);
}

double measure_errors(const ControlProblem& problem, GddpState& s, const GddpConfig& cfg) {
  const std::size_t M = s.samples.size();
  std::vector<BellmanErrorResult> out(M);
  detail::parallel_for(M, cfg.jobs, [&](std::size_t i) {
    if (!s.infeasible[i]) out[i] = bellman_error(problem, s.V, s.samples[i], cfg.solver);
  });
  double worst = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    if (s.infeasible[i] || out[i].infeasible) {
      s.infeasible[i] = true;
      s.errors(i) = 0.0;
      continue;
    }
    s.errors(i) = out[i].value;
    worst = std::max(worst, out[i].value);
  }
  s.last_max_error = worst;
  // A check right after a step measures V_I for that step's row.
  if (!s.history.empty() && s.history.back().iteration == s.iteration) s.history.back().max_bellman_error = worst;
  return worst;
}

GddpResult run_gddp(const ProblemPtr& problem, std::vector<Vector> samples, const GddpConfig& cfg,
                    std::optional<ValueApprox> initial) {
  require(problem != nullptr, "gddp: problem required");
  require(!samples.empty(), "gddp: sample set must not be empty");
  require(cfg.delta > 0.0, "gddp: delta must be positive");
  require(cfg.check_every >= 0 && cfg.max_iterations >= 0, "gddp: negative iteration settings");
  require(cfg.check_every > 0 || cfg.picker == Picker::RandomUniform || cfg.picker == Picker::RoundRobin,
          "gddp: error-driven pickers need convergence checks");
  for (const auto& x : samples) require(x.size() == problem->n, "gddp: sample has wrong dimension");

  Rng rng(cfg.rng_seed);
  GddpState s(problem->n, std::move(samples));
  if (initial) s.V = *initial;

  GddpResult result{s.V, 0, false, {}, {}, {}};
  for (;;) {
    const bool scheduled = cfg.check_every > 0 && s.iteration % cfg.check_every == 0;
    const bool forced = cfg.check_every > 0 && cfg.picker == Picker::MaxBellmanError &&
                        stale_errors_uninformative(s, cfg.delta);
    if (scheduled || forced) {
      if (measure_errors(*problem, s, cfg) <= cfg.delta) {
        result.converged = true;
        break;
      }
    }
    if (s.iteration >= cfg.max_iterations) break;
    if (std::all_of(s.infeasible.begin(), s.infeasible.end(), [](bool b) { return b; })) {
      result.converged = true;  // every error is zero by convention
      break;
    }
    gddp_iterate(problem, s, cfg, rng);
  }

  result.V = cfg.prune ? prune_redundant(s.V, s.samples) : s.V;
  result.iterations = s.iteration;
  result.final_errors = s.errors;
  result.infeasible = s.infeasible;
  result.trace = std::move(s.history);
  return result;
}

ValueApprox prune_redundant(const ValueApprox& V, const std::vector<Vector>& probes) {
  const std::size_t N = V.size();
  std::vector<bool> keep(N, true);
  for (std::size_t i = 1; i < N; ++i) {
    const auto& qi = V[i].materialized();
    if (!qi) continue;
    for (std::size_t j = 1; j < N && keep[i]; ++j) {
      if (j == i || !keep[j]) continue;
      const auto& qj = V[j].materialized();
      if (!qj || qj->hessian() != qi->hessian() || qj->linear() != qi->linear()) continue;
      if (qi->constant() < qj->constant() || (qi->constant() == qj->constant() && i > j)) keep[i] = false;
    }
  }

  std::vector<std::shared_ptr<const LowerBound>> kept;
  for (std::size_t i = 0; i < N; ++i)
    if (keep[i]) kept.push_back(V.share(i));
  if (kept.size() == N) return V;
  ValueApprox pruned = ValueApprox::from_bounds(V.dim(), std::move(kept));
  for (const auto& x : probes)
    if (pruned(x) != V(x)) return V;  // inconclusive: keep everything
  return pruned;
}

void write_trace_csv(std::ostream& os, const std::vector<IterationRecord>& trace) {
  os << "iteration,picked_index,J_P,duality_gap,max_bellman_error,wall_ms\n";
  char buf[256];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.picked_index, r.j_p,
                  r.duality_gap, r.max_bellman_error, r.wall_ms);
    os << buf;
  }
}

}  // namespace dualdp
