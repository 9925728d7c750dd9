#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dualdp/bench.hpp"
#include "dualdp/io.hpp"
#include "dualdp/oracles.hpp"

namespace dualdp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string problem;
  std::string out;
  std::string seed = "1";
  std::string format = "csv";
  int jobs = 1;
  bool timing = false;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::uint64_t parse_seed(const std::string& s) {
  if (s == "random") return std::random_device{}() * 0x100000001ULL ^ std::random_device{}();
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::InvalidArgument, "--seed expects an unsigned integer or \"random\"");
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, std::string(flag) + ": cannot read \"" + item + "\" as a number");
    }
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, std::string(flag) + ": empty list");
  return out;
}

Vector parse_vector(const std::string& text, const char* flag) {
  const auto v = parse_list(text, flag);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<int> parse_ints(const std::string& text, const char* flag) {
  std::vector<int> out;
  for (double v : parse_list(text, flag)) {
    if (v != std::floor(v) || v < 0)
      throw Error(ErrorKind::InvalidArgument, std::string(flag) + ": expects nonnegative integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<Vector> read_states(const fs::path& path, int n) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": malformed JSON at byte " + std::to_string(e.byte));
  }
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::Parse, path.string() + ": expected a list of states");
  std::vector<Vector> out;
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      throw Error(ErrorKind::Parse, path.string() + ": every state needs " + std::to_string(n) + " entries");
    Vector x(n);
    for (int i = 0; i < n; ++i) {
      if (!row[i].is_number()) throw Error(ErrorKind::Parse, path.string() + ": non-numeric entry");
      x(i) = row[i].get<double>();
    }
    out.push_back(std::move(x));
  }
  return out;
}

ProblemPtr load_checked(const std::string& path) {
  if (path.empty()) throw Error(ErrorKind::InvalidArgument, "--problem is required");
  auto p = std::make_shared<ControlProblem>(load_problem(path));
  const ValidationReport report = validate_problem(*p);
  if (!report.accepted) throw Error(ErrorKind::Validation, "problem-core: " + report.summary());
  p->problem_class = report.problem_class;
  return p;
}

/// Artifacts go under --out only; without it nothing is written.
class Artifacts {
 public:
  explicit Artifacts(const std::string& dir) : dir_(dir) {
    if (!dir_.empty()) fs::create_directories(dir_);
  }
  bool enabled() const { return !dir_.empty(); }
  void write(const std::string& name, const std::string& content, bool binary = false) const {
    if (!enabled()) return;
    std::ofstream os(dir_ / name, binary ? std::ios::binary : std::ios::out);
    if (!os) throw Error(ErrorKind::InvalidArgument, "cannot write " + (dir_ / name).string());
    os << content;
  }

 private:
  fs::path dir_;
};

using Clock = std::chrono::steady_clock;

std::string wall_suffix(bool timing, Clock::time_point start) {
  if (!timing) return "";
  return " wall_s=" + fmt(std::chrono::duration<double>(Clock::now() - start).count());
}

// ---------------------------------------------------------------------------

int cmd_validate(const Common& c, std::ostream& out) {
  if (c.problem.empty()) throw Error(ErrorKind::InvalidArgument, "--problem is required");
  const ControlProblem p = load_problem(c.problem);
  const ValidationReport report = validate_problem(p);
  out << report.summary() << "\n";
  return report.accepted ? 0 : 1;
}

struct RunFlags {
  std::string config;
  std::string states;
  int samples = 10;
  double sample_stddev = 5.0;
  double delta = 1e-3;
  std::string picker = "random-uniform";
  int max_iters = 1000;
  int check_every = 5;
  bool prune = false;
};

GddpConfig apply_config_file(const std::string& path) {
  GddpConfig cfg;
  if (path.empty()) return cfg;
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, path + ": malformed JSON at byte " + std::to_string(e.byte));
  }
  try {
    if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
    if (j.contains("max_iterations")) cfg.max_iterations = j.at("max_iterations").get<int>();
    if (j.contains("check_every")) cfg.check_every = j.at("check_every").get<int>();
    if (j.contains("prune")) cfg.prune = j.at("prune").get<bool>();
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    if (j.contains("seed")) cfg.rng_seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("picker")) {
      const auto p = parse_picker(j.at("picker").get<std::string>());
      if (!p) throw Error(ErrorKind::InvalidArgument, path + ": unknown picker");
      cfg.picker = *p;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
  return cfg;
}

int cmd_run(const Common& c, const RunFlags& f, const CLI::App& app, std::ostream& out) {
  const auto start = Clock::now();
  const ProblemPtr p = load_checked(c.problem);
  GddpConfig cfg = apply_config_file(f.config);
  auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--delta") || f.config.empty()) cfg.delta = f.delta;
  if (given("--max-iters") || f.config.empty()) cfg.max_iterations = f.max_iters;
  if (given("--check-every") || f.config.empty()) cfg.check_every = f.check_every;
  if (given("--prune")) cfg.prune = f.prune;
  if (given("--jobs") || f.config.empty()) cfg.jobs = c.jobs;
  if (given("--seed") || f.config.empty()) cfg.rng_seed = parse_seed(c.seed);
  if (given("--picker") || f.config.empty()) {
    const auto picker = parse_picker(f.picker);
    if (!picker) throw Error(ErrorKind::InvalidArgument, "--picker: unknown name \"" + f.picker + "\"");
    cfg.picker = *picker;
  }
  cfg.record_timing = c.timing;

  std::vector<Vector> samples;
  if (!f.states.empty()) {
    samples = read_states(f.states, p->n);
  } else {
    Rng rng = derive_rng(cfg.rng_seed, {1});
    samples = sample_states(p->n, f.samples, f.sample_stddev, rng);
  }

  const GddpResult r = run_gddp(p, samples, cfg);
  double max_eps = std::numeric_limits<double>::quiet_NaN();
  if (r.final_errors.size() > 0) {
    max_eps = 0.0;
    for (int i = 0; i < r.final_errors.size(); ++i)
      if (!r.infeasible[i]) max_eps = std::max(max_eps, r.final_errors(i));
  }

  const Artifacts art(c.out);
  std::ostringstream trace;
  write_trace_csv(trace, r.trace);
  art.write("trace.csv", trace.str());
  art.write("value.json", value_approx_to_json(r.V));

  out << "iterations=" << r.iterations << " converged=" << (r.converged ? "true" : "false")
      << " max_eps=" << fmt(max_eps) << " bounds=" << r.V.size() << wall_suffix(c.timing, start) << "\n";
  return 0;
}

struct CertifyFlags {
  std::string value;
  std::string state;
  std::string anchor;
  std::string method = "m1";
  std::string waypoints;
  int horizon = 0;
  int max_steps = 200;
};

int cmd_certify(const Common& c, const CertifyFlags& f, std::ostream& out) {
  const auto start = Clock::now();
  const ProblemPtr p = load_checked(c.problem);
  if (f.value.empty()) throw Error(ErrorKind::InvalidArgument, "--value is required");
  const ValueApprox V = value_approx_from_json(read_text_file(f.value), p);
  const Vector anchor = f.anchor.empty() ? Vector::Zero(p->n) : parse_vector(f.anchor, "--anchor");
  if (anchor.size() != p->n) throw Error(ErrorKind::InvalidArgument, "--anchor has the wrong dimension");
  CertifyConfig cfg;
  cfg.horizon = f.horizon;
  cfg.max_steps = f.max_steps;

  SuboptimalityCertificate cert;
  if (f.method == "m1") {
    if (f.state.empty()) throw Error(ErrorKind::InvalidArgument, "--state is required for m1");
    const Vector x = parse_vector(f.state, "--state");
    if (x.size() != p->n) throw Error(ErrorKind::InvalidArgument, "--state has the wrong dimension");
    cert = certify_m1(*p, V, x, anchor, cfg);
  } else if (f.method == "m2") {
    if (f.waypoints.empty()) throw Error(ErrorKind::InvalidArgument, "--waypoints is required for m2");
    cert = certify_m2(*p, V, read_states(f.waypoints, p->n), anchor, cfg);
  } else {
    throw Error(ErrorKind::InvalidArgument, "--method expects m1 or m2");
  }

  const std::string doc = certificate_to_json(cert);
  const Artifacts art(c.out);
  if (art.enabled()) art.write("certificate.json", doc);
  else out << doc;
  out << "lower=" << fmt(cert.lower) << " upper=" << fmt(cert.upper) << " steps=" << cert.steps.size()
      << " method=" << to_string(cert.method) << wall_suffix(c.timing, start) << "\n";
  return 0;
}

struct IterFlags {
  std::string dims = "1x1,2x1,3x1";
  std::string sample_counts = "1,2,5,10";
  double delta = 1e-3;
  int max_iters = 2000;
  double sample_stddev = 5.0;
};

int cmd_bench_iterations(const Common& c, const IterFlags& f, std::ostream& out) {
  const auto start = Clock::now();
  IterationsExperimentConfig cfg;
  cfg.dims.clear();
  std::stringstream ss(f.dims);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int n = 0, m = 0;
    char x = 0;
    std::istringstream is(item);
    if (!(is >> n >> x >> m) || x != 'x' || n < 1 || m < 1)
      throw Error(ErrorKind::InvalidArgument, "--dims expects entries like 2x1");
    cfg.dims.emplace_back(n, m);
  }
  cfg.sample_counts = parse_ints(f.sample_counts, "--sample-counts");
  cfg.delta = f.delta;
  cfg.seed = parse_seed(c.seed);
  cfg.max_iterations = f.max_iters;
  cfg.sample_stddev = f.sample_stddev;
  cfg.record_timing = c.timing;
  const auto cells = run_iterations_experiment(cfg);

  const Artifacts art(c.out);
  if (c.format == "json") {
    json rows = json::array();
    for (const auto& cell : cells)
      rows.push_back({{"n", cell.n}, {"m", cell.m}, {"M", cell.M}, {"iterations", cell.iterations},
                      {"converged", cell.converged}, {"wall_seconds", cell.wall_seconds}});
    art.write("iterations.json", rows.dump(2) + "\n");
  } else {
    std::ostringstream os;
    write_iterations_csv(os, cells);
    art.write("iterations.csv", os.str());
  }
  int converged = 0;
  for (const auto& cell : cells) converged += cell.converged;
  out << "cells=" << cells.size() << " converged=" << converged << wall_suffix(c.timing, start) << "\n";
  return 0;
}

struct QualityFlags {
  int n = 2;
  int m = 1;
  int samples = 50;
  int iters = 50;
  int eval_samples = 200;
  double sample_stddev = 5.0;
};

int cmd_bench_quality(const Common& c, const QualityFlags& f, std::ostream& out) {
  const auto start = Clock::now();
  QualityConfig cfg;
  cfg.n = f.n;
  cfg.m = f.m;
  cfg.M = f.samples;
  cfg.iterations = f.iters;
  cfg.eval_samples = f.eval_samples;
  cfg.sample_stddev = f.sample_stddev;
  cfg.seed = parse_seed(c.seed);
  cfg.jobs = c.jobs;
  cfg.record_timing = c.timing;
  const ExperimentRow row = run_quality_experiment(cfg);

  const Artifacts art(c.out);
  if (c.format == "json") {
    const json j{{"n", row.n},
                 {"m", row.m},
                 {"M", row.M},
                 {"iterations", row.iterations},
                 {"rbe_in", row.rbe_in},
                 {"subopt_in", row.subopt_in},
                 {"rbe_out", row.rbe_out},
                 {"subopt_out", row.subopt_out},
                 {"excluded_in", row.excluded_in},
                 {"excluded_out", row.excluded_out},
                 {"cert_failures_in", row.cert_failures_in},
                 {"cert_failures_out", row.cert_failures_out},
                 {"wall_seconds", row.wall_seconds}};
    art.write("quality.json", j.dump(2) + "\n");
  } else {
    std::ostringstream os;
    write_quality_csv(os, {row});
    art.write("quality.csv", os.str());
  }
  out << "iterations=" << row.iterations << " rbe_in=" << fmt(row.rbe_in) << "% rbe_out=" << fmt(row.rbe_out)
      << "% subopt_in=" << fmt(row.subopt_in) << "% subopt_out=" << fmt(row.subopt_out) << "%"
      << wall_suffix(c.timing, start) << "\n";
  return 0;
}

struct BallBeamFlags {
  int samples = 100;
  std::string budgets = "50,100,150,200";
  int rollout_steps = 100;
};

int cmd_ball_and_beam(const Common& c, const BallBeamFlags& f, std::ostream& out) {
  const auto start = Clock::now();
  BallBeamConfig cfg;
  cfg.samples = f.samples;
  cfg.budgets = parse_ints(f.budgets, "--budgets");
  cfg.rollout_steps = f.rollout_steps;
  cfg.seed = parse_seed(c.seed);
  const auto runs = run_ball_and_beam(cfg);

  const Artifacts art(c.out);
  std::ostringstream os;
  write_trajectories_jsonl(os, runs);
  art.write("trajectories.jsonl", os.str());
  out << "budgets=" << runs.size() << " final_norms=";
  for (std::size_t i = 0; i < runs.size(); ++i) out << (i ? "," : "") << fmt(runs[i].final_norm);
  out << wall_suffix(c.timing, start) << "\n";
  return 0;
}

struct ViFlags {
  std::string lower;
  std::string upper;
  int state_points = 51;
  int input_points = 11;
  double tol = 1e-3;
  int max_sweeps = 100000;
};

int cmd_value_iteration(const Common& c, const ViFlags& f, bool want_table, std::ostream& out) {
  const auto start = Clock::now();
  const ProblemPtr p = load_checked(c.problem);
  if (f.lower.empty() || f.upper.empty())
    throw Error(ErrorKind::InvalidArgument, "--lower and --upper are required");
  const Vector lo = parse_vector(f.lower, "--lower"), hi = parse_vector(f.upper, "--upper");
  const GridViResult r =
      grid_value_iteration(*p, lo, hi, f.state_points, f.input_points, f.tol, f.max_sweeps, c.jobs);

  const Artifacts art(c.out);
  // The binary grid is always written; --format csv adds a readable table.
  std::ostringstream bin(std::ios::binary);
  r.value.save(bin);
  art.write("value_grid.bin", bin.str(), true);
  if (want_table && c.format == "csv") {
    std::ostringstream os;
    for (int d = 0; d < p->n; ++d) os << "x" << d + 1 << ",";
    os << "value\n";
    char buf[32];
    for (std::size_t i = 0; i < r.value.size(); ++i) {
      const Vector x = r.value.point(i);
      for (int d = 0; d < p->n; ++d) {
        std::snprintf(buf, sizeof buf, "%.17g,", x(d));
        os << buf;
      }
      std::snprintf(buf, sizeof buf, "%.17g\n", r.value.values()[i]);
      os << buf;
    }
    art.write("value_grid.csv", os.str());
  }
  out << "sweeps=" << r.sweeps << " final_change=" << fmt(r.final_change)
      << " clamped_successors=" << r.clamped_successors << wall_suffix(c.timing, start) << "\n";
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool problem, bool jobs) {
  if (problem) sub->add_option("--problem", c.problem, "Problem JSON file");
  sub->add_option("--out", c.out, "Directory for artifacts");
  sub->add_option("--seed", c.seed, "Seed (u64 or \"random\")");
  sub->add_option("--format", c.format, "Table format")->check(CLI::IsMember({"csv", "json"}));
  if (jobs) sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_flag("--timing", c.timing, "Record wall-clock times");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual dynamic programming lower bounds for infinite-horizon control", "dualdp"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;
  RunFlags run;
  CertifyFlags cert;
  IterFlags iter;
  QualityFlags quality;
  BallBeamFlags bb;
  ViFlags vi;

  auto* validate = app.add_subcommand("validate", "Check a problem file and report its class");
  add_common(validate, common, true, false);

  auto* run_cmd = app.add_subcommand("run", "Run GDDP on a problem");
  add_common(run_cmd, common, true, true);
  run_cmd->add_option("--config", run.config, "GDDP settings as JSON; flags given explicitly win");
  run_cmd->add_option("--states", run.states, "JSON list of sample states");
  run_cmd->add_option("--samples", run.samples, "Number of random sample states")->check(CLI::PositiveNumber);
  run_cmd->add_option("--sample-stddev", run.sample_stddev, "Standard deviation of random samples");
  run_cmd->add_option("--delta", run.delta, "Bellman error tolerance")->check(CLI::PositiveNumber);
  run_cmd->add_option("--picker", run.picker, "random-uniform | round-robin | max-error | repeat-until-tol");
  run_cmd->add_option("--max-iters", run.max_iters, "Iteration cap")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--check-every", run.check_every, "Iterations between error measurements")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_flag("--prune", run.prune, "Drop dominated bounds at the end");

  auto* cert_cmd = app.add_subcommand("certify", "Suboptimality certificate for a stored approximation");
  add_common(cert_cmd, common, true, false);
  cert_cmd->add_option("--value", cert.value, "value.json written by run");
  cert_cmd->add_option("--state", cert.state, "Query state, comma separated");
  cert_cmd->add_option("--anchor", cert.anchor, "Anchor state (default origin)");
  cert_cmd->add_option("--method", cert.method, "m1 | m2");
  cert_cmd->add_option("--waypoints", cert.waypoints, "JSON list of states for m2");
  cert_cmd->add_option("--horizon", cert.horizon, "Greedy steps before the tail (0 = default)");
  cert_cmd->add_option("--max-steps", cert.max_steps, "Greedy step cap");

  auto* iter_cmd = app.add_subcommand("bench-iterations", "Iterations to tolerance versus sample count");
  add_common(iter_cmd, common, false, false);
  iter_cmd->add_option("--dims", iter.dims, "List of n x m, e.g. 1x1,2x1");
  iter_cmd->add_option("--sample-counts", iter.sample_counts, "List of M");
  iter_cmd->add_option("--delta", iter.delta, "Bellman error tolerance")->check(CLI::PositiveNumber);
  iter_cmd->add_option("--max-iters", iter.max_iters, "Iteration cap");
  iter_cmd->add_option("--sample-stddev", iter.sample_stddev, "Standard deviation of sample states");

  auto* quality_cmd = app.add_subcommand("bench-quality", "Bellman error and suboptimality after a budget");
  add_common(quality_cmd, common, false, true);
  quality_cmd->add_option("--n", quality.n, "State dimension")->check(CLI::PositiveNumber);
  quality_cmd->add_option("--m", quality.m, "Input dimension")->check(CLI::PositiveNumber);
  quality_cmd->add_option("--samples", quality.samples, "M")->check(CLI::PositiveNumber);
  quality_cmd->add_option("--max-iters", quality.iters, "Iteration budget");
  quality_cmd->add_option("--eval-samples", quality.eval_samples, "Out-of-sample evaluation states");
  quality_cmd->add_option("--sample-stddev", quality.sample_stddev, "Standard deviation of sample states");

  auto* bb_cmd = app.add_subcommand("ball-and-beam", "Greedy rollouts of the ball and beam after each budget");
  add_common(bb_cmd, common, false, false);
  bb_cmd->add_option("--samples", bb.samples, "M")->check(CLI::PositiveNumber);
  bb_cmd->add_option("--budgets", bb.budgets, "Iteration budgets, comma separated");
  bb_cmd->add_option("--rollout-steps", bb.rollout_steps, "Rollout length")->check(CLI::PositiveNumber);

  auto* vi_cmd = app.add_subcommand("value-iteration", "Gridded value iteration reference solution");
  add_common(vi_cmd, common, true, true);
  vi_cmd->add_option("--lower", vi.lower, "Grid lower corner, comma separated");
  vi_cmd->add_option("--upper", vi.upper, "Grid upper corner, comma separated");
  vi_cmd->add_option("--state-points", vi.state_points, "Grid points per state axis");
  vi_cmd->add_option("--input-points", vi.input_points, "Grid points per input axis");
  vi_cmd->add_option("--tol", vi.tol, "Sweep-to-sweep stopping tolerance")->check(CLI::PositiveNumber);
  vi_cmd->add_option("--max-sweeps", vi.max_sweeps, "Sweep cap");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "dualdp: " << e.what() << "\n";
    return 1;
  }

  try {
    if (validate->parsed()) return cmd_validate(common, out);
    if (run_cmd->parsed()) return cmd_run(common, run, *run_cmd, out);
    if (cert_cmd->parsed()) return cmd_certify(common, cert, out);
    if (iter_cmd->parsed()) return cmd_bench_iterations(common, iter, out);
    if (quality_cmd->parsed()) return cmd_bench_quality(common, quality, out);
    if (bb_cmd->parsed()) return cmd_ball_and_beam(common, bb, out);
    if (vi_cmd->parsed()) return cmd_value_iteration(common, vi, vi_cmd->count("--format") > 0, out);
  } catch (const Error& e) {
    err << "dualdp: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return e.is_user_error() ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    err << "dualdp: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "dualdp: internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace dualdp::cli
