#pragma once

#include <filesystem>
#include <string>

#include "dualdp/certify.hpp"
#include "dualdp/value_approx.hpp"

namespace dualdp {

/// Problem file:
///   {"n", "m", "gamma",
///    "dynamics": {"form": "constant_b" | "state_dependent", "A", "a", "B", "Bx"},
///    "cost": {"K", "terms": [{"owner", "Q", "q", "c", "r", "R"}]},
///    "constraints": {"E", "h0", "H"}, "input_box": {"lower", "upper"}, "class", "name"}
/// Matrices are row-major nested arrays, owners are 1-based, and "Bx" lists
/// one n x m slope per state for state-dependent input matrices. The file
/// {"builtin": "ball-and-beam"} selects the built-in nonlinear example.
/// Throws Parse with the byte offset for malformed JSON.
ControlProblem parse_problem(const std::string& text);
ControlProblem load_problem(const std::filesystem::path& path);

/// Inverse of parse_problem for problems with linear or bilinear dynamics.
std::string problem_to_json(const ControlProblem& problem);

/// {"n", "bounds": [{"id", "anchor", "offset", "lambda_beta", "lambda_c", "nu"} |
///                  {"id", "hessian", "linear", "constant"}]}
std::string value_approx_to_json(const ValueApprox& V);
ValueApprox value_approx_from_json(const std::string& text, const ProblemPtr& problem);

/// {"query_state", "lower", "upper", "method", "steps": [{"x", "u", "theta", "eps"}]}
std::string certificate_to_json(const SuboptimalityCertificate& cert);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace dualdp
