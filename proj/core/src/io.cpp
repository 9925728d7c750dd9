#include "dualdp/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dualdp/bench.hpp"

namespace dualdp {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::Parse, what); }

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) bad(where + ": missing \"" + key + "\"");
  return obj.at(key);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) bad(where + ": expected a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) bad(where + ": expected an integer");
  return v.get<int>();
}

Vector vec(const json& v, int size, const std::string& where) {
  if (!v.is_array() || static_cast<int>(v.size()) != size)
    bad(where + ": expected an array of length " + std::to_string(size));
  Vector out(size);
  for (int i = 0; i < size; ++i) out(i) = number(v[i], where);
  return out;
}

Matrix mat(const json& v, int rows, int cols, const std::string& where) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows)
    bad(where + ": expected " + std::to_string(rows) + " rows");
  Matrix out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!v[r].is_array() || static_cast<int>(v[r].size()) != cols)
      bad(where + ": row " + std::to_string(r + 1) + " needs " + std::to_string(cols) + " entries");
    for (int c = 0; c < cols; ++c) out(r, c) = number(v[r][c], where);
  }
  return out;
}

Vector opt_vec(const json& obj, const char* key, int size, const std::string& where) {
  return obj.contains(key) ? vec(obj.at(key), size, where + "." + key) : Vector::Zero(size);
}

Matrix opt_mat(const json& obj, const char* key, int rows, int cols, const std::string& where) {
  return obj.contains(key) ? mat(obj.at(key), rows, cols, where + "." + key) : Matrix::Zero(rows, cols);
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Matrix& M) {
  json rows = json::array();
  for (int r = 0; r < M.rows(); ++r) {
    std::vector<double> row(M.cols());
    for (int c = 0; c < M.cols(); ++c) row[c] = M(r, c);
    rows.push_back(row);
  }
  return rows;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    bad("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

}  // namespace

ControlProblem parse_problem(const std::string& text) {
  const json j = parse_json(text);
  if (!j.is_object()) bad("problem: top level must be an object");
  if (j.contains("builtin")) {
    if (j.at("builtin") != "ball-and-beam") bad("problem: unknown builtin");
    return *ball_and_beam_problem();
  }

  ControlProblem p;
  p.n = integer(field(j, "n", "problem"), "problem.n");
  p.m = integer(field(j, "m", "problem"), "problem.m");
  if (p.n < 1 || p.m < 1) bad("problem: n and m must be positive");
  p.gamma = j.contains("gamma") ? number(j.at("gamma"), "problem.gamma") : 1.0;
  if (j.contains("name")) p.name = j.at("name").get<std::string>();

  const json& d = field(j, "dynamics", "problem");
  const std::string form = d.contains("form") ? d.at("form").get<std::string>() : "constant_b";
  const Matrix A = mat(field(d, "A", "dynamics"), p.n, p.n, "dynamics.A");
  const Vector a = opt_vec(d, "a", p.n, "dynamics");
  const Matrix B = mat(field(d, "B", "dynamics"), p.n, p.m, "dynamics.B");
  if (form == "constant_b") {
    p.dynamics = DynamicsModel::linear(A, a, B);
  } else if (form == "state_dependent") {
    const json& bx = field(d, "Bx", "dynamics");
    if (!bx.is_array() || static_cast<int>(bx.size()) != p.n) bad("dynamics.Bx: need one slope per state");
    std::vector<Matrix> slopes;
    for (int i = 0; i < p.n; ++i) slopes.push_back(mat(bx[i], p.n, p.m, "dynamics.Bx"));
    p.dynamics = DynamicsModel::bilinear(A, a, B, std::move(slopes));
  } else {
    bad("dynamics.form: expected \"constant_b\" or \"state_dependent\"");
  }

  const json& c = field(j, "cost", "problem");
  const int K = integer(field(c, "K", "cost"), "cost.K");
  const json& terms = field(c, "terms", "cost");
  if (!terms.is_array() || terms.empty()) bad("cost.terms: expected a nonempty array");
  std::vector<CostTerm> rows;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const std::string where = "cost.terms[" + std::to_string(t) + "]";
    const json& tj = terms[t];
    CostTerm term;
    term.owner = integer(field(tj, "owner", where), where + ".owner") - 1;
    term.phi = QuadraticForm(opt_mat(tj, "Q", p.n, p.n, where), opt_vec(tj, "q", p.n, where),
                             tj.contains("c") ? number(tj.at("c"), where + ".c") : 0.0);
    term.r = opt_vec(tj, "r", p.m, where);
    term.R = opt_mat(tj, "R", p.m, p.m, where);
    rows.push_back(std::move(term));
  }
  try {
    p.cost = StageCost(K, std::move(rows));
  } catch (const Error& e) {
    throw Error(ErrorKind::Validation, e.what());
  }

  if (j.contains("constraints")) {
    const json& cj = j.at("constraints");
    const json& E = field(cj, "E", "constraints");
    const int rows_c = E.is_array() ? static_cast<int>(E.size()) : 0;
    p.constraints.E = mat(E, rows_c, p.m, "constraints.E");
    p.constraints.h0 = vec(field(cj, "h0", "constraints"), rows_c, "constraints.h0");
    p.constraints.H = opt_mat(cj, "H", rows_c, p.n, "constraints");
  } else {
    p.constraints = InputConstraintSet::none(p.n, p.m);
  }
  if (j.contains("input_box")) {
    const json& b = j.at("input_box");
    p.constraints.box = InputBox{vec(field(b, "lower", "input_box"), p.m, "input_box.lower"),
                                 vec(field(b, "upper", "input_box"), p.m, "input_box.upper")};
  }

  if (j.contains("class")) {
    const std::string cls = j.at("class").get<std::string>();
    if (cls == "ConvexQuadratic") p.problem_class = ProblemClass::ConvexQuadratic;
    else if (cls == "NonlinearBruteForce") p.problem_class = ProblemClass::NonlinearBruteForce;
    else bad("problem.class: unknown class \"" + cls + "\"");
  } else {
    p.problem_class = eligible_class(p).value_or(ProblemClass::ConvexQuadratic);
  }
  return p;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ControlProblem load_problem(const std::filesystem::path& path) { return parse_problem(read_text_file(path)); }

std::string problem_to_json(const ControlProblem& p) {
  require(p.dynamics.affine_drift(), "problem_to_json: only affine-drift dynamics can be written");
  json j;
  j["n"] = p.n;
  j["m"] = p.m;
  j["gamma"] = p.gamma;
  if (!p.name.empty()) j["name"] = p.name;
  json d;
  d["form"] = p.dynamics.constant_input() ? "constant_b" : "state_dependent";
  d["A"] = to_json(p.dynamics.A());
  d["a"] = to_json(p.dynamics.a());
  d["B"] = to_json(p.dynamics.B());
  if (!p.dynamics.constant_input()) {
    d["Bx"] = json::array();
    for (const auto& S : p.dynamics.Bx()) d["Bx"].push_back(to_json(S));
  }
  j["dynamics"] = d;
  json terms = json::array();
  for (const auto& t : p.cost.terms())
    terms.push_back({{"owner", t.owner + 1},
                     {"Q", to_json(t.phi.hessian())},
                     {"q", to_json(t.phi.linear())},
                     {"c", t.phi.constant()},
                     {"r", to_json(t.r)},
                     {"R", to_json(t.R)}});
  j["cost"] = {{"K", p.cost.num_epigraph()}, {"terms", terms}};
  if (p.constraints.rows() > 0)
    j["constraints"] = {
        {"E", to_json(p.constraints.E)}, {"h0", to_json(p.constraints.h0)}, {"H", to_json(p.constraints.H)}};
  if (p.constraints.box)
    j["input_box"] = {{"lower", to_json(p.constraints.box->lower)}, {"upper", to_json(p.constraints.box->upper)}};
  j["class"] = to_string(p.problem_class);
  return j.dump(2) + "\n";
}

std::string value_approx_to_json(const ValueApprox& V) {
  json bounds = json::array();
  for (std::size_t i = 0; i < V.size(); ++i) {
    const LowerBound& b = V[i];
    json e{{"id", b.id()}};
    if (b.has_coefficients()) {
      e["anchor"] = to_json(b.anchor());
      e["offset"] = b.offset();
      e["lambda_beta"] = to_json(b.lambda_beta());
      e["lambda_c"] = to_json(b.lambda_c());
      e["nu"] = to_json(b.nu());
    } else {
      const QuadraticForm& q = *b.materialized();
      e["hessian"] = to_json(q.hessian());
      e["linear"] = to_json(q.linear());
      e["constant"] = q.constant();
    }
    bounds.push_back(std::move(e));
  }
  return json{{"n", V.dim()}, {"bounds", bounds}}.dump() + "\n";
}

ValueApprox value_approx_from_json(const std::string& text, const ProblemPtr& problem) {
  const json j = parse_json(text);
  const int n = integer(field(j, "n", "value"), "value.n");
  if (problem && n != problem->n) bad("value: dimension does not match the problem");
  const json& list = field(j, "bounds", "value");
  if (!list.is_array() || list.empty()) bad("value.bounds: expected a nonempty array");
  std::vector<std::shared_ptr<const LowerBound>> bounds;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "value.bounds[" + std::to_string(i) + "]";
    const json& e = list[i];
    LowerBound b;
    if (e.contains("nu")) {
      if (!problem) bad(where + ": multiplier bounds need the problem");
      b = LowerBound::restore(problem, vec(field(e, "anchor", where), n, where + ".anchor"),
                              number(field(e, "offset", where), where + ".offset"),
                              vec(field(e, "lambda_beta", where), problem->cost.num_terms(), where + ".lambda_beta"),
                              vec(field(e, "lambda_c", where), problem->constraints.rows(), where + ".lambda_c"),
                              vec(field(e, "nu", where), n, where + ".nu"));
    } else {
      b = LowerBound::from_quadratic(QuadraticForm(mat(field(e, "hessian", where), n, n, where + ".hessian"),
                                                   vec(field(e, "linear", where), n, where + ".linear"),
                                                   number(field(e, "constant", where), where + ".constant")));
    }
    b.set_id(integer(field(e, "id", where), where + ".id"));
    bounds.push_back(std::make_shared<const LowerBound>(std::move(b)));
  }
  try {
    return ValueApprox::from_bounds(n, std::move(bounds));
  } catch (const Error& e) {
    bad(e.what());
  }
}

std::string certificate_to_json(const SuboptimalityCertificate& cert) {
  json steps = json::array();
  for (const auto& s : cert.steps)
    steps.push_back({{"x", to_json(s.x)}, {"u", to_json(s.u)}, {"theta", s.theta}, {"eps", s.eps}});
  json j{{"query_state", to_json(cert.query_state)},
         {"lower", cert.lower},
         {"upper", cert.upper},
         {"method", to_string(cert.method)},
         {"steps", steps}};
  return j.dump() + "\n";
}

}  // namespace dualdp
