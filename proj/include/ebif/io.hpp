#pragma once

#include <nlohmann/json.hpp>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ebif/engine.hpp"
#include "ebif/parser.hpp"
#include "ebif/simulate.hpp"
#include "ebif/system.hpp"

namespace ebif {

using Json = nlohmann::ordered_json;

/// A parsed system definition file.
struct SystemFile {
  NonlinearSystem system;
  std::vector<CanonicalExpr> gamma0;
  ParamTable params;
};

namespace detail {

[[noreturn]] inline void io_fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::InvalidInput, where.empty() ? what : where + ": " + what);
}

/// Parses JSON text; syntax errors report 1-based line and column.
inline Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t offset = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string msg = e.what();
    if (auto cut = msg.find(": "); cut != std::string::npos) msg = msg.substr(cut + 2);
    throw Error(ErrorKind::SyntaxError, source + ":" + std::to_string(line) + ":" + std::to_string(column) +
                                            ": invalid JSON (" + msg + ")");
  }
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline const Json& member(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) io_fail(where, std::string("missing field '") + key + "'");
  return *it;
}

inline const Json& array_of(const Json& v, std::size_t size, const std::string& where) {
  if (!v.is_array()) io_fail(where, "expected an array");
  if (size != static_cast<std::size_t>(-1) && v.size() != size)
    io_fail(where, "expected " + std::to_string(size) + " entries, found " + std::to_string(v.size()));
  return v;
}

inline std::size_t count_of(const Json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) io_fail(where, "expected a non-negative integer");
  return v.get<std::size_t>();
}

/// Parses one expression string; errors carry the field path and the column in the string.
inline CanonicalExpr expr_at(const Json& v, std::size_t n, const ParamTable& params, const std::string& where) {
  if (!v.is_string()) io_fail(where, "expected an expression string");
  try {
    return parse_expr(v.get<std::string>(), n, params);
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), e.column(), where + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
}

/// Rational from a "p/q" or decimal string, or from a JSON number via its shortest text form.
inline Rational rational_at(const Json& v, const std::string& where) {
  try {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number()) return parse_rational(v.dump());
  } catch (const Error& e) {
    io_fail(where, e.what());
  }
  io_fail(where, "expected a rational string or number");
}

inline RationalVector rational_vector_at(const Json& v, std::size_t size, const std::string& where) {
  array_of(v, size, where);
  RationalVector out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(rational_at(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline RationalMatrix rational_matrix_at(const Json& v, std::size_t rows, std::size_t cols, const std::string& where) {
  array_of(v, rows, where);
  RationalMatrix out;
  for (std::size_t i = 0; i < rows; ++i)
    out.push_back(rational_vector_at(v[i], cols, where + "[" + std::to_string(i) + "]"));
  return out;
}

inline Json rational_json(const RationalVector& v) {
  Json out = Json::array();
  for (const auto& q : v) out.push_back(to_string(q));
  return out;
}

inline Json rational_json(const RationalMatrix& m) {
  Json out = Json::array();
  for (const auto& row : m) out.push_back(rational_json(row));
  return out;
}

inline std::vector<double> double_vector_at(const Json& v, const std::string& where) {
  array_of(v, static_cast<std::size_t>(-1), where);
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) io_fail(where + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

inline bool is_reserved_name(const std::string& name) {
  if (name == "sin" || name == "cos" || name == "exp") return true;
  return name.size() > 1 && name[0] == 'x' && name.find_first_not_of("0123456789", 1) == std::string::npos;
}

inline bool is_identifier(const std::string& name) {
  if (name.empty() || std::isdigit(static_cast<unsigned char>(name[0]))) return false;
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

inline void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) io_fail(where, "unknown field '" + key + "'");
  }
}

}  // namespace detail

/// {"name", "state_dim", "drift": [n], "controls": [[n], ...], "gamma0"?: [...], "params"?: {name: value}}.
inline SystemFile parse_system(const std::string& text, const std::string& source = "<system>") {
  using namespace detail;
  const Json doc = parse_json(text, source);
  if (!doc.is_object()) io_fail(source, "top level must be an object");
  check_keys(doc, {"name", "state_dim", "drift", "controls", "gamma0", "params"}, source);
  SystemFile out;
  if (auto it = doc.find("params"); it != doc.end()) {
    if (!it->is_object()) io_fail("params", "expected an object");
    for (const auto& [key, value] : it->items()) {
      if (!is_identifier(key) || is_reserved_name(key))
        io_fail("params", "'" + key + "' is not a usable parameter name");
      out.params.emplace(key, rational_at(value, "params." + key));
    }
  }
  const std::size_t n = count_of(member(doc, "state_dim", source), "state_dim");
  if (n == 0) io_fail("state_dim", "must be positive");
  const Json& drift = array_of(member(doc, "drift", source), n, "drift");
  std::vector<CanonicalExpr> f;
  for (std::size_t i = 0; i < n; ++i) f.push_back(expr_at(drift[i], n, out.params, "drift[" + std::to_string(i) + "]"));
  const Json& controls = array_of(member(doc, "controls", source), static_cast<std::size_t>(-1), "controls");
  std::vector<VectorField> g;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const std::string where = "controls[" + std::to_string(k) + "]";
    array_of(controls[k], n, where);
    std::vector<CanonicalExpr> comps;
    for (std::size_t i = 0; i < n; ++i)
      comps.push_back(expr_at(controls[k][i], n, out.params, where + "[" + std::to_string(i) + "]"));
    g.emplace_back(std::move(comps));
  }
  if (auto it = doc.find("gamma0"); it != doc.end()) {
    array_of(*it, static_cast<std::size_t>(-1), "gamma0");
    if (it->empty()) throw Error(ErrorKind::EmptySeed, "gamma0 is empty");
    for (std::size_t i = 0; i < it->size(); ++i)
      out.gamma0.push_back(expr_at((*it)[i], n, out.params, "gamma0[" + std::to_string(i) + "]"));
  }
  std::string name = "system";
  if (auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) io_fail("name", "expected a string");
    name = it->get<std::string>();
  }
  out.system = NonlinearSystem(name, VectorField(std::move(f)), std::move(g));
  return out;
}

inline SystemFile load_system(const std::filesystem::path& path) {
  return parse_system(detail::read_text(path), path.string());
}

inline Json realization_json(const BilinearRealization& real) {
  using detail::rational_json;
  Json j;
  j["name"] = real.name;
  j["n"] = real.n;
  j["m"] = real.m;
  j["r"] = real.r;
  j["status"] = to_string(real.status);
  j["constantMode"] = to_string(real.constantMode);
  j["chainDims"] = real.chainDims;
  j["kStar"] = real.kStar ? Json(*real.kStar) : Json(nullptr);
  Json basis = Json::array();
  for (const auto& e : real.psi) basis.push_back(to_string(e));
  j["basis"] = basis;
  j["A"] = rational_json(real.A);
  Json bs = Json::array();
  for (const auto& b : real.B) bs.push_back(rational_json(b));
  j["B"] = bs;
  j["D0"] = rational_json(real.D0);
  Json ds = Json::array();
  for (const auto& d : real.D) ds.push_back(rational_json(d));
  j["D"] = ds;
  Json rows = Json::array();
  for (const auto& p : real.projRows) rows.push_back(p ? rational_json(*p) : Json(nullptr));
  j["projRows"] = rows;
  j["projOffsets"] = rational_json(real.projOffsets);
  return j;
}

inline std::string write_realization(const BilinearRealization& real) { return realization_json(real).dump(2) + "\n"; }

inline BilinearRealization parse_realization(const std::string& text, const std::string& source = "<realization>") {
  using namespace detail;
  const Json doc = parse_json(text, source);
  if (!doc.is_object()) io_fail(source, "top level must be an object");
  BilinearRealization real;
  if (auto it = doc.find("name"); it != doc.end() && it->is_string()) real.name = it->get<std::string>();
  real.n = count_of(member(doc, "n", source), "n");
  real.m = count_of(member(doc, "m", source), "m");
  real.r = count_of(member(doc, "r", source), "r");
  try {
    real.status = parse_status(member(doc, "status", source).get<std::string>());
    real.constantMode = parse_constant_mode(member(doc, "constantMode", source).get<std::string>());
  } catch (const nlohmann::json::type_error&) {
    io_fail(source, "status and constantMode must be strings");
  }
  const Json& dims = array_of(member(doc, "chainDims", source), static_cast<std::size_t>(-1), "chainDims");
  for (std::size_t i = 0; i < dims.size(); ++i) real.chainDims.push_back(count_of(dims[i], "chainDims"));
  if (const Json& k = member(doc, "kStar", source); !k.is_null()) real.kStar = count_of(k, "kStar");
  const Json& basis = array_of(member(doc, "basis", source), real.r, "basis");
  for (std::size_t j = 0; j < real.r; ++j)
    real.psi.push_back(expr_at(basis[j], real.n, {}, "basis[" + std::to_string(j) + "]"));
  real.A = rational_matrix_at(member(doc, "A", source), real.r, real.r, "A");
  const Json& bs = array_of(member(doc, "B", source), real.m, "B");
  for (std::size_t i = 0; i < real.m; ++i)
    real.B.push_back(rational_matrix_at(bs[i], real.r, real.r, "B[" + std::to_string(i) + "]"));
  real.D0 = rational_vector_at(member(doc, "D0", source), real.r, "D0");
  const Json& ds = array_of(member(doc, "D", source), real.m, "D");
  for (std::size_t i = 0; i < real.m; ++i)
    real.D.push_back(rational_vector_at(ds[i], real.r, "D[" + std::to_string(i) + "]"));
  const Json& rows = array_of(member(doc, "projRows", source), real.n, "projRows");
  for (std::size_t i = 0; i < real.n; ++i) {
    if (rows[i].is_null())
      real.projRows.emplace_back();
    else
      real.projRows.emplace_back(rational_vector_at(rows[i], real.r, "projRows[" + std::to_string(i) + "]"));
  }
  real.projOffsets = rational_vector_at(member(doc, "projOffsets", source), real.n, "projOffsets");
  return real;
}

inline BilinearRealization load_realization(const std::filesystem::path& path) {
  return parse_realization(detail::read_text(path), path.string());
}

inline Json schedule_json(const ControlSchedule& sched) {
  Json j;
  j["breakpoints"] = sched.breakpoints;
  j["values"] = sched.values;
  return j;
}

inline std::string write_schedule(const ControlSchedule& sched) { return schedule_json(sched).dump(2) + "\n"; }

/// {"breakpoints": [...], "values": [[...], ...]}; structural checks only, see ControlSchedule::validate.
inline ControlSchedule parse_schedule(const std::string& text, const std::string& source = "<schedule>") {
  using namespace detail;
  const Json doc = parse_json(text, source);
  if (!doc.is_object()) io_fail(source, "top level must be an object");
  ControlSchedule sched;
  sched.breakpoints = double_vector_at(member(doc, "breakpoints", source), "breakpoints");
  const Json& values = array_of(member(doc, "values", source), static_cast<std::size_t>(-1), "values");
  for (std::size_t k = 0; k < values.size(); ++k)
    sched.values.push_back(double_vector_at(values[k], "values[" + std::to_string(k) + "]"));
  return sched;
}

inline ControlSchedule load_schedule(const std::filesystem::path& path) {
  return parse_schedule(detail::read_text(path), path.string());
}

struct SteeringReport {
  std::vector<double> initial;
  std::vector<double> target;
  std::vector<double> achieved;
  double cost = 0.0;
  std::size_t iterations = 0;
  double wallSeconds = 0.0;
};

inline std::string write_steering_report(const SteeringReport& rep) {
  Json j;
  j["initial"] = rep.initial;
  j["target"] = rep.target;
  j["achieved"] = rep.achieved;
  j["cost"] = rep.cost;
  j["iterations"] = rep.iterations;
  j["wallSeconds"] = rep.wallSeconds;
  return j.dump(2) + "\n";
}

/// Writes text to path, throwing InvalidInput when the file cannot be written.
inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorKind::InvalidInput, "failed writing '" + path.string() + "'");
}

}  // namespace ebif
