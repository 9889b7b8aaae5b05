#pragma once

// Reference systems assembled directly from expression strings.

#include <string>
#include <vector>

#include "ebif/parser.hpp"
#include "ebif/system.hpp"

namespace ebif::testsys {

inline VectorField field(const std::vector<std::string>& comps, std::size_t n,
                         const ParamTable& params = {}) {
  std::vector<CanonicalExpr> out;
  for (const auto& c : comps) out.push_back(parse_expr(c, n, params));
  return VectorField(std::move(out));
}

inline NonlinearSystem make(const std::string& name, std::size_t n,
                            const std::vector<std::string>& drift,
                            const std::vector<std::vector<std::string>>& controls,
                            const ParamTable& params = {}) {
  std::vector<VectorField> g;
  for (const auto& c : controls) g.push_back(field(c, n, params));
  return NonlinearSystem(name, field(drift, n, params), std::move(g));
}

inline NonlinearSystem unicycle() {
  return make("unicycle", 3, {"0", "0", "0"}, {{"cos(x3)", "sin(x3)", "0"}, {"0", "0", "1"}});
}

inline NonlinearSystem example5() {
  return make("example5", 2, {"x1", "x2 - x1^2"}, {{"1", "0"}, {"0", "1"}});
}

inline ParamTable lambdas(const std::vector<std::string>& values) {
  ParamTable p;
  for (std::size_t i = 0; i < values.size(); ++i)
    p.emplace("l" + std::to_string(i + 1), parse_rational(values[i]));
  return p;
}

/// Drift-only system with the closed-form solution.
inline NonlinearSystem sim1(const std::vector<std::string>& lam) {
  return make("sim1", 2, {"l1*x1", "l2*x2 + (2*l1 - l2)*l3*x1^2"}, {}, lambdas(lam));
}

inline NonlinearSystem table_a(const std::vector<std::string>& lam = {"0.3", "0.2", "-0.5"}) {
  return make("tableI_a", 2, {"l1*x1", "l2*x2 + (2*l1 - l2)*l3*x1^2"}, {{"1", "x1^2"}, {"0", "1"}},
              lambdas(lam));
}

inline NonlinearSystem table_b(const std::vector<std::string>& lam = {"1", "1", "0"}) {
  return make("tableI_b", 3, {"l1*x2^3", "l2*x3", "l3"},
              {{"1", "0", "0"}, {"0", "1", "0"}, {"0", "0", "1"}}, lambdas(lam));
}

inline NonlinearSystem table_c(const std::vector<std::string>& lam = {"-0.1", "-0.4", "0.2", "-0.2",
                                                                      "-0.5", "0"}) {
  return make("tableI_c", 4, {"l1*x1", "l2*x2 + l3*cos(x4)", "l4*x3 + l5*exp(x4)", "l6"},
              {{"x1", "0", "0", "0"}, {"0", "x3", "0", "0"}, {"0", "0", "x2", "0"}, {"0", "0", "0", "1"}},
              lambdas(lam));
}

inline NonlinearSystem scalar_xsq() { return make("scalar_xsq", 1, {"0"}, {{"-x1^2"}}); }

}  // namespace ebif::testsys
