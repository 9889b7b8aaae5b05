#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ebif/error.hpp"
#include "ebif/rational.hpp"

namespace ebif {

/// Linear form a·x with rational coefficients, used as the argument of sin/cos/exp.
/// Constant offsets are not representable: they would produce irrational constants
/// such as sin(1) under the product rules.
struct AffineForm {
  std::vector<Rational> linear;

  AffineForm() = default;
  explicit AffineForm(std::size_t n) : linear(n) {}
  explicit AffineForm(std::vector<Rational> coeffs) : linear(std::move(coeffs)) {}

  std::size_t dim() const { return linear.size(); }

  bool is_zero() const {
    for (const auto& c : linear)
      if (c != 0) return false;
    return true;
  }

  /// Sign of the first nonzero entry (0 for the zero form).
  int leading_sign() const {
    for (const auto& c : linear)
      if (c != 0) return sgn(c);
    return 0;
  }

  AffineForm operator-() const {
    AffineForm out(*this);
    for (auto& c : out.linear) c = -c;
    return out;
  }

  friend AffineForm operator+(const AffineForm& a, const AffineForm& b) {
    AffineForm out(a);
    for (std::size_t i = 0; i < out.linear.size(); ++i) out.linear[i] += b.linear[i];
    return out;
  }

  friend AffineForm operator-(const AffineForm& a, const AffineForm& b) { return a + (-b); }

  friend bool operator==(const AffineForm& a, const AffineForm& b) { return a.linear == b.linear; }

  double eval(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < linear.size(); ++i)
      if (linear[i] != 0) s += linear[i].get_d() * x[i];
    return s;
  }
};

inline int compare(const AffineForm& a, const AffineForm& b) {
  for (std::size_t i = 0; i < a.linear.size(); ++i) {
    int c = cmp(a.linear[i], b.linear[i]);
    if (c != 0) return c < 0 ? -1 : 1;
  }
  return 0;
}

enum class TrigKind { Cos, Sin };

struct Trig {
  TrigKind kind = TrigKind::Cos;
  AffineForm arg;
  friend bool operator==(const Trig&, const Trig&) = default;
};

/// monomial × optional trig(a·x) × optional exp(b·x). Trig arguments have a positive
/// leading coefficient and neither argument is the zero form.
struct Atom {
  std::vector<int> monomial;
  std::optional<Trig> trig;
  std::optional<AffineForm> expo;

  Atom() = default;
  explicit Atom(std::size_t n) : monomial(n, 0) {}

  std::size_t dim() const { return monomial.size(); }

  int degree() const {
    int d = 0;
    for (int e : monomial) d += e;
    return d;
  }

  bool is_constant() const { return degree() == 0 && !trig && !expo; }

  friend bool operator==(const Atom&, const Atom&) = default;
};

/// Total order: degree, then monomial (x1 before x2), then trig, then exp.
inline int compare(const Atom& a, const Atom& b) {
  if (int da = a.degree(), db = b.degree(); da != db) return da < db ? -1 : 1;
  for (std::size_t i = 0; i < a.monomial.size(); ++i)
    if (a.monomial[i] != b.monomial[i]) return a.monomial[i] > b.monomial[i] ? -1 : 1;
  if (a.trig.has_value() != b.trig.has_value()) return a.trig ? 1 : -1;
  if (a.trig) {
    if (a.trig->kind != b.trig->kind) return a.trig->kind < b.trig->kind ? -1 : 1;
    if (int c = compare(a.trig->arg, b.trig->arg); c != 0) return c;
  }
  if (a.expo.has_value() != b.expo.has_value()) return a.expo ? 1 : -1;
  if (a.expo) return compare(*a.expo, *b.expo);
  return 0;
}

struct AtomLess {
  bool operator()(const Atom& a, const Atom& b) const { return compare(a, b) < 0; }
};

/// Finite rational combination of distinct atoms. Equal functions have identical term maps.
class CanonicalExpr {
 public:
  using TermMap = std::map<Atom, Rational, AtomLess>;

  explicit CanonicalExpr(std::size_t n = 0) : n_(n) {}

  static CanonicalExpr zero(std::size_t n) { return CanonicalExpr(n); }

  static CanonicalExpr constant(std::size_t n, const Rational& value) {
    CanonicalExpr e(n);
    e.accumulate(Atom(n), value);
    return e;
  }

  /// Coordinate function x_{index+1}; index is 0-based.
  static CanonicalExpr variable(std::size_t n, std::size_t index) {
    if (index >= n) throw Error(ErrorKind::IndexOutOfRange, "variable index out of range");
    CanonicalExpr e(n);
    Atom a(n);
    a.monomial[index] = 1;
    e.accumulate(std::move(a), 1);
    return e;
  }

  static CanonicalExpr from_atom(Atom atom, const Rational& coeff) {
    CanonicalExpr e(atom.dim());
    e.accumulate(std::move(atom), coeff);
    return e;
  }

  std::size_t dim() const { return n_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  bool is_constant() const {
    return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.is_constant());
  }

  Rational constant_term() const {
    auto it = terms_.find(Atom(n_));
    return it == terms_.end() ? Rational(0) : it->second;
  }

  CanonicalExpr without_constant() const {
    CanonicalExpr out(*this);
    out.terms_.erase(Atom(n_));
    return out;
  }

  /// Adds coeff·atom, dropping the entry if it cancels.
  void accumulate(Atom atom, const Rational& coeff) {
    if (coeff == 0) return;
    auto [it, inserted] = terms_.try_emplace(std::move(atom), coeff);
    if (inserted) {
      it->second.canonicalize();
    } else {
      it->second += coeff;
      if (it->second == 0) terms_.erase(it);
    }
  }

  CanonicalExpr& operator+=(const CanonicalExpr& other) {
    check_dim(other);
    for (const auto& [atom, c] : other.terms_) accumulate(atom, c);
    return *this;
  }

  CanonicalExpr& operator-=(const CanonicalExpr& other) {
    check_dim(other);
    for (const auto& [atom, c] : other.terms_) accumulate(atom, -c);
    return *this;
  }

  CanonicalExpr& operator*=(const Rational& s) {
    if (s == 0) {
      terms_.clear();
    } else {
      for (auto& [atom, c] : terms_) c *= s;
    }
    return *this;
  }

  friend CanonicalExpr operator+(CanonicalExpr a, const CanonicalExpr& b) { return a += b; }
  friend CanonicalExpr operator-(CanonicalExpr a, const CanonicalExpr& b) { return a -= b; }
  friend CanonicalExpr operator-(CanonicalExpr a) { return a *= Rational(-1); }
  friend CanonicalExpr operator*(CanonicalExpr a, const Rational& s) { return a *= s; }
  friend CanonicalExpr operator*(const Rational& s, CanonicalExpr a) { return a *= s; }
  friend CanonicalExpr operator*(const CanonicalExpr& a, const CanonicalExpr& b);

  friend bool operator==(const CanonicalExpr& a, const CanonicalExpr& b) {
    return a.n_ == b.n_ && a.terms_ == b.terms_;
  }

  void check_dim(const CanonicalExpr& other) const {
    if (other.n_ != n_)
      throw Error(ErrorKind::DimensionMismatch, "expressions over " + std::to_string(n_) +
                                                    " and " + std::to_string(other.n_) +
                                                    " variables");
  }

 private:
  std::size_t n_;
  TermMap terms_;
};

namespace detail {

/// Emits coeff·mono·trig(kind,arg)·expo with sign normalization and zero folding.
inline void emit_trig(CanonicalExpr& out, const Atom& base, TrigKind kind, AffineForm arg,
                      Rational coeff) {
  if (arg.is_zero()) {
    if (kind == TrigKind::Sin) return;
    Atom a(base);
    a.trig.reset();
    out.accumulate(std::move(a), coeff);
    return;
  }
  if (arg.leading_sign() < 0) {
    arg = -arg;
    if (kind == TrigKind::Sin) coeff = -coeff;
  }
  Atom a(base);
  a.trig = Trig{kind, std::move(arg)};
  out.accumulate(std::move(a), coeff);
}

inline void multiply_atoms(CanonicalExpr& out, const Atom& a, const Atom& b,
                           const Rational& coeff) {
  Atom base(a.dim());
  for (std::size_t i = 0; i < base.monomial.size(); ++i)
    base.monomial[i] = a.monomial[i] + b.monomial[i];
  if (a.expo && b.expo) {
    AffineForm sum = *a.expo + *b.expo;
    if (!sum.is_zero()) base.expo = std::move(sum);
  } else if (a.expo) {
    base.expo = a.expo;
  } else if (b.expo) {
    base.expo = b.expo;
  }

  if (!a.trig || !b.trig) {
    const auto& t = a.trig ? a.trig : b.trig;
    if (t) base.trig = t;
    out.accumulate(std::move(base), coeff);
    return;
  }

  // Product-to-sum on the two trig factors.
  const Rational half = coeff / 2;
  const AffineForm sum = a.trig->arg + b.trig->arg;
  const AffineForm diff = a.trig->arg - b.trig->arg;
  const TrigKind ka = a.trig->kind;
  const TrigKind kb = b.trig->kind;
  if (ka == TrigKind::Sin && kb == TrigKind::Sin) {
    emit_trig(out, base, TrigKind::Cos, diff, half);
    emit_trig(out, base, TrigKind::Cos, sum, -half);
  } else if (ka == TrigKind::Cos && kb == TrigKind::Cos) {
    emit_trig(out, base, TrigKind::Cos, diff, half);
    emit_trig(out, base, TrigKind::Cos, sum, half);
  } else if (ka == TrigKind::Sin) {
    emit_trig(out, base, TrigKind::Sin, sum, half);
    emit_trig(out, base, TrigKind::Sin, diff, half);
  } else {
    emit_trig(out, base, TrigKind::Sin, sum, half);
    emit_trig(out, base, TrigKind::Sin, diff, -half);
  }
}

}  // namespace detail

inline CanonicalExpr operator*(const CanonicalExpr& a, const CanonicalExpr& b) {
  a.check_dim(b);
  CanonicalExpr out(a.dim());
  for (const auto& [atom_a, ca] : a.terms())
    for (const auto& [atom_b, cb] : b.terms()) detail::multiply_atoms(out, atom_a, atom_b, ca * cb);
  return out;
}

/// Smart constructors that apply the atom invariants.
inline CanonicalExpr make_trig(TrigKind kind, const AffineForm& arg) {
  CanonicalExpr out(arg.dim());
  detail::emit_trig(out, Atom(arg.dim()), kind, arg, 1);
  return out;
}

inline CanonicalExpr make_exp(const AffineForm& arg) {
  Atom a(arg.dim());
  if (!arg.is_zero()) a.expo = arg;
  return CanonicalExpr::from_atom(std::move(a), 1);
}

inline CanonicalExpr pow(const CanonicalExpr& base, unsigned exponent) {
  CanonicalExpr result = CanonicalExpr::constant(base.dim(), 1);
  CanonicalExpr square = base;
  while (exponent > 0) {
    if (exponent & 1U) result = result * square;
    exponent >>= 1U;
    if (exponent > 0) square = square * square;
  }
  return result;
}

/// Exact partial derivative with respect to the coordinate with 0-based `index`.
inline CanonicalExpr partial(const CanonicalExpr& e, std::size_t index) {
  const std::size_t n = e.dim();
  if (index >= n) throw Error(ErrorKind::IndexOutOfRange, "partial derivative index out of range");
  CanonicalExpr out(n);
  for (const auto& [atom, c] : e.terms()) {
    if (int k = atom.monomial[index]; k > 0) {
      Atom d(atom);
      d.monomial[index] = k - 1;
      out.accumulate(std::move(d), c * k);
    }
    if (atom.trig) {
      const Rational& a = atom.trig->arg.linear[index];
      if (a != 0) {
        Atom d(atom);
        bool was_sin = atom.trig->kind == TrigKind::Sin;
        d.trig->kind = was_sin ? TrigKind::Cos : TrigKind::Sin;
        out.accumulate(std::move(d), was_sin ? Rational(c * a) : Rational(-c * a));
      }
    }
    if (atom.expo) {
      const Rational& b = atom.expo->linear[index];
      if (b != 0) out.accumulate(atom, c * b);
    }
  }
  return out;
}

/// Ordered list of n component functions on ℝⁿ.
struct VectorField {
  std::vector<CanonicalExpr> components;

  VectorField() = default;
  explicit VectorField(std::vector<CanonicalExpr> comps) : components(std::move(comps)) {}

  static VectorField zero(std::size_t n) {
    return VectorField(std::vector<CanonicalExpr>(n, CanonicalExpr(n)));
  }

  std::size_t dim() const { return components.size(); }
  const CanonicalExpr& operator[](std::size_t i) const { return components[i]; }

  bool is_zero() const {
    for (const auto& c : components)
      if (!c.is_zero()) return false;
    return true;
  }

  friend bool operator==(const VectorField&, const VectorField&) = default;
};

/// L_τ γ = Σ_l τ_l ∂γ/∂x_l.
inline CanonicalExpr lie_derivative(const CanonicalExpr& gamma, const VectorField& tau) {
  const std::size_t n = gamma.dim();
  if (tau.dim() != n)
    throw Error(ErrorKind::DimensionMismatch, "vector field dimension differs from expression");
  CanonicalExpr out(n);
  for (std::size_t l = 0; l < n; ++l) {
    if (tau[l].is_zero()) continue;
    CanonicalExpr d = partial(gamma, l);
    if (!d.is_zero()) out += tau[l] * d;
  }
  return out;
}

inline double eval(const Atom& atom, std::span<const double> x) {
  double v = 1.0;
  for (std::size_t i = 0; i < atom.monomial.size(); ++i)
    for (int k = 0; k < atom.monomial[i]; ++k) v *= x[i];
  if (atom.trig) {
    double a = atom.trig->arg.eval(x);
    v *= atom.trig->kind == TrigKind::Sin ? std::sin(a) : std::cos(a);
  }
  if (atom.expo) v *= std::exp(atom.expo->eval(x));
  return v;
}

inline double eval(const CanonicalExpr& e, std::span<const double> x) {
  if (x.size() != e.dim())
    throw Error(ErrorKind::DimensionMismatch, "evaluation point has wrong dimension");
  double s = 0.0;
  for (const auto& [atom, c] : e.terms()) s += c.get_d() * eval(atom, x);
  return s;
}

/// Double-precision copy of an expression for repeated evaluation in inner loops.
class CompiledExpr {
 public:
  CompiledExpr() = default;

  explicit CompiledExpr(const CanonicalExpr& e) : n_(e.dim()) {
    for (const auto& [atom, c] : e.terms()) {
      Term t;
      t.coeff = c.get_d();
      for (std::size_t i = 0; i < atom.monomial.size(); ++i)
        if (atom.monomial[i] > 0) t.powers.emplace_back(i, atom.monomial[i]);
      if (atom.trig) {
        t.trig = atom.trig->kind == TrigKind::Sin ? 1 : 2;
        t.trig_arg = dense(atom.trig->arg);
      }
      if (atom.expo) t.exp_arg = dense(*atom.expo);
      terms_.push_back(std::move(t));
    }
  }

  double operator()(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : terms_) {
      double v = t.coeff;
      for (const auto& [i, k] : t.powers)
        for (int j = 0; j < k; ++j) v *= x[i];
      if (t.trig != 0) {
        double a = dot(t.trig_arg, x);
        v *= t.trig == 1 ? std::sin(a) : std::cos(a);
      }
      if (!t.exp_arg.empty()) v *= std::exp(dot(t.exp_arg, x));
      s += v;
    }
    return s;
  }

  std::size_t dim() const { return n_; }

 private:
  struct Term {
    double coeff = 0.0;
    std::vector<std::pair<std::size_t, int>> powers;
    int trig = 0;
    std::vector<double> trig_arg;
    std::vector<double> exp_arg;
  };

  static std::vector<double> dense(const AffineForm& f) {
    std::vector<double> v;
    v.reserve(f.dim());
    for (const auto& c : f.linear) v.push_back(c.get_d());
    return v;
  }

  static double dot(const std::vector<double>& a, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i];
    return s;
  }

  std::size_t n_ = 0;
  std::vector<Term> terms_;
};

/// Compiled vector field: evaluates all components into `out`.
class CompiledField {
 public:
  CompiledField() = default;
  explicit CompiledField(const VectorField& v) {
    for (const auto& c : v.components) comps_.emplace_back(c);
  }

  std::size_t dim() const { return comps_.size(); }

  void operator()(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < comps_.size(); ++i) out[i] = comps_[i](x);
  }

 private:
  std::vector<CompiledExpr> comps_;
};

namespace detail {

inline std::string coeff_text(const Rational& c) { return c.get_str(); }

inline std::string linear_text(const AffineForm& f) {
  std::string s;
  for (std::size_t i = 0; i < f.linear.size(); ++i) {
    const Rational& c = f.linear[i];
    if (c == 0) continue;
    Rational mag = abs(c);
    if (s.empty()) {
      if (c < 0) s += "-";
    } else {
      s += c < 0 ? " - " : " + ";
    }
    if (mag != 1) s += coeff_text(mag) + "*";
    s += "x" + std::to_string(i + 1);
  }
  return s;
}

inline std::string atom_text(const Atom& atom) {
  std::vector<std::string> factors;
  for (std::size_t i = 0; i < atom.monomial.size(); ++i) {
    int k = atom.monomial[i];
    if (k == 0) continue;
    std::string v = "x" + std::to_string(i + 1);
    factors.push_back(k == 1 ? v : v + "^" + std::to_string(k));
  }
  if (atom.trig)
    factors.push_back(std::string(atom.trig->kind == TrigKind::Sin ? "sin(" : "cos(") +
                      linear_text(atom.trig->arg) + ")");
  if (atom.expo) factors.push_back("exp(" + linear_text(*atom.expo) + ")");
  std::string s;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i > 0) s += "*";
    s += factors[i];
  }
  return s;
}

}  // namespace detail

/// Text form accepted by the parser; parse(to_string(e)) == e.
inline std::string to_string(const CanonicalExpr& e) {
  if (e.is_zero()) return "0";
  std::string s;
  bool first = true;
  for (const auto& [atom, c] : e.terms()) {
    Rational mag = abs(c);
    if (first) {
      if (c < 0) s += "-";
    } else {
      s += c < 0 ? " - " : " + ";
    }
    first = false;
    std::string body = detail::atom_text(atom);
    if (body.empty()) {
      s += detail::coeff_text(mag);
    } else if (mag == 1) {
      s += body;
    } else {
      s += detail::coeff_text(mag) + "*" + body;
    }
  }
  return s;
}

inline std::ostream& operator<<(std::ostream& os, const CanonicalExpr& e) {
  return os << to_string(e);
}

}  // namespace ebif
