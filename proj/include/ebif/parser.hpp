#pragma once

#include <cctype>
#include <map>
#include <string>
#include <string_view>

#include "ebif/error.hpp"
#include "ebif/expr.hpp"
#include "ebif/rational.hpp"

namespace ebif {

/// Named rational constants substituted while parsing (e.g. "lambda1" -> 3/10).
using ParamTable = std::map<std::string, Rational, std::less<>>;

namespace detail {

class ExprParser {
 public:
  ExprParser(std::string_view text, std::size_t n, const ParamTable& params)
      : text_(text), n_(n), params_(params) {}

  CanonicalExpr parse() {
    CanonicalExpr e = expression();
    skip_space();
    if (pos_ < text_.size()) fail(ErrorKind::SyntaxError, "unexpected character '" +
                                                              std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(ErrorKind kind, const std::string& what) const {
    throw ParseError(kind, pos_ + 1, what + " in '" + std::string(text_) + "'");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(ErrorKind::SyntaxError, std::string("expected '") + c + "'");
  }

  CanonicalExpr expression() {
    CanonicalExpr acc = term();
    for (;;) {
      if (accept('+')) {
        acc += term();
      } else if (accept('-')) {
        acc -= term();
      } else {
        return acc;
      }
    }
  }

  CanonicalExpr term() {
    CanonicalExpr acc = unary();
    for (;;) {
      if (accept('*')) {
        acc = acc * unary();
      } else if (accept('/')) {
        std::size_t at = pos_;
        CanonicalExpr divisor = unary();
        if (!divisor.is_constant()) {
          pos_ = at;
          fail(ErrorKind::SyntaxError, "division is only allowed by a constant");
        }
        Rational d = divisor.constant_term();
        if (d == 0) {
          pos_ = at;
          fail(ErrorKind::SyntaxError, "division by zero");
        }
        acc *= Rational(1 / d);
      } else {
        return acc;
      }
    }
  }

  CanonicalExpr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  CanonicalExpr power() {
    CanonicalExpr base = primary();
    if (accept('^')) {
      skip_space();
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (start == pos_) fail(ErrorKind::SyntaxError, "exponent must be a non-negative integer");
      std::string digits(text_.substr(start, pos_ - start));
      if (digits.size() > 4) fail(ErrorKind::SyntaxError, "exponent too large");
      base = pow(base, static_cast<unsigned>(std::stoul(digits)));
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '^')
        fail(ErrorKind::SyntaxError, "chained exponents need parentheses");
    }
    return base;
  }

  CanonicalExpr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail(ErrorKind::SyntaxError, "unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      CanonicalExpr e = expression();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(ErrorKind::SyntaxError, "unexpected character '" + std::string(1, c) + "'");
  }

  CanonicalExpr number() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
      ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    std::string_view lit = text_.substr(start, pos_ - start);
    try {
      return CanonicalExpr::constant(n_, parse_rational(lit));
    } catch (const Error&) {
      pos_ = start;
      fail(ErrorKind::SyntaxError, "malformed number '" + std::string(lit) + "'");
    }
  }

  CanonicalExpr identifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    skip_space();
    bool call = pos_ < text_.size() && text_[pos_] == '(';

    if (call) {
      if (name != "sin" && name != "cos" && name != "exp") {
        pos_ = start;
        fail(ErrorKind::UnsupportedFunction, "unsupported function '" + name + "'");
      }
      ++pos_;
      std::size_t arg_start = pos_;
      CanonicalExpr arg = expression();
      expect(')');
      AffineForm form = affine_argument(arg, arg_start);
      if (name == "exp") return make_exp(form);
      return make_trig(name == "sin" ? TrigKind::Sin : TrigKind::Cos, form);
    }

    if (name.size() > 1 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      unsigned long idx = std::stoul(name.substr(1));
      if (idx < 1 || idx > n_) {
        pos_ = start;
        throw ParseError(ErrorKind::IndexOutOfRange, start + 1,
                         "variable " + name + " outside x1..x" + std::to_string(n_) + " in '" +
                             std::string(text_) + "'");
      }
      return CanonicalExpr::variable(n_, idx - 1);
    }
    if (auto it = params_.find(name); it != params_.end())
      return CanonicalExpr::constant(n_, it->second);
    if (name == "sin" || name == "cos" || name == "exp") {
      pos_ = start;
      fail(ErrorKind::SyntaxError, "function '" + name + "' needs an argument");
    }
    pos_ = start;
    fail(ErrorKind::SyntaxError, "unknown identifier '" + name + "'");
  }

  AffineForm affine_argument(const CanonicalExpr& arg, std::size_t at) {
    AffineForm form(n_);
    for (const auto& [atom, c] : arg.terms()) {
      if (atom.trig || atom.expo || atom.degree() > 1) {
        pos_ = at;
        fail(ErrorKind::NonAffineArgument, "argument of sin/cos/exp must be affine");
      }
      if (atom.degree() == 0) {
        pos_ = at;
        fail(ErrorKind::TranscendentalConstant,
             "constant offsets inside sin/cos/exp are not representable");
      }
      for (std::size_t i = 0; i < n_; ++i)
        if (atom.monomial[i] == 1) form.linear[i] = c;
    }
    return form;
  }

  std::string_view text_;
  std::size_t n_;
  const ParamTable& params_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses an expression over x1..xn into canonical form.
inline CanonicalExpr parse_expr(std::string_view text, std::size_t n,
                                const ParamTable& params = {}) {
  return detail::ExprParser(text, n, params).parse();
}

}  // namespace ebif
