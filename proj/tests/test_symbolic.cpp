#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ebif/expr.hpp"
#include "ebif/parser.hpp"
#include "oracles.hpp"

namespace ebif {
namespace {

CanonicalExpr P(const std::string& s, std::size_t n) { return parse_expr(s, n); }

ErrorKind parse_error_kind(const std::string& s, std::size_t n) {
  try {
    parse_expr(s, n);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for '" << s << "'";
  return ErrorKind::InvalidInput;
}

void expect_numeric_equal(const CanonicalExpr& e, const oracle::Fn& ref, std::size_t n,
                          unsigned seed, double rel = 1e-10) {
  for (const auto& x : oracle::random_points(100, n, seed)) {
    double want = ref(x);
    EXPECT_NEAR(eval(e, x), want, rel * std::max(1.0, std::abs(want))) << to_string(e);
  }
}

TEST(RationalTest, ParsesDecimalsExactly) {
  EXPECT_EQ(parse_rational("0.3"), Rational(3, 10));
  EXPECT_EQ(parse_rational("-1.25e-1"), Rational(-1, 8));
  EXPECT_EQ(parse_rational("2/-4"), Rational(-1, 2));
  EXPECT_EQ(parse_rational("1E3"), Rational(1000));
  EXPECT_THROW(parse_rational("1/0"), Error);
  EXPECT_THROW(parse_rational("abc"), Error);
  Rational q = parse_rational("6/8");
  EXPECT_EQ(q.get_num(), 3);
  EXPECT_EQ(q.get_den(), 4);
}

TEST(ParseTest, CosineAtom) {
  CanonicalExpr e = P("cos(x3)", 3);
  ASSERT_EQ(e.size(), 1u);
  const auto& [atom, c] = *e.terms().begin();
  EXPECT_EQ(c, 1);
  EXPECT_EQ(atom.degree(), 0);
  ASSERT_TRUE(atom.trig);
  EXPECT_EQ(atom.trig->kind, TrigKind::Cos);
  EXPECT_EQ(atom.trig->arg.linear, (std::vector<Rational>{0, 0, 1}));
  EXPECT_FALSE(atom.expo);
}

TEST(ParseTest, ZeroIsEmpty) { EXPECT_TRUE(P("0", 2).is_zero()); }

TEST(ParseTest, SineSquaredReducesToCosineOfDoubleAngle) {
  CanonicalExpr e = P("sin(x1)^2", 1);
  EXPECT_EQ(e, P("1/2 - 1/2*cos(2*x1)", 1));
  expect_numeric_equal(e, [](const auto& x) { return std::sin(x[0]) * std::sin(x[0]); }, 1, 1);
}

TEST(ParseTest, PrecedenceAndUnaryMinus) {
  EXPECT_EQ(P("-x1^2", 1), -P("x1*x1", 1));
  EXPECT_EQ(P("2*x1 - 3*x2/6", 2), P("2*x1 - 1/2*x2", 2));
  EXPECT_EQ(P("(x1 + x2)^2", 2), P("x1^2 + 2*x1*x2 + x2^2", 2));
  EXPECT_EQ(P("  x1 *\t( 1 + x2 ) ", 2), P("x1 + x1*x2", 2));
  EXPECT_EQ(P("1/2*x1", 1), P("0.5*x1", 1));
}

TEST(ParseTest, ParamsSubstitute) {
  ParamTable params{{"lambda1", Rational(3, 10)}, {"k", Rational(-2)}};
  EXPECT_EQ(parse_expr("lambda1*x1 + k", 1, params), P("3/10*x1 - 2", 1));
}

TEST(ParseTest, Errors) {
  EXPECT_EQ(parse_error_kind("x1 +", 1), ErrorKind::SyntaxError);
  EXPECT_EQ(parse_error_kind("(x1", 1), ErrorKind::SyntaxError);
  EXPECT_EQ(parse_error_kind("x1 x2", 2), ErrorKind::SyntaxError);
  EXPECT_EQ(parse_error_kind("tan(x1)", 1), ErrorKind::UnsupportedFunction);
  EXPECT_EQ(parse_error_kind("log(x1)", 1), ErrorKind::UnsupportedFunction);
  EXPECT_EQ(parse_error_kind("sin(x1^2)", 1), ErrorKind::NonAffineArgument);
  EXPECT_EQ(parse_error_kind("exp(cos(x1))", 1), ErrorKind::NonAffineArgument);
  EXPECT_EQ(parse_error_kind("sin(x1 + 1)", 1), ErrorKind::TranscendentalConstant);
  EXPECT_EQ(parse_error_kind("x4", 3), ErrorKind::IndexOutOfRange);
  EXPECT_EQ(parse_error_kind("x0", 3), ErrorKind::IndexOutOfRange);
  EXPECT_EQ(parse_error_kind("x1/x2", 2), ErrorKind::SyntaxError);
  EXPECT_EQ(parse_error_kind("x1/0", 1), ErrorKind::SyntaxError);
  EXPECT_EQ(parse_error_kind("x1^-1", 1), ErrorKind::SyntaxError);
  EXPECT_EQ(parse_error_kind("x1^1.5", 1), ErrorKind::SyntaxError);
  EXPECT_EQ(parse_error_kind("mu*x1", 1), ErrorKind::SyntaxError);
}

TEST(ParseTest, ErrorCarriesColumn) {
  try {
    parse_expr("x1 + tan(x1)", 1);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.column(), 6u);
  }
}

TEST(ParseTest, ConstantArgumentsFold) {
  EXPECT_TRUE(P("sin(0*x1)", 1).is_zero());
  EXPECT_EQ(P("cos(x1 - x1)", 1), P("1", 1));
  EXPECT_EQ(P("exp(0)", 1), P("1", 1));
}

TEST(ParseTest, SignNormalization) {
  EXPECT_EQ(P("sin(-x1)", 1), -P("sin(x1)", 1));
  EXPECT_EQ(P("cos(-2*x1 + x2)", 2), P("cos(2*x1 - x2)", 2));
  EXPECT_EQ(P("sin(-x2 + x3)", 3), -P("sin(x2 - x3)", 3));
  expect_numeric_equal(P("sin(-x2 + x3)", 3),
                       [](const auto& x) { return std::sin(-x[1] + x[2]); }, 3, 2);
}

const std::vector<std::string> kSamples = {
    "0",
    "1",
    "-7/3",
    "x1",
    "x1^3*x2 - 2*x2",
    "cos(x3)",
    "x1*sin(2*x2 - 1/3*x3)*exp(-x1 + x3)",
    "exp(x1)^3 - 4/5*x2*cos(x1)^2",
    "sin(x1)*cos(x2)*sin(x3)",
    "(1 + x1)*(exp(x2) - sin(x3))^2",
};

TEST(ParseTest, PrintParseRoundTrip) {
  for (const auto& s : kSamples) {
    CanonicalExpr e = P(s, 3);
    std::string printed = to_string(e);
    CanonicalExpr again = P(printed, 3);
    EXPECT_EQ(again, e) << s << " -> " << printed;
    EXPECT_EQ(to_string(again), printed);
  }
}

TEST(ArithmeticTest, Add) {
  EXPECT_EQ(P("x1", 1) + P("x1", 1), P("2*x1", 1));
  EXPECT_TRUE((P("cos(x1)", 1) + P("-cos(x1)", 1)).is_zero());
  EXPECT_EQ(P("x1*sin(x2)", 2) + P("x1*sin(x2)", 2), P("2*x1*sin(x2)", 2));
  EXPECT_THROW(P("x1", 1) + P("x1", 2), Error);
  for (const auto& s : kSamples) {
    CanonicalExpr e = P(s, 3);
    EXPECT_TRUE((e + e * Rational(-1)).is_zero());
  }
}

TEST(ArithmeticTest, Mul) {
  CanonicalExpr sc = P("sin(x1)", 1) * P("cos(x1)", 1);
  EXPECT_EQ(sc, P("1/2*sin(2*x1)", 1));
  expect_numeric_equal(sc, [](const auto& x) { return std::sin(x[0]) * std::cos(x[0]); }, 1, 3);
  EXPECT_EQ(P("x1", 1) * P("x1", 1), P("x1^2", 1));
  EXPECT_EQ(P("exp(x1)", 1) * P("exp(x1)", 1), P("exp(2*x1)", 1));
  EXPECT_EQ(P("exp(x1)", 1) * P("exp(-x1)", 1), P("1", 1));
  EXPECT_THROW(P("x1", 1) * P("x1", 2), Error);
}

TEST(ArithmeticTest, ProductToSumIdentities) {
  struct Case {
    std::string text;
    oracle::Fn ref;
  };
  std::vector<Case> cases = {
      {"sin(x1)*sin(x2)", [](const auto& x) { return std::sin(x[0]) * std::sin(x[1]); }},
      {"cos(x1)*cos(2*x2)", [](const auto& x) { return std::cos(x[0]) * std::cos(2 * x[1]); }},
      {"sin(x2)*cos(x1)", [](const auto& x) { return std::sin(x[1]) * std::cos(x[0]); }},
      {"cos(x2)*sin(x1)", [](const auto& x) { return std::cos(x[1]) * std::sin(x[0]); }},
      {"cos(x1)^3", [](const auto& x) { return std::pow(std::cos(x[0]), 3); }},
      {"sin(x1)^4*exp(x2/2)", [](const auto& x) { return std::pow(std::sin(x[0]), 4) * std::exp(x[1] / 2); }},
      {"sin(x1 - x2)*sin(x2 - x1)", [](const auto& x) { return -std::pow(std::sin(x[0] - x[1]), 2); }},
  };
  unsigned seed = 10;
  for (const auto& c : cases) {
    CanonicalExpr e = P(c.text, 2);
    for (const auto& [atom, coeff] : e.terms()) {
      if (atom.trig) {
        EXPECT_GT(atom.trig->arg.leading_sign(), 0) << c.text;
      }
    }
    expect_numeric_equal(e, c.ref, 2, seed++);
  }
}

TEST(PartialTest, Examples) {
  EXPECT_EQ(partial(P("cos(x3)", 3), 2), P("-sin(x3)", 3));
  EXPECT_EQ(partial(P("x1^2", 1), 0), P("2*x1", 1));
  EXPECT_EQ(partial(P("exp(x4)*x2", 4), 3), P("exp(x4)*x2", 4));
  EXPECT_TRUE(partial(P("5/3", 2), 1).is_zero());
  EXPECT_THROW(partial(P("x1", 2), 2), Error);
}

TEST(PartialTest, MatchesFiniteDifferences) {
  for (const auto& s : kSamples) {
    CanonicalExpr e = P(s, 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CanonicalExpr d = partial(e, i);
      for (const auto& x : oracle::random_points(20, 3, 40 + static_cast<unsigned>(i), -1.0, 1.0)) {
        double fd = oracle::central_difference([&](const auto& y) { return eval(e, y); }, x, i);
        EXPECT_NEAR(eval(d, x), fd, 1e-6 * std::max(1.0, std::abs(fd))) << s << " d/dx" << i + 1;
      }
    }
  }
}

TEST(LieDerivativeTest, Examples) {
  VectorField g1({P("cos(x3)", 3), P("sin(x3)", 3), P("0", 3)});
  VectorField g2({P("0", 3), P("0", 3), P("1", 3)});
  EXPECT_EQ(lie_derivative(P("x1", 3), g1), P("cos(x3)", 3));
  EXPECT_EQ(lie_derivative(P("cos(x3)", 3), g2), P("-sin(x3)", 3));
  VectorField sq({P("-x1^2", 1)});
  CanonicalExpr l = lie_derivative(P("x1", 1), sq);
  EXPECT_EQ(l, P("-x1^2", 1));
  for (const auto& x : oracle::random_points(20, 1, 5)) {
    double fd = oracle::central_difference([](const auto& y) { return y[0]; }, x, 0) * -x[0] * x[0];
    EXPECT_NEAR(eval(l, x), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
  EXPECT_THROW(lie_derivative(P("x1", 2), sq), Error);
}

TEST(EvalTest, Examples) {
  std::vector<double> origin{0, 0, 0};
  EXPECT_DOUBLE_EQ(eval(P("cos(x3)", 3), origin), 1.0);
  std::vector<double> three{3.0};
  EXPECT_DOUBLE_EQ(eval(P("x1^2", 1), three), 9.0);
  std::vector<double> p{0.7};
  EXPECT_NEAR(eval(P("1/2*sin(2*x1)", 1), p), std::sin(0.7) * std::cos(0.7), 1e-15);
  CompiledExpr c(P("x1*sin(2*x2 - 1/3*x3)*exp(-x1 + x3)", 3));
  for (const auto& x : oracle::random_points(10, 3, 8))
    EXPECT_NEAR(c(x), eval(P("x1*sin(2*x2 - 1/3*x3)*exp(-x1 + x3)", 3), x), 1e-14);
}

// Random expressions built from a fixed factor pool.
class RandomExprs {
 public:
  explicit RandomExprs(unsigned seed) : rng_(seed) {}

  Rational coeff() {
    std::uniform_int_distribution<int> num(-5, 5), den(1, 4);
    int p = num(rng_);
    Rational q(p == 0 ? 1 : p, den(rng_));
    q.canonicalize();
    return q;
  }

  CanonicalExpr factor() {
    static const std::vector<std::string> pool = {
        "x1", "x2", "x3", "sin(x1)", "cos(x2)", "sin(x1 - x3)", "cos(2*x3)", "exp(x2)",
        "exp(-x1 + x3/2)", "sin(x2)", "3/2", "x1*x3"};
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return parse_expr(pool[pick(rng_)], 3);
  }

  CanonicalExpr expr() {
    CanonicalExpr e(3);
    std::uniform_int_distribution<int> terms(1, 3), len(1, 3);
    for (int t = terms(rng_); t > 0; --t) {
      CanonicalExpr p = CanonicalExpr::constant(3, coeff());
      for (int k = len(rng_); k > 0; --k) p = p * factor();
      e += p;
    }
    return e;
  }

  std::mt19937& rng() { return rng_; }

 private:
  std::mt19937 rng_;
};

TEST(PropertyTest, CanonicalUniquenessUnderShuffledOrder) {
  RandomExprs gen(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<CanonicalExpr> factors;
    std::vector<CanonicalExpr> addends;
    for (int k = 0; k < 3; ++k) factors.push_back(gen.factor());
    for (int k = 0; k < 3; ++k) addends.push_back(gen.factor() * gen.coeff());
    auto build = [&](std::vector<std::size_t> fo, std::vector<std::size_t> ao) {
      CanonicalExpr prod = CanonicalExpr::constant(3, 1);
      for (auto i : fo) prod = prod * factors[i];
      CanonicalExpr sum(3);
      for (auto i : ao) sum += addends[i];
      return prod * sum;
    };
    std::vector<std::size_t> a{0, 1, 2}, b{0, 1, 2};
    CanonicalExpr first = build(a, b);
    std::shuffle(a.begin(), a.end(), gen.rng());
    std::shuffle(b.begin(), b.end(), gen.rng());
    CanonicalExpr second = build(a, b);
    ASSERT_EQ(first, second);
    ASSERT_EQ(to_string(first), to_string(second));
  }
}

TEST(PropertyTest, RewritesPreserveValues) {
  RandomExprs gen(7);
  for (int trial = 0; trial < 30; ++trial) {
    CanonicalExpr a = gen.expr();
    CanonicalExpr b = gen.expr();
    CanonicalExpr prod = a * b;
    for (const auto& x : oracle::random_points(100, 3, 100 + static_cast<unsigned>(trial), -1.5, 1.5)) {
      double want = eval(a, x) * eval(b, x);
      ASSERT_NEAR(eval(prod, x), want, 1e-10 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST(PropertyTest, PartialIsADerivation) {
  RandomExprs gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    CanonicalExpr a = gen.expr();
    CanonicalExpr b = gen.expr();
    for (std::size_t i = 0; i < 3; ++i)
      ASSERT_EQ(partial(a * b, i), partial(a, i) * b + a * partial(b, i));
  }
}

TEST(PropertyTest, LieDerivativeIsLinear) {
  RandomExprs gen(13);
  for (int trial = 0; trial < 50; ++trial) {
    CanonicalExpr a = gen.expr();
    CanonicalExpr b = gen.expr();
    VectorField tau({gen.expr(), gen.expr(), gen.expr()});
    Rational alpha = gen.coeff(), beta = gen.coeff();
    ASSERT_EQ(lie_derivative(a * alpha + b * beta, tau),
              lie_derivative(a, tau) * alpha + lie_derivative(b, tau) * beta);
  }
}

TEST(PropertyTest, RandomRoundTrip) {
  RandomExprs gen(17);
  for (int trial = 0; trial < 200; ++trial) {
    CanonicalExpr e = gen.expr();
    ASSERT_EQ(P(to_string(e), 3), e) << to_string(e);
  }
}

}  // namespace
}  // namespace ebif
