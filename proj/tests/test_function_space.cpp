#include <gtest/gtest.h>

#include <random>

#include "ebif/function_space.hpp"
#include "ebif/parser.hpp"

namespace ebif {
namespace {

std::vector<CanonicalExpr> parse_all(const std::vector<std::string>& texts, std::size_t n) {
  std::vector<CanonicalExpr> out;
  for (const auto& t : texts) out.push_back(parse_expr(t, n));
  return out;
}

FunctionSpace span_of(const std::vector<std::string>& texts, std::size_t n) {
  return space_reduce(n, parse_all(texts, n));
}

TEST(SpaceReduceTest, ScalarMultiplesCollapse) {
  EXPECT_EQ(span_of({"x1", "2*x1", "x2"}, 2).dim(), 2u);
}

TEST(SpaceReduceTest, UnicycleStabilizedSpan) {
  EXPECT_EQ(span_of({"x1", "x2", "x3", "cos(x3)", "sin(x3)", "1"}, 3).dim(), 6u);
}

TEST(SpaceReduceTest, PythagoreanIdentity) {
  FunctionSpace s = span_of({"sin(x1)^2", "cos(x1)^2", "1"}, 1);
  EXPECT_EQ(s.dim(), 2u);
  EXPECT_TRUE(s.has(parse_expr("1", 1)));
  EXPECT_TRUE(s.has(parse_expr("cos(2*x1)", 1)));
  EXPECT_FALSE(s.has(parse_expr("sin(2*x1)", 1)));
}

TEST(SpaceReduceTest, EmptyInputIsZeroSpace) {
  FunctionSpace s = space_reduce(2, {});
  EXPECT_EQ(s.dim(), 0u);
  EXPECT_TRUE(s.has(CanonicalExpr(2)));
  EXPECT_FALSE(s.has(parse_expr("x1", 2)));
}

TEST(SpaceSumTest, Examples) {
  FunctionSpace s = span_of({"x1", "x2 + x1^2"}, 2);
  EXPECT_EQ(space_sum(s, FunctionSpace(2)), s);
  EXPECT_EQ(space_sum(span_of({"x1"}, 1), span_of({"x1"}, 1)).dim(), 1u);
  FunctionSpace g1 = space_sum(span_of({"x1", "x2", "x3"}, 3), span_of({"cos(x3)", "sin(x3)", "1"}, 3));
  EXPECT_EQ(g1.dim(), 6u);
  EXPECT_THROW(space_sum(FunctionSpace(1), FunctionSpace(2)), Error);
}

TEST(SpaceContainsTest, Examples) {
  FunctionSpace s = span_of({"x1", "x2", "x1^2"}, 2);
  auto c = space_contains(s, parse_expr("x2 - x1^2", 2));
  ASSERT_TRUE(c);
  EXPECT_EQ(*c, (std::vector<Rational>{0, 1, -1}));
  auto zero = space_contains(s, CanonicalExpr(2));
  ASSERT_TRUE(zero);
  EXPECT_EQ(*zero, (std::vector<Rational>{0, 0, 0}));
  EXPECT_FALSE(space_contains(span_of({"x1"}, 1), parse_expr("x1^2", 1)));
}

TEST(SpaceContainsTest, CoordinatesInNonMonomialBasis) {
  FunctionSpace s = span_of({"x1 + x2", "x1 - x2", "cos(x1) + x1"}, 2);
  auto c = s.contains(parse_expr("cos(x1)", 2));
  ASSERT_TRUE(c);
  EXPECT_EQ(*c, (std::vector<Rational>{Rational(-1, 2), Rational(-1, 2), 1}));
}

TEST(SpaceTest, AdmitReducedKeepsSpan) {
  FunctionSpace a = span_of({"x1", "x2"}, 2);
  FunctionSpace b = a;
  CanonicalExpr e = parse_expr("3*x2 - 2*x1^2", 2);
  EXPECT_TRUE(a.admit(e));
  EXPECT_TRUE(b.admit_reduced(e));
  EXPECT_EQ(a, b);
  EXPECT_EQ(b.basis().back(), parse_expr("x1^2", 2));
  EXPECT_FALSE(b.admit_reduced(e));
}

bool is_rref(const RationalMatrix& m) {
  std::size_t last = 0;
  bool first = true;
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::size_t p = 0;
    while (p < m[i].size() && m[i][p] == 0) ++p;
    if (p == m[i].size() || m[i][p] != 1) return false;
    if (!first && p <= last) return false;
    for (std::size_t k = 0; k < m.size(); ++k)
      if (k != i && m[k][p] != 0) return false;
    last = p;
    first = false;
  }
  return true;
}

std::vector<CanonicalExpr> random_generators(std::mt19937& rng, std::size_t count) {
  static const std::vector<std::string> pool = {"x1", "x2", "x1^2", "x1*x2", "cos(x2)", "sin(x2)",
                                                "exp(x1)", "x2*exp(x1)", "1", "sin(x1 - x2)"};
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> coeff(-3, 3), terms(1, 3);
  std::vector<CanonicalExpr> out;
  for (std::size_t k = 0; k < count; ++k) {
    CanonicalExpr e(2);
    for (int t = terms(rng); t > 0; --t) e += parse_expr(pool[pick(rng)], 2) * Rational(coeff(rng));
    out.push_back(e);
  }
  return out;
}

TEST(SpacePropertyTest, RowEchelonAndCoordinates) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    auto gens = random_generators(rng, 6);
    FunctionSpace s = space_reduce(2, gens);
    RationalMatrix m = s.coeff_matrix();
    ASSERT_EQ(m.size(), s.dim());
    ASSERT_TRUE(is_rref(m));
    for (const auto& g : gens) {
      auto c = s.contains(g);
      ASSERT_TRUE(c);
      CanonicalExpr rebuilt(2);
      for (std::size_t j = 0; j < s.dim(); ++j) rebuilt += s.basis()[j] * (*c)[j];
      ASSERT_EQ(rebuilt, g);
    }
  }
}

TEST(SpacePropertyTest, ReduceIsIdempotent) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto gens = random_generators(rng, 7);
    FunctionSpace s = space_reduce(2, gens);
    FunctionSpace again = space_reduce(2, s.basis());
    ASSERT_EQ(again.dim(), s.dim());
    for (const auto& g : gens) ASSERT_TRUE(again.has(g));
  }
}

TEST(SpacePropertyTest, SumBounds) {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    FunctionSpace a = space_reduce(2, random_generators(rng, 3));
    FunctionSpace b = space_reduce(2, random_generators(rng, 4));
    FunctionSpace s = space_sum(a, b);
    ASSERT_LE(s.dim(), a.dim() + b.dim());
    for (const auto& g : a.basis()) ASSERT_TRUE(s.has(g));
    for (const auto& g : b.basis()) ASSERT_TRUE(s.has(g));
  }
}

}  // namespace
}  // namespace ebif
