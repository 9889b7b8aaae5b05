#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "ebif/expr.hpp"
#include "ebif/rational.hpp"

namespace ebif {

/// Finite-dimensional span of canonical expressions with exact membership tests.
///
/// Rows are kept fully reduced: each row has a unit pivot atom that appears in no
/// other row, and every row's atoms compare greater than or equal to its pivot, so
/// rows sorted by pivot form a reduced row-echelon matrix over the atom index. Each
/// row also records its expansion in the basis, which turns a reduction into basis
/// coordinates.
class FunctionSpace {
 public:
  explicit FunctionSpace(std::size_t n = 0) : n_(n) {}

  std::size_t ambient_dim() const { return n_; }
  std::size_t dim() const { return basis_.size(); }
  const std::vector<CanonicalExpr>& basis() const { return basis_; }

  /// Adds e to the basis if it is independent; returns whether it was admitted.
  bool admit(const CanonicalExpr& e) {
    check(e);
    auto [residual, coeffs] = reduce(e);
    if (residual.empty()) return false;

    const std::size_t index = basis_.size();
    basis_.push_back(e);
    for (auto& row : rows_) row.transform.resize(index + 1);

    Row fresh;
    fresh.pivot = residual.begin()->first;
    const Rational inv = 1 / residual.begin()->second;
    for (auto& [atom, c] : residual) fresh.vec.emplace(atom, c * inv);
    fresh.transform.resize(index + 1);
    for (std::size_t j = 0; j < index; ++j) fresh.transform[j] = -coeffs[j] * inv;
    fresh.transform[index] = inv;

    for (auto& row : rows_) {
      auto it = row.vec.find(fresh.pivot);
      if (it == row.vec.end()) continue;
      const Rational c = it->second;
      axpy(row.vec, fresh.vec, -c);
      for (std::size_t j = 0; j <= index; ++j) row.transform[j] -= c * fresh.transform[j];
    }
    pivots_.emplace(fresh.pivot, rows_.size());
    rows_.push_back(std::move(fresh));
    return true;
  }

  /// Admits the part of e outside the span, scaled so its leading atom has coefficient 1.
  /// Spans agree with admit(e); the basis element is the cleaner representative.
  bool admit_reduced(const CanonicalExpr& e) {
    check(e);
    auto residual = reduce(e).first;
    if (residual.empty()) return false;
    const Rational inv = 1 / residual.begin()->second;
    CanonicalExpr fresh(n_);
    for (const auto& [atom, c] : residual) fresh.accumulate(atom, c * inv);
    return admit(fresh);
  }

  /// Exact coordinates of e in the basis, or nothing when e lies outside the span.
  std::optional<std::vector<Rational>> contains(const CanonicalExpr& e) const {
    check(e);
    auto [residual, coeffs] = reduce(e);
    if (!residual.empty()) return std::nullopt;
    return coeffs;
  }

  bool has(const CanonicalExpr& e) const { return contains(e).has_value(); }

  /// Sorted union of the atoms appearing in the reduced rows.
  std::vector<Atom> atom_index() const {
    std::set<Atom, AtomLess> atoms;
    for (const auto& row : rows_)
      for (const auto& [atom, c] : row.vec) atoms.insert(atom);
    return {atoms.begin(), atoms.end()};
  }

  /// Reduced row-echelon coefficient matrix over atom_index(), rows ordered by pivot.
  RationalMatrix coeff_matrix() const {
    std::vector<Atom> atoms = atom_index();
    std::map<Atom, std::size_t, AtomLess> column;
    for (std::size_t j = 0; j < atoms.size(); ++j) column.emplace(atoms[j], j);
    RationalMatrix out;
    for (const auto& [pivot, r] : pivots_) {
      RationalVector dense(atoms.size());
      for (const auto& [atom, c] : rows_[r].vec) dense[column.at(atom)] = c;
      out.push_back(std::move(dense));
    }
    return out;
  }

  friend bool operator==(const FunctionSpace& a, const FunctionSpace& b) {
    if (a.n_ != b.n_ || a.dim() != b.dim()) return false;
    for (const auto& e : b.basis_)
      if (!a.has(e)) return false;
    return true;
  }

 private:
  using SparseRow = std::map<Atom, Rational, AtomLess>;

  struct Row {
    Atom pivot;
    SparseRow vec;
    std::vector<Rational> transform;
  };

  void check(const CanonicalExpr& e) const {
    if (e.dim() != n_)
      throw Error(ErrorKind::DimensionMismatch, "expression dimension differs from space");
  }

  static void axpy(SparseRow& y, const SparseRow& x, const Rational& a) {
    for (const auto& [atom, c] : x) {
      auto [it, inserted] = y.try_emplace(atom, a * c);
      if (!inserted) {
        it->second += a * c;
        if (it->second == 0) y.erase(it);
      }
    }
  }

  std::pair<SparseRow, std::vector<Rational>> reduce(const CanonicalExpr& e) const {
    SparseRow residual(e.terms().begin(), e.terms().end());
    std::vector<Rational> coeffs(basis_.size());
    // Rows hold no foreign pivots, so one pass over the original atoms suffices.
    for (const auto& [atom, c] : e.terms()) {
      auto p = pivots_.find(atom);
      if (p == pivots_.end()) continue;
      const Row& row = rows_[p->second];
      axpy(residual, row.vec, -c);
      for (std::size_t j = 0; j < row.transform.size(); ++j)
        if (row.transform[j] != 0) coeffs[j] += c * row.transform[j];
    }
    return {std::move(residual), std::move(coeffs)};
  }

  std::size_t n_;
  std::vector<CanonicalExpr> basis_;
  std::vector<Row> rows_;
  std::map<Atom, std::size_t, AtomLess> pivots_;
};

/// Span of the generators; dependent generators are dropped in order.
inline FunctionSpace space_reduce(std::size_t n, const std::vector<CanonicalExpr>& gens) {
  FunctionSpace s(n);
  for (const auto& g : gens) s.admit(g);
  return s;
}

inline FunctionSpace space_sum(const FunctionSpace& a, const FunctionSpace& b) {
  if (a.ambient_dim() != b.ambient_dim())
    throw Error(ErrorKind::DimensionMismatch, "spaces over different ambient dimensions");
  FunctionSpace out(a);
  for (const auto& e : b.basis()) out.admit(e);
  return out;
}

inline std::optional<std::vector<Rational>> space_contains(const FunctionSpace& s,
                                                           const CanonicalExpr& e) {
  return s.contains(e);
}

}  // namespace ebif
