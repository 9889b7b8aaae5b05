#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ebif/expr.hpp"
#include "ebif/function_space.hpp"
#include "ebif/linalg.hpp"
#include "ebif/random.hpp"
#include "ebif/system.hpp"

namespace ebif {

/// offset: constants in Lie derivatives become the inhomogeneous terms D_0, D_i and the
/// chain is computed modulo constants. augment: the function 1 joins the basis.
enum class ConstantMode { Offset, Augment };

inline const char* to_string(ConstantMode m) { return m == ConstantMode::Offset ? "offset" : "augment"; }

inline ConstantMode parse_constant_mode(const std::string& s) {
  if (s == "offset") return ConstantMode::Offset;
  if (s == "augment") return ConstantMode::Augment;
  throw Error(ErrorKind::InvalidInput, "constant mode must be 'offset' or 'augment', got '" + s + "'");
}

struct EbifConfig {
  std::vector<CanonicalExpr> gamma0;  ///< empty means the coordinate functions
  std::size_t maxDim = 200;
  std::size_t maxIter = 50;
  ConstantMode constantMode = ConstantMode::Offset;
};

enum class EbifStatus { Stabilized, DimCapExceeded, IterCapExceeded };

inline const char* to_string(EbifStatus s) {
  switch (s) {
    case EbifStatus::Stabilized: return "Stabilized";
    case EbifStatus::DimCapExceeded: return "DimCapExceeded";
    case EbifStatus::IterCapExceeded: return "IterCapExceeded";
  }
  return "Unknown";
}

inline EbifStatus parse_status(const std::string& s) {
  if (s == "Stabilized") return EbifStatus::Stabilized;
  if (s == "DimCapExceeded") return EbifStatus::DimCapExceeded;
  if (s == "IterCapExceeded") return EbifStatus::IterCapExceeded;
  throw Error(ErrorKind::InvalidInput, "unknown status '" + s + "'");
}

struct EbifOutcome {
  EbifStatus status = EbifStatus::IterCapExceeded;
  std::vector<std::size_t> chainDims;
  std::optional<std::size_t> kStar;
  ConstantMode constantMode = ConstantMode::Offset;
  /// In offset mode the function 1 is held as basis element 0 of `space` so that
  /// membership is tested modulo constants; it is not part of the embedding.
  bool hiddenConstant = false;
  FunctionSpace space;

  std::vector<CanonicalExpr> basis() const {
    const auto& b = space.basis();
    return {b.begin() + (hiddenConstant ? 1 : 0), b.end()};
  }
  std::size_t dim() const { return space.dim() - (hiddenConstant ? 1 : 0); }
};

inline std::vector<CanonicalExpr> coordinate_functions(std::size_t n) {
  std::vector<CanonicalExpr> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(CanonicalExpr::variable(n, i));
  return out;
}

/// L_τ S = span{L_τ γ : γ in the basis of S}.
inline FunctionSpace lie_derivation_space(const FunctionSpace& s, const VectorField& tau) {
  if (tau.dim() != s.ambient_dim())
    throw Error(ErrorKind::DimensionMismatch, "vector field and space dimensions differ");
  FunctionSpace out(s.ambient_dim());
  for (const auto& g : s.basis()) out.admit(lie_derivative(g, tau));
  return out;
}

/// One EBIF step: Γ + Σ_τ L_τ Γ. New functions are admitted with τ as the outer loop,
/// each reduced against the current span and scaled to a unit leading coefficient.
inline FunctionSpace ebif_step(const FunctionSpace& prev, const std::vector<VectorField>& fields) {
  if (fields.empty()) throw Error(ErrorKind::InvalidInput, "ebif_step needs at least one field");
  FunctionSpace next(prev);
  const std::size_t d = prev.dim();
  for (const auto& tau : fields) {
    if (tau.dim() != prev.ambient_dim())
      throw Error(ErrorKind::DimensionMismatch, "vector field and space dimensions differ");
    for (std::size_t j = 0; j < d; ++j) next.admit_reduced(lie_derivative(prev.basis()[j], tau));
  }
  return next;
}

/// Iterates the EBIF recursion until the span stops growing or a cap fires.
inline EbifOutcome ebif_run(const NonlinearSystem& sys, const EbifConfig& cfg) {
  const std::size_t n = sys.n;
  std::vector<CanonicalExpr> seed = cfg.gamma0.empty() ? coordinate_functions(n) : cfg.gamma0;
  if (seed.empty()) throw Error(ErrorKind::EmptySeed, "seed list is empty");
  if (cfg.maxDim < n) throw Error(ErrorKind::InvalidInput, "maxDim must be at least n");

  EbifOutcome out;
  out.constantMode = cfg.constantMode;
  out.space = FunctionSpace(n);
  if (cfg.constantMode == ConstantMode::Offset) {
    out.space.admit(CanonicalExpr::constant(n, 1));
    out.hiddenConstant = true;
  }
  for (const auto& g : seed) {
    if (g.dim() != n) throw Error(ErrorKind::DimensionMismatch, "seed function dimension");
    out.space.admit(g);
  }
  if (out.dim() == 0) throw Error(ErrorKind::EmptySeed, "seed spans the zero space");
  out.chainDims.push_back(out.dim());

  const std::vector<VectorField> fields = sys.fields();
  // Derivatives of older basis elements already lie in the space, so each step only
  // differentiates the elements admitted by the previous step.
  std::size_t fresh_begin = out.hiddenConstant ? 1 : 0;
  for (std::size_t k = 1; k <= cfg.maxIter; ++k) {
    const std::size_t fresh_end = out.space.dim();
    bool capped = false;
    for (const auto& tau : fields) {
      for (std::size_t j = fresh_begin; j < fresh_end && !capped; ++j) {
        CanonicalExpr d = lie_derivative(out.space.basis()[j], tau);
        if (cfg.constantMode == ConstantMode::Offset) d = d.without_constant();
        out.space.admit_reduced(d);
        capped = out.dim() > cfg.maxDim;
      }
      if (capped) break;
    }
    out.chainDims.push_back(out.dim());
    if (capped) {
      out.status = EbifStatus::DimCapExceeded;
      return out;
    }
    if (out.space.dim() == fresh_end) {
      out.status = EbifStatus::Stabilized;
      out.kStar = k - 1;
      return out;
    }
    fresh_begin = fresh_end;
  }
  out.status = EbifStatus::IterCapExceeded;
  return out;
}

/// ż = A z + D0 + Σ u_i (B_i z + D_i) together with the embedding z = Ψ(x).
struct BilinearRealization {
  std::string name;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t r = 0;
  std::vector<CanonicalExpr> psi;
  RationalMatrix A;
  std::vector<RationalMatrix> B;
  RationalVector D0;
  std::vector<RationalVector> D;
  /// Row i expresses x_{i+1} = projRows[i]·z + projOffsets[i]; absent when x_{i+1} ∉ span Ψ.
  std::vector<std::optional<RationalVector>> projRows;
  RationalVector projOffsets;
  std::vector<std::size_t> chainDims;
  std::optional<std::size_t> kStar;
  EbifStatus status = EbifStatus::Stabilized;
  ConstantMode constantMode = ConstantMode::Offset;

  friend bool operator==(const BilinearRealization&, const BilinearRealization&) = default;

  bool has_projection() const {
    for (const auto& p : projRows)
      if (!p) return false;
    return !projRows.empty();
  }

  bool has_offsets() const {
    auto nonzero = [](const RationalVector& v) {
      for (const auto& c : v)
        if (c != 0) return true;
      return false;
    };
    if (nonzero(D0)) return true;
    for (const auto& d : D)
      if (nonzero(d)) return true;
    return false;
  }

  Matrix A_d() const { return to_eigen(A, r, r); }
  Matrix B_d(std::size_t i) const { return to_eigen(B.at(i), r, r); }
  Vector D0_d() const { return to_eigen(D0); }
  Vector D_d(std::size_t i) const { return to_eigen(D.at(i)); }

  /// Homogeneous (r+1)-dimensional form [[M, d], [0, 0]] acting on (z, 1).
  static Matrix augment(const Matrix& mat, const Vector& offset) {
    const Eigen::Index k = mat.rows();
    Matrix out = Matrix::Zero(k + 1, k + 1);
    out.topLeftCorner(k, k) = mat;
    out.topRightCorner(k, 1) = offset;
    return out;
  }
  Matrix A_bar() const { return augment(A_d(), D0_d()); }
  Matrix B_bar(std::size_t i) const { return augment(B_d(i), D_d(i)); }

  /// n×(r+1) projection acting on (z, 1).
  Matrix projection_bar() const {
    if (!has_projection())
      throw Error(ErrorKind::MissingProjection, "some coordinate is not in the span of the embedding");
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r + 1));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < r; ++j)
        p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*projRows[i])[j].get_d();
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = projOffsets[i].get_d();
    }
    return p;
  }
};

/// Reads off A, B_i, D_0, D_i and the projection rows from a stabilized outcome.
inline BilinearRealization extract_bilinear(const NonlinearSystem& sys, const EbifOutcome& outcome) {
  if (outcome.status != EbifStatus::Stabilized)
    throw Error(ErrorKind::NotStabilized, std::string("EBIF status is ") + to_string(outcome.status));
  const std::size_t n = sys.n;
  const std::size_t shift = outcome.hiddenConstant ? 1 : 0;
  BilinearRealization real;
  real.name = sys.name;
  real.n = n;
  real.m = sys.m();
  real.psi = outcome.basis();
  real.r = real.psi.size();
  real.chainDims = outcome.chainDims;
  real.kStar = outcome.kStar;
  real.status = outcome.status;
  real.constantMode = outcome.constantMode;
  const std::size_t r = real.r;

  auto coordinates = [&](const CanonicalExpr& e, RationalVector& row, Rational& offset) {
    auto coeffs = outcome.space.contains(e);
    if (!coeffs) return false;
    row.assign(r, Rational(0));
    for (std::size_t j = 0; j < r; ++j) row[j] = (*coeffs)[j + shift];
    offset = shift ? (*coeffs)[0] : Rational(0);
    return true;
  };

  auto fill = [&](const VectorField& tau, RationalMatrix& mat, RationalVector& offset) {
    mat.assign(r, RationalVector(r));
    offset.assign(r, Rational(0));
    for (std::size_t j = 0; j < r; ++j) {
      CanonicalExpr d = lie_derivative(real.psi[j], tau);
      if (!coordinates(d, mat[j], offset[j]))
        throw Error(ErrorKind::NotInvariant, "Lie derivative of " + to_string(real.psi[j]) +
                                                 " leaves the stabilized space: " + to_string(d));
    }
  };

  fill(sys.drift, real.A, real.D0);
  real.B.resize(real.m);
  real.D.resize(real.m);
  for (std::size_t i = 0; i < real.m; ++i) fill(sys.controls[i], real.B[i], real.D[i]);

  real.projRows.resize(n);
  real.projOffsets.assign(n, Rational(0));
  for (std::size_t i = 0; i < n; ++i) {
    RationalVector row;
    Rational offset;
    if (coordinates(CanonicalExpr::variable(n, i), row, offset)) {
      real.projRows[i] = std::move(row);
      real.projOffsets[i] = offset;
    }
  }
  return real;
}

inline Vector lift(const BilinearRealization& real, std::span<const double> x) {
  Vector z(static_cast<Eigen::Index>(real.r));
  for (std::size_t j = 0; j < real.r; ++j) z(static_cast<Eigen::Index>(j)) = eval(real.psi[j], x);
  return z;
}

/// (Ψ(x), 1).
inline Vector lift_bar(const BilinearRealization& real, std::span<const double> x) {
  Vector z(static_cast<Eigen::Index>(real.r + 1));
  z.head(static_cast<Eigen::Index>(real.r)) = lift(real, x);
  z(static_cast<Eigen::Index>(real.r)) = 1.0;
  return z;
}

inline Vector project(const BilinearRealization& real, const Vector& z) {
  if (!real.has_projection())
    throw Error(ErrorKind::MissingProjection, "some coordinate is not in the span of the embedding");
  if (static_cast<std::size_t>(z.size()) != real.r && static_cast<std::size_t>(z.size()) != real.r + 1)
    throw Error(ErrorKind::DimensionMismatch, "lifted vector has wrong length");
  Vector x(static_cast<Eigen::Index>(real.n));
  for (std::size_t i = 0; i < real.n; ++i) {
    double s = real.projOffsets[i].get_d();
    for (std::size_t j = 0; j < real.r; ++j) {
      const Rational& c = (*real.projRows[i])[j];
      if (c != 0) s += c.get_d() * z(static_cast<Eigen::Index>(j));
    }
    x(static_cast<Eigen::Index>(i)) = s;
  }
  return x;
}

enum class EmbeddingVerdict { Embedding, NotVerified };

struct EmbeddingReport {
  bool isGraphOverCoordinates = false;
  std::vector<std::pair<std::vector<double>, int>> jacobianRankSamples;
  EmbeddingVerdict verdict = EmbeddingVerdict::NotVerified;
};

/// Jacobian ∂Ψ/∂x evaluated at x (r×n).
inline Matrix psi_jacobian(const BilinearRealization& real, std::span<const double> x) {
  Matrix j(static_cast<Eigen::Index>(real.r), static_cast<Eigen::Index>(real.n));
  for (std::size_t a = 0; a < real.r; ++a)
    for (std::size_t l = 0; l < real.n; ++l)
      j(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(l)) = eval(partial(real.psi[a], l), x);
  return j;
}

/// 25 points uniform in [-2, 2]^n from the given seed.
inline std::vector<std::vector<double>> default_sample_points(std::size_t n, std::size_t count = 25,
                                                              std::uint64_t seed = 42) {
  std::vector<std::vector<double>> pts(count, std::vector<double>(n));
  for (std::size_t k = 0; k < count; ++k)
    for (std::size_t i = 0; i < n; ++i) pts[k][i] = uniform(seed, k * n + i, -2.0, 2.0);
  return pts;
}

inline EmbeddingReport verify_embedding(const BilinearRealization& real,
                                        const std::vector<std::vector<double>>& samples) {
  EmbeddingReport rep;
  rep.isGraphOverCoordinates = real.has_projection();
  bool all_full = !samples.empty();
  for (const auto& x : samples) {
    int rank = numeric_rank(psi_jacobian(real, x));
    rep.jacobianRankSamples.emplace_back(x, rank);
    all_full = all_full && rank == static_cast<int>(real.n);
  }
  rep.verdict = rep.isGraphOverCoordinates || all_full ? EmbeddingVerdict::Embedding
                                                       : EmbeddingVerdict::NotVerified;
  return rep;
}

/// Compiled Lie derivatives L_τ γ_j for all fields, for repeated residual checks.
class PsiPushforward {
 public:
  PsiPushforward(const NonlinearSystem& sys, const BilinearRealization& real) : real_(real) {
    if (sys.n != real.n || sys.m() != real.m)
      throw Error(ErrorKind::DimensionMismatch, "system and realization disagree on n or m");
    for (const auto& tau : sys.fields()) {
      std::vector<CompiledExpr> col;
      for (const auto& g : real.psi) col.emplace_back(lie_derivative(g, tau));
      derivs_.push_back(std::move(col));
    }
    for (const auto& g : real.psi) psi_.emplace_back(g);
    A_ = real.A_d();
    D0_ = real.D0_d();
    for (std::size_t i = 0; i < real.m; ++i) {
      B_.push_back(real.B_d(i));
      D_.push_back(real.D_d(i));
    }
  }

  /// ‖Ψ_*(f + Σ u_i g_i) − (AΨ + D0 + Σ u_i(B_iΨ + D_i))‖∞ at x.
  double residual(std::span<const double> x, std::span<const double> u) const {
    const auto r = static_cast<Eigen::Index>(real_.r);
    Vector z(r), lhs = Vector::Zero(r);
    for (Eigen::Index j = 0; j < r; ++j) z(j) = psi_[static_cast<std::size_t>(j)](x);
    for (std::size_t t = 0; t < derivs_.size(); ++t) {
      double w = t == 0 ? 1.0 : u[t - 1];
      if (w == 0.0) continue;
      for (Eigen::Index j = 0; j < r; ++j) lhs(j) += w * derivs_[t][static_cast<std::size_t>(j)](x);
    }
    Vector rhs = A_ * z + D0_;
    for (std::size_t i = 0; i < B_.size(); ++i) rhs += u[i] * (B_[i] * z + D_[i]);
    return r == 0 ? 0.0 : (lhs - rhs).cwiseAbs().maxCoeff();
  }

 private:
  const BilinearRealization& real_;
  std::vector<std::vector<CompiledExpr>> derivs_;
  std::vector<CompiledExpr> psi_;
  Matrix A_;
  Vector D0_;
  std::vector<Matrix> B_;
  std::vector<Vector> D_;
};

inline double psi_related_residual(const NonlinearSystem& sys, const BilinearRealization& real,
                                   std::span<const double> x, std::span<const double> u) {
  return PsiPushforward(sys, real).residual(x, u);
}

/// The realization read as a control-affine system on ℝʳ: fields Az + D0 and B_i z + D_i.
inline NonlinearSystem as_nonlinear_system(const BilinearRealization& real) {
  const std::size_t r = real.r;
  auto field = [&](const RationalMatrix& mat, const RationalVector& offset) {
    std::vector<CanonicalExpr> comps;
    for (std::size_t j = 0; j < r; ++j) {
      CanonicalExpr c = CanonicalExpr::constant(r, offset[j]);
      for (std::size_t k = 0; k < r; ++k)
        if (mat[j][k] != 0) c += CanonicalExpr::variable(r, k) * mat[j][k];
      comps.push_back(std::move(c));
    }
    return VectorField(std::move(comps));
  };
  std::vector<VectorField> controls;
  for (std::size_t i = 0; i < real.m; ++i) controls.push_back(field(real.B[i], real.D[i]));
  return NonlinearSystem(real.name + " (bilinear)", field(real.A, real.D0), std::move(controls));
}

}  // namespace ebif
