#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "ebif/engine.hpp"
#include "ebif/function_space.hpp"
#include "ebif/linalg.hpp"
#include "ebif/random.hpp"
#include "ebif/simulate.hpp"

namespace ebif {

inline constexpr double kRankTolerance = 1e-9;

/// ad_A B = AB − BA.
inline Matrix ad(const Matrix& a, const Matrix& b) { return a * b - b * a; }

/// Incrementally built orthonormal basis of vectorized matrices.
class MatrixSpan {
 public:
  explicit MatrixSpan(double tol = kRankTolerance) : tol_(tol) {}

  /// Adds m if its component outside the span exceeds tol relative to max|m|.
  bool admit(const Matrix& m) {
    const double scale = max_abs(m);
    if (scale == 0.0) return false;
    Vector v = vectorize(m) / scale;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : ortho_) v -= q.dot(v) * q;
    if (v.cwiseAbs().maxCoeff() <= tol_) return false;
    ortho_.push_back(v / v.norm());
    members_.push_back(m);
    return true;
  }

  std::size_t dim() const { return members_.size(); }
  const std::vector<Matrix>& members() const { return members_; }

  /// Max-abs of the part of m outside the span, relative to max|m|.
  double distance(const Matrix& m) const {
    const double scale = max_abs(m);
    if (scale == 0.0) return 0.0;
    Vector v = vectorize(m) / scale;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : ortho_) v -= q.dot(v) * q;
    return v.cwiseAbs().maxCoeff();
  }

 private:
  double tol_;
  std::vector<Vector> ortho_;
  std::vector<Matrix> members_;
};

/// Span of the adjoint chain ad_A^k B_i.
struct AdjointSpan {
  /// Chain elements, each scaled to unit max-abs entry so long chains stay finite.
  std::vector<Matrix> generators;
  std::vector<Matrix> basis;
  bool hypothesisHolds = false;
  double tolerance = kRankTolerance;

  std::size_t dim() const { return basis.size(); }
};

/// Generators ad_A^k B_i for k = 0..maxOrder (default size² − 1); basis by greedy pivoting.
inline AdjointSpan adjoint_chain(const Matrix& a, const std::vector<Matrix>& bs, int max_order = -1,
                                 double tol = kRankTolerance) {
  if (a.rows() != a.cols()) throw Error(ErrorKind::NonSquare, "drift matrix is not square");
  for (const auto& b : bs)
    if (b.rows() != a.rows() || b.cols() != a.cols())
      throw Error(ErrorKind::NonSquare, "control matrix does not match drift size");
  const auto size = static_cast<int>(a.rows());
  if (max_order < 0) max_order = std::max(0, size * size - 1);
  AdjointSpan out;
  out.tolerance = tol;
  MatrixSpan span(tol);
  for (const auto& b : bs) {
    Matrix g = b;
    for (int k = 0; k <= max_order; ++k) {
      const double scale = max_abs(g);
      if (scale == 0.0) break;
      g /= scale;
      out.generators.push_back(g);
      span.admit(g);
      g = ad(a, g);
    }
  }
  out.basis = span.members();
  return out;
}

/// True iff ‖[G, B_j]‖∞ ≤ tol for every generator G and control matrix B_j, both unit-scaled.
inline bool commutation_check(const AdjointSpan& span, const std::vector<Matrix>& bs) {
  for (const auto& b : bs) {
    const double scale = max_abs(b);
    if (scale == 0.0) continue;
    for (const auto& g : span.generators)
      if (max_abs(ad(g, b / scale)) > span.tolerance) return false;
  }
  return true;
}

/// Adjoint span of a realization's augmented matrices with the hypothesis flag filled in.
inline AdjointSpan realization_adjoint_span(const BilinearRealization& real, int max_order = -1,
                                            double tol = kRankTolerance) {
  std::vector<Matrix> bs;
  for (std::size_t i = 0; i < real.m; ++i) bs.push_back(real.B_bar(i));
  AdjointSpan span = adjoint_chain(real.A_bar(), bs, max_order, tol);
  span.hypothesisHolds = commutation_check(span, bs);
  return span;
}

/// x = P(e^{ĀT} e^H Ψ̄(x0)) with H = Σ c_k basis_k.
class ReachMap {
 public:
  ReachMap(const BilinearRealization& real, const AdjointSpan& span, std::span<const double> x0, double T)
      : basis_(span.basis), proj_(real.projection_bar()) {
    if (x0.size() != real.n) throw Error(ErrorKind::DimensionMismatch, "x0 has wrong length");
    drift_flow_ = expm(T * real.A_bar());
    start_ = lift_bar(real, x0);
  }

  std::size_t dim() const { return basis_.size(); }
  std::size_t state_dim() const { return static_cast<std::size_t>(proj_.rows()); }

  Matrix generator(const Vector& coeffs) const {
    Matrix h = Matrix::Zero(start_.size(), start_.size());
    for (std::size_t k = 0; k < basis_.size(); ++k) h += coeffs(static_cast<Eigen::Index>(k)) * basis_[k];
    return h;
  }

  Vector operator()(const Vector& coeffs) const {
    return proj_ * (drift_flow_ * (expm(generator(coeffs)) * start_));
  }

 private:
  std::vector<Matrix> basis_;
  Matrix proj_;
  Matrix drift_flow_;
  Vector start_;
};

struct ReachSampleSet {
  double horizon = 0.0;
  double coeffBox = 0.0;
  bool heuristic = true;
  std::size_t dim = 0;
  std::size_t stateDim = 0;
  std::vector<Vector> coeffs;
  std::vector<Vector> points;

  std::size_t size() const { return points.size(); }
};

/// N images of coefficient vectors drawn uniformly from [−box, box]^d; draw j of sample i uses index i·d + j.
inline ReachSampleSet reach_sample(const BilinearRealization& real, const AdjointSpan& span,
                                   std::span<const double> x0, double T, double coeff_box, std::size_t count,
                                   std::uint64_t seed) {
  if (span.dim() == 0 && real.m > 0)
    throw Error(ErrorKind::EmptySpan, "adjoint span is empty although controls are present");
  const ReachMap map(real, span, x0, T);
  const std::size_t d = span.dim();
  ReachSampleSet out;
  out.horizon = T;
  out.coeffBox = coeff_box;
  out.heuristic = !span.hypothesisHolds;
  out.dim = d;
  out.stateDim = real.n;
  out.coeffs.reserve(count);
  out.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vector c(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) c(static_cast<Eigen::Index>(j)) = uniform(seed, i * d + j, -coeff_box, coeff_box);
    out.points.push_back(map(c));
    out.coeffs.push_back(std::move(c));
  }
  return out;
}

/// Index and distance (Euclidean) of the sample closest to target.
inline std::pair<std::size_t, double> nearest_sample(const ReachSampleSet& set, const Vector& target) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    const double d2 = (set.points[i] - target).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {best, std::sqrt(best_d2)};
}

namespace detail {

struct ResidualFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Vector;
  using ValueType = Vector;
  using JacobianType = Matrix;

  std::function<Vector(const Vector&)> fn;
  int inputs_;
  int values_;

  int inputs() const { return inputs_; }
  int values() const { return values_; }

  int operator()(const Vector& x, Vector& out) const {
    const Vector r = fn(x);
    out = Vector::Zero(values_);
    out.head(r.size()) = r;
    return 0;
  }
};

}  // namespace detail

/// Levenberg–Marquardt on ‖fn(p)‖² from start with central-difference Jacobians.
inline Vector least_squares(const std::function<Vector(const Vector&)>& fn, Vector start, int max_evals = 2000) {
  const int residual_size = static_cast<int>(fn(start).size());
  detail::ResidualFunctor f{fn, static_cast<int>(start.size()),
                            std::max(residual_size, static_cast<int>(start.size()))};
  Eigen::NumericalDiff<detail::ResidualFunctor, Eigen::Central> numeric(f);
  Eigen::LevenbergMarquardt<decltype(numeric)> lm(numeric);
  lm.parameters.maxfev = max_evals;
  lm.parameters.xtol = 1e-14;
  lm.parameters.ftol = 1e-16;
  lm.minimize(start);
  return start;
}

struct ReachFit {
  Vector coeffs;
  double distance = 0.0;
};

/// Moves start coefficients toward a point whose image is target, staying inside the box.
inline ReachFit refine_reach_point(const ReachMap& map, const Vector& target, const Vector& start, double box) {
  // c = box·tanh(w) keeps every iterate inside the sampling box.
  auto coeffs_of = [box](const Vector& w) -> Vector { return box * w.array().tanh().matrix(); };
  Vector w0 = (start / box).cwiseMax(-1 + 1e-9).cwiseMin(1 - 1e-9).array().atanh().matrix();
  const Vector w = least_squares([&](const Vector& p) { return Vector(map(coeffs_of(p)) - target); }, w0);
  ReachFit fit{coeffs_of(w), 0.0};
  fit.distance = (map(fit.coeffs) - target).norm();
  const double start_distance = (map(start) - target).norm();
  if (start_distance < fit.distance) fit = {start, start_distance};
  return fit;
}

struct LogFlowFit {
  Vector coeffs;
  /// Max-abs of log(e^{−ĀT}Φ) left outside the adjoint span, relative to its max-abs entry.
  double outsideSpan = 0.0;
};

/// Coordinates in the adjoint basis of H = log(e^{−ĀT} e^{T(Ā+ΣuB̄)}), by least squares.
inline LogFlowFit log_flow_coefficients(const BilinearRealization& real, const AdjointSpan& span,
                                        std::span<const double> u, double T) {
  const FlowModel model(real);
  const Matrix target = expm(-T * model.A_bar()) * model.flow(u, T);
  const Matrix h = target.log();
  const std::size_t d = span.dim();
  Matrix cols(h.size(), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) cols.col(static_cast<Eigen::Index>(k)) = vectorize(span.basis[k]);
  LogFlowFit fit;
  fit.coeffs = d == 0 ? Vector() : Vector(cols.colPivHouseholderQr().solve(vectorize(h)));
  const double scale = max_abs(h);
  const Vector rest = vectorize(h) - cols * fit.coeffs;
  fit.outsideSpan = scale == 0.0 || rest.size() == 0 ? 0.0 : rest.cwiseAbs().maxCoeff() / scale;
  return fit;
}

/// 1.05 times the largest log-flow coefficient over the given constant controls.
inline double auto_coeff_box(const BilinearRealization& real, const AdjointSpan& span,
                             const std::vector<std::vector<double>>& controls, double T) {
  double box = 0.0;
  for (const auto& u : controls) {
    const LogFlowFit fit = log_flow_coefficients(real, span, u, T);
    if (fit.coeffs.size() > 0) box = std::max(box, fit.coeffs.cwiseAbs().maxCoeff());
  }
  return box > 0.0 ? 1.05 * box : 1.0;
}

/// count constant controls of the given norm: evenly spaced on the circle when m = 2, otherwise
/// normalized draws keyed on (seed, index).
inline std::vector<std::vector<double>> control_directions_on_sphere(std::size_t m, std::size_t count, double norm,
                                                                     std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < count && m > 0; ++k) {
    std::vector<double> u(m);
    if (m == 1) {
      u[0] = k % 2 == 0 ? norm : -norm;
    } else if (m == 2) {
      const double a = 2.0 * 3.14159265358979323846 * static_cast<double>(k) / static_cast<double>(count);
      u = {norm * std::cos(a), norm * std::sin(a)};
    } else {
      double len = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        u[i] = uniform(seed, k * m + i, -1.0, 1.0);
        len += u[i] * u[i];
      }
      len = std::sqrt(len);
      for (auto& c : u) c = len > 0 ? norm * c / len : 0.0;
    }
    out.push_back(std::move(u));
  }
  return out;
}

/// Constant control whose flow from x0 over T lands nearest target, starting from start.
inline std::vector<double> fit_constant_control(const BilinearRealization& real, std::span<const double> x0,
                                                double T, const Vector& target, const std::vector<double>& start) {
  const FlowModel model(real);
  const Matrix proj = real.projection_bar();
  const Vector z0 = lift_bar(real, x0);
  auto endpoint = [&](const Vector& u) -> Vector {
    return proj * (model.flow({u.data(), static_cast<std::size_t>(u.size())}, T) * z0);
  };
  const Vector u = least_squares([&](const Vector& p) { return Vector(endpoint(p) - target); }, to_eigen(start));
  return to_std(u);
}

/// `h1..hd,x1..xn` rows with 17 significant digits.
inline void write_reach_csv(std::ostream& os, const ReachSampleSet& set) {
  const auto d = static_cast<Eigen::Index>(set.dim);
  const auto n = static_cast<Eigen::Index>(set.stateDim);
  std::string header;
  for (Eigen::Index j = 0; j < d; ++j) header += "h" + std::to_string(j + 1) + ",";
  for (Eigen::Index i = 0; i < n; ++i) header += "x" + std::to_string(i + 1) + (i + 1 < n ? "," : "");
  os << header << '\n';
  char buf[40];
  for (std::size_t s = 0; s < set.size(); ++s) {
    bool first = true;
    auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << (first ? "" : ",") << buf;
      first = false;
    };
    for (Eigen::Index j = 0; j < d; ++j) put(set.coeffs[s](j));
    for (Eigen::Index i = 0; i < n; ++i) put(set.points[s](i));
    os << '\n';
  }
}

/// Jacobi–Lie bracket (∂τ2/∂x)τ1 − (∂τ1/∂x)τ2, computed exactly.
inline VectorField vf_bracket(const VectorField& t1, const VectorField& t2) {
  if (t1.dim() != t2.dim()) throw Error(ErrorKind::DimensionMismatch, "bracket of fields of different dimension");
  std::vector<CanonicalExpr> comps;
  for (std::size_t i = 0; i < t1.dim(); ++i) comps.push_back(lie_derivative(t2[i], t1) - lie_derivative(t1[i], t2));
  return VectorField(std::move(comps));
}

/// Bracket of the linear fields Mz and Nz, itself the linear field (NM − MN)z.
inline Matrix linear_field_bracket(const Matrix& m, const Matrix& n) { return n * m - m * n; }

namespace detail {

/// Σ_i y_i τ_i(x) over 2n variables; constant-coefficient dependence of fields becomes span membership.
inline CanonicalExpr tag_components(const VectorField& f) {
  const std::size_t n = f.dim();
  auto pad = [n](AffineForm a) {
    a.linear.resize(2 * n);
    return a;
  };
  CanonicalExpr out(2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [atom, c] : f[i].terms()) {
      Atom tagged = atom;
      tagged.monomial.resize(2 * n, 0);
      tagged.monomial[n + i] = 1;
      if (tagged.trig) tagged.trig->arg = pad(tagged.trig->arg);
      if (tagged.expo) tagged.expo = pad(*tagged.expo);
      out.accumulate(std::move(tagged), c);
    }
  return out;
}

}  // namespace detail

inline constexpr std::size_t kMaxBracketFields = 400;

/// Exactly independent fields among {f, g_i} and their left-nested brackets up to depth.
inline std::vector<VectorField> lie_generators(const NonlinearSystem& sys, int depth) {
  const std::vector<VectorField> gens = sys.fields();
  FunctionSpace seen(2 * sys.n);
  std::vector<VectorField> all, level;
  for (const auto& g : gens)
    if (seen.admit(detail::tag_components(g))) level.push_back(g);
  all = level;
  for (int d = 2; d <= depth && !level.empty() && all.size() < kMaxBracketFields; ++d) {
    std::vector<VectorField> next;
    for (const auto& g : gens)
      for (const auto& v : level) {
        VectorField b = vf_bracket(g, v);
        if (!b.is_zero() && all.size() + next.size() < kMaxBracketFields &&
            seen.admit(detail::tag_components(b)))
          next.push_back(std::move(b));
      }
    all.insert(all.end(), next.begin(), next.end());
    level = std::move(next);
  }
  return all;
}

/// Rank at x of the Lie algebra generated by f, g_1..g_m (brackets up to depth).
inline int lie_rank_nonlinear(const NonlinearSystem& sys, std::span<const double> x, int depth,
                              double tol = kRankTolerance) {
  if (depth < 1) throw Error(ErrorKind::InvalidInput, "bracket depth must be at least 1");
  const auto fields = lie_generators(sys, depth);
  if (fields.empty()) return 0;
  Matrix vals(static_cast<Eigen::Index>(sys.n), static_cast<Eigen::Index>(fields.size()));
  for (std::size_t k = 0; k < fields.size(); ++k)
    for (std::size_t i = 0; i < sys.n; ++i)
      vals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = eval(fields[k][i], x);
  return numeric_rank(vals, tol);
}

/// Numerically independent matrices among Ā, B̄_i and their left-nested commutator fields up to depth.
inline std::vector<Matrix> lie_generators(const BilinearRealization& real, int depth, double tol = kRankTolerance) {
  std::vector<Matrix> gens{real.A_bar()};
  for (std::size_t i = 0; i < real.m; ++i) gens.push_back(real.B_bar(i));
  MatrixSpan span(tol);
  std::vector<Matrix> level;
  for (const auto& g : gens)
    if (span.admit(g)) level.push_back(g);
  for (int d = 2; d <= depth && !level.empty(); ++d) {
    std::vector<Matrix> next;
    for (const auto& g : gens)
      for (const auto& v : level) {
        Matrix b = linear_field_bracket(g, v);
        if (span.admit(b)) next.push_back(std::move(b));
      }
    level = std::move(next);
  }
  return span.members();
}

/// Rank at z̄ = (z, 1) of the Lie algebra of the fields Āz̄, B̄_i z̄.
inline int lie_rank_bilinear(const BilinearRealization& real, const Vector& z, int depth,
                             double tol = kRankTolerance) {
  if (depth < 1) throw Error(ErrorKind::InvalidInput, "bracket depth must be at least 1");
  if (static_cast<std::size_t>(z.size()) != real.r) throw Error(ErrorKind::DimensionMismatch, "z has wrong length");
  Vector zbar(z.size() + 1);
  zbar << z, 1.0;
  const auto mats = lie_generators(real, depth, tol);
  if (mats.empty()) return 0;
  Matrix vals(zbar.size(), static_cast<Eigen::Index>(mats.size()));
  for (std::size_t k = 0; k < mats.size(); ++k) vals.col(static_cast<Eigen::Index>(k)) = mats[k] * zbar;
  return numeric_rank(vals, tol);
}

struct DimEquivalenceReport {
  bool agree = true;
  /// (nonlinear rank, bilinear rank) per sample point.
  std::vector<std::pair<int, int>> ranks;
};

/// Compares the two Lie ranks at every sample point x and at z = Ψ(x).
inline DimEquivalenceReport dim_equivalence(const NonlinearSystem& sys, const BilinearRealization& real,
                                            const std::vector<std::vector<double>>& points, int depth,
                                            double tol = kRankTolerance) {
  DimEquivalenceReport rep;
  for (const auto& x : points) {
    const int a = lie_rank_nonlinear(sys, x, depth, tol);
    const int b = lie_rank_bilinear(real, lift(real, x), depth, tol);
    rep.ranks.emplace_back(a, b);
    rep.agree = rep.agree && a == b;
  }
  return rep;
}

}  // namespace ebif
