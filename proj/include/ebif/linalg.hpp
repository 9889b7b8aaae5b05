#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "ebif/error.hpp"
#include "ebif/rational.hpp"

namespace ebif {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix to_eigen(const RationalMatrix& m, std::size_t rows, std::size_t cols) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j].get_d();
  return out;
}

inline Vector to_eigen(const RationalVector& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].get_d();
  return out;
}

inline Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Matrix exponential by scaling and squaring with the degree-13 diagonal Padé approximant.
inline Matrix expm(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::NonSquare, "expm needs a square matrix");
  if (!m.allFinite()) throw Error(ErrorKind::NonFinite, "expm input has non-finite entries");
  const Eigen::Index r = m.rows();
  if (r == 0) return m;
  if (m.isZero(0.0)) return Matrix::Identity(r, r);

  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
  const Matrix a = m / std::ldexp(1.0, squarings);
  const Matrix id = Matrix::Identity(r, r);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix u =
      a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) result = result * result;
  if (!result.allFinite()) throw Error(ErrorKind::NonFinite, "expm overflowed");
  return result;
}

/// Number of singular values above tau_scale times the largest entry magnitude.
inline int numeric_rank(const Matrix& m, double tau_scale = 1e-9) {
  if (m.size() == 0) return 0;
  const double scale = max_abs(m);
  if (scale == 0.0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tau_scale * scale) ++rank;
  return rank;
}

/// Column-stacked copy of a matrix.
inline Vector vectorize(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

}  // namespace ebif
