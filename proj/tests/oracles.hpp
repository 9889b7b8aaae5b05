#pragma once

// Independent reference computations used by the unit tests.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace ebif::oracle {

using Fn = std::function<double(const std::vector<double>&)>;

inline double central_difference(const Fn& f, std::vector<double> x, std::size_t i,
                                 double h = 1e-6) {
  const double xi = x[i];
  x[i] = xi + h;
  const double fp = f(x);
  x[i] = xi - h;
  const double fm = f(x);
  return (fp - fm) / (2 * h);
}

inline std::vector<std::vector<double>> random_points(std::size_t count, std::size_t n,
                                                      unsigned seed, double lo = -2.0,
                                                      double hi = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<std::vector<double>> pts(count, std::vector<double>(n));
  for (auto& p : pts)
    for (auto& v : p) v = d(rng);
  return pts;
}

/// Taylor series of exp(M) summed until terms stop changing the result.
inline Eigen::MatrixXd series_expm(const Eigen::MatrixXd& m) {
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  int s = norm > 0.5 ? static_cast<int>(std::ceil(std::log2(norm / 0.5))) : 0;
  const Eigen::MatrixXd a = m / std::ldexp(1.0, s);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd term = sum;
  for (int k = 1; k < 40; ++k) {
    term = term * a / k;
    sum += term;
  }
  for (int k = 0; k < s; ++k) sum = sum * sum;
  return sum;
}

/// Classical RK4 for ẋ = F(x) with fixed step.
inline std::vector<double> rk4(const std::function<std::vector<double>(const std::vector<double>&)>& F,
                               std::vector<double> x, double T, int steps) {
  const double h = T / steps;
  auto axpy = [](const std::vector<double>& a, double s, const std::vector<double>& b) {
    std::vector<double> out(a);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] += s * b[i];
    return out;
  };
  for (int k = 0; k < steps; ++k) {
    auto k1 = F(x);
    auto k2 = F(axpy(x, h / 2, k1));
    auto k3 = F(axpy(x, h / 2, k2));
    auto k4 = F(axpy(x, h, k3));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return x;
}

}  // namespace ebif::oracle
