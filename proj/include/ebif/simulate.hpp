#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "ebif/engine.hpp"
#include "ebif/linalg.hpp"
#include "ebif/system.hpp"

namespace ebif {

/// Piecewise-constant control: values[k] is applied on [breakpoints[k], breakpoints[k+1]).
struct ControlSchedule {
  std::vector<double> breakpoints;
  std::vector<std::vector<double>> values;

  std::size_t segments() const { return values.size(); }
  double start() const { return breakpoints.front(); }
  double end() const { return breakpoints.back(); }
  double duration(std::size_t k) const { return breakpoints[k + 1] - breakpoints[k]; }

  /// s equal segments over [0, T].
  static ControlSchedule uniform(double T, std::vector<std::vector<double>> vals) {
    ControlSchedule s;
    const std::size_t count = vals.size();
    for (std::size_t k = 0; k <= count; ++k)
      s.breakpoints.push_back(count == 0 ? T : T * static_cast<double>(k) / static_cast<double>(count));
    s.values = std::move(vals);
    return s;
  }

  void validate(std::size_t m) const {
    if (breakpoints.empty()) throw Error(ErrorKind::ScheduleInvalid, "schedule has no breakpoints");
    if (values.size() + 1 != breakpoints.size())
      throw Error(ErrorKind::ScheduleInvalid, "need exactly one value per interval");
    for (double t : breakpoints)
      if (!std::isfinite(t)) throw Error(ErrorKind::ScheduleInvalid, "non-finite breakpoint");
    for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k)
      if (!(breakpoints[k] < breakpoints[k + 1]))
        throw Error(ErrorKind::ScheduleInvalid, "breakpoints must be strictly increasing");
    for (const auto& v : values) {
      if (v.size() != m)
        throw Error(ErrorKind::ScheduleInvalid, "control value has " + std::to_string(v.size()) +
                                                    " entries, expected " + std::to_string(m));
      for (double c : v)
        if (!std::isfinite(c)) throw Error(ErrorKind::ScheduleInvalid, "non-finite control value");
    }
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  bool lifted = false;

  std::size_t size() const { return times.size(); }
};

/// Augmented matrices of a realization, prepared once for repeated flow evaluation.
class FlowModel {
 public:
  explicit FlowModel(const BilinearRealization& real) : real_(&real), abar_(real.A_bar()) {
    for (std::size_t i = 0; i < real.m; ++i) bbar_.push_back(real.B_bar(i));
  }

  const BilinearRealization& realization() const { return *real_; }
  std::size_t m() const { return bbar_.size(); }
  Eigen::Index size() const { return abar_.rows(); }
  const Matrix& A_bar() const { return abar_; }
  const Matrix& B_bar(std::size_t i) const { return bbar_[i]; }

  /// Ā + Σ u_i B̄_i.
  Matrix generator(std::span<const double> u) const {
    if (u.size() != bbar_.size()) throw Error(ErrorKind::DimensionMismatch, "control has wrong length");
    Matrix g = abar_;
    for (std::size_t i = 0; i < bbar_.size(); ++i)
      if (u[i] != 0.0) g += u[i] * bbar_[i];
    return g;
  }

  Matrix flow(std::span<const double> u, double delta) const {
    if (delta < 0) throw Error(ErrorKind::ScheduleInvalid, "negative segment duration");
    return expm(delta * generator(u));
  }

 private:
  const BilinearRealization* real_;
  Matrix abar_;
  std::vector<Matrix> bbar_;
};

/// exp(δ(Ā + Σ u_i B̄_i)) on the augmented (r+1)-state (z, 1).
inline Matrix segment_flow(const BilinearRealization& real, std::span<const double> u, double delta) {
  return FlowModel(real).flow(u, delta);
}

/// Number of RK4 steps used for a segment of length delta at nominal step dt.
inline int rk4_steps(double delta, double dt) {
  return std::max(1, static_cast<int>(std::lround(delta / dt)));
}

namespace detail {

template <typename SampleCount>
Trajectory compose_flows(const BilinearRealization& real, const ControlSchedule& sched, std::span<const double> x0,
                         const SampleCount& samples) {
  sched.validate(real.m);
  if (x0.size() != real.n) throw Error(ErrorKind::DimensionMismatch, "x0 has wrong length");
  const FlowModel model(real);
  const auto r = static_cast<Eigen::Index>(real.r);
  Trajectory traj;
  traj.lifted = true;
  Vector zbar = lift_bar(real, x0);
  traj.times.push_back(sched.start());
  traj.states.push_back(zbar.head(r));
  for (std::size_t k = 0; k < sched.segments(); ++k) {
    const Matrix gen = model.generator(sched.values[k]);
    const double delta = sched.duration(k);
    const int count = samples(delta);
    Vector seg_end;
    for (int j = 1; j <= count; ++j) {
      const double tau = delta * j / count;
      Vector zj = expm(tau * gen) * zbar;
      traj.times.push_back(j == count ? sched.breakpoints[k + 1] : sched.breakpoints[k] + tau);
      traj.states.push_back(zj.head(r));
      if (j == count) seg_end = std::move(zj);
    }
    zbar = std::move(seg_end);
  }
  return traj;
}

}  // namespace detail

/// Lifted trajectory by composing exact segment flows from z(t_0) = Ψ(x0).
inline Trajectory simulate_piecewise(const BilinearRealization& real, const ControlSchedule& sched,
                                     std::span<const double> x0, int samples_per_segment) {
  if (samples_per_segment < 1)
    throw Error(ErrorKind::ScheduleInvalid, "samples per segment must be at least 1");
  return detail::compose_flows(real, sched, x0, [=](double) { return samples_per_segment; });
}

/// As simulate_piecewise, sampled at the same instants as simulate_nonlinear_rk4 with step dt.
inline Trajectory simulate_piecewise_at_steps(const BilinearRealization& real, const ControlSchedule& sched,
                                              std::span<const double> x0, double dt) {
  if (!(dt > 0)) throw Error(ErrorKind::ScheduleInvalid, "dt must be positive");
  return detail::compose_flows(real, sched, x0, [=](double delta) { return rk4_steps(delta, dt); });
}

/// One classical Runge–Kutta step of ẋ = F(x).
template <typename Rhs>
Vector rk4_step(const Rhs& F, const Vector& x, double h) {
  const Vector k1 = F(x);
  const Vector k2 = F(x + 0.5 * h * k1);
  const Vector k3 = F(x + 0.5 * h * k2);
  const Vector k4 = F(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// RK4 on ẋ = f(x) + Σ u_i g_i(x); segment boundaries are step boundaries.
inline Trajectory simulate_nonlinear_rk4(const NonlinearSystem& sys, const ControlSchedule& sched,
                                         std::span<const double> x0, double dt) {
  sched.validate(sys.m());
  if (!(dt > 0)) throw Error(ErrorKind::ScheduleInvalid, "dt must be positive");
  if (x0.size() != sys.n) throw Error(ErrorKind::DimensionMismatch, "x0 has wrong length");
  const CompiledSystem model(sys);
  Trajectory traj;
  Vector x = to_eigen(std::vector<double>(x0.begin(), x0.end()));
  traj.times.push_back(sched.start());
  traj.states.push_back(x);
  for (std::size_t k = 0; k < sched.segments(); ++k) {
    const std::vector<double>& u = sched.values[k];
    auto F = [&](const Vector& y) {
      Vector out(y.size());
      model.rhs({y.data(), static_cast<std::size_t>(y.size())}, u, {out.data(), static_cast<std::size_t>(out.size())});
      return out;
    };
    const double delta = sched.duration(k);
    const int steps = rk4_steps(delta, dt);
    const double h = delta / steps;
    for (int j = 1; j <= steps; ++j) {
      x = rk4_step(F, x, h);
      if (!x.allFinite()) throw Error(ErrorKind::NonFiniteState, "RK4 state became non-finite");
      traj.times.push_back(j == steps ? sched.breakpoints[k + 1] : sched.breakpoints[k] + h * j);
      traj.states.push_back(x);
    }
  }
  return traj;
}

/// Max over the RK4 sample times of ‖P_n z(t) − x_RK4(t)‖∞, with z(t) from exact flows.
inline double consistency_error(const NonlinearSystem& sys, const BilinearRealization& real,
                                const ControlSchedule& sched, std::span<const double> x0, double dt) {
  const Trajectory rk = simulate_nonlinear_rk4(sys, sched, x0, dt);
  const FlowModel model(real);
  const Matrix pbar = real.projection_bar();
  Vector zbar = lift_bar(real, x0);
  double err = (pbar * zbar - rk.states.front()).cwiseAbs().maxCoeff();
  std::size_t idx = 1;
  for (std::size_t k = 0; k < sched.segments(); ++k) {
    const Matrix gen = model.generator(sched.values[k]);
    const double delta = sched.duration(k);
    const int steps = rk4_steps(delta, dt);
    const double h = delta / steps;
    for (int j = 1; j <= steps; ++j, ++idx) {
      const Vector zj = j == steps ? Vector(expm(delta * gen) * zbar) : Vector(expm(h * j * gen) * zbar);
      err = std::max(err, (pbar * zj - rk.states[idx]).cwiseAbs().maxCoeff());
      if (j == steps) zbar = zj;
    }
  }
  return err;
}

/// Projects a lifted trajectory back to ℝⁿ.
inline Trajectory project(const BilinearRealization& real, const Trajectory& lifted) {
  Trajectory out;
  out.times = lifted.times;
  for (const auto& z : lifted.states) out.states.push_back(project(real, z));
  return out;
}

/// CSV with header `t,<prefix>1,...`; 17 significant digits round-trip doubles.
inline void write_csv(std::ostream& os, const Trajectory& traj, const std::string& prefix) {
  const std::size_t dim = traj.states.empty() ? 0 : static_cast<std::size_t>(traj.states.front().size());
  os << "t";
  for (std::size_t i = 0; i < dim; ++i) os << ',' << prefix << i + 1;
  os << '\n';
  char buf[40];
  for (std::size_t k = 0; k < traj.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.times[k]);
    os << buf;
    for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", traj.states[k](i));
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace ebif
