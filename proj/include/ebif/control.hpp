#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ebif/engine.hpp"
#include "ebif/linalg.hpp"
#include "ebif/random.hpp"
#include "ebif/simulate.hpp"
#include "ebif/system.hpp"

namespace ebif {

inline constexpr double kDefiniteness = 1e-12;

inline double min_sym_eigenvalue(const Matrix& m) {
  const Matrix s = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Matrix>(s, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

inline double max_sym_eigenvalue(const Matrix& m) {
  const Matrix s = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Matrix>(s, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

inline bool is_positive_definite(const Matrix& m) {
  return m.rows() == m.cols() && m.rows() > 0 && min_sym_eigenvalue(m) > kDefiniteness;
}

inline bool is_hurwitz(const Matrix& a) {
  if (a.rows() == 0) return false;
  return Eigen::EigenSolver<Matrix>(a, false).eigenvalues().real().maxCoeff() < -kDefiniteness;
}

/// P with A′P + PA = −Qd, from the Kronecker-vectorized system.
inline Matrix solve_lyapunov(const Matrix& a, const Matrix& qd) {
  if (a.rows() != a.cols() || qd.rows() != a.rows() || qd.cols() != a.cols())
    throw Error(ErrorKind::NonSquare, "Lyapunov equation needs square matrices of one size");
  const Eigen::Index k = a.rows();
  const Eigen::VectorXcd eig = Eigen::EigenSolver<Matrix>(a, false).eigenvalues();
  const double scale = std::max(1.0, max_abs(a));
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      if (std::abs(eig(i) + eig(j)) <= 1e-10 * scale)
        throw Error(ErrorKind::SingularSylvester, "eigenvalues of A sum to zero; Lyapunov equation is singular");
  // vec(A′P) = (I ⊗ A′) vec P and vec(PA) = (A′ ⊗ I) vec P for column-major vec.
  Matrix big = Matrix::Zero(k * k, k * k);
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) {
        big(c * k + i, c * k + j) += a(j, i);
        big(c * k + i, j * k + i) += a(j, c);
      }
  const Vector p = big.partialPivLu().solve(-vectorize(qd));
  const Matrix pm = Eigen::Map<const Matrix>(p.data(), k, k);
  return 0.5 * (pm + pm.transpose());
}

struct StabilizerConfig {
  Matrix P;
  Matrix K;
  double epsilon = 1.0;

  void validate(std::size_t r, std::size_t m) const {
    if (P.rows() != static_cast<Eigen::Index>(r) || P.cols() != static_cast<Eigen::Index>(r))
      throw Error(ErrorKind::DimensionMismatch, "P must be r×r");
    if (K.rows() != static_cast<Eigen::Index>(m) || K.cols() != static_cast<Eigen::Index>(m))
      throw Error(ErrorKind::DimensionMismatch, "K must be m×m");
    if (!is_positive_definite(P)) throw Error(ErrorKind::InvalidInput, "P is not positive definite");
    if (!is_positive_definite(K)) throw Error(ErrorKind::InvalidInput, "K is not positive definite");
    if (!(epsilon > 0)) throw Error(ErrorKind::InvalidInput, "epsilon must be positive");
  }
};

/// S(z) = [B_1 z + D_1, …, B_m z + D_m].
inline Matrix control_directions(const BilinearRealization& real, const Vector& z) {
  Matrix s(static_cast<Eigen::Index>(real.r), static_cast<Eigen::Index>(real.m));
  for (std::size_t i = 0; i < real.m; ++i) s.col(static_cast<Eigen::Index>(i)) = real.B_d(i) * z + real.D_d(i);
  return s;
}

/// u = −K S(z)′ P z.
inline Vector stabilizing_control(const BilinearRealization& real, const StabilizerConfig& cfg, const Vector& z) {
  return -cfg.K * control_directions(real, z).transpose() * cfg.P * z;
}

/// sqrt(λ_min(Q) / (2 m λ_max(P̄)² ε²)) with P̄_i = [[P B_i, ½ P D_i], [½ D_i′P′, 1]]; 0 when λ_min(Q) ≤ 0.
inline double gain_bound(const Matrix& q, const Matrix& p, const std::vector<Matrix>& bs,
                         const std::vector<Vector>& ds, std::size_t m, double epsilon) {
  if (!(epsilon > 0)) throw Error(ErrorKind::InvalidInput, "epsilon must be positive");
  if (m == 0) throw Error(ErrorKind::InvalidInput, "gain bound needs at least one control");
  const double qmin = min_sym_eigenvalue(q);
  if (qmin <= 0) return 0.0;
  const Eigen::Index r = p.rows();
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bs.size(); ++i) {
    Matrix pbar(r + 1, r + 1);
    pbar.topLeftCorner(r, r) = p * bs[i];
    pbar.topRightCorner(r, 1) = 0.5 * p * ds[i];
    pbar.bottomLeftCorner(1, r) = 0.5 * ds[i].transpose() * p.transpose();
    pbar(r, r) = 1.0;
    lmax = std::max(lmax, max_sym_eigenvalue(pbar));
  }
  return std::sqrt(qmin / (2.0 * static_cast<double>(m) * lmax * lmax * epsilon * epsilon));
}

inline double gain_bound(const BilinearRealization& real, const Matrix& p, double epsilon) {
  const Matrix a = real.A_d();
  std::vector<Matrix> bs;
  std::vector<Vector> ds;
  for (std::size_t i = 0; i < real.m; ++i) {
    bs.push_back(real.B_d(i));
    ds.push_back(real.D_d(i));
  }
  return gain_bound(a.transpose() * p + p * a, p, bs, ds, real.m, epsilon);
}

struct StabilizerChoice {
  StabilizerConfig config;
  bool hurwitz = false;
  double bound = 0.0;
  /// C_K = ‖√K‖, so K = C_K² I.
  double gainNorm = 0.0;
  std::string warning;
};

/// P from A′P + PA = −I when A is Hurwitz, else I; K = C_K² I with C_K = max(2·bound, 1).
inline StabilizerChoice default_stabilizer(const BilinearRealization& real, double epsilon = 1.0) {
  StabilizerChoice out;
  const Matrix a = real.A_d();
  const auto r = static_cast<Eigen::Index>(real.r);
  out.hurwitz = is_hurwitz(a);
  if (out.hurwitz) {
    out.config.P = solve_lyapunov(a, Matrix::Identity(r, r));
  } else {
    out.config.P = Matrix::Identity(r, r);
    out.warning = "A is not Hurwitz; using P = I";
  }
  out.config.epsilon = epsilon;
  out.bound = real.m == 0 ? 0.0 : gain_bound(real, out.config.P, epsilon);
  out.gainNorm = std::max(2.0 * out.bound, 1.0);
  const auto m = static_cast<Eigen::Index>(real.m);
  out.config.K = out.gainNorm * out.gainNorm * Matrix::Identity(m, m);
  return out;
}

struct ClosedLoopResult {
  Trajectory trajectory;
  std::vector<double> lyapunov;
  bool monotone = true;
  /// Largest step-to-step increase of V (negative when V strictly decreases throughout).
  double maxIncrease = -std::numeric_limits<double>::infinity();
  std::optional<double> finalError;
  /// Smallest ‖x(t) − x_e‖ over the run and when it occurred.
  std::optional<double> closestApproach;
  double closestTime = 0.0;
};

/// RK4 on ẋ = f + Σ u_i g_i with u = stabilizing_control(Ψ(x)); V(z) = z′Pz per step.
inline ClosedLoopResult closed_loop_simulate(const NonlinearSystem& sys, const BilinearRealization& real,
                                             const StabilizerConfig& cfg, std::span<const double> x0, double T,
                                             double dt, const std::optional<std::vector<double>>& equilibrium = {},
                                             double monotone_tol = 1e-9) {
  cfg.validate(real.r, real.m);
  if (!(dt > 0)) throw Error(ErrorKind::InvalidInput, "dt must be positive");
  if (!(T >= 0)) throw Error(ErrorKind::InvalidInput, "horizon must be non-negative");
  if (x0.size() != sys.n) throw Error(ErrorKind::DimensionMismatch, "x0 has wrong length");
  const CompiledSystem model(sys);
  std::vector<CompiledExpr> psi;
  for (const auto& g : real.psi) psi.emplace_back(g);
  auto lift_fast = [&](const Vector& x) {
    Vector z(static_cast<Eigen::Index>(psi.size()));
    const std::span<const double> xs{x.data(), static_cast<std::size_t>(x.size())};
    for (std::size_t j = 0; j < psi.size(); ++j) z(static_cast<Eigen::Index>(j)) = psi[j](xs);
    return z;
  };
  auto rhs = [&](const Vector& x) {
    const Vector u = stabilizing_control(real, cfg, lift_fast(x));
    Vector out(x.size());
    model.rhs({x.data(), static_cast<std::size_t>(x.size())}, {u.data(), static_cast<std::size_t>(u.size())},
              {out.data(), static_cast<std::size_t>(out.size())});
    return out;
  };
  auto energy = [&](const Vector& x) {
    const Vector z = lift_fast(x);
    return z.dot(cfg.P * z);
  };
  std::optional<Vector> xe;
  if (equilibrium) {
    if (equilibrium->size() != sys.n) throw Error(ErrorKind::DimensionMismatch, "equilibrium has wrong length");
    xe = to_eigen(*equilibrium);
  }

  ClosedLoopResult res;
  Vector x = to_eigen(std::vector<double>(x0.begin(), x0.end()));
  const int steps = T == 0 ? 0 : rk4_steps(T, dt);
  const double h = steps == 0 ? 0.0 : T / steps;
  auto record = [&](double t) {
    res.trajectory.times.push_back(t);
    res.trajectory.states.push_back(x);
    res.lyapunov.push_back(energy(x));
    if (xe) {
      const double d = (x - *xe).norm();
      if (!res.closestApproach || d < *res.closestApproach) {
        res.closestApproach = d;
        res.closestTime = t;
      }
    }
  };
  record(0.0);
  for (int k = 1; k <= steps; ++k) {
    x = rk4_step(rhs, x, h);
    if (!x.allFinite()) throw Error(ErrorKind::NonFiniteState, "closed-loop state became non-finite");
    record(k == steps ? T : h * k);
    const double inc = res.lyapunov[static_cast<std::size_t>(k)] - res.lyapunov[static_cast<std::size_t>(k - 1)];
    res.maxIncrease = std::max(res.maxIncrease, inc);
    if (inc > monotone_tol) res.monotone = false;
  }
  if (xe) res.finalError = (x - *xe).norm();
  return res;
}

struct QuadraticCost {
  Matrix stateWeight;
  Matrix controlWeight;
  Matrix terminalWeight;

  void validate(std::size_t n, std::size_t m) const {
    const auto ni = static_cast<Eigen::Index>(n), mi = static_cast<Eigen::Index>(m);
    if (stateWeight.rows() != ni || stateWeight.cols() != ni || terminalWeight.rows() != ni ||
        terminalWeight.cols() != ni || controlWeight.rows() != mi || controlWeight.cols() != mi)
      throw Error(ErrorKind::DimensionMismatch, "cost weights have wrong sizes");
    if (m > 0 && !is_positive_definite(controlWeight)) throw Error(ErrorKind::SingularR, "R is not positive definite");
    if (n > 0 && (min_sym_eigenvalue(stateWeight) < -kDefiniteness || min_sym_eigenvalue(terminalWeight) < -kDefiniteness))
      throw Error(ErrorKind::InvalidInput, "state weights must be positive semidefinite");
  }
};

/// Terminal-state steering: φ = ‖x(T) − x_F‖², or the quadratic Bolza cost when one is given.
struct SteeringProblem {
  std::vector<double> x0;
  std::vector<double> xF;
  double T = 1.0;
  std::size_t segments = 1;
  std::optional<double> uBound;
  std::optional<QuadraticCost> cost;

  void validate(const BilinearRealization& real) const {
    if (segments < 1) throw Error(ErrorKind::InvalidInput, "need at least one segment");
    if (!(T > 0)) throw Error(ErrorKind::InvalidInput, "horizon must be positive");
    if (x0.size() != real.n) throw Error(ErrorKind::DimensionMismatch, "x0 has wrong length");
    if (!cost && xF.size() != real.n) throw Error(ErrorKind::DimensionMismatch, "xF has wrong length");
    if (uBound && !(*uBound > 0)) throw Error(ErrorKind::InvalidInput, "control bound must be positive");
    if (cost) cost->validate(real.n, real.m);
  }
};

/// Objective over the flattened s×m schedule values, evaluated through composed segment flows.
class SteeringObjective {
 public:
  /// Sub-intervals per segment for Simpson integration of the running state cost.
  static constexpr int kQuadraturePanels = 8;

  SteeringObjective(const BilinearRealization& real, SteeringProblem prob)
      : model_(real), prob_(std::move(prob)), proj_(real.projection_bar()) {
    prob_.validate(real);
    start_ = lift_bar(real, prob_.x0);
    if (!prob_.cost) target_ = to_eigen(prob_.xF);
  }

  std::size_t size() const { return prob_.segments * model_.m(); }
  double segment_length() const { return prob_.T / static_cast<double>(prob_.segments); }
  const SteeringProblem& problem() const { return prob_; }

  ControlSchedule schedule(const Vector& flat) const {
    std::vector<std::vector<double>> vals(prob_.segments, std::vector<double>(model_.m()));
    for (std::size_t k = 0; k < prob_.segments; ++k)
      for (std::size_t i = 0; i < model_.m(); ++i) vals[k][i] = flat(static_cast<Eigen::Index>(k * model_.m() + i));
    return ControlSchedule::uniform(prob_.T, std::move(vals));
  }

  Vector terminal_state(const Vector& flat) const {
    Vector z = start_;
    for (std::size_t k = 0; k < prob_.segments; ++k) z = model_.flow(segment_values(flat, k), segment_length()) * z;
    return proj_ * z;
  }

  double operator()(const Vector& flat) const {
    if (!prob_.cost) return (terminal_state(flat) - target_).squaredNorm();
    const QuadraticCost& c = *prob_.cost;
    const double delta = segment_length(), h = delta / kQuadraturePanels;
    double running = 0.0;
    Vector z = start_;
    auto state_cost = [&](const Vector& zz) {
      const Vector x = proj_ * zz;
      return x.dot(c.stateWeight * x);
    };
    for (std::size_t k = 0; k < prob_.segments; ++k) {
      const auto u = segment_values(flat, k);
      const Vector uv = to_eigen(u);
      running += delta * uv.dot(c.controlWeight * uv);
      const Matrix step = model_.flow(u, h), half = model_.flow(u, h / 2);
      for (int j = 0; j < kQuadraturePanels; ++j) {
        const Vector next = step * z;
        running += h / 6.0 * (state_cost(z) + 4.0 * state_cost(half * z) + state_cost(next));
        z = next;
      }
    }
    const Vector xT = proj_ * z;
    return running + xT.dot(c.terminalWeight * xT);
  }

 private:
  std::vector<double> segment_values(const Vector& flat, std::size_t k) const {
    const std::size_t m = model_.m();
    return {flat.data() + k * m, flat.data() + (k + 1) * m};
  }

  FlowModel model_;
  SteeringProblem prob_;
  Matrix proj_;
  Vector start_;
  Vector target_;
};

inline double steer_objective(const BilinearRealization& real, const ControlSchedule& sched,
                              const SteeringProblem& prob) {
  sched.validate(real.m);
  if (sched.segments() != prob.segments) throw Error(ErrorKind::ScheduleInvalid, "schedule has wrong segment count");
  const SteeringObjective obj(real, prob);
  Vector flat(static_cast<Eigen::Index>(obj.size()));
  for (std::size_t k = 0; k < sched.segments(); ++k)
    for (std::size_t i = 0; i < real.m; ++i) flat(static_cast<Eigen::Index>(k * real.m + i)) = sched.values[k][i];
  return obj(flat);
}

/// Central-difference gradient with per-coordinate step h_scale·(1 + |u_j|).
inline Vector finite_difference_gradient(const SteeringObjective& obj, const Vector& u, double h_scale = 1e-6) {
  Vector g(u.size());
  Vector p = u;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double h = h_scale * (1.0 + std::abs(u(j)));
    p(j) = u(j) + h;
    const double fp = obj(p);
    p(j) = u(j) - h;
    const double fm = obj(p);
    p(j) = u(j);
    g(j) = (fp - fm) / (2.0 * h);
  }
  return g;
}

struct SteerOptions {
  int starts = 8;
  int maxIterations = 500;
  double gradientTolerance = 1e-8;
  std::uint64_t seed = 42;
  /// Non-zero starts are drawn uniformly from [−startScale, startScale] (or the control bound).
  double startScale = 1.0;
};

struct SteerResult {
  ControlSchedule schedule;
  double cost = std::numeric_limits<double>::infinity();
  Vector terminalState;
  int iterations = 0;
  int bestStart = 0;
  /// False when no start met the gradient tolerance before the iteration cap.
  bool converged = false;
  double wallSeconds = 0.0;
};

namespace detail {

struct DescentRun {
  Vector u;
  double cost;
  int iterations;
  bool converged;
};

inline Vector clip(Vector u, const std::optional<double>& bound) {
  if (bound) u = u.cwiseMax(-*bound).cwiseMin(*bound);
  return u;
}

/// Gradient descent with Armijo backtracking; trial steps start at the Barzilai–Borwein length.
inline DescentRun descend(const SteeringObjective& obj, Vector u, const SteerOptions& opts) {
  const auto& bound = obj.problem().uBound;
  u = clip(std::move(u), bound);
  double f = obj(u);
  Vector g = finite_difference_gradient(obj, u);
  double step = 1.0;
  Vector prev_u, prev_g;
  int it = 0;
  for (; it < opts.maxIterations; ++it) {
    if (g.cwiseAbs().maxCoeff() < opts.gradientTolerance) return {u, f, it, true};
    if (prev_u.size() > 0) {
      const Vector s = u - prev_u, y = g - prev_g;
      const double sy = s.dot(y);
      if (sy > 0) step = s.squaredNorm() / sy;
      else step *= 2.0;
    }
    bool accepted = false;
    for (int back = 0; back < 60; ++back, step *= 0.5) {
      const Vector cand = clip(u - step * g, bound);
      const double fc = obj(cand);
      if (std::isfinite(fc) && fc <= f - 1e-4 * g.dot(u - cand)) {
        prev_u = u;
        prev_g = g;
        u = cand;
        f = fc;
        accepted = true;
        break;
      }
    }
    if (!accepted) return {u, f, it, false};
    g = finite_difference_gradient(obj, u);
  }
  return {u, f, it, g.cwiseAbs().maxCoeff() < opts.gradientTolerance};
}

}  // namespace detail

/// Multi-start local minimization; start 0 is all zeros, start j draws from (seed, j·size + index).
inline SteerResult steer_optimize(const BilinearRealization& real, const SteeringProblem& prob,
                                  const SteerOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const SteeringObjective obj(real, prob);
  const auto d = static_cast<Eigen::Index>(obj.size());
  const double scale = prob.uBound ? *prob.uBound : opts.startScale;
  SteerResult best;
  Vector best_u = Vector::Zero(d);
  for (int s = 0; s < std::max(1, opts.starts); ++s) {
    Vector u0 = Vector::Zero(d);
    if (s > 0)
      for (Eigen::Index j = 0; j < d; ++j)
        u0(j) = uniform(opts.seed, static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(j),
                        -scale, scale);
    const detail::DescentRun run = detail::descend(obj, u0, opts);
    best.iterations += run.iterations;
    best.converged = best.converged || run.converged;
    if (run.cost < best.cost) {
      best.cost = run.cost;
      best_u = run.u;
      best.bestStart = s;
    }
  }
  best.schedule = obj.schedule(best_u);
  best.terminalState = obj.terminal_state(best_u);
  best.wallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

/// u_i = ½ (R⁻¹ w)_i with w_i = λ̄′(B_i z + D_i), z = Ψ(x).
inline Vector costate_control(const BilinearRealization& real, const Vector& costate, const Vector& z, const Matrix& R) {
  if (static_cast<std::size_t>(costate.size()) != real.r || static_cast<std::size_t>(z.size()) != real.r)
    throw Error(ErrorKind::DimensionMismatch, "costate and state must have length r");
  if (!is_positive_definite(R)) throw Error(ErrorKind::SingularR, "R is not positive definite");
  const Vector w = control_directions(real, z).transpose() * costate;
  return 0.5 * R.llt().solve(w);
}

inline Vector costate_control(const BilinearRealization& real, const Vector& costate, std::span<const double> x,
                              const Matrix& R) {
  return costate_control(real, costate, lift(real, x), R);
}

struct FbsmResult {
  /// Per-step constant controls on a uniform grid.
  ControlSchedule schedule;
  double cost = 0.0;
  int sweeps = 0;
  bool converged = false;
};

/// Quadratic Bolza cost of a per-step schedule, with exact flows and Simpson quadrature per step.
inline double quadratic_cost(const BilinearRealization& real, const QuadraticCost& cost, const ControlSchedule& sched,
                             std::span<const double> x0) {
  const FlowModel model(real);
  const Matrix proj = real.projection_bar();
  Vector z = lift_bar(real, x0);
  auto state_cost = [&](const Vector& zz) {
    const Vector x = proj * zz;
    return x.dot(cost.stateWeight * x);
  };
  double total = 0.0;
  for (std::size_t k = 0; k < sched.segments(); ++k) {
    const double h = sched.duration(k);
    const Vector uv = to_eigen(sched.values[k]);
    const Vector mid = model.flow(sched.values[k], h / 2) * z;
    const Vector next = model.flow(sched.values[k], h) * z;
    total += h * uv.dot(cost.controlWeight * uv) + h / 6.0 * (state_cost(z) + 4.0 * state_cost(mid) + state_cost(next));
    z = next;
  }
  const Vector xT = proj * z;
  return total + xT.dot(cost.terminalWeight * xT);
}

/// Forward-backward sweep on the augmented state z̄ = (z, 1).
///
/// Costate convention: H = λ′(Āz̄ + Σ u_i B̄_i z̄) − (x′Kx + u′Ru), so u = ½R⁻¹(λ′B̄_i z̄),
/// λ̇ = 2K̄z̄ − (Ā + Σ u_i B̄_i)′λ and λ(T) = −2Q̄z̄(T) with K̄ = P̄′KP̄, Q̄ = P̄′QP̄.
inline FbsmResult fbsm_solve(const BilinearRealization& real, const QuadraticCost& cost, std::span<const double> x0,
                             double T, double dt, int max_sweeps, double relaxation = 0.5, double tol = 1e-6) {
  cost.validate(real.n, real.m);
  if (!(dt > 0) || !(T > 0)) throw Error(ErrorKind::InvalidInput, "T and dt must be positive");
  if (x0.size() != real.n) throw Error(ErrorKind::DimensionMismatch, "x0 has wrong length");
  const FlowModel model(real);
  const Matrix proj = real.projection_bar();
  const Matrix kbar = proj.transpose() * cost.stateWeight * proj;
  const Matrix qbar = proj.transpose() * cost.terminalWeight * proj;
  const Eigen::LLT<Matrix> rinv(cost.controlWeight);
  const int steps = rk4_steps(T, dt);
  const double h = T / steps;
  const std::size_t m = real.m;
  const auto ns = static_cast<std::size_t>(steps);

  std::vector<Vector> u(ns, Vector::Zero(static_cast<Eigen::Index>(m)));
  std::vector<Vector> z(ns + 1), zmid(ns);
  std::vector<Matrix> gens(ns), half(ns);
  FbsmResult res;
  auto make_schedule = [&] {
    std::vector<std::vector<double>> vals;
    for (const auto& v : u) vals.push_back(to_std(v));
    return ControlSchedule::uniform(T, std::move(vals));
  };
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    res.sweeps = sweep;
    z[0] = lift_bar(real, x0);
    for (std::size_t k = 0; k < ns; ++k) {
      gens[k] = model.generator({u[k].data(), m});
      half[k] = expm(0.5 * h * gens[k]);
      zmid[k] = half[k] * z[k];
      z[k + 1] = half[k] * zmid[k];
    }
    // Backward RK4 for λ; z on each step is known exactly at both ends and the midpoint.
    Vector lam = -2.0 * qbar * z[ns];
    std::vector<Vector> lam_mid(ns);
    for (std::size_t k = ns; k-- > 0;) {
      auto rhs = [&](const Vector& l, const Vector& zz) -> Vector { return 2.0 * kbar * zz - gens[k].transpose() * l; };
      const Vector k1 = rhs(lam, z[k + 1]);
      const Vector k2 = rhs(lam - 0.5 * h * k1, zmid[k]);
      const Vector k3 = rhs(lam - 0.5 * h * k2, zmid[k]);
      const Vector k4 = rhs(lam - h * k3, z[k]);
      const Vector next = lam - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      lam_mid[k] = 0.5 * (lam + next);
      lam = next;
    }
    double change = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
      Vector w(static_cast<Eigen::Index>(m));
      for (std::size_t i = 0; i < m; ++i)
        w(static_cast<Eigen::Index>(i)) = lam_mid[k].dot(model.B_bar(i) * zmid[k]);
      const Vector target = 0.5 * rinv.solve(w);
      const Vector next = (1.0 - relaxation) * u[k] + relaxation * target;
      if (m > 0) {
        change = std::max(change, (next - u[k]).cwiseAbs().maxCoeff());
        norm = std::max(norm, next.cwiseAbs().maxCoeff());
      }
      u[k] = next;
    }
    if (!(norm <= 1e6)) throw Error(ErrorKind::SweepDiverged, "control norm exceeded 1e6 during the sweep");
    if (change < tol) {
      res.converged = true;
      break;
    }
  }
  res.schedule = make_schedule();
  res.cost = quadratic_cost(real, cost, res.schedule, x0);
  return res;
}

}  // namespace ebif
