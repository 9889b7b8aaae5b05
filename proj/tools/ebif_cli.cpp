#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ebif/ebif.hpp"

namespace {

using namespace ebif;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitCap = 2;

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

std::vector<double> as_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

/// Options shared by every command that works on a realization.
struct Common {
  std::string systemPath;
  std::string realizationPath;
};

struct Loaded {
  SystemFile file;
  BilinearRealization real;
};

/// Loads the system and either reads the given realization or bilinearizes with defaults.
Loaded load(const Common& c) {
  Loaded out{load_system(c.systemPath), {}};
  if (!c.realizationPath.empty()) {
    out.real = load_realization(c.realizationPath);
    if (out.real.n != out.file.system.n || out.real.m != out.file.system.m())
      throw Error(ErrorKind::DimensionMismatch, "realization does not match the system dimensions");
    return out;
  }
  EbifConfig cfg;
  cfg.gamma0 = out.file.gamma0;
  const EbifOutcome outcome = ebif_run(out.file.system, cfg);
  if (outcome.status != EbifStatus::Stabilized)
    throw Error(ErrorKind::NotStabilized, std::string("system did not stabilize (") + to_string(outcome.status) +
                                              "); run bilinearize with larger caps");
  out.real = extract_bilinear(out.file.system, outcome);
  return out;
}

void check_length(const std::vector<double>& v, std::size_t n, const char* what) {
  if (v.size() != n)
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " has " + std::to_string(v.size()) +
                                                  " entries, expected " + std::to_string(n));
}

fs::path suffixed(const fs::path& p, const std::string& tag) {
  fs::path out = p;
  out.replace_filename(p.stem().string() + tag + p.extension().string());
  return out;
}

struct BilinearizeArgs {
  std::string systemPath;
  std::vector<std::string> gamma0;
  std::size_t maxDim = 200;
  std::size_t maxIter = 50;
  std::string constants = "offset";
  std::string out;
};

int cmd_bilinearize(const BilinearizeArgs& a) {
  const SystemFile file = load_system(a.systemPath);
  const NonlinearSystem& sys = file.system;
  EbifConfig cfg;
  cfg.maxDim = a.maxDim;
  cfg.maxIter = a.maxIter;
  cfg.constantMode = parse_constant_mode(a.constants);
  cfg.gamma0 = file.gamma0;
  if (!a.gamma0.empty()) {
    cfg.gamma0.clear();
    for (std::size_t i = 0; i < a.gamma0.size(); ++i) {
      try {
        cfg.gamma0.push_back(parse_expr(a.gamma0[i], sys.n, file.params));
      } catch (const Error& e) {
        throw Error(e.kind(), "--gamma0 '" + a.gamma0[i] + "': " + e.what());
      }
    }
  }
  const EbifOutcome outcome = ebif_run(sys, cfg);
  std::cout << "system: " << sys.name << " (n=" << sys.n << ", m=" << sys.m() << ")\n";
  std::cout << "status: " << to_string(outcome.status) << "\n";
  std::cout << "chainDims:";
  for (auto d : outcome.chainDims) std::cout << ' ' << d;
  std::cout << "\n";
  if (outcome.status != EbifStatus::Stabilized) {
    std::cout << "kStar: none\n";
    return kExitCap;
  }
  const BilinearRealization real = extract_bilinear(sys, outcome);
  std::cout << "kStar: " << *outcome.kStar << "\n";
  std::cout << "r: " << real.r << "\n";
  std::cout << "constantMode: " << to_string(real.constantMode) << "\n";
  std::cout << "basis:";
  for (std::size_t j = 0; j < real.r; ++j) std::cout << (j ? ", " : " ") << to_string(real.psi[j]);
  std::cout << "\n";
  const EmbeddingReport emb = verify_embedding(real, default_sample_points(sys.n));
  std::cout << "embedding: " << (emb.verdict == EmbeddingVerdict::Embedding ? "Embedding" : "NotVerified")
            << " (graph over coordinates: " << (emb.isGraphOverCoordinates ? "yes" : "no") << ")\n";
  if (!a.out.empty()) {
    write_text(a.out, write_realization(real));
    std::cout << "wrote " << a.out << "\n";
  }
  return kExitOk;
}

struct SimulateArgs {
  Common common;
  std::string control;
  std::vector<double> x0;
  std::optional<double> tFinal;
  double dt = 1e-3;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  const Loaded in = load(a.common);
  const BilinearRealization& real = in.real;
  check_length(a.x0, real.n, "--x0");
  ControlSchedule sched;
  if (!a.control.empty()) {
    sched = load_schedule(a.control);
    sched.validate(real.m);
    if (a.tFinal && *a.tFinal != sched.end())
      throw Error(ErrorKind::ScheduleInvalid, "--t-final differs from the end of the control schedule");
  } else {
    const double T = a.tFinal.value_or(1.0);
    if (!(T >= 0)) throw Error(ErrorKind::ScheduleInvalid, "--t-final must be non-negative");
    sched.breakpoints = {0.0};
    if (T > 0) {
      sched.breakpoints.push_back(T);
      sched.values.push_back(std::vector<double>(real.m, 0.0));
    }
  }
  const Trajectory lifted = simulate_piecewise_at_steps(real, sched, a.x0, a.dt);
  const Trajectory rk = simulate_nonlinear_rk4(in.file.system, sched, a.x0, a.dt);
  std::cout << "samples: " << lifted.size() << "\n";
  if (real.has_projection())
    std::cout << "consistency error: " << fmt(consistency_error(in.file.system, real, sched, a.x0, a.dt), "%.3e")
              << "\n";
  else
    std::cout << "consistency error: unavailable (no projection onto x)\n";
  if (!a.out.empty()) {
    std::ostringstream z, x;
    write_csv(z, lifted, "z");
    write_csv(x, rk, "x");
    const fs::path rk_path = suffixed(a.out, ".rk4");
    write_text(a.out, z.str());
    write_text(rk_path, x.str());
    std::cout << "wrote " << a.out << " and " << rk_path.string() << "\n";
  }
  return kExitOk;
}

struct ReachArgs {
  Common common;
  std::vector<double> x0;
  double T = 1.0;
  std::size_t samples = 10000;
  std::optional<double> coeffBox;
  double controlNorm = 1.0;
  std::uint64_t seed = 42;
  std::string out;
};

int cmd_reach(const ReachArgs& a) {
  const Loaded in = load(a.common);
  const BilinearRealization& real = in.real;
  check_length(a.x0, real.n, "--x0");
  if (!(a.T >= 0)) throw Error(ErrorKind::InvalidInput, "--T must be non-negative");
  const AdjointSpan span = realization_adjoint_span(real);
  double box = 0.0;
  if (a.coeffBox) {
    if (!(*a.coeffBox >= 0)) throw Error(ErrorKind::InvalidInput, "--coeff-box must be non-negative");
    box = *a.coeffBox;
  } else {
    box = auto_coeff_box(real, span, control_directions_on_sphere(real.m, 64, a.controlNorm, a.seed), a.T);
  }
  const ReachSampleSet set = reach_sample(real, span, a.x0, a.T, box, a.samples, a.seed);
  std::cout << "dim h: " << span.dim() << "\n";
  std::cout << "hypothesis: " << (span.hypothesisHolds ? "holds" : "fails") << "\n";
  std::cout << "coeff box: " << fmt(box) << (a.coeffBox ? "" : " (auto)") << "\n";
  std::cout << "samples: " << set.size() << "\n";
  std::cout << "label: " << (set.heuristic ? "heuristic" : "exact") << "\n";
  if (!a.out.empty()) {
    std::ostringstream os;
    write_reach_csv(os, set);
    write_text(a.out, os.str());
    std::cout << "wrote " << a.out << "\n";
  }
  return kExitOk;
}

struct StabilizeArgs {
  Common common;
  std::vector<double> x0;
  double T = 20.0;
  double dt = 1e-3;
  double epsilon = 1.0;
  std::optional<double> gain;
  std::vector<double> equilibrium;
  std::string out;
};

int cmd_stabilize(const StabilizeArgs& a) {
  const Loaded in = load(a.common);
  const BilinearRealization& real = in.real;
  const std::vector<double> x0 = a.x0.empty() ? std::vector<double>(real.n, 0.125) : a.x0;
  check_length(x0, real.n, "--x0");
  std::optional<std::vector<double>> xe;
  if (!a.equilibrium.empty()) {
    check_length(a.equilibrium, real.n, "--equilibrium");
    xe = a.equilibrium;
  }
  StabilizerChoice choice = default_stabilizer(real, a.epsilon);
  if (a.gain) {
    if (!(*a.gain > 0)) throw Error(ErrorKind::InvalidInput, "--gain must be positive");
    const auto m = static_cast<Eigen::Index>(real.m);
    choice.config.K = *a.gain * Matrix::Identity(m, m);
  }
  if (!choice.warning.empty()) std::cerr << "warning: " << choice.warning << "\n";
  const ClosedLoopResult res = closed_loop_simulate(in.file.system, real, choice.config, x0, a.T, a.dt, xe);
  std::cout << "P: " << (choice.hurwitz ? "Lyapunov solution" : "identity") << "\n";
  std::cout << "gain bound: " << fmt(choice.bound) << "\n";
  std::cout << "K: " << (a.gain ? fmt(*a.gain) : fmt(choice.gainNorm * choice.gainNorm)) << " * I\n";
  std::cout << "final state: " << join(as_vector(res.trajectory.states.back())) << "\n";
  std::cout << "V: " << fmt(res.lyapunov.front()) << " -> " << fmt(res.lyapunov.back()) << "\n";
  std::cout << "V non-increasing: " << (res.monotone ? "true" : "false") << "\n";
  if (res.finalError) std::cout << "final error: " << fmt(*res.finalError, "%.3e") << "\n";
  if (!a.out.empty()) {
    std::ostringstream os;
    os << "t";
    for (std::size_t i = 0; i < real.n; ++i) os << ",x" << i + 1;
    os << ",V\n";
    for (std::size_t k = 0; k < res.trajectory.size(); ++k) {
      os << fmt(res.trajectory.times[k], "%.17g");
      for (Eigen::Index i = 0; i < res.trajectory.states[k].size(); ++i)
        os << ',' << fmt(res.trajectory.states[k](i), "%.17g");
      os << ',' << fmt(res.lyapunov[k], "%.17g") << '\n';
    }
    write_text(a.out, os.str());
    std::cout << "wrote " << a.out << "\n";
  }
  return kExitOk;
}

struct SteerArgs {
  Common common;
  std::vector<double> x0;
  std::vector<double> xf;
  double T = 1.0;
  std::size_t segments = 4;
  std::optional<double> uBound;
  int starts = 8;
  int maxIterations = 500;
  std::uint64_t seed = 42;
  std::string out;
  std::string report;
};

int cmd_steer(const SteerArgs& a) {
  const Loaded in = load(a.common);
  const BilinearRealization& real = in.real;
  SteeringProblem prob;
  prob.x0 = a.x0;
  prob.xF = a.xf;
  prob.T = a.T;
  prob.segments = a.segments;
  prob.uBound = a.uBound;
  prob.validate(real);
  if (a.starts < 1) throw Error(ErrorKind::InvalidInput, "--starts must be at least 1");
  SteerOptions opts;
  opts.starts = a.starts;
  opts.maxIterations = a.maxIterations;
  opts.seed = a.seed;
  const SteerResult res = steer_optimize(real, prob, opts);
  std::cout << "J*: " << fmt(res.cost, "%.6e") << "\n";
  std::cout << "achieved: " << join(as_vector(res.terminalState)) << "\n";
  std::cout << "iterations: " << res.iterations << " (best start " << res.bestStart << ")\n";
  std::cout << "converged: " << (res.converged ? "true" : "false") << "\n";
  if (!a.out.empty()) {
    write_text(a.out, write_schedule(res.schedule));
    std::cout << "wrote " << a.out << "\n";
  }
  if (!a.report.empty()) {
    const SteeringReport rep{prob.x0, prob.xF, as_vector(res.terminalState), res.cost,
                             static_cast<std::size_t>(res.iterations), res.wallSeconds};
    write_text(a.report, write_steering_report(rep));
    std::cout << "wrote " << a.report << "\n";
  }
  return kExitOk;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("system", c.systemPath, "system definition JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--realization", c.realizationPath, "realization JSON from bilinearize (default: recompute)")
      ->check(CLI::ExistingFile);
}

CLI::Option* add_vector(CLI::App* cmd, const std::string& name, std::vector<double>& v, const std::string& help) {
  return cmd->add_option(name, v, help + " (comma separated)")->delimiter(',')->allow_extra_args(false);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact bilinearization of control-affine systems"};
  app.require_subcommand(1);

  BilinearizeArgs bil;
  auto* c_bil = app.add_subcommand("bilinearize", "run the EBIF iteration and extract the bilinear realization");
  c_bil->add_option("system", bil.systemPath, "system definition JSON")->required()->check(CLI::ExistingFile);
  c_bil->add_option("--gamma0", bil.gamma0, "seed function (repeatable; overrides the file)")
      ->allow_extra_args(false);
  c_bil->add_option("--max-dim", bil.maxDim, "dimension cap")->capture_default_str();
  c_bil->add_option("--max-iter", bil.maxIter, "iteration cap")->capture_default_str();
  c_bil->add_option("--constants", bil.constants, "constant handling")
      ->check(CLI::IsMember({"offset", "augment"}))
      ->capture_default_str();
  c_bil->add_option("-o,--output", bil.out, "realization JSON to write");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "simulate the bilinear and the original system");
  add_common(c_sim, sim.common);
  c_sim->add_option("--control", sim.control, "control schedule JSON (default: zero control)")
      ->check(CLI::ExistingFile);
  add_vector(c_sim, "--x0", sim.x0, "initial state")->required();
  c_sim->add_option("--t-final", sim.tFinal, "horizon when no schedule is given (default 1)");
  c_sim->add_option("--dt", sim.dt, "RK4 step and sample spacing")->capture_default_str();
  c_sim->add_option("-o,--output", sim.out, "lifted trajectory CSV; the RK4 trajectory goes to <stem>.rk4<ext>");

  ReachArgs rch;
  auto* c_rch = app.add_subcommand("reach", "sample the reachable set through the adjoint span");
  add_common(c_rch, rch.common);
  add_vector(c_rch, "--x0", rch.x0, "initial state")->required();
  c_rch->add_option("--T", rch.T, "horizon")->capture_default_str();
  c_rch->add_option("--samples", rch.samples, "number of samples")->capture_default_str();
  c_rch->add_option("--coeff-box", rch.coeffBox, "coefficient box half-width (default: auto)");
  c_rch->add_option("--control-norm", rch.controlNorm, "control norm used to tune the automatic box")
      ->capture_default_str();
  c_rch->add_option("--seed", rch.seed, "random seed")->capture_default_str();
  c_rch->add_option("-o,--output", rch.out, "sample CSV to write");

  StabilizeArgs stb;
  auto* c_stb = app.add_subcommand("stabilize", "closed-loop Lyapunov feedback through the bilinear form");
  add_common(c_stb, stb.common);
  add_vector(c_stb, "--x0", stb.x0, "initial state (default 0.125 in every coordinate)");
  c_stb->add_option("--T", stb.T, "horizon")->capture_default_str();
  c_stb->add_option("--dt", stb.dt, "RK4 step")->capture_default_str();
  c_stb->add_option("--epsilon", stb.epsilon, "epsilon in the gain bound")->capture_default_str();
  c_stb->add_option("--gain", stb.gain, "use K = gain * I instead of the default");
  add_vector(c_stb, "--equilibrium", stb.equilibrium, "target equilibrium for error reporting");
  c_stb->add_option("-o,--output", stb.out, "trajectory and V CSV to write");

  SteerArgs str;
  auto* c_str = app.add_subcommand("steer", "piecewise-constant steering by multi-start descent");
  add_common(c_str, str.common);
  add_vector(c_str, "--x0", str.x0, "initial state")->required();
  add_vector(c_str, "--xf", str.xf, "target state")->required();
  c_str->add_option("--T", str.T, "horizon")->capture_default_str();
  c_str->add_option("--segments", str.segments, "number of constant segments")->capture_default_str();
  c_str->add_option("--u-bound", str.uBound, "box bound on every control value");
  c_str->add_option("--starts", str.starts, "number of starts")->capture_default_str();
  c_str->add_option("--max-iter", str.maxIterations, "iterations per start")->capture_default_str();
  c_str->add_option("--seed", str.seed, "random seed")->capture_default_str();
  c_str->add_option("-o,--output", str.out, "schedule JSON to write");
  c_str->add_option("--report", str.report, "report JSON to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (c_bil->parsed()) return cmd_bilinearize(bil);
    if (c_sim->parsed()) return cmd_simulate(sim);
    if (c_rch->parsed()) return cmd_reach(rch);
    if (c_stb->parsed()) return cmd_stabilize(stb);
    if (c_str->parsed()) return cmd_steer(str);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
