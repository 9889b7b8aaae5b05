#pragma once

#include <string>
#include <vector>

#include "ebif/expr.hpp"

namespace ebif {

/// Control-affine system ẋ = f(x) + Σ u_i g_i(x) on ℝⁿ.
struct NonlinearSystem {
  std::string name;
  std::size_t n = 0;
  VectorField drift;
  std::vector<VectorField> controls;

  NonlinearSystem() = default;
  NonlinearSystem(std::string label, VectorField f, std::vector<VectorField> g)
      : name(std::move(label)), n(f.dim()), drift(std::move(f)), controls(std::move(g)) {
    for (const auto& gi : controls)
      if (gi.dim() != n)
        throw Error(ErrorKind::DimensionMismatch, "control field dimension differs from drift");
    for (const auto& c : drift.components)
      if (c.dim() != n) throw Error(ErrorKind::DimensionMismatch, "drift component dimension");
    for (const auto& gi : controls)
      for (const auto& c : gi.components)
        if (c.dim() != n) throw Error(ErrorKind::DimensionMismatch, "control component dimension");
  }

  std::size_t m() const { return controls.size(); }

  /// Drift first, then the control fields in order.
  std::vector<VectorField> fields() const {
    std::vector<VectorField> out{drift};
    out.insert(out.end(), controls.begin(), controls.end());
    return out;
  }
};

/// Numeric evaluator for f(x) + Σ u_i g_i(x).
class CompiledSystem {
 public:
  CompiledSystem() = default;
  explicit CompiledSystem(const NonlinearSystem& sys) : n_(sys.n), drift_(sys.drift) {
    for (const auto& g : sys.controls) controls_.emplace_back(g);
    scratch_.resize(n_);
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return controls_.size(); }

  void rhs(std::span<const double> x, std::span<const double> u, std::span<double> out) const {
    drift_(x, out);
    for (std::size_t i = 0; i < controls_.size(); ++i) {
      if (u[i] == 0.0) continue;
      controls_[i](x, scratch_);
      for (std::size_t l = 0; l < n_; ++l) out[l] += u[i] * scratch_[l];
    }
  }

 private:
  std::size_t n_ = 0;
  CompiledField drift_;
  std::vector<CompiledField> controls_;
  mutable std::vector<double> scratch_;
};

}  // namespace ebif
