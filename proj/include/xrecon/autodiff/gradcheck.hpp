#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xrecon/autodiff/graph.hpp"
#include "xrecon/autodiff/param_store.hpp"

namespace xrecon::ad {

template <typename T>
using LossBuilder = std::function<Var(Graph<T>&, ParamStore<T>&)>;

struct GradCheckOptions {
  double tolerance = 1e-6;
  /// Errors are relative to max(|analytic|, |numeric|, abs_floor), so
  /// components far below the floor are compared in absolute terms.
  double abs_floor = 1e-8;
  /// Central-difference step is step_scale * max(1, |theta|).
  double step_scale = 1e-5;
  /// Check at most this many evenly spaced elements per parameter (0 = all).
  std::size_t max_elements = 0;
  /// Skip elements where central differences at h and h/4 disagree by more
  /// than the tolerance: a relu kink lies inside the stencil, so neither
  /// estimate is a derivative. Skipping more than max_skip_fraction of all
  /// checked elements fails the check.
  bool skip_kinks = false;
  double max_skip_fraction = 0.02;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0;
  std::size_t worst_index = 0;
  double analytic = 0;  // at worst_index
  double numeric = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // kink-straddling elements (skip_kinks only)
  bool passed = false;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  bool passed = false;
  double max_rel_error() const;
  std::size_t skipped() const;
};

/// Compares backward() against central differences, both in 64-bit.
GradCheckReport gradient_check(const LossBuilder<double>& build, ParamStore<double>& params,
                               const GradCheckOptions& options = {});

/// Checks the 32-bit backward pass against 64-bit central differences of the
/// same loss evaluated at the same (widened) parameters.
GradCheckReport gradient_check_mixed(const LossBuilder<float>& build32, const LossBuilder<double>& build64,
                                     ParamStore<float>& params, const GradCheckOptions& options = {});

}  // namespace xrecon::ad
