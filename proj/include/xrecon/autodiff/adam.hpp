#pragma once

#include <map>
#include <string>

#include "xrecon/autodiff/param_store.hpp"

namespace xrecon::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments keyed by parameter name, plus the step counter.
template <typename T>
struct AdamState {
  AdamConfig config;
  long step = 0;
  std::map<std::string, Storage<T>> m;
  std::map<std::string, Storage<T>> v;
};

/// One bias-corrected Adam update. Gradients are read, not cleared.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state);

extern template void adam_step<float>(ParamStore<float>&, AdamState<float>&);
extern template void adam_step<double>(ParamStore<double>&, AdamState<double>&);

}  // namespace xrecon::ad
