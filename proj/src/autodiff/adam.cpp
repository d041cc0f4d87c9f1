#include "xrecon/autodiff/adam.hpp"

#include <cmath>

#include "xrecon/errors.hpp"

namespace xrecon::ad {

template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state) {
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) throw UsageError("adam: parameter '" + name + "' has no gradient");
  }
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != p.size()) {
      m.assign(p.size(), T{0});
      v.assign(p.size(), T{0});
    }
    auto g = p.grad();
    auto x = p.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      x[i] = static_cast<T>(x[i] - c.lr * mhat / (std::sqrt(vhat) + c.eps));
    }
  }
}

template void adam_step<float>(ParamStore<float>&, AdamState<float>&);
template void adam_step<double>(ParamStore<double>&, AdamState<double>&);

}  // namespace xrecon::ad
