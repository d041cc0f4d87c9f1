#pragma once

#include <map>
#include <string>

#include "xrecon/autodiff/tensor.hpp"
#include "xrecon/errors.hpp"

namespace xrecon::ad {

/// Named trainable tensors. Iteration is sorted by name, which fixes the
/// order of checkpoint blobs and optimizer state.
template <typename T>
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor<T>>;

  Tensor<T>& add(const std::string& name, Tensor<T> value) {
    value.set_requires_grad(true);
    auto [it, inserted] = params_.emplace(name, std::move(value));
    if (!inserted) throw InvalidArgument("param store: duplicate parameter '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Tensor<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw InvalidArgument("param store: unknown parameter '" + name + "'");
    return it->second;
  }
  const Tensor<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw InvalidArgument("param store: unknown parameter '" + name + "'");
    return it->second;
  }

  void zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
  }
  void clear_grad() {
    for (auto& [_, p] : params_) p.clear_grad();
  }

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, p] : params_) out.add(name, p.template cast<U>());
    return out;
  }

 private:
  Map params_;
};

}  // namespace xrecon::ad
