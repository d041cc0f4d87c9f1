#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xrecon/autodiff/memory.hpp"

namespace xrecon::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array with an optional gradient buffer of the same shape.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : data_(1, T{0}) {}
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, Storage<T> data);
  Tensor(Shape shape, std::initializer_list<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{}, Storage<T>{value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

  bool has_grad() const noexcept { return grad_.has_value(); }
  std::span<const T> grad() const;
  std::span<T> grad();
  /// Allocates the gradient buffer if needed and fills it with zeros.
  void zero_grad();
  void clear_grad() noexcept { grad_.reset(); }

  /// Same values under a new shape of equal size.
  Tensor reshaped(Shape shape) const;

  template <typename U>
  Tensor<U> cast() const {
    Storage<U> out(data_.begin(), data_.end());
    Tensor<U> t(shape_, std::move(out));
    t.set_requires_grad(requires_grad_);
    return t;
  }

 private:
  Shape shape_;
  Storage<T> data_;
  bool requires_grad_ = false;
  std::optional<Storage<T>> grad_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace xrecon::ad
