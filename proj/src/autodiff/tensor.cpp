#include "xrecon/autodiff/tensor.hpp"

#include <functional>
#include <numeric>
#include <sstream>

#include "xrecon/errors.hpp"

namespace xrecon::ad {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, Storage<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor: data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  }
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::initializer_list<T> values)
    : Tensor(std::move(shape), Storage<T>(values.begin(), values.end())) {}

template <typename T>
T Tensor<T>::item() const {
  if (data_.size() != 1) {
    throw ShapeError("tensor: item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!grad_) throw UsageError("tensor: gradient requested but never populated");
  return *grad_;
}

template <typename T>
std::span<T> Tensor<T>::grad() {
  if (!grad_) throw UsageError("tensor: gradient requested but never populated");
  return *grad_;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (grad_) {
    std::fill(grad_->begin(), grad_->end(), T{0});
  } else {
    grad_.emplace(data_.size(), T{0});
  }
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(shape_) + " as " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace xrecon::ad
