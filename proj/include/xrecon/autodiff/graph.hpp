#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xrecon/autodiff/tensor.hpp"

namespace xrecon::ad {

enum class OpKind {
  constant,
  parameter,
  conv2d,
  linear,
  relu,
  sigmoid,
  concat,
  slice,
  reshape,
  weighted_sum,
  bilinear_sample,
  add,
  sub,
  mul,
  reduce_mean,
  square,
  custom,
};

std::string_view op_name(OpKind kind);

/// Handle to a node of a Graph. Only meaningful for the graph that issued it.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
};

/// Attributes for the generic Graph::apply entry point. Each kind reads only
/// the fields it needs.
template <typename T>
struct OpAttrs {
  int stride = 1;                          // conv2d
  int padding = 0;                         // conv2d
  std::size_t axis = 0;                    // concat, slice
  std::size_t begin = 0, end = 0;          // slice
  Shape shape;                             // reshape
  std::vector<T> weights;                  // weighted_sum: K scalars or K*rows
  std::vector<std::array<T, 2>> coords;    // bilinear_sample: (x, y) per query
};

/// User-defined differentiable op. `backward` returns one gradient array per
/// input (an empty array means no gradient for that input).
template <typename T>
struct CustomOp {
  std::string name;
  std::function<Tensor<T>(const std::vector<const Tensor<T>*>&)> forward;
  std::function<std::vector<Storage<T>>(const std::vector<const Tensor<T>*>&, const Tensor<T>&,
                                        std::span<const T>)>
      backward;
};

/// Static reverse-mode graph. Ops are evaluated eagerly as they are added;
/// nodes whose inputs need gradients also record a backward rule. A graph
/// supports exactly one backward pass.
template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Leaf without gradient. Also used to detach values from another graph.
  Var constant(Tensor<T> value);
  /// Leaf bound to a trainable tensor; backward accumulates into its grad.
  /// Binding the same tensor twice returns the same node.
  Var parameter(Tensor<T>& param);

  /// x: (Cin,H,W), w: (Cout,Cin,kh,kw), b: (Cout) -> (Cout,Ho,Wo). Zero padding.
  Var conv2d(Var x, Var w, Var b, int stride, int padding);
  /// x: (N,in), w: (out,in), b: (out) -> (N,out).
  Var linear(Var x, Var w, Var b);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var concat(std::span<const Var> xs, std::size_t axis);
  Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
  Var reshape(Var x, Shape shape);
  /// Sum of equally shaped inputs. `weights` holds either one scalar per input
  /// or one scalar per (input, leading-axis row), input-major.
  Var weighted_sum(std::span<const Var> xs, std::span<const T> weights);
  /// plane: (C,H,W); coords (x=column, y=row) -> (N,C). Taps outside the
  /// plane read as zero, so queries fully off the plane give zeros.
  Var bilinear_sample(Var plane, std::span<const std::array<T, 2>> coords);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var reduce_mean(Var x);
  Var square(Var x);
  Var custom(const CustomOp<T>& op, std::span<const Var> inputs);

  Var apply(OpKind kind, std::span<const Var> inputs, const OpAttrs<T>& attrs = {});

  const Tensor<T>& value(Var v) const;
  OpKind kind(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  bool requires_grad(Var v) const;

  /// Populates gradients of every reachable parameter. `loss` must be scalar.
  void backward(Var loss);
  /// Gradient of `loss` w.r.t. an intermediate node, available after backward.
  std::span<const T> grad(Var v) const;

 private:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  struct Node {
    OpKind kind;
    std::string label;
    std::vector<std::size_t> inputs;
    Tensor<T> value;
    Tensor<T>* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
    Storage<T> grad;
  };

  Var push(OpKind kind, std::string label, std::vector<std::size_t> inputs, Tensor<T> value,
           BackwardFn backward);
  const Node& node(Var v, std::string_view op) const;
  Storage<T>& grad_buffer(std::size_t id);

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor<T>*, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace xrecon::ad
