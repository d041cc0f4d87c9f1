#include "xrecon/autodiff/graph.hpp"

#include <algorithm>
#include <cmath>

#include "xrecon/errors.hpp"

namespace xrecon::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::parameter: return "parameter";
    case OpKind::conv2d: return "conv2d";
    case OpKind::linear: return "linear";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::reshape: return "reshape";
    case OpKind::weighted_sum: return "weighted_sum";
    case OpKind::bilinear_sample: return "bilinear_sample";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::reduce_mean: return "reduce_mean";
    case OpKind::square: return "square";
    case OpKind::custom: return "custom";
  }
  return "unknown";
}

namespace {

template <typename T>
bool all_finite(std::span<const T> xs) {
  return std::all_of(xs.begin(), xs.end(), [](T v) { return std::isfinite(v); });
}

[[noreturn]] void shape_fail(std::string_view op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

void require_rank(std::string_view op, const char* operand, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    shape_fail(op, std::string(operand) + " must have rank " + std::to_string(rank) + ", got " +
                       shape_string(s));
  }
}

void require_same(std::string_view op, const Shape& a, const Shape& b) {
  if (a != b) shape_fail(op, "operand shapes differ: " + shape_string(a) + " vs " + shape_string(b));
}

// Elements before / after `axis` for concat and slice.
std::pair<std::size_t, std::size_t> outer_inner(const Shape& s, std::size_t axis) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  return {outer, inner};
}

}  // namespace

template <typename T>
Var Graph<T>::push(OpKind kind, std::string label, std::vector<std::size_t> inputs, Tensor<T> value,
                   BackwardFn backward) {
  if (!all_finite<T>(value.data())) {
    throw NumericError(label + ": non-finite value in forward output " + shape_string(value.shape()));
  }
  bool needs = false;
  for (std::size_t in : inputs) needs = needs || nodes_[in].requires_grad;
  Node n{kind, std::move(label), std::move(inputs), std::move(value), nullptr, needs, {}, {}};
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var v, std::string_view op) const {
  if (!v.valid() || v.id >= nodes_.size()) {
    throw UsageError(std::string(op) + ": operand is not a node of this graph");
  }
  return nodes_[v.id];
}

template <typename T>
Storage<T>& Graph<T>::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), T{0});
  return n.grad;
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
  return node(v, "value").value;
}

template <typename T>
OpKind Graph<T>::kind(Var v) const {
  return node(v, "kind").kind;
}

template <typename T>
bool Graph<T>::requires_grad(Var v) const {
  return node(v, "requires_grad").requires_grad;
}

template <typename T>
std::span<const T> Graph<T>::grad(Var v) const {
  const Node& n = node(v, "grad");
  if (!backward_done_) throw UsageError("grad: backward has not been run");
  if (n.grad.empty()) throw UsageError("grad: node '" + n.label + "' received no gradient");
  return n.grad;
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  value.set_requires_grad(false);
  value.clear_grad();
  return push(OpKind::constant, "constant", {}, std::move(value), {});
}

template <typename T>
Var Graph<T>::parameter(Tensor<T>& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return Var{it->second};
  Tensor<T> copy(param.shape(), Storage<T>(param.data().begin(), param.data().end()));
  Var v = push(OpKind::parameter, "parameter", {}, std::move(copy), {});
  Node& n = nodes_[v.id];
  n.param = &param;
  n.requires_grad = param.requires_grad();
  param_nodes_.emplace(&param, v.id);
  return v;
}

template <typename T>
Var Graph<T>::conv2d(Var x, Var w, Var b, int stride, int padding) {
  constexpr std::string_view op = "conv2d";
  const auto& X = node(x, op).value;
  const auto& Wt = node(w, op).value;
  const auto& B = node(b, op).value;
  require_rank(op, "input", X.shape(), 3);
  require_rank(op, "weight", Wt.shape(), 4);
  require_rank(op, "bias", B.shape(), 1);
  if (stride < 1 || padding < 0) shape_fail(op, "stride must be >= 1 and padding >= 0");
  const std::size_t ci = X.dim(0), h = X.dim(1), wd = X.dim(2);
  const std::size_t co = Wt.dim(0), kh = Wt.dim(2), kw = Wt.dim(3);
  if (Wt.dim(1) != ci) {
    shape_fail(op, "weight " + shape_string(Wt.shape()) + " expects " + std::to_string(Wt.dim(1)) +
                       " input channels, input " + shape_string(X.shape()) + " has " + std::to_string(ci));
  }
  if (B.dim(0) != co) shape_fail(op, "bias " + shape_string(B.shape()) + " does not match " + std::to_string(co) + " output channels");
  const long p = padding, s = stride;
  if (static_cast<long>(h) + 2 * p < static_cast<long>(kh) || static_cast<long>(wd) + 2 * p < static_cast<long>(kw)) {
    shape_fail(op, "kernel " + shape_string(Wt.shape()) + " larger than padded input " + shape_string(X.shape()));
  }
  const std::size_t ho = (h + 2 * padding - kh) / stride + 1;
  const std::size_t wo = (wd + 2 * padding - kw) / stride + 1;

  // Valid output range along one axis for kernel offset k.
  auto out_range = [p, s](long k, long in_size, long out_size) {
    long lo = std::max<long>(0, (p - k + s - 1) / s);
    if (p - k < 0) lo = 0;
    long hi = (in_size - 1 + p - k);
    hi = hi < 0 ? -1 : std::min<long>(out_size - 1, hi / s);
    return std::pair<long, long>{lo, hi};
  };

  Tensor<T> out({co, ho, wo});
  auto O = out.data();
  auto xd = X.data();
  auto wdat = Wt.data();
  for (std::size_t c = 0; c < co; ++c) {
    std::fill(O.begin() + c * ho * wo, O.begin() + (c + 1) * ho * wo, B[c]);
    for (std::size_t k = 0; k < ci; ++k) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const auto [oy0, oy1] = out_range(static_cast<long>(ky), static_cast<long>(h), static_cast<long>(ho));
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const auto [ox0, ox1] = out_range(static_cast<long>(kx), static_cast<long>(wd), static_cast<long>(wo));
          const T wv = wdat[((c * ci + k) * kh + ky) * kw + kx];
          for (long oy = oy0; oy <= oy1; ++oy) {
            const long iy = oy * s + static_cast<long>(ky) - p;
            const T* xrow = xd.data() + (k * h + static_cast<std::size_t>(iy)) * wd;
            T* orow = O.data() + (c * ho + static_cast<std::size_t>(oy)) * wo;
            for (long ox = ox0; ox <= ox1; ++ox) {
              orow[ox] += wv * xrow[ox * s + static_cast<long>(kx) - p];
            }
          }
        }
      }
    }
  }

  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    const auto& Xv = g.nodes_[x.id].value;
    const auto& Wv = g.nodes_[w.id].value;
    const bool gx = g.nodes_[x.id].requires_grad, gw = g.nodes_[w.id].requires_grad,
               gb = g.nodes_[b.id].requires_grad;
    T* dX = gx ? g.grad_buffer(x.id).data() : nullptr;
    T* dW = gw ? g.grad_buffer(w.id).data() : nullptr;
    T* dB = gb ? g.grad_buffer(b.id).data() : nullptr;
    auto xv = Xv.data();
    auto wv_all = Wv.data();
    for (std::size_t c = 0; c < co; ++c) {
      if (dB) {
        T acc = 0;
        for (std::size_t i = 0; i < ho * wo; ++i) acc += G[c * ho * wo + i];
        dB[c] += acc;
      }
      for (std::size_t k = 0; k < ci; ++k) {
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const auto [oy0, oy1] = out_range(static_cast<long>(ky), static_cast<long>(h), static_cast<long>(ho));
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const auto [ox0, ox1] = out_range(static_cast<long>(kx), static_cast<long>(wd), static_cast<long>(wo));
            const std::size_t widx = ((c * ci + k) * kh + ky) * kw + kx;
            const T wv = wv_all[widx];
            T wacc = 0;
            for (long oy = oy0; oy <= oy1; ++oy) {
              const long iy = oy * s + static_cast<long>(ky) - p;
              const std::size_t xoff = (k * h + static_cast<std::size_t>(iy)) * wd;
              const T* grow = G.data() + (c * ho + static_cast<std::size_t>(oy)) * wo;
              for (long ox = ox0; ox <= ox1; ++ox) {
                const std::size_t xi = xoff + static_cast<std::size_t>(ox * s + static_cast<long>(kx) - p);
                if (dX) dX[xi] += wv * grow[ox];
                wacc += grow[ox] * xv[xi];
              }
            }
            if (dW) dW[widx] += wacc;
          }
        }
      }
    }
  };
  return push(OpKind::conv2d, "conv2d", {x.id, w.id, b.id}, std::move(out), backward);
}

template <typename T>
Var Graph<T>::linear(Var x, Var w, Var b) {
  constexpr std::string_view op = "linear";
  const auto& X = node(x, op).value;
  const auto& Wm = node(w, op).value;
  const auto& B = node(b, op).value;
  require_rank(op, "input", X.shape(), 2);
  require_rank(op, "weight", Wm.shape(), 2);
  require_rank(op, "bias", B.shape(), 1);
  const std::size_t n = X.dim(0), in = X.dim(1), outw = Wm.dim(0);
  if (Wm.dim(1) != in) {
    shape_fail(op, "input " + shape_string(X.shape()) + " has width " + std::to_string(in) + " but weight " +
                       shape_string(Wm.shape()) + " expects " + std::to_string(Wm.dim(1)));
  }
  if (B.dim(0) != outw) shape_fail(op, "bias " + shape_string(B.shape()) + " does not match weight " + shape_string(Wm.shape()));

  // Transposed weights make the inner loop contiguous. Each output row is
  // accumulated in the same order regardless of batch size.
  Storage<T> wt(in * outw);
  for (std::size_t o = 0; o < outw; ++o)
    for (std::size_t k = 0; k < in; ++k) wt[k * outw + o] = Wm[o * in + k];

  Tensor<T> out({n, outw});
  auto Y = out.data();
  auto xd = X.data();
  for (std::size_t r = 0; r < n; ++r) {
    T* yrow = Y.data() + r * outw;
    for (std::size_t o = 0; o < outw; ++o) yrow[o] = B[o];
    for (std::size_t k = 0; k < in; ++k) {
      const T xv = xd[r * in + k];
      const T* wrow = wt.data() + k * outw;
      for (std::size_t o = 0; o < outw; ++o) yrow[o] += xv * wrow[o];
    }
  }

  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    const auto& Xv = g.nodes_[x.id].value;
    const auto& Wv = g.nodes_[w.id].value;
    if (g.nodes_[x.id].requires_grad) {
      T* dX = g.grad_buffer(x.id).data();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t o = 0; o < outw; ++o) {
          const T gv = G[r * outw + o];
          const T* wrow = Wv.data().data() + o * in;
          T* drow = dX + r * in;
          for (std::size_t k = 0; k < in; ++k) drow[k] += gv * wrow[k];
        }
    }
    if (g.nodes_[w.id].requires_grad) {
      T* dW = g.grad_buffer(w.id).data();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t o = 0; o < outw; ++o) {
          const T gv = G[r * outw + o];
          const T* xrow = Xv.data().data() + r * in;
          T* drow = dW + o * in;
          for (std::size_t k = 0; k < in; ++k) drow[k] += gv * xrow[k];
        }
    }
    if (g.nodes_[b.id].requires_grad) {
      T* dB = g.grad_buffer(b.id).data();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t o = 0; o < outw; ++o) dB[o] += G[r * outw + o];
    }
  };
  return push(OpKind::linear, "linear", {x.id, w.id, b.id}, std::move(out), backward);
}

template <typename T>
Var Graph<T>::relu(Var x) {
  const auto& X = node(x, "relu").value;
  Tensor<T> out(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = X[i] > T{0} ? X[i] : T{0};
  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    const auto& Xv = g.nodes_[x.id].value;
    auto& dX = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < G.size(); ++i)
      if (Xv[i] > T{0}) dX[i] += G[i];
  };
  return push(OpKind::relu, "relu", {x.id}, std::move(out), backward);
}

template <typename T>
Var Graph<T>::sigmoid(Var x) {
  const auto& X = node(x, "sigmoid").value;
  Tensor<T> out(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) {
    const T v = X[i];
    if (v >= T{0}) {
      out[i] = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T{1} + e);
    }
  }
  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    const auto& Y = g.nodes_[self].value;
    auto& dX = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < G.size(); ++i) dX[i] += G[i] * Y[i] * (T{1} - Y[i]);
  };
  return push(OpKind::sigmoid, "sigmoid", {x.id}, std::move(out), backward);
}

template <typename T>
Var Graph<T>::concat(std::span<const Var> xs, std::size_t axis) {
  constexpr std::string_view op = "concat";
  if (xs.empty()) shape_fail(op, "no inputs");
  const Shape& first = node(xs[0], op).value.shape();
  if (axis >= first.size()) shape_fail(op, "axis " + std::to_string(axis) + " out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> ids, widths;
  for (Var v : xs) {
    const Shape& s = node(v, op).value.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) shape_fail(op, "input " + shape_string(s) + " incompatible with " + shape_string(first) + " along axis " + std::to_string(axis));
    out_shape[axis] += s[axis];
    ids.push_back(v.id);
    widths.push_back(s[axis]);
  }
  const auto [outer, inner] = outer_inner(first, axis);
  const std::size_t out_row = out_shape[axis] * inner;
  Tensor<T> out(out_shape);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto src = nodes_[ids[i]].value.data();
    const std::size_t row = widths[i] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src.begin() + o * row, row, out.data().begin() + o * out_row + offset);
    offset += row;
  }
  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    std::size_t off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::size_t row = widths[i] * inner;
      if (g.nodes_[ids[i]].requires_grad) {
        auto& d = g.grad_buffer(ids[i]);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < row; ++j) d[o * row + j] += G[o * out_row + off + j];
      }
      off += row;
    }
  };
  return push(OpKind::concat, "concat", ids, std::move(out), backward);
}

template <typename T>
Var Graph<T>::slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  constexpr std::string_view op = "slice";
  const auto& X = node(x, op).value;
  if (axis >= X.rank()) shape_fail(op, "axis " + std::to_string(axis) + " out of range for " + shape_string(X.shape()));
  if (begin >= end || end > X.dim(axis)) {
    shape_fail(op, "range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                       shape_string(X.shape()) + " axis " + std::to_string(axis));
  }
  Shape out_shape = X.shape();
  out_shape[axis] = end - begin;
  const auto [outer, inner] = outer_inner(X.shape(), axis);
  const std::size_t in_row = X.dim(axis) * inner, out_row = (end - begin) * inner, off = begin * inner;
  Tensor<T> out(out_shape);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(X.data().begin() + o * in_row + off, out_row, out.data().begin() + o * out_row);
  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    auto& d = g.grad_buffer(x.id);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < out_row; ++j) d[o * in_row + off + j] += G[o * out_row + j];
  };
  return push(OpKind::slice, "slice", {x.id}, std::move(out), backward);
}

template <typename T>
Var Graph<T>::reshape(Var x, Shape shape) {
  const auto& X = node(x, "reshape").value;
  if (shape_size(shape) != X.size()) {
    shape_fail("reshape", "cannot view " + shape_string(X.shape()) + " as " + shape_string(shape));
  }
  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    auto& d = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i];
  };
  return push(OpKind::reshape, "reshape", {x.id}, X.reshaped(std::move(shape)), backward);
}

template <typename T>
Var Graph<T>::weighted_sum(std::span<const Var> xs, std::span<const T> weights) {
  constexpr std::string_view op = "weighted_sum";
  if (xs.empty()) shape_fail(op, "no inputs");
  const Shape& first = node(xs[0], op).value.shape();
  std::vector<std::size_t> ids;
  for (Var v : xs) {
    require_same(op, node(v, op).value.shape(), first);
    ids.push_back(v.id);
  }
  const std::size_t k = ids.size();
  const std::size_t rows = first.empty() ? 1 : first[0];
  const std::size_t total = shape_size(first);
  const std::size_t per_row = rows == 0 ? 0 : total / rows;
  std::size_t wrows = 0;
  if (weights.size() == k) {
    wrows = 1;
  } else if (weights.size() == k * rows) {
    wrows = rows;
  } else {
    shape_fail(op, "expected " + std::to_string(k) + " or " + std::to_string(k * rows) + " weights for " +
                       std::to_string(k) + " inputs of shape " + shape_string(first) + ", got " +
                       std::to_string(weights.size()));
  }
  std::vector<T> wv(weights.begin(), weights.end());
  auto weight = [wv, wrows, per_row](std::size_t input, std::size_t elem) {
    return wrows == 1 ? wv[input] : wv[input * wrows + elem / per_row];
  };
  Tensor<T> out(first);
  for (std::size_t i = 0; i < k; ++i) {
    const auto src = nodes_[ids[i]].value.data();
    for (std::size_t e = 0; e < total; ++e) out[e] += weight(i, e) * src[e];
  }
  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    for (std::size_t i = 0; i < k; ++i) {
      if (!g.nodes_[ids[i]].requires_grad) continue;
      auto& d = g.grad_buffer(ids[i]);
      for (std::size_t e = 0; e < total; ++e) d[e] += weight(i, e) * G[e];
    }
  };
  return push(OpKind::weighted_sum, "weighted_sum", ids, std::move(out), backward);
}

template <typename T>
Var Graph<T>::bilinear_sample(Var plane, std::span<const std::array<T, 2>> coords) {
  constexpr std::string_view op = "bilinear_sample";
  const auto& P = node(plane, op).value;
  require_rank(op, "plane", P.shape(), 3);
  const std::size_t c = P.dim(0), h = P.dim(1), w = P.dim(2);
  const std::size_t n = coords.size();

  // Four taps per query: flat spatial index (or npos when off-plane) and weight.
  struct Tap {
    std::size_t index;
    T weight;
  };
  std::vector<std::array<Tap, 4>> taps(n);
  constexpr std::size_t off = Var::npos;
  for (std::size_t q = 0; q < n; ++q) {
    const T x = coords[q][0], y = coords[q][1];
    if (!std::isfinite(x) || !std::isfinite(y)) throw NumericError("bilinear_sample: non-finite coordinate");
    const T fx0 = std::floor(x), fy0 = std::floor(y);
    const T ax = x - fx0, ay = y - fy0;
    const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
    const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
    const T ws[4] = {(T{1} - ax) * (T{1} - ay), ax * (T{1} - ay), (T{1} - ax) * ay, ax * ay};
    for (int t = 0; t < 4; ++t) {
      const bool inside = xs[t] >= 0 && ys[t] >= 0 && xs[t] < static_cast<long>(w) && ys[t] < static_cast<long>(h);
      taps[q][t] = inside ? Tap{static_cast<std::size_t>(ys[t]) * w + static_cast<std::size_t>(xs[t]), ws[t]}
                          : Tap{off, T{0}};
    }
  }
  Tensor<T> out({n, c});
  const std::size_t hw = h * w;
  for (std::size_t q = 0; q < n; ++q)
    for (const Tap& tap : taps[q]) {
      if (tap.index == off || tap.weight == T{0}) continue;
      for (std::size_t ch = 0; ch < c; ++ch) out[q * c + ch] += tap.weight * P[ch * hw + tap.index];
    }
  auto backward = [=, taps = std::move(taps)](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    auto& d = g.grad_buffer(plane.id);
    for (std::size_t q = 0; q < n; ++q)
      for (const Tap& tap : taps[q]) {
        if (tap.index == off || tap.weight == T{0}) continue;
        for (std::size_t ch = 0; ch < c; ++ch) d[ch * hw + tap.index] += tap.weight * G[q * c + ch];
      }
  };
  return push(OpKind::bilinear_sample, "bilinear_sample", {plane.id}, std::move(out), backward);
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  const auto& A = node(a, "add").value;
  const auto& B = node(b, "add").value;
  require_same("add", A.shape(), B.shape());
  Tensor<T> out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + B[i];
  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    for (std::size_t id : {a.id, b.id}) {
      if (!g.nodes_[id].requires_grad) continue;
      auto& d = g.grad_buffer(id);
      for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i];
    }
  };
  return push(OpKind::add, "add", {a.id, b.id}, std::move(out), backward);
}

template <typename T>
Var Graph<T>::sub(Var a, Var b) {
  const auto& A = node(a, "sub").value;
  const auto& B = node(b, "sub").value;
  require_same("sub", A.shape(), B.shape());
  Tensor<T> out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] - B[i];
  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    if (g.nodes_[a.id].requires_grad) {
      auto& d = g.grad_buffer(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i];
    }
    if (g.nodes_[b.id].requires_grad) {
      auto& d = g.grad_buffer(b.id);
      for (std::size_t i = 0; i < G.size(); ++i) d[i] -= G[i];
    }
  };
  return push(OpKind::sub, "sub", {a.id, b.id}, std::move(out), backward);
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  const auto& A = node(a, "mul").value;
  const auto& B = node(b, "mul").value;
  require_same("mul", A.shape(), B.shape());
  Tensor<T> out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    const auto& Av = g.nodes_[a.id].value;
    const auto& Bv = g.nodes_[b.id].value;
    if (g.nodes_[a.id].requires_grad) {
      auto& d = g.grad_buffer(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * Bv[i];
    }
    if (g.nodes_[b.id].requires_grad) {
      auto& d = g.grad_buffer(b.id);
      for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * Av[i];
    }
  };
  return push(OpKind::mul, "mul", {a.id, b.id}, std::move(out), backward);
}

template <typename T>
Var Graph<T>::reduce_mean(Var x) {
  const auto& X = node(x, "reduce_mean").value;
  if (X.size() == 0) shape_fail("reduce_mean", "empty input " + shape_string(X.shape()));
  // Accumulate in double so float graphs do not drift on large batches.
  double acc = 0;
  for (T v : X.data()) acc += static_cast<double>(v);
  const std::size_t count = X.size();
  auto backward = [=](Graph& g, std::size_t self) {
    const T gv = g.nodes_[self].grad[0] / static_cast<T>(count);
    auto& d = g.grad_buffer(x.id);
    for (auto& v : d) v += gv;
  };
  return push(OpKind::reduce_mean, "reduce_mean", {x.id},
              Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(count))), backward);
}

template <typename T>
Var Graph<T>::square(Var x) {
  const auto& X = node(x, "square").value;
  Tensor<T> out(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = X[i] * X[i];
  auto backward = [=](Graph& g, std::size_t self) {
    const auto& G = g.nodes_[self].grad;
    const auto& Xv = g.nodes_[x.id].value;
    auto& d = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < G.size(); ++i) d[i] += T{2} * Xv[i] * G[i];
  };
  return push(OpKind::square, "square", {x.id}, std::move(out), backward);
}

template <typename T>
Var Graph<T>::custom(const CustomOp<T>& op, std::span<const Var> inputs) {
  std::vector<std::size_t> ids;
  std::vector<const Tensor<T>*> values;
  for (Var v : inputs) {
    values.push_back(&node(v, op.name).value);
    ids.push_back(v.id);
  }
  Tensor<T> out = op.forward(values);
  auto rule = op.backward;
  auto backward = [=](Graph& g, std::size_t self) {
    std::vector<const Tensor<T>*> vals;
    for (std::size_t id : ids) vals.push_back(&g.nodes_[id].value);
    const auto& G = g.nodes_[self].grad;
    auto grads = rule(vals, g.nodes_[self].value, std::span<const T>(G.data(), G.size()));
    for (std::size_t i = 0; i < ids.size() && i < grads.size(); ++i) {
      if (grads[i].empty() || !g.nodes_[ids[i]].requires_grad) continue;
      auto& d = g.grad_buffer(ids[i]);
      if (grads[i].size() != d.size()) throw ShapeError(op.name + ": backward returned wrong gradient size");
      for (std::size_t e = 0; e < d.size(); ++e) d[e] += grads[i][e];
    }
  };
  return push(OpKind::custom, op.name, ids, std::move(out), backward);
}

template <typename T>
Var Graph<T>::apply(OpKind kind, std::span<const Var> in, const OpAttrs<T>& attrs) {
  auto need = [&](std::size_t n) {
    if (in.size() != n) {
      shape_fail(op_name(kind), "expected " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
    }
  };
  switch (kind) {
    case OpKind::conv2d: need(3); return conv2d(in[0], in[1], in[2], attrs.stride, attrs.padding);
    case OpKind::linear: need(3); return linear(in[0], in[1], in[2]);
    case OpKind::relu: need(1); return relu(in[0]);
    case OpKind::sigmoid: need(1); return sigmoid(in[0]);
    case OpKind::concat: return concat(in, attrs.axis);
    case OpKind::slice: need(1); return slice(in[0], attrs.axis, attrs.begin, attrs.end);
    case OpKind::reshape: need(1); return reshape(in[0], attrs.shape);
    case OpKind::weighted_sum: return weighted_sum(in, attrs.weights);
    case OpKind::bilinear_sample: need(1); return bilinear_sample(in[0], attrs.coords);
    case OpKind::add: need(2); return add(in[0], in[1]);
    case OpKind::sub: need(2); return sub(in[0], in[1]);
    case OpKind::mul: need(2); return mul(in[0], in[1]);
    case OpKind::reduce_mean: need(1); return reduce_mean(in[0]);
    case OpKind::square: need(1); return square(in[0]);
    case OpKind::constant:
    case OpKind::parameter:
    case OpKind::custom: break;
  }
  throw InvalidArgument("apply: op kind '" + std::string(op_name(kind)) + "' is not available through apply");
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (nodes_.empty() || !loss.valid() || loss.id >= nodes_.size()) {
    throw UsageError("backward: loss is not a recorded node; run the forward pass first");
  }
  if (backward_done_) throw UsageError("backward: graph already differentiated; build a new graph per step");
  if (nodes_[loss.id].value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_string(nodes_[loss.id].value.shape()));
  }
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id)[0] = T{1};
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (!all_finite<T>(n.grad)) throw NumericError("backward: non-finite gradient at node '" + n.label + "'");
    if (n.param) {
      if (!n.param->has_grad()) n.param->zero_grad();
      auto pg = n.param->grad();
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace xrecon::ad
