#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "xrecon/autodiff/adam.hpp"
#include "xrecon/autodiff/gradcheck.hpp"
#include "xrecon/autodiff/graph.hpp"
#include "xrecon/errors.hpp"
#include "xrecon/gradcheck_suite.hpp"

using namespace xrecon;
using namespace xrecon::ad;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& gen) {
  Tensor<double> t(std::move(shape));
  std::normal_distribution<double> d;
  for (auto& x : t.data()) x = d(gen);
  return t;
}

// Direct loop convolution with zero padding.
Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride, int pad) {
  const int cin = int(x.dim(0)), h = int(x.dim(1)), wd = int(x.dim(2));
  const int cout = int(w.dim(0)), kh = int(w.dim(2)), kw = int(w.dim(3));
  const int ho = (h + 2 * pad - kh) / stride + 1, wo = (wd + 2 * pad - kw) / stride + 1;
  Tensor<double> out({std::size_t(cout), std::size_t(ho), std::size_t(wo)});
  for (int o = 0; o < cout; ++o)
    for (int r = 0; r < ho; ++r)
      for (int c = 0; c < wo; ++c) {
        double s = b[o];
        for (int i = 0; i < cin; ++i)
          for (int u = 0; u < kh; ++u)
            for (int v = 0; v < kw; ++v) {
              const int y = r * stride - pad + u, xx = c * stride - pad + v;
              if (y < 0 || y >= h || xx < 0 || xx >= wd) continue;
              s += x[(i * h + y) * wd + xx] * w[((o * cin + i) * kh + u) * kw + v];
            }
        out[(o * ho + r) * wo + c] = s;
      }
  return out;
}

}  // namespace

TEST(Tensor, ShapeAndItem) {
  Tensor<float> t({2, 3}, 1.5f);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_THROW(t.item(), ShapeError);
  EXPECT_FLOAT_EQ(Tensor<float>::scalar(2.0f).item(), 2.0f);
  EXPECT_THROW(Tensor<float>({2, 2}, Storage<float>(3)), ShapeError);
  EXPECT_THROW(t.reshaped({4}), ShapeError);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
}

TEST(Graph, ConvMatchesLoopOracle) {
  std::mt19937_64 gen(1);
  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 0}, std::pair{2, 0}}) {
    const auto x = random_tensor({3, 7, 6}, gen);
    const auto w = random_tensor({4, 3, 3, 3}, gen);
    const auto b = random_tensor({4}, gen);
    Graph<double> g;
    const Var y = g.conv2d(g.constant(x), g.constant(w), g.constant(b), stride, pad);
    const auto want = conv_oracle(x, w, b, stride, pad);
    ASSERT_EQ(g.value(y).shape(), want.shape());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(g.value(y)[i], want[i], 1e-12);
  }
}

TEST(Graph, LinearMatchesLoopOracle) {
  std::mt19937_64 gen(2);
  const auto x = random_tensor({5, 3}, gen), w = random_tensor({4, 3}, gen), b = random_tensor({4}, gen);
  Graph<double> g;
  const Var y = g.linear(g.constant(x), g.constant(w), g.constant(b));
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t o = 0; o < 4; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < 3; ++i) s += x[n * 3 + i] * w[o * 3 + i];
      EXPECT_NEAR(g.value(y)[n * 4 + o], s, 1e-12);
    }
}

TEST(Graph, BilinearSampleCases) {
  Tensor<double> plane({1, 2, 3}, {0, 1, 2, 3, 4, 5});
  Graph<double> g;
  const std::vector<std::array<double, 2>> coords{{1, 1}, {0.5, 0}, {0.5, 0.5}, {-5, -5}, {-0.5, 1}, {2, 1}};
  const auto& v = g.value(g.bilinear_sample(g.constant(plane), coords));
  EXPECT_DOUBLE_EQ(v[0], 4.0);   // exact pixel
  EXPECT_DOUBLE_EQ(v[1], 0.5);   // midway between two pixels: their mean
  EXPECT_DOUBLE_EQ(v[2], 2.0);   // centre of four pixels
  EXPECT_DOUBLE_EQ(v[3], 0.0);   // far off the plane
  EXPECT_DOUBLE_EQ(v[4], 1.5);   // half a pixel outside: the outside tap reads zero
  EXPECT_DOUBLE_EQ(v[5], 5.0);   // last pixel
}

TEST(Graph, StructuralOps) {
  Graph<double> g;
  const Var a = g.constant(Tensor<double>({2, 2}, {1, 2, 3, 4}));
  const Var b = g.constant(Tensor<double>({2, 1}, {5, 6}));
  const std::array<Var, 2> xs{a, b};
  const auto& c = g.value(g.concat(xs, 1));
  EXPECT_EQ(c.shape(), (Shape{2, 3}));
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()), (std::vector<double>{1, 2, 5, 3, 4, 6}));
  const auto& s = g.value(g.slice(a, 0, 1, 2));
  EXPECT_EQ(std::vector<double>(s.data().begin(), s.data().end()), (std::vector<double>{3, 4}));
  const std::array<Var, 2> ys{a, a};
  const std::array<double, 4> w{1, 2, 3, 4};  // per (input, row)
  const auto& ws = g.value(g.weighted_sum(ys, w));
  EXPECT_EQ(std::vector<double>(ws.data().begin(), ws.data().end()), (std::vector<double>{4, 8, 18, 24}));
  EXPECT_DOUBLE_EQ(g.value(g.reduce_mean(a)).item(), 2.5);
}

TEST(Graph, ShapeErrorsNameTheOp) {
  Graph<double> g;
  const Var a = g.constant(Tensor<double>({2, 3}));
  const Var b = g.constant(Tensor<double>({3, 2}));
  EXPECT_THROW(g.add(a, b), ShapeError);
  EXPECT_THROW(g.linear(a, g.constant(Tensor<double>({4, 2})), g.constant(Tensor<double>({4}))), ShapeError);
  try {
    g.mul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("mul"), std::string::npos);
  }
}

TEST(Graph, BackwardRules) {
  Tensor<double> p({2}, {1.0, -2.0});
  p.set_requires_grad(true);
  p.zero_grad();
  Graph<double> g;
  const Var x = g.parameter(p);
  EXPECT_EQ(g.parameter(p).id, x.id);  // bound once
  EXPECT_THROW(g.backward(x), ShapeError);
  const Var loss = g.reduce_mean(g.mul(x, x));
  g.backward(loss);
  EXPECT_DOUBLE_EQ(p.grad()[0], 1.0);  // d/dx mean(x^2) = x
  EXPECT_DOUBLE_EQ(p.grad()[1], -2.0);
  EXPECT_THROW(g.backward(loss), UsageError);
}

TEST(Graph, NonFiniteForwardThrows) {
  Graph<double> g;
  EXPECT_THROW(g.constant(Tensor<double>({1}, {std::numeric_limits<double>::quiet_NaN()})), NumericError);
}

TEST(Graph, ConstantsReceiveNoGradient) {
  Tensor<double> p({2}, {1.0, 2.0});
  p.set_requires_grad(true);
  Graph<double> g;
  const Var c = g.constant(Tensor<double>({2}, {3.0, 4.0}));
  const Var loss = g.reduce_mean(g.mul(g.parameter(p), c));
  EXPECT_FALSE(g.requires_grad(c));
  g.backward(loss);
  EXPECT_DOUBLE_EQ(p.grad()[0], 1.5);
  EXPECT_DOUBLE_EQ(p.grad()[1], 2.0);
}

TEST(Memory, TracksTensorStorage) {
  const std::size_t before = MemoryStats::live_bytes();
  {
    Tensor<double> t({1000});
    EXPECT_GE(MemoryStats::live_bytes(), before + 8000);
    MemoryStats::reset_peak();
  }
  EXPECT_EQ(MemoryStats::live_bytes(), before);
  EXPECT_GE(MemoryStats::peak_bytes(), before + 8000);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore<double> ps;
  auto& p = ps.add("w", Tensor<double>({3}, {1.0, 1.0, 1.0}));
  p.zero_grad();
  p.grad()[0] = 0.5;
  p.grad()[1] = -2.0;
  p.grad()[2] = 0.0;
  AdamState<double> st;
  st.config.lr = 0.1;
  adam_step(ps, st);
  // Bias-corrected first step is lr * g / (|g| + eps).
  EXPECT_NEAR(p[0], 0.9, 1e-7);
  EXPECT_NEAR(p[1], 1.1, 1e-7);
  EXPECT_DOUBLE_EQ(p[2], 1.0);
}

TEST(Adam, RequiresGradients) {
  ParamStore<float> ps;
  ps.add("w", Tensor<float>({2}));
  AdamState<float> st;
  EXPECT_THROW(adam_step(ps, st), UsageError);
}

TEST(Adam, MinimizesQuadratic) {
  ParamStore<double> ps;
  auto& p = ps.add("w", Tensor<double>({2}, {3.0, -4.0}));
  AdamState<double> st;
  st.config.lr = 0.05;
  for (int i = 0; i < 2000; ++i) {
    ps.zero_grad();
    Graph<double> g;
    g.backward(g.reduce_mean(g.square(g.parameter(p))));
    adam_step(ps, st);
  }
  EXPECT_NEAR(p[0], 0.0, 1e-2);
  EXPECT_NEAR(p[1], 0.0, 1e-2);
}

TEST(GradCheck, DetectsWrongDerivativeAndRejectsNondeterminism) {
  ParamStore<double> ps;
  ps.add("x", Tensor<double>({3}, {0.3, -0.7, 1.1}));
  CustomOp<double> bad;
  bad.name = "bad_square";
  bad.forward = [](const std::vector<const Tensor<double>*>& in) {
    Tensor<double> out(in[0]->shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*in[0])[i] * (*in[0])[i];
    return out;
  };
  bad.backward = [](const std::vector<const Tensor<double>*>& in, const Tensor<double>&, std::span<const double> gout) {
    Storage<double> gx(in[0]->size());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = (*in[0])[i] * gout[i];  // missing factor 2
    return std::vector<Storage<double>>{gx};
  };
  const LossBuilder<double> build = [&](Graph<double>& g, ParamStore<double>& p) {
    const std::array<Var, 1> in{g.parameter(p.at("x"))};
    return g.reduce_mean(g.custom(bad, in));
  };
  const auto report = gradient_check(build, ps);
  EXPECT_FALSE(report.passed);
  EXPECT_NEAR(report.max_rel_error(), 0.5, 1e-6);

  int calls = 0;
  const LossBuilder<double> noisy = [&](Graph<double>& g, ParamStore<double>& p) {
    ++calls;
    return g.add(g.reduce_mean(g.parameter(p.at("x"))), g.constant(Tensor<double>::scalar(calls * 1e-3)));
  };
  EXPECT_THROW(gradient_check(noisy, ps), CheckInvalidError);
}

TEST(GradCheck, FullSuitePasses) {
  const GradCheckSuiteReport report = run_gradcheck_suite(0);
  for (const auto& e : report.entries) {
    EXPECT_TRUE(e.passed) << e.name << " " << e.precision << " max_rel=" << e.max_rel_error << " " << e.worst;
    if (!e.expect_failure) {
      EXPECT_LT(e.max_rel_error, e.tolerance);
    }
  }
  EXPECT_TRUE(report.passed());
}
