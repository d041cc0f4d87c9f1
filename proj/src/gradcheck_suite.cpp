#include "xrecon/gradcheck_suite.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>

#include "xrecon/autodiff/gradcheck.hpp"
#include "xrecon/network.hpp"

namespace xrecon {

using ad::Graph;
using ad::ParamStore;
using ad::Shape;
using ad::Tensor;
using ad::Var;

bool GradCheckSuiteReport::passed() const {
  for (const auto& e : entries)
    if (!e.passed) return false;
  return !entries.empty();
}

std::string GradCheckSuiteReport::to_text() const {
  std::string out;
  char buf[256];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%-4s %-34s %-11s max_rel=%.3e tol=%.0e%s%s\n", e.passed ? "ok" : "FAIL", e.name.c_str(),
                  e.precision.c_str(), e.max_rel_error, e.tolerance, e.expect_failure ? " (must be rejected)" : "",
                  e.skipped ? (" kinks skipped=" + std::to_string(e.skipped)).c_str() : "");
    out += buf;
    if (!e.passed) out += "     worst: " + e.worst + "\n";
  }
  std::snprintf(buf, sizeof buf, "%s: %zu checks\n", passed() ? "PASS" : "FAIL", entries.size());
  out += buf;
  return out;
}

namespace {

using Build64 = ad::LossBuilder<double>;

struct Rng {
  std::mt19937_64 gen;
  Tensor<double> normal(Shape shape, double sd = 1.0) {
    Tensor<double> t(std::move(shape));
    std::normal_distribution<double> d(0.0, sd);
    for (auto& x : t.data()) x = d(gen);
    return t;
  }
  // Magnitudes in [0.1, 1] with random sign; keeps relu inputs off the kink.
  Tensor<double> off_zero(Shape shape) {
    Tensor<double> t(std::move(shape));
    std::uniform_real_distribution<double> mag(0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& x : t.data()) x = sign(gen) ? mag(gen) : -mag(gen);
    return t;
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
};

// Random linear readout so every output element carries a distinct gradient.
Var readout(Graph<double>& g, Var out, const Tensor<double>& r) { return g.reduce_mean(g.mul(out, g.constant(r))); }

struct OpCase {
  std::string name;
  ParamStore<double> params;
  Build64 build;
};

ad::CustomOp<double> cube_op(bool wrong_derivative) {
  ad::CustomOp<double> op;
  op.name = wrong_derivative ? "cube_wrong" : "cube";
  op.forward = [](const std::vector<const Tensor<double>*>& in) {
    Tensor<double> out(in[0]->shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*in[0])[i] * (*in[0])[i] * (*in[0])[i];
    return out;
  };
  op.backward = [wrong_derivative](const std::vector<const Tensor<double>*>& in, const Tensor<double>&,
                                   std::span<const double> gout) {
    ad::Storage<double> gx(in[0]->size());
    const double c = wrong_derivative ? 2.0 : 3.0;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = c * (*in[0])[i] * (*in[0])[i] * gout[i];
    return std::vector<ad::Storage<double>>{std::move(gx)};
  };
  return op;
}

std::vector<OpCase> op_cases(Rng& rng) {
  std::vector<OpCase> cases;
  auto add_case = [&](std::string name, std::function<void(ParamStore<double>&)> init, Build64 build) {
    OpCase c;
    c.name = std::move(name);
    init(c.params);
    c.build = std::move(build);
    cases.push_back(std::move(c));
  };

  const auto r_conv1 = rng.normal({3, 5, 5});
  add_case(
      "conv2d stride 1 pad 1",
      [&](auto& p) {
        p.add("x", rng.normal({2, 5, 5}));
        p.add("w", rng.normal({3, 2, 3, 3}, 0.5));
        p.add("b", rng.normal({3}));
      },
      [r_conv1](Graph<double>& g, ParamStore<double>& p) {
        return readout(g, g.conv2d(g.parameter(p.at("x")), g.parameter(p.at("w")), g.parameter(p.at("b")), 1, 1), r_conv1);
      });
  const auto r_conv2 = rng.normal({2, 3, 3});
  add_case(
      "conv2d stride 2 pad 1",
      [&](auto& p) {
        p.add("x", rng.normal({3, 6, 6}));
        p.add("w", rng.normal({2, 3, 3, 3}, 0.5));
        p.add("b", rng.normal({2}));
      },
      [r_conv2](Graph<double>& g, ParamStore<double>& p) {
        return readout(g, g.conv2d(g.parameter(p.at("x")), g.parameter(p.at("w")), g.parameter(p.at("b")), 2, 1), r_conv2);
      });
  const auto r_conv3 = rng.normal({4, 3, 3});
  add_case(
      "conv2d 1x1",
      [&](auto& p) {
        p.add("x", rng.normal({3, 3, 3}));
        p.add("w", rng.normal({4, 3, 1, 1}));
        p.add("b", rng.normal({4}));
      },
      [r_conv3](Graph<double>& g, ParamStore<double>& p) {
        return readout(g, g.conv2d(g.parameter(p.at("x")), g.parameter(p.at("w")), g.parameter(p.at("b")), 1, 0), r_conv3);
      });
  const auto r_lin = rng.normal({4, 5});
  add_case(
      "linear",
      [&](auto& p) {
        p.add("x", rng.normal({4, 3}));
        p.add("w", rng.normal({5, 3}));
        p.add("b", rng.normal({5}));
      },
      [r_lin](Graph<double>& g, ParamStore<double>& p) {
        return readout(g, g.linear(g.parameter(p.at("x")), g.parameter(p.at("w")), g.parameter(p.at("b"))), r_lin);
      });
  const auto r_34 = rng.normal({3, 4});
  add_case(
      "relu", [&](auto& p) { p.add("x", rng.off_zero({3, 4})); },
      [r_34](Graph<double>& g, ParamStore<double>& p) { return readout(g, g.relu(g.parameter(p.at("x"))), r_34); });
  add_case(
      "sigmoid", [&](auto& p) { p.add("x", rng.normal({3, 4}, 2.0)); },
      [r_34](Graph<double>& g, ParamStore<double>& p) { return readout(g, g.sigmoid(g.parameter(p.at("x"))), r_34); });
  const auto r_cat0 = rng.normal({3, 3});
  add_case(
      "concat axis 0",
      [&](auto& p) {
        p.add("a", rng.normal({2, 3}));
        p.add("b", rng.normal({1, 3}));
      },
      [r_cat0](Graph<double>& g, ParamStore<double>& p) {
        const std::array<Var, 2> xs{g.parameter(p.at("a")), g.parameter(p.at("b"))};
        return readout(g, g.concat(xs, 0), r_cat0);
      });
  const auto r_cat1 = rng.normal({2, 5});
  add_case(
      "concat axis 1",
      [&](auto& p) {
        p.add("a", rng.normal({2, 3}));
        p.add("b", rng.normal({2, 2}));
      },
      [r_cat1](Graph<double>& g, ParamStore<double>& p) {
        const std::array<Var, 2> xs{g.parameter(p.at("a")), g.parameter(p.at("b"))};
        return readout(g, g.concat(xs, 1), r_cat1);
      });
  const auto r_sl = rng.normal({4, 3});
  add_case(
      "slice axis 1", [&](auto& p) { p.add("x", rng.normal({4, 5})); },
      [r_sl](Graph<double>& g, ParamStore<double>& p) { return readout(g, g.slice(g.parameter(p.at("x")), 1, 1, 4), r_sl); });
  const auto r_sl0 = rng.normal({2, 5});
  add_case(
      "slice axis 0", [&](auto& p) { p.add("x", rng.normal({4, 5})); },
      [r_sl0](Graph<double>& g, ParamStore<double>& p) { return readout(g, g.slice(g.parameter(p.at("x")), 0, 1, 3), r_sl0); });
  const auto r_rs = rng.normal({3, 4});
  add_case(
      "reshape", [&](auto& p) { p.add("x", rng.normal({2, 6})); },
      [r_rs](Graph<double>& g, ParamStore<double>& p) { return readout(g, g.reshape(g.parameter(p.at("x")), {3, 4}), r_rs); });
  const auto r_ws = rng.normal({2, 3});
  add_case(
      "weighted_sum per input",
      [&](auto& p) {
        for (const char* n : {"a", "b", "c"}) p.add(n, rng.normal({2, 3}));
      },
      [r_ws](Graph<double>& g, ParamStore<double>& p) {
        const std::array<Var, 3> xs{g.parameter(p.at("a")), g.parameter(p.at("b")), g.parameter(p.at("c"))};
        const std::array<double, 3> w{0.2, -0.5, 1.3};
        return readout(g, g.weighted_sum(xs, w), r_ws);
      });
  add_case(
      "weighted_sum per row",
      [&](auto& p) {
        for (const char* n : {"a", "b", "c"}) p.add(n, rng.normal({2, 3}));
      },
      [r_ws](Graph<double>& g, ParamStore<double>& p) {
        const std::array<Var, 3> xs{g.parameter(p.at("a")), g.parameter(p.at("b")), g.parameter(p.at("c"))};
        const std::array<double, 6> w{0.1, 0.7, -0.4, 0.25, 0.9, -1.1};
        return readout(g, g.weighted_sum(xs, w), r_ws);
      });
  // Interior, edge-straddling and fully off-plane queries.
  const std::vector<std::array<double, 2>> coords{{1.3, 2.6}, {0.5, 0.5}, {3.9, 2.2}, {-0.4, 1.5}, {2.0, 3.7}, {-9.0, -9.0}};
  const auto r_bs = rng.normal({coords.size(), 2});
  add_case(
      "bilinear_sample", [&](auto& p) { p.add("plane", rng.normal({2, 4, 5})); },
      [coords, r_bs](Graph<double>& g, ParamStore<double>& p) {
        return readout(g, g.bilinear_sample(g.parameter(p.at("plane")), coords), r_bs);
      });
  const auto r_23 = rng.normal({2, 3});
  add_case(
      "add",
      [&](auto& p) {
        p.add("a", rng.normal({2, 3}));
        p.add("b", rng.normal({2, 3}));
      },
      [r_23](Graph<double>& g, ParamStore<double>& p) {
        return readout(g, g.add(g.parameter(p.at("a")), g.parameter(p.at("b"))), r_23);
      });
  add_case(
      "sub",
      [&](auto& p) {
        p.add("a", rng.normal({2, 3}));
        p.add("b", rng.normal({2, 3}));
      },
      [r_23](Graph<double>& g, ParamStore<double>& p) {
        return readout(g, g.sub(g.parameter(p.at("a")), g.parameter(p.at("b"))), r_23);
      });
  add_case(
      "mul",
      [&](auto& p) {
        p.add("a", rng.normal({2, 3}));
        p.add("b", rng.normal({2, 3}));
      },
      [r_23](Graph<double>& g, ParamStore<double>& p) {
        return readout(g, g.mul(g.parameter(p.at("a")), g.parameter(p.at("b"))), r_23);
      });
  add_case(
      "mul shared input", [&](auto& p) { p.add("a", rng.normal({2, 3})); },
      [r_23](Graph<double>& g, ParamStore<double>& p) {
        const Var a = g.parameter(p.at("a"));
        return readout(g, g.mul(a, a), r_23);
      });
  add_case(
      "square", [&](auto& p) { p.add("x", rng.normal({2, 3})); },
      [r_23](Graph<double>& g, ParamStore<double>& p) { return readout(g, g.square(g.parameter(p.at("x"))), r_23); });
  add_case(
      "reduce_mean", [&](auto& p) { p.add("x", rng.normal({3, 3})); },
      [](Graph<double>& g, ParamStore<double>& p) { return g.square(g.reduce_mean(g.parameter(p.at("x")))); });
  const auto c_add = rng.normal({2, 3});
  add_case(
      "constant operand", [&](auto& p) { p.add("x", rng.normal({2, 3})); },
      [c_add, r_23](Graph<double>& g, ParamStore<double>& p) {
        return readout(g, g.mul(g.parameter(p.at("x")), g.constant(c_add)), r_23);
      });
  add_case(
      "custom", [&](auto& p) { p.add("x", rng.normal({2, 3})); },
      [r_23](Graph<double>& g, ParamStore<double>& p) {
        const std::array<Var, 1> in{g.parameter(p.at("x"))};
        return readout(g, g.custom(cube_op(false), in), r_23);
      });
  return cases;
}

struct Micro {
  ModelConfig config;
  CaseInputs inputs;
  std::vector<Vec3> points;
  std::vector<std::array<float, kChannels>> labels;
};

Micro micro_setup(std::mt19937_64& gen) {
  Micro m;
  m.config.channels = 4;
  m.config.slabs = 2;
  m.config.hidden = {8};
  m.config.distill_layers = {2, 3};
  m.config.coord_channels = true;
  const ReconSpace space{};
  std::uniform_real_distribution<double> pix(0.0, 1.0);
  for (std::size_t v = 0; v < 2; ++v) {
    ConeBeamGeometry geom;
    geom.rows = 8;
    geom.cols = 8;
    geom.spacing_u = 16.0;
    geom.spacing_v = 16.0;
    geom.view_angle = v == 0 ? 0.0 : std::numbers::pi / 2;
    ViewInputs in;
    in.geometry = geom;
    in.slabs = divide_subspaces(space, geom, m.config.slabs, v);
    auto image = [&] {
      DRRImage img;
      img.view = v;
      img.rows = 8;
      img.cols = 8;
      img.normalized = true;
      for (std::size_t i = 0; i < 64; ++i) img.pixels.push_back(static_cast<float>(pix(gen)));
      return img;
    };
    in.original = image();
    for (std::size_t k = 0; k < m.config.slabs; ++k) in.augmented.push_back(image());
    m.inputs.push_back(std::move(in));
  }
  std::uniform_real_distribution<double> coord(-25.0, 25.0);
  std::bernoulli_distribution bit(0.5);
  for (int i = 0; i < 4; ++i) {
    m.points.push_back({coord(gen), coord(gen), coord(gen)});
    m.labels.push_back({bit(gen) ? 1.0f : 0.0f, bit(gen) ? 1.0f : 0.0f});
  }
  return m;
}

// Random distillation targets shaped like the teacher's stacks.
FeatureStacks<float> random_stacks(const Micro& m, std::mt19937_64& gen) {
  Model<float> teacher = init_model<float>(Role::teacher, m.config, 2, 7);
  const FeatureStacks<float> shapes = teacher_stacks(teacher, m.inputs);
  FeatureStacks<float> out = shapes;
  std::normal_distribution<float> d(0.0f, 0.5f);
  for (auto& view : out)
    for (auto& t : view)
      for (auto& x : t.data()) x = d(gen);
  return out;
}

FeatureStacks<double> widen(const FeatureStacks<float>& s) {
  FeatureStacks<double> out;
  for (const auto& view : s) {
    out.emplace_back();
    for (const auto& t : view) out.back().push_back(t.cast<double>());
  }
  return out;
}

template <typename T>
ad::LossBuilder<T> micro_loss(const Model<T>& model, const Micro& m, const FeatureStacks<T>* stacks, double alpha) {
  return [&model, &m, stacks, alpha](Graph<T>& g, ParamStore<T>& ps) {
    Binder<T> bind(g, ps, true);
    const auto fwd = model_forward(bind, model, m.inputs, m.points, stacks);
    const Var recon = recon_loss(g, fwd.predictions, m.labels);
    if (fwd.distill.empty()) return recon;
    return total_loss(g, recon, fwd.distill, alpha, model.views, model.config.distill_layers.size());
  };
}

GradCheckEntry entry(std::string name, std::string precision, const ad::GradCheckReport& r, double tol,
                     bool expect_failure = false) {
  GradCheckEntry e;
  e.name = std::move(name);
  e.precision = std::move(precision);
  e.max_rel_error = r.max_rel_error();
  for (const auto& pc : r.params) {
    if (pc.max_rel_error == e.max_rel_error) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s[%zu] %.6e vs %.6e", pc.name.c_str(), pc.worst_index, pc.analytic, pc.numeric);
      e.worst = buf;
      break;
    }
  }
  e.tolerance = tol;
  e.expect_failure = expect_failure;
  e.skipped = r.skipped();
  e.passed = expect_failure ? !r.passed : r.passed;
  return e;
}

}  // namespace

GradCheckSuiteReport run_gradcheck_suite(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckSuiteReport report;
  Rng rng{std::mt19937_64(seed)};

  ad::GradCheckOptions op_opt;
  op_opt.tolerance = kOpTolerance;
  op_opt.abs_floor = 1e-10;
  for (auto& c : op_cases(rng)) report.entries.push_back(entry(c.name, "f64", ad::gradient_check(c.build, c.params, op_opt), kOpTolerance));

  {
    ParamStore<double> p;
    p.add("x", rng.normal({2, 3}));
    const auto r = rng.normal({2, 3});
    const Build64 bad = [&r](Graph<double>& g, ParamStore<double>& ps) {
      const std::array<Var, 1> in{g.parameter(ps.at("x"))};
      return readout(g, g.custom(cube_op(true), in), r);
    };
    report.entries.push_back(entry("custom with wrong derivative", "f64", ad::gradient_check(bad, p, op_opt), kOpTolerance, true));
  }

  const Micro m = micro_setup(rng.gen);
  const FeatureStacks<float> stacks32 = random_stacks(m, rng.gen);
  const FeatureStacks<double> stacks64 = widen(stacks32);
  ad::GradCheckOptions e2e64 = op_opt;
  e2e64.tolerance = kEndToEndTolerance;
  e2e64.abs_floor = 1e-7;
  e2e64.skip_kinks = true;
  ad::GradCheckOptions mixed;
  mixed.tolerance = kEndToEndTolerance;
  // Float backward sums carry ~1e-8 absolute noise at these gradient scales,
  // which swamps components many orders below the largest ones.
  mixed.abs_floor = 1e-5;
  mixed.skip_kinks = true;
  for (Role role : {Role::teacher, Role::student, Role::baseline}) {
    const std::string name = std::string(role_name(role)) + " loss (micro config)";
    const Model<float> m32 = init_model<float>(role, m.config, 2, seed + 11);
    const Model<double> m64 = cast_model<double>(m32);
    const FeatureStacks<float>* s32 = role == Role::student ? &stacks32 : nullptr;
    const FeatureStacks<double>* s64 = role == Role::student ? &stacks64 : nullptr;
    {
      ParamStore<double> p = m64.params.cast<double>();
      report.entries.push_back(
          entry(name, "f64", ad::gradient_check(micro_loss(m64, m, s64, 0.2), p, e2e64), kEndToEndTolerance));
    }
    {
      ParamStore<float> p = m32.params.cast<float>();
      report.entries.push_back(entry(name, "f32 vs f64",
                                     ad::gradient_check_mixed(micro_loss(m32, m, s32, 0.2), micro_loss(m64, m, s64, 0.2), p, mixed),
                                     kEndToEndTolerance));
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace xrecon
