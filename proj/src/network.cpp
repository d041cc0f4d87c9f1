#include "xrecon/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "xrecon/drr.hpp"
#include "xrecon/errors.hpp"

namespace xrecon {

using ad::Graph;
using ad::ParamStore;
using ad::Shape;
using ad::Tensor;
using ad::Var;

std::string_view role_name(Role role) {
  switch (role) {
    case Role::teacher:
      return "teacher";
    case Role::student:
      return "student";
    case Role::baseline:
      return "baseline";
  }
  return "?";
}

Role parse_role(std::string_view name) {
  if (name == "teacher") return Role::teacher;
  if (name == "student") return Role::student;
  if (name == "baseline") return Role::baseline;
  throw ConfigError("unknown role '" + std::string(name) + "' (expected teacher, student or baseline)");
}

CaseInputs prepare_inputs(const Volume3D& volume, const std::vector<ConeBeamGeometry>& views, const ReconSpace& space,
                          std::size_t slabs, bool with_augmented) {
  CaseInputs out;
  for (std::size_t v = 0; v < views.size(); ++v) {
    ViewInputs in;
    in.geometry = views[v];
    in.slabs = divide_subspaces(space, views[v], slabs, v);
    in.original = normalize_image(render_drr(volume, views[v], v));
    if (with_augmented) {
      for (const DRRImage& img : render_augmented_set(volume, views[v], in.slabs)) in.augmented.push_back(normalize_image(img));
    }
    out.push_back(std::move(in));
  }
  return out;
}

std::size_t stage_channels(std::size_t stage, const ModelConfig& config) {
  switch (stage) {
    case 1:
      return 8;
    case 2:
      return 16;
    case 3:
      return config.channels;
    default:
      throw InvalidArgument("stage_channels: stage must be 1..3");
  }
}

namespace {

std::size_t input_channels(const ModelConfig& c) { return c.coord_channels ? 3 : 1; }

std::vector<std::size_t> expansion_layers(const ModelConfig& c) {
  std::vector<std::size_t> layers = c.distill_layers;
  if (std::find(layers.begin(), layers.end(), kEncoderStages) == layers.end()) layers.push_back(kEncoderStages);
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  return layers;
}

struct Init {
  std::mt19937_64 rng;
  ParamStore<double> store;

  void add(const std::string& name, Shape shape, double stddev) {
    Tensor<double> t(shape);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : t.data()) x = stddev > 0 ? dist(rng) : 0.0;
    store.add(name, std::move(t));
  }
  void conv(const std::string& name, std::size_t out, std::size_t in, std::size_t k, double gain) {
    add(name + ".w", {out, in, k, k}, std::sqrt(gain / static_cast<double>(in * k * k)));
    add(name + ".b", {out}, 0.0);
  }
  void linear(const std::string& name, std::size_t out, std::size_t in, double gain) {
    add(name + ".w", {out, in}, std::sqrt(gain / static_cast<double>(in)));
    add(name + ".b", {out}, 0.0);
  }
  void encoder(const std::string& prefix, const ModelConfig& c) {
    conv(prefix + "conv1", stage_channels(1, c), input_channels(c), 3, 2.0);
    conv(prefix + "conv2", stage_channels(2, c), stage_channels(1, c), 3, 2.0);
    conv(prefix + "conv3", stage_channels(3, c), stage_channels(2, c), 3, 2.0);
  }
};

}  // namespace

template <typename T>
std::size_t Model<T>::mlp_input() const {
  const std::size_t c = config.channels;
  return views * (role == Role::student ? 2 * c : c);
}

template <typename T>
Model<T> init_model(Role role, const ModelConfig& config, std::size_t views, std::uint64_t seed) {
  if (config.slabs == 0) throw InvalidArgument("init_model: K must be >= 1");
  Model<T> model;
  model.role = role;
  model.config = config;
  model.views = views;
  Init init{std::mt19937_64(seed), {}};
  if (role == Role::teacher) {
    init.encoder("enc.", config);
  } else {
    init.encoder("enc_add.", config);
    if (role == Role::student) {
      init.encoder("enc_s.", config);
      for (std::size_t l : expansion_layers(config)) {
        const std::size_t cl = stage_channels(l, config);
        init.conv("expand." + std::to_string(l), config.slabs * cl, cl, 1, 1.0);
      }
    }
  }
  std::size_t in = model.mlp_input();
  for (std::size_t i = 0; i < config.hidden.size(); ++i) {
    init.linear("mlp." + std::to_string(i), config.hidden[i], in, 2.0);
    in = config.hidden[i];
  }
  init.linear("mlp." + std::to_string(config.hidden.size()), kChannels, in, 1.0);
  model.params = init.store.template cast<T>();
  return model;
}

template <typename T>
Model<T> cast_model(const Model<float>& model) {
  Model<T> out;
  out.role = model.role;
  out.config = model.config;
  out.views = model.views;
  out.params = model.params.template cast<T>();
  return out;
}

template <typename T>
Var Binder<T>::operator()(const std::string& name) {
  Tensor<T>& p = params_.at(name);
  return trainable_ ? graph_.parameter(p) : graph_.constant(p);
}

template <typename T>
Tensor<T> image_tensor(const DRRImage& img, bool coord_channels) {
  const std::size_t h = img.rows, w = img.cols;
  if (img.pixels.size() != h * w) throw InvalidArgument("image_tensor: pixel count does not match rows x cols");
  const std::size_t cin = coord_channels ? 3 : 1;
  Tensor<T> t({cin, h, w});
  auto d = t.data();
  for (std::size_t i = 0; i < h * w; ++i) d[i] = static_cast<T>(img.pixels[i]);
  if (coord_channels) {
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        d[h * w + r * w + c] = static_cast<T>(2.0 * static_cast<double>(c) / static_cast<double>(w - 1) - 1.0);
        d[2 * h * w + r * w + c] = static_cast<T>(2.0 * static_cast<double>(r) / static_cast<double>(h - 1) - 1.0);
      }
  }
  return t;
}

template <typename T>
std::array<Var, kEncoderStages> encode_features(Binder<T>& bind, const std::string& prefix, Var image) {
  Graph<T>& g = bind.graph();
  std::array<Var, kEncoderStages> out;
  Var x = image;
  for (std::size_t s = 0; s < kEncoderStages; ++s) {
    const std::string name = prefix + "conv" + std::to_string(s + 1);
    x = g.relu(g.conv2d(x, bind(name + ".w"), bind(name + ".b"), s == 0 ? 1 : 2, 1));
    out[s] = x;
  }
  return out;
}

template <typename T>
std::vector<std::array<T, 2>> plane_coords(const ConeBeamGeometry& geom, std::size_t plane_rows, std::size_t plane_cols,
                                           std::span<const Vec3> points) {
  const double sx = static_cast<double>(plane_cols) / static_cast<double>(geom.cols);
  const double sy = static_cast<double>(plane_rows) / static_cast<double>(geom.rows);
  const double umax = static_cast<double>(geom.cols) - 0.5, vmax = static_cast<double>(geom.rows) - 0.5;
  std::vector<std::array<T, 2>> coords;
  coords.reserve(points.size());
  for (const Vec3& p : points) {
    const Projection pr = project_point(geom, p);
    if (pr.u < -0.5 || pr.u > umax || pr.v < -0.5 || pr.v > vmax) {
      coords.push_back({T(-1e4), T(-1e4)});
    } else {
      coords.push_back({static_cast<T>(pr.u * sx), static_cast<T>(pr.v * sy)});
    }
  }
  return coords;
}

template <typename T>
Var query_pixel_aligned(Graph<T>& g, Var plane, const ConeBeamGeometry& geom, std::span<const Vec3> points) {
  const auto& shape = g.value(plane).shape();
  if (shape.size() != 3) throw InvalidArgument("query_pixel_aligned: plane must be (C, h, w)");
  const auto coords = plane_coords<T>(geom, shape[1], shape[2], points);
  return g.bilinear_sample(plane, coords);
}

template <typename T>
Var fuse_depth_weighted(Graph<T>& g, std::span<const Var> features, std::span<const double> depths,
                        const ViewSlabs& slabs) {
  const std::size_t k = slabs.count();
  if (features.size() != k) {
    throw InvalidArgument("fuse_depth_weighted: got " + std::to_string(features.size()) + " feature sets for " +
                          std::to_string(k) + " slabs");
  }
  const std::size_t n = depths.size();
  std::vector<T> weights(k * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = depth_weights(depths[i], slabs);
    for (std::size_t s = 0; s < k; ++s) weights[s * n + i] = static_cast<T>(w[s]);
  }
  return g.weighted_sum(features, weights);
}

template <typename T>
Var predict_occupancy(Binder<T>& bind, std::span<const Var> view_features, std::size_t layers) {
  Graph<T>& g = bind.graph();
  Var x = view_features.size() == 1 ? view_features[0] : g.concat(view_features, 1);
  const std::size_t width = g.value(x).dim(1);
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string name = "mlp." + std::to_string(i);
    Var w = bind(name + ".w");
    if (i == 0 && g.value(w).dim(1) != width) {
      throw InvalidArgument("predict_occupancy: feature width " + std::to_string(width) +
                            " does not match MLP input " + std::to_string(g.value(w).dim(1)));
    }
    x = g.linear(x, w, bind(name + ".b"));
    x = i + 1 == layers ? g.sigmoid(x) : g.relu(x);
  }
  return x;
}

template <typename T>
Var recon_loss(Graph<T>& g, Var predictions, const std::vector<std::array<float, kChannels>>& labels) {
  const auto& shape = g.value(predictions).shape();
  if (shape.size() != 2 || shape[0] != labels.size() || shape[1] != kChannels)
    throw InvalidArgument("recon_loss: predictions " + ad::shape_string(shape) + " do not match " +
                          std::to_string(labels.size()) + " labels");
  Tensor<T> target({labels.size(), kChannels});
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t c = 0; c < kChannels; ++c) target[i * kChannels + c] = static_cast<T>(labels[i][c]);
  return g.reduce_mean(g.square(g.sub(predictions, g.constant(std::move(target)))));
}

double recon_loss(const OccupancyBatch& batch) {
  if (batch.predictions.size() != batch.labels.size() || batch.labels.empty())
    throw UsageError("recon_loss: batch predictions are missing");
  double sum = 0;
  for (std::size_t i = 0; i < batch.labels.size(); ++i)
    for (std::size_t c = 0; c < kChannels; ++c) {
      const double d = static_cast<double>(batch.predictions[i][c]) - static_cast<double>(batch.labels[i][c]);
      sum += d * d;
    }
  return sum / static_cast<double>(batch.labels.size() * kChannels);
}

template <typename T>
Var distill_loss(Graph<T>& g, Var teacher, Var student) {
  const auto& ts = g.value(teacher).shape();
  const auto& ss = g.value(student).shape();
  if (ts != ss)
    throw InvalidArgument("distill_loss: teacher " + ad::shape_string(ts) + " vs student " + ad::shape_string(ss));
  // Every slab has the same size, so the overall mean is the slab average.
  return g.reduce_mean(g.square(g.sub(student, teacher)));
}

double distill_loss(const Tensor<double>& teacher, const Tensor<double>& student) {
  if (teacher.shape() != student.shape())
    throw InvalidArgument("distill_loss: teacher " + ad::shape_string(teacher.shape()) + " vs student " +
                          ad::shape_string(student.shape()));
  const std::size_t k = teacher.rank() > 0 ? teacher.dim(0) : 1;
  const std::size_t per = teacher.size() / k;
  double total = 0;
  for (std::size_t s = 0; s < k; ++s) {
    double sum = 0;
    for (std::size_t i = 0; i < per; ++i) {
      const double d = teacher[s * per + i] - student[s * per + i];
      sum += d * d;
    }
    total += sum / static_cast<double>(per);
  }
  return total / static_cast<double>(k);
}

template <typename T>
Var total_loss(Graph<T>& g, Var recon, std::span<const Var> distill, double alpha, std::size_t views,
               std::size_t layers) {
  if (!(alpha >= 0)) throw InvalidArgument("total_loss: alpha must be >= 0");
  if (distill.empty()) return recon;
  std::vector<Var> terms{recon};
  terms.insert(terms.end(), distill.begin(), distill.end());
  std::vector<T> w(terms.size(), static_cast<T>(alpha / static_cast<double>(views * layers)));
  w[0] = T(1);
  return g.weighted_sum(terms, w);
}

double total_loss(double recon, std::span<const double> distill, double alpha, std::size_t views, std::size_t layers) {
  if (!(alpha >= 0)) throw InvalidArgument("total_loss: alpha must be >= 0");
  double sum = 0;
  for (double d : distill) sum += d;
  return recon + (distill.empty() ? 0.0 : alpha / static_cast<double>(views * layers) * sum);
}

namespace {

void check_inputs(const CaseInputs& inputs, std::size_t views, bool need_augmented, std::size_t k) {
  if (inputs.size() != views)
    throw InvalidArgument("model: expected " + std::to_string(views) + " views, got " + std::to_string(inputs.size()));
  for (const auto& in : inputs) {
    if (in.slabs.count() != k)
      throw InvalidArgument("model: view slabs hold " + std::to_string(in.slabs.count()) + " slabs, model K is " +
                            std::to_string(k));
    if (need_augmented && in.augmented.size() != k)
      throw InvalidArgument("model: teacher needs " + std::to_string(k) + " augmented images per view, got " +
                            std::to_string(in.augmented.size()));
  }
}

std::vector<double> depths_of(const ConeBeamGeometry& geom, std::span<const Vec3> points) {
  std::vector<double> d;
  d.reserve(points.size());
  for (const Vec3& p : points) d.push_back(view_depth(geom, p));
  return d;
}

template <typename T>
Var slab_plane(Graph<T>& g, Var stack, std::size_t k) {
  const auto s = g.value(stack).shape();
  return g.reshape(g.slice(stack, 0, k, k + 1), {s[1], s[2], s[3]});
}

}  // namespace

template <typename T>
ForwardResult<T> teacher_forward(Binder<T>& bind, const Model<T>& model, const CaseInputs& inputs,
                                 std::span<const Vec3> points) {
  if (model.role != Role::teacher) throw UsageError("teacher_forward: model is a " + std::string(role_name(model.role)));
  const std::size_t k = model.config.slabs;
  check_inputs(inputs, model.views, true, k);
  Graph<T>& g = bind.graph();
  ForwardResult<T> out;
  std::vector<Var> view_features;
  for (const auto& in : inputs) {
    std::vector<std::array<Var, kEncoderStages>> stages;
    std::vector<Var> queried;
    for (std::size_t s = 0; s < k; ++s) {
      stages.push_back(
          encode_features(bind, "enc.", g.constant(image_tensor<T>(in.augmented[s], model.config.coord_channels))));
      if (!points.empty()) queried.push_back(query_pixel_aligned(g, stages.back()[kEncoderStages - 1], in.geometry, points));
    }
    std::vector<Var> layer_stacks;
    for (std::size_t l : model.config.distill_layers) {
      std::vector<Var> planes;
      for (std::size_t s = 0; s < k; ++s) {
        Var plane = stages[s][l - 1];
        Shape shape = g.value(plane).shape();
        shape.insert(shape.begin(), 1);
        planes.push_back(g.reshape(plane, shape));
      }
      layer_stacks.push_back(planes.size() == 1 ? planes[0] : g.concat(planes, 0));
    }
    out.stacks.push_back(std::move(layer_stacks));
    if (points.empty()) continue;
    const auto depths = depths_of(in.geometry, points);
    view_features.push_back(fuse_depth_weighted(g, queried, depths, in.slabs));
  }
  // With no points only the feature stacks are produced.
  if (!points.empty()) out.predictions = predict_occupancy(bind, view_features, model.config.hidden.size() + 1);
  return out;
}

template <typename T>
ForwardResult<T> student_forward(Binder<T>& bind, const Model<T>& model, const CaseInputs& inputs,
                                 std::span<const Vec3> points, const FeatureStacks<T>* teacher) {
  if (model.role == Role::teacher) throw UsageError("student_forward: model is a teacher");
  const bool baseline = model.role == Role::baseline;
  const std::size_t k = model.config.slabs;
  check_inputs(inputs, model.views, false, k);
  if (teacher && (baseline || teacher->size() != model.views))
    throw InvalidArgument("student_forward: teacher stacks do not match the model");
  Graph<T>& g = bind.graph();
  ForwardResult<T> out;
  std::vector<Var> view_features;
  for (std::size_t v = 0; v < inputs.size(); ++v) {
    const auto& in = inputs[v];
    const Var image = g.constant(image_tensor<T>(in.original, model.config.coord_channels));
    const auto add_stages = encode_features(bind, "enc_add.", image);
    const Var f_add = query_pixel_aligned(g, add_stages[kEncoderStages - 1], in.geometry, points);
    if (baseline) {
      view_features.push_back(f_add);
      continue;
    }
    const auto s_stages = encode_features(bind, "enc_s.", image);
    std::vector<Var> layer_stacks;
    Var final_stack;
    for (std::size_t l : expansion_layers(model.config)) {
      const std::string name = "expand." + std::to_string(l);
      const Var expanded = g.conv2d(s_stages[l - 1], bind(name + ".w"), bind(name + ".b"), 1, 0);
      const auto& es = g.value(expanded).shape();
      const Var stack = g.reshape(expanded, {k, es[0] / k, es[1], es[2]});
      if (l == kEncoderStages) final_stack = stack;
      if (std::find(model.config.distill_layers.begin(), model.config.distill_layers.end(), l) !=
          model.config.distill_layers.end())
        layer_stacks.push_back(stack);
    }
    if (teacher) {
      const auto& tv = (*teacher)[v];
      if (tv.size() != layer_stacks.size())
        throw InvalidArgument("student_forward: teacher provides " + std::to_string(tv.size()) + " layers, expected " +
                              std::to_string(layer_stacks.size()));
      for (std::size_t l = 0; l < layer_stacks.size(); ++l)
        out.distill.push_back(distill_loss(g, g.constant(tv[l]), layer_stacks[l]));
    }
    out.stacks.push_back(std::move(layer_stacks));
    std::vector<Var> queried;
    for (std::size_t s = 0; s < k; ++s) queried.push_back(query_pixel_aligned(g, slab_plane(g, final_stack, s), in.geometry, points));
    const auto depths = depths_of(in.geometry, points);
    view_features.push_back(fuse_depth_weighted(g, queried, depths, in.slabs));
    view_features.push_back(f_add);
  }
  out.predictions = predict_occupancy(bind, view_features, model.config.hidden.size() + 1);
  return out;
}

template <typename T>
ForwardResult<T> model_forward(Binder<T>& bind, const Model<T>& model, const CaseInputs& inputs,
                               std::span<const Vec3> points, const FeatureStacks<T>* teacher) {
  if (model.role == Role::teacher) return teacher_forward(bind, model, inputs, points);
  return student_forward(bind, model, inputs, points, teacher);
}

FeatureStacks<float> teacher_stacks(Model<float>& teacher, const CaseInputs& inputs) {
  Graph<float> g;
  Binder<float> bind(g, teacher.params, false);
  const std::vector<Vec3> none;
  const auto result = teacher_forward(bind, teacher, inputs, none);
  FeatureStacks<float> out;
  for (const auto& view : result.stacks) {
    std::vector<Tensor<float>> layers;
    for (Var v : view) layers.push_back(g.value(v));
    out.push_back(std::move(layers));
  }
  return out;
}

namespace {

// Encoder outputs needed for querying, computed once per phantom.
struct PlaneCache {
  std::vector<std::vector<Tensor<float>>> planes;  // [view][plane]; student: K fused-branch planes then the add plane
};

PlaneCache cache_planes(Model<float>& model, const CaseInputs& inputs) {
  Graph<float> g;
  Binder<float> bind(g, model.params, false);
  PlaneCache cache;
  const std::size_t k = model.config.slabs;
  check_inputs(inputs, model.views, model.role == Role::teacher, k);
  for (const auto& in : inputs) {
    std::vector<Tensor<float>> planes;
    if (model.role == Role::teacher) {
      for (std::size_t s = 0; s < k; ++s) {
        const auto st = encode_features(bind, "enc.", g.constant(image_tensor<float>(in.augmented[s], model.config.coord_channels)));
        planes.push_back(g.value(st[kEncoderStages - 1]));
      }
    } else {
      const Var image = g.constant(image_tensor<float>(in.original, model.config.coord_channels));
      if (model.role == Role::student) {
        const auto st = encode_features(bind, "enc_s.", image);
        const std::string name = "expand." + std::to_string(kEncoderStages);
        const Var expanded = g.conv2d(st[kEncoderStages - 1], bind(name + ".w"), bind(name + ".b"), 1, 0);
        const auto& es = g.value(expanded).shape();
        const Var stack = g.reshape(expanded, {k, es[0] / k, es[1], es[2]});
        for (std::size_t s = 0; s < k; ++s) planes.push_back(g.value(slab_plane(g, stack, s)));
      }
      const auto add = encode_features(bind, "enc_add.", image);
      planes.push_back(g.value(add[kEncoderStages - 1]));
    }
    cache.planes.push_back(std::move(planes));
  }
  return cache;
}

void predict_chunk(Model<float>& model, const CaseInputs& inputs, const PlaneCache& cache, std::span<const Vec3> points,
                   std::array<float, kChannels>* out) {
  Graph<float> g;
  Binder<float> bind(g, model.params, false);
  std::vector<Var> view_features;
  for (std::size_t v = 0; v < inputs.size(); ++v) {
    const auto& in = inputs[v];
    const auto& planes = cache.planes[v];
    if (model.role == Role::baseline) {
      view_features.push_back(query_pixel_aligned(g, g.constant(planes[0]), in.geometry, points));
      continue;
    }
    const std::size_t k = model.config.slabs;
    std::vector<Var> queried;
    for (std::size_t s = 0; s < k; ++s) queried.push_back(query_pixel_aligned(g, g.constant(planes[s]), in.geometry, points));
    const auto depths = depths_of(in.geometry, points);
    view_features.push_back(fuse_depth_weighted(g, queried, depths, in.slabs));
    if (model.role == Role::student)
      view_features.push_back(query_pixel_aligned(g, g.constant(planes[k]), in.geometry, points));
  }
  const Var pred = predict_occupancy(bind, view_features, model.config.hidden.size() + 1);
  const auto values = g.value(pred).data();
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t c = 0; c < kChannels; ++c) out[i][c] = values[i * kChannels + c];
}

}  // namespace

std::vector<std::array<float, kChannels>> predict_points(Model<float>& model, const CaseInputs& inputs,
                                                         std::span<const Vec3> points, std::size_t chunk) {
  if (chunk == 0) throw InvalidArgument("predict_points: chunk must be >= 1");
  const PlaneCache cache = cache_planes(model, inputs);
  std::vector<std::array<float, kChannels>> out(points.size());
  for (std::size_t start = 0; start < points.size(); start += chunk) {
    const std::size_t n = std::min(chunk, points.size() - start);
    predict_chunk(model, inputs, cache, points.subspan(start, n), out.data() + start);
  }
  return out;
}

double grid_coordinate(double lo, double extent, std::size_t i, std::size_t r) {
  return lo + extent * static_cast<double>(2 * i + 1) / static_cast<double>(2 * r);
}

std::array<OccupancyGrid, kChannels> infer_occupancy_grid(Model<float>& model, const CaseInputs& inputs,
                                                          const ReconSpace& space, std::size_t r, std::size_t chunk) {
  if (r < 8) throw InvalidArgument("infer_occupancy_grid: resolution must be >= 8");
  if (chunk == 0) throw InvalidArgument("infer_occupancy_grid: chunk must be >= 1");
  space.validate();
  const PlaneCache cache = cache_planes(model, inputs);
  std::array<OccupancyGrid, kChannels> grids{OccupancyGrid::covering(space, r), OccupancyGrid::covering(space, r)};
  const Vec3 e = space.extent();
  const std::size_t total = r * r * r;
  std::vector<Vec3> points;
  std::vector<std::array<float, kChannels>> values;
  for (std::size_t start = 0; start < total; start += chunk) {
    const std::size_t n = std::min(chunk, total - start);
    points.clear();
    for (std::size_t idx = start; idx < start + n; ++idx) {
      const std::size_t i = idx % r, j = (idx / r) % r, k = idx / (r * r);
      points.push_back({grid_coordinate(space.min.x, e.x, i, r), grid_coordinate(space.min.y, e.y, j, r),
                        grid_coordinate(space.min.z, e.z, k, r)});
    }
    values.resize(n);
    predict_chunk(model, inputs, cache, points, values.data());
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t c = 0; c < kChannels; ++c) grids[c].values[start + q] = values[q][c];
  }
  return grids;
}

#define XRECON_INSTANTIATE(T)                                                                                         \
  template struct Model<T>;                                                                                           \
  template Model<T> init_model<T>(Role, const ModelConfig&, std::size_t, std::uint64_t);                              \
  template Model<T> cast_model<T>(const Model<float>&);                                                               \
  template class Binder<T>;                                                                                           \
  template Tensor<T> image_tensor<T>(const DRRImage&, bool);                                                          \
  template std::array<Var, kEncoderStages> encode_features<T>(Binder<T>&, const std::string&, Var);                   \
  template std::vector<std::array<T, 2>> plane_coords<T>(const ConeBeamGeometry&, std::size_t, std::size_t,          \
                                                         std::span<const Vec3>);                                      \
  template Var query_pixel_aligned<T>(Graph<T>&, Var, const ConeBeamGeometry&, std::span<const Vec3>);                \
  template Var fuse_depth_weighted<T>(Graph<T>&, std::span<const Var>, std::span<const double>, const ViewSlabs&);    \
  template Var predict_occupancy<T>(Binder<T>&, std::span<const Var>, std::size_t);                                   \
  template Var recon_loss<T>(Graph<T>&, Var, const std::vector<std::array<float, kChannels>>&);                       \
  template Var distill_loss<T>(Graph<T>&, Var, Var);                                                                  \
  template Var total_loss<T>(Graph<T>&, Var, std::span<const Var>, double, std::size_t, std::size_t);                 \
  template ForwardResult<T> teacher_forward<T>(Binder<T>&, const Model<T>&, const CaseInputs&, std::span<const Vec3>); \
  template ForwardResult<T> student_forward<T>(Binder<T>&, const Model<T>&, const CaseInputs&, std::span<const Vec3>, \
                                               const FeatureStacks<T>*);                                              \
  template ForwardResult<T> model_forward<T>(Binder<T>&, const Model<T>&, const CaseInputs&, std::span<const Vec3>,   \
                                             const FeatureStacks<T>*);

XRECON_INSTANTIATE(float)
XRECON_INSTANTIATE(double)

#undef XRECON_INSTANTIATE

}  // namespace xrecon
