#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xrecon/autodiff/graph.hpp"
#include "xrecon/autodiff/param_store.hpp"
#include "xrecon/config.hpp"
#include "xrecon/geometry.hpp"
#include "xrecon/mesh.hpp"
#include "xrecon/phantom.hpp"
#include "xrecon/volume.hpp"

namespace xrecon {

/// teacher: slab renders + depth-weighted fusion.
/// student: expanded student features fused by depth, plus an additional extractor.
/// baseline: the additional extractor alone (plain pixel-aligned network).
enum class Role { teacher, student, baseline };

std::string_view role_name(Role role);
/// Throws ConfigError for anything but teacher|student|baseline.
Role parse_role(std::string_view name);

inline constexpr std::size_t kEncoderStages = 3;
inline constexpr std::size_t kFeatureStride = 4;

/// Per-view network inputs for one phantom. Images are min-max normalized.
struct ViewInputs {
  ConeBeamGeometry geometry;
  ViewSlabs slabs;
  DRRImage original;
  std::vector<DRRImage> augmented;  // K slab renders, near to far; may be empty
};
using CaseInputs = std::vector<ViewInputs>;

/// Renders (and normalizes) the original DRR of every view and, when
/// `with_augmented`, the K slab renders.
CaseInputs prepare_inputs(const Volume3D& volume, const std::vector<ConeBeamGeometry>& views, const ReconSpace& space,
                          std::size_t slabs, bool with_augmented);

/// Channel count of encoder stage 1..3.
std::size_t stage_channels(std::size_t stage, const ModelConfig& config);

template <typename T>
struct Model {
  Role role = Role::baseline;
  ModelConfig config;
  std::size_t views = 2;
  ad::ParamStore<T> params;

  std::size_t mlp_input() const;
};

/// Deterministic He-normal initialization; identical values for float and double.
template <typename T>
Model<T> init_model(Role role, const ModelConfig& config, std::size_t views, std::uint64_t seed);

template <typename T>
Model<T> cast_model(const Model<float>& model);

/// Binds parameters either as trainable leaves or as frozen constants.
template <typename T>
class Binder {
 public:
  Binder(ad::Graph<T>& graph, ad::ParamStore<T>& params, bool trainable)
      : graph_(graph), params_(params), trainable_(trainable) {}
  ad::Var operator()(const std::string& name);
  ad::Graph<T>& graph() { return graph_; }

 private:
  ad::Graph<T>& graph_;
  ad::ParamStore<T>& params_;
  bool trainable_;
};

/// (Cin, H, W) image tensor: pixels, then optional u and v coordinate ramps in [-1, 1].
template <typename T>
ad::Tensor<T> image_tensor(const DRRImage& img, bool coord_channels);

/// Three conv3x3 + relu stages (strides 1, 2, 2). Returns every stage output.
template <typename T>
std::array<ad::Var, kEncoderStages> encode_features(Binder<T>& bind, const std::string& prefix, ad::Var image);

/// Feature-plane coordinates (x = column, y = row) of each point. Points
/// projecting off the detector map far outside the plane so they read zeros.
template <typename T>
std::vector<std::array<T, 2>> plane_coords(const ConeBeamGeometry& geom, std::size_t plane_rows, std::size_t plane_cols,
                                           std::span<const Vec3> points);

/// Pixel-aligned query: (N, C) features of `plane` (C, h, w) at the points' projections.
template <typename T>
ad::Var query_pixel_aligned(ad::Graph<T>& g, ad::Var plane, const ConeBeamGeometry& geom, std::span<const Vec3> points);

/// Sum over slabs of w_k(d) * f_k for each point. features: K vars of (N, C).
template <typename T>
ad::Var fuse_depth_weighted(ad::Graph<T>& g, std::span<const ad::Var> features, std::span<const double> depths,
                            const ViewSlabs& slabs);

/// Concatenates per-view features along the feature axis and runs the MLP.
template <typename T>
ad::Var predict_occupancy(Binder<T>& bind, std::span<const ad::Var> view_features, std::size_t layers);

/// Mean over points and channels of (prediction - label)^2.
template <typename T>
ad::Var recon_loss(ad::Graph<T>& g, ad::Var predictions, const std::vector<std::array<float, kChannels>>& labels);
/// Same quantity on a batch with populated predictions; UsageError otherwise.
double recon_loss(const OccupancyBatch& batch);

/// Mean squared elementwise difference of two (K, C, h, w) stacks, i.e. the
/// average over slabs of the per-slab mean. Only `student` receives gradient.
template <typename T>
ad::Var distill_loss(ad::Graph<T>& g, ad::Var teacher, ad::Var student);
double distill_loss(const ad::Tensor<double>& teacher, const ad::Tensor<double>& student);

/// recon + alpha / (views * layers) * sum(distill).
template <typename T>
ad::Var total_loss(ad::Graph<T>& g, ad::Var recon, std::span<const ad::Var> distill, double alpha, std::size_t views,
                   std::size_t layers);
double total_loss(double recon, std::span<const double> distill, double alpha, std::size_t views, std::size_t layers);

/// Frozen teacher features, [view][distill layer] -> (K, C_l, h_l, w_l).
template <typename T>
using FeatureStacks = std::vector<std::vector<ad::Tensor<T>>>;

template <typename T>
struct ForwardResult {
  ad::Var predictions;                     // (N, 2)
  std::vector<std::vector<ad::Var>> stacks;  // [view][distill layer]
  std::vector<ad::Var> distill;            // one scalar per (view, layer) when teacher stacks were given
};

template <typename T>
ForwardResult<T> teacher_forward(Binder<T>& bind, const Model<T>& model, const CaseInputs& inputs,
                                 std::span<const Vec3> points);

template <typename T>
ForwardResult<T> student_forward(Binder<T>& bind, const Model<T>& model, const CaseInputs& inputs,
                                 std::span<const Vec3> points, const FeatureStacks<T>* teacher = nullptr);

/// Dispatches on model.role (baseline runs student_forward's additional branch only).
template <typename T>
ForwardResult<T> model_forward(Binder<T>& bind, const Model<T>& model, const CaseInputs& inputs,
                               std::span<const Vec3> points, const FeatureStacks<T>* teacher = nullptr);

/// Teacher distillation targets for one phantom, computed without gradients.
FeatureStacks<float> teacher_stacks(Model<float>& teacher, const CaseInputs& inputs);

/// Occupancy predictions for arbitrary points, evaluated in chunks.
std::vector<std::array<float, kChannels>> predict_points(Model<float>& model, const CaseInputs& inputs,
                                                         std::span<const Vec3> points, std::size_t chunk = 4096);

/// Coordinate of cell center i of an R-cell axis over [lo, lo + extent].
/// Exact rational form so coarse and fine grids share bit-identical centers.
double grid_coordinate(double lo, double extent, std::size_t i, std::size_t r);

/// Per-channel R^3 occupancy over `space`. Encoder planes are computed once;
/// points are evaluated `chunk` at a time so memory does not grow with R^3.
std::array<OccupancyGrid, kChannels> infer_occupancy_grid(Model<float>& model, const CaseInputs& inputs,
                                                          const ReconSpace& space, std::size_t r,
                                                          std::size_t chunk = 4096);

}  // namespace xrecon
