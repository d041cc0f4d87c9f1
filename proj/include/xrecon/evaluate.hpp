#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "xrecon/config.hpp"
#include "xrecon/mesh.hpp"
#include "xrecon/metrics.hpp"
#include "xrecon/network.hpp"
#include "xrecon/train.hpp"

namespace xrecon {

using ChannelMeshes = std::array<TriangleMesh, kChannels>;
using ChannelGrids = std::array<OccupancyGrid, kChannels>;

/// Per-channel occupancy ramp 0.5 - sdf / (2 h), clamped to [0, 1], with h the
/// cell spacing. Its 0.5 iso-surface is the analytic lobe surface.
ChannelGrids ground_truth_grids(const PhantomSpec& spec, std::size_t resolution);
ChannelMeshes ground_truth_meshes(const PhantomSpec& spec, std::size_t resolution);

/// Average of the training phantoms' ground-truth grids: the trivial
/// predictor that ignores the images.
ChannelGrids mean_shape_grids(const std::vector<PhantomSpec>& train, std::size_t resolution);

struct CaseMetrics {
  std::uint64_t seed = 0;
  std::size_t channel = 0;
  std::size_t run = 0;
  std::optional<double> cd;  // empty: the predicted mesh was empty
  std::optional<double> emd;
};

struct ChannelSummary {
  double cd_mean = 0, cd_std = 0;
  double emd_mean = 0, emd_std = 0;
  std::size_t count = 0;
  std::size_t failures = 0;
};

struct EvalReport {
  std::size_t resolution = 0;
  std::size_t n_points = 0;
  std::size_t runs = 0;
  std::vector<CaseMetrics> per_case;
  std::array<ChannelSummary, kChannels> summary;
  double infer_seconds = 0;  // mean per phantom, field evaluation only
  double mc_seconds = 0;     // mean per phantom, both channels

  /// Mean CD over both channels and all successful cases.
  double mean_cd() const;
  std::size_t failures() const;
  /// Deterministic JSON of the metrics (no wall-clock fields).
  std::string to_json() const;
  std::string timing_json() const;
};

using GridPredictor = std::function<ChannelGrids(const PreparedCase&)>;

/// Runs `predict` on every case, extracts per-channel meshes at iso 0.5 and
/// scores them against `ground_truth` (one entry per case).
EvalReport evaluate_predictor(const std::vector<PreparedCase>& cases, const std::vector<ChannelMeshes>& ground_truth,
                              const GridPredictor& predict, const EvalConfig& config, std::size_t resolution);

/// Full protocol for a trained model: ground truth at config.eval.gt_resolution,
/// field inferred at `resolution`.
EvalReport evaluate_reconstruction(Model<float>& model, const std::vector<PreparedCase>& cases,
                                   const RunConfig& config, std::size_t resolution);

}  // namespace xrecon
