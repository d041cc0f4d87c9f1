#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "xrecon/geometry.hpp"

namespace xrecon {

struct GeometryConfig {
  double sid = 1000.0;
  double sdd = 1500.0;
  std::size_t rows = 64;
  std::size_t cols = 64;
  double spacing = 2.0;  // mm per detector pixel, both axes
  std::vector<double> views{0.0, 1.5707963267948966};

  /// One validated geometry per view angle.
  std::vector<ConeBeamGeometry> build() const;
};

struct DataConfig {
  std::size_t n_train = 32;
  std::size_t n_val = 4;
  std::size_t n_test = 4;
  std::uint64_t base_seed = 1000;
  std::size_t points = 2048;  // N per training step
  std::size_t volume_resolution = 64;
};

struct ModelConfig {
  std::size_t channels = 16;  // C
  std::size_t slabs = 4;      // K
  std::vector<std::size_t> distill_layers{3};
  std::vector<std::size_t> hidden{64, 64, 32};
  /// Appends two fixed normalized detector-coordinate channels to each image.
  bool coord_channels = true;
  double alpha = 0.2;
};

struct TrainConfig {
  std::size_t epochs = 25;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t val_points = 2048;
};

struct EvalConfig {
  std::size_t resolution = 64;
  std::size_t n_points = 1024;
  std::size_t runs = 3;
  std::size_t emd_points = 512;
  std::size_t emd_limit = 512;
  std::size_t gt_resolution = 96;
  std::size_t chunk = 4096;
  bool emd = true;
};

struct PathsConfig {
  std::string data = "data";
};

struct RunConfig {
  GeometryConfig geometry;
  ReconSpace space;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  PathsConfig paths;

  /// Throws ConfigError on values outside their documented ranges.
  void validate() const;
};

/// Canonical JSON text of the full config (sorted keys, every field present).
std::string config_to_json(const RunConfig& config);
/// Parses a (possibly partial) JSON config over the defaults. Unknown keys and
/// mistyped values throw ConfigError naming the key and the expected type.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// FNV-1a 64 of `bytes` as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
/// Hash of the canonical JSON.
std::string config_hash(const RunConfig& config);
/// Hash of the blocks that determine generated data: geometry, space, data
/// (minus the per-step point count) and the slab count.
std::string data_config_hash(const RunConfig& config);

}  // namespace xrecon
