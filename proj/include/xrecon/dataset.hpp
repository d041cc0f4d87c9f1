#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "xrecon/config.hpp"
#include "xrecon/phantom.hpp"
#include "xrecon/train.hpp"

namespace xrecon {

inline constexpr int kDatasetFormat = 1;

/// On-disk dataset layout under one directory:
///   manifest.json
///   volumes/<seed>.{raw,json}
///   drr/<seed>_v<view>.{raw,json}          normalized original render
///   drr/<seed>_v<view>_k<slab>.{raw,json}  normalized slab render
struct DatasetManifest {
  std::string data_hash;  // data_config_hash of the generating config
  std::size_t views = 0;
  std::size_t slabs = 0;
  DatasetSplit split;
  std::vector<std::string> files;  // relative paths, sorted
};

/// Renders every phantom of the configured split. Reruns rewrite identical bytes.
DatasetManifest generate_dataset(const RunConfig& config, const std::filesystem::path& dir);

DatasetManifest read_dataset_manifest(const std::filesystem::path& dir);

/// Reads the manifest and checks it was generated with the data settings of
/// `config`; ConfigError otherwise (including a missing directory).
DatasetManifest open_dataset(const std::filesystem::path& dir, const RunConfig& config);

/// Seeds of "train", "val" or "test"; ConfigError for any other name.
const std::vector<std::uint64_t>& split_seeds(const DatasetManifest& manifest, std::string_view split);

/// Cases rebuilt from the stored renders (phantom specs are regenerated from
/// their seeds, which is cheap and exact).
std::vector<PreparedCase> load_cases(const std::filesystem::path& dir, const std::vector<std::uint64_t>& seeds,
                                     const RunConfig& config, bool with_augmented);

std::string volume_stem(std::uint64_t seed);
std::string image_stem(std::uint64_t seed, std::size_t view);
std::string slab_image_stem(std::uint64_t seed, std::size_t view, std::size_t slab);

}  // namespace xrecon
