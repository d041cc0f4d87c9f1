#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "xrecon/config.hpp"
#include "xrecon/network.hpp"

namespace xrecon {

inline constexpr int kCheckpointFormat = 1;

/// A trained model plus the run configuration it was trained under.
/// On disk: `<dir>/manifest.json` and `<dir>/params.bin` (little-endian
/// float32, parameters concatenated in sorted-name order).
struct Checkpoint {
  Model<float> model;
  RunConfig config;
  std::size_t step = 0;
  std::map<std::string, double> metrics;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

/// Throws ConfigError on a format version other than kCheckpointFormat (the
/// message names both) or when the stored parameter names and shapes do not
/// match the architecture described by the stored config; ParseError or
/// IoError on damaged files.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// FNV-1a 64 over manifest and blob bytes, as 16 hex digits.
std::string checkpoint_hash(const std::filesystem::path& dir);

}  // namespace xrecon
