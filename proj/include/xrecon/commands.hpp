#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "xrecon/checkpoint.hpp"
#include "xrecon/config.hpp"
#include "xrecon/dataset.hpp"
#include "xrecon/evaluate.hpp"
#include "xrecon/gradcheck_suite.hpp"

namespace xrecon {

// Library forms of the CLI subcommands. Progress goes to `log` when given.

DatasetManifest cmd_gen_data(const RunConfig& config, const std::filesystem::path& out, std::ostream* log = nullptr);

struct TrainArgs {
  RunConfig config;
  /// teacher, student or baseline. A student with alpha == 0 trains the baseline.
  Role role = Role::teacher;
  std::filesystem::path data;
  std::optional<std::filesystem::path> teacher;
  std::filesystem::path out;
};

/// Writes the best-validation checkpoint to `out` plus `out/trace.csv`
/// (per step) and `out/epochs.csv` (per epoch).
Checkpoint cmd_train(const TrainArgs& args, std::ostream* log = nullptr);

struct ReconstructArgs {
  std::filesystem::path checkpoint;
  std::optional<std::uint64_t> seed;           // phantom to generate and render
  std::optional<std::filesystem::path> volume;  // or a volume stem (<stem>.raw + <stem>.json)
  std::size_t resolution = 64;
  std::filesystem::path out;  // "<stem>.obj" or "<stem>"; writes <stem>_left.obj and <stem>_right.obj
};

struct ReconstructResult {
  std::array<std::filesystem::path, kChannels> files;
  std::array<TriangleMesh, kChannels> meshes;
};

/// An empty predicted surface is written as an empty OBJ with a warning on `log`.
ReconstructResult cmd_reconstruct(const ReconstructArgs& args, std::ostream* log = nullptr);

struct EvaluateArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path data;  // empty: paths.data of the checkpoint's config
  std::string split = "test";
  std::optional<std::size_t> resolution;  // default: eval.resolution of the config
  /// Replaces the checkpoint's eval block when given.
  std::optional<EvalConfig> eval;
  std::filesystem::path out;  // report JSON; timing goes to <out stem>.timing.json
};

EvalReport cmd_evaluate(const EvaluateArgs& args, std::ostream* log = nullptr);

GradCheckSuiteReport cmd_gradcheck(std::uint64_t seed = 0);

std::filesystem::path timing_path(const std::filesystem::path& report);

}  // namespace xrecon
