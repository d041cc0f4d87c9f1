#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xrecon/config.hpp"
#include "xrecon/network.hpp"
#include "xrecon/phantom.hpp"

namespace xrecon {

/// A phantom with everything the networks consume.
struct PreparedCase {
  std::uint64_t seed = 0;
  PhantomSpec spec;
  CaseInputs inputs;
};

PhantomOptions phantom_options(const RunConfig& config);
PreparedCase prepare_case(std::uint64_t seed, const RunConfig& config, bool with_augmented);
std::vector<PreparedCase> prepare_cases(const std::vector<std::uint64_t>& seeds, const RunConfig& config,
                                        bool with_augmented);

/// SplitMix64 finalizer; derives independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

struct TraceRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double recon = 0;
  double distill = 0;
  double total = 0;
};

struct EpochRow {
  std::size_t epoch = 0;
  double train_recon = 0;
  double val_recon = 0;
};

struct TrainResult {
  Model<float> model;  // best-validation parameters
  std::vector<TraceRow> trace;
  std::vector<EpochRow> epochs;
  std::size_t best_epoch = 0;
  double best_val = 0;
  std::size_t steps = 0;
};

/// Adam on the reconstruction loss over the slab renders. Cases must carry
/// augmented images.
TrainResult train_teacher(const RunConfig& config, const std::vector<PreparedCase>& train,
                          const std::vector<PreparedCase>& val);

/// Adam on recon + alpha-weighted distillation against the frozen teacher.
/// With config.model.alpha == 0 this trains the plain baseline instead and
/// `teacher` may be null. Throws ConfigError when the teacher's K, C or
/// distillation layers differ from the student's.
TrainResult train_student(const RunConfig& config, const std::vector<PreparedCase>& train,
                          const std::vector<PreparedCase>& val, Model<float>* teacher);

/// Fixed validation points of a case (half uniform, half near-surface).
OccupancyBatch validation_batch(const PreparedCase& c, std::size_t n);
double validation_loss(Model<float>& model, const std::vector<PreparedCase>& cases, std::size_t n);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

}  // namespace xrecon
