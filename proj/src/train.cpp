#include "xrecon/train.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include "xrecon/autodiff/adam.hpp"
#include "xrecon/errors.hpp"

namespace xrecon {

using ad::Graph;
using ad::Var;

PhantomOptions phantom_options(const RunConfig& config) {
  PhantomOptions opt;
  opt.space = config.space;
  opt.volume_resolution = config.data.volume_resolution;
  return opt;
}

PreparedCase prepare_case(std::uint64_t seed, const RunConfig& config, bool with_augmented) {
  const Phantom ph = generate_phantom(seed, phantom_options(config));
  PreparedCase c;
  c.seed = seed;
  c.spec = ph.spec;
  c.inputs = prepare_inputs(ph.volume, config.geometry.build(), config.space, config.model.slabs, with_augmented);
  return c;
}

std::vector<PreparedCase> prepare_cases(const std::vector<std::uint64_t>& seeds, const RunConfig& config,
                                        bool with_augmented) {
  std::vector<PreparedCase> out;
  out.reserve(seeds.size());
  for (std::uint64_t s : seeds) out.push_back(prepare_case(s, config, with_augmented));
  return out;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

OccupancyBatch validation_batch(const PreparedCase& c, std::size_t n) {
  return sample_training_points(c.spec, n, mix_seed(c.seed, 0x5641'4C49'44ULL));
}

double validation_loss(Model<float>& model, const std::vector<PreparedCase>& cases, std::size_t n) {
  if (cases.empty()) return 0.0;
  double sum = 0;
  for (const auto& c : cases) {
    OccupancyBatch batch = validation_batch(c, n);
    batch.predictions = predict_points(model, c.inputs, batch.points);
    sum += recon_loss(batch);
  }
  return sum / static_cast<double>(cases.size());
}

namespace {

TrainResult run_training(const RunConfig& config, Model<float> model, const std::vector<PreparedCase>& train,
                         const std::vector<PreparedCase>& val, const std::vector<FeatureStacks<float>>* teacher) {
  if (train.empty()) throw InvalidArgument("training: no training cases");
  ad::AdamState<float> adam;
  adam.config.lr = config.train.lr;
  TrainResult result;
  result.best_val = std::numeric_limits<double>::infinity();
  const double alpha = config.model.alpha;
  const std::size_t layers = config.model.distill_layers.size();
  std::mt19937_64 order_rng(mix_seed(config.train.seed, 0x4F52'4445'52ULL));
  std::vector<std::size_t> order(train.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.train.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_recon = 0;
    for (std::size_t idx : order) {
      const PreparedCase& c = train[idx];
      const OccupancyBatch batch =
          sample_training_points(c.spec, config.data.points, mix_seed(mix_seed(config.train.seed, step), c.seed));
      model.params.clear_grad();
      Graph<float> g;
      Binder<float> bind(g, model.params, true);
      const auto fwd = model_forward(bind, model, c.inputs, batch.points, teacher ? &(*teacher)[idx] : nullptr);
      const Var recon = recon_loss(g, fwd.predictions, batch.labels);
      const Var total = total_loss(g, recon, fwd.distill, alpha, model.views, layers);
      g.backward(total);
      ad::adam_step(model.params, adam);

      TraceRow row;
      row.step = ++step;
      row.epoch = epoch;
      row.recon = g.value(recon).item();
      for (Var d : fwd.distill) row.distill += g.value(d).item();
      row.total = g.value(total).item();
      result.trace.push_back(row);
      epoch_recon += row.recon;
    }
    model.params.clear_grad();
    EpochRow er;
    er.epoch = epoch;
    er.train_recon = epoch_recon / static_cast<double>(train.size());
    er.val_recon = validation_loss(model, val.empty() ? train : val, config.train.val_points);
    result.epochs.push_back(er);
    if (er.val_recon < result.best_val) {
      result.best_val = er.val_recon;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  result.steps = step;
  return result;
}

}  // namespace

TrainResult train_teacher(const RunConfig& config, const std::vector<PreparedCase>& train,
                          const std::vector<PreparedCase>& val) {
  config.validate();
  Model<float> model = init_model<float>(Role::teacher, config.model, config.geometry.views.size(), config.train.seed);
  return run_training(config, std::move(model), train, val, nullptr);
}

TrainResult train_student(const RunConfig& config, const std::vector<PreparedCase>& train,
                          const std::vector<PreparedCase>& val, Model<float>* teacher) {
  config.validate();
  const std::size_t views = config.geometry.views.size();
  if (config.model.alpha == 0.0) {
    Model<float> model = init_model<float>(Role::baseline, config.model, views, config.train.seed);
    return run_training(config, std::move(model), train, val, nullptr);
  }
  if (!teacher) throw ConfigError("student training with alpha > 0 requires a teacher checkpoint");
  if (teacher->role != Role::teacher) throw ConfigError("checkpoint passed as teacher is a " + std::string(role_name(teacher->role)));
  const auto& tc = teacher->config;
  if (tc.slabs != config.model.slabs || tc.channels != config.model.channels ||
      tc.distill_layers != config.model.distill_layers || tc.coord_channels != config.model.coord_channels ||
      teacher->views != views) {
    throw ConfigError("teacher checkpoint is incompatible: teacher K=" + std::to_string(tc.slabs) +
                      " C=" + std::to_string(tc.channels) + ", student K=" + std::to_string(config.model.slabs) +
                      " C=" + std::to_string(config.model.channels) + " (distillation layers and views must match too)");
  }
  std::vector<FeatureStacks<float>> stacks;
  stacks.reserve(train.size());
  for (const auto& c : train) stacks.push_back(teacher_stacks(*teacher, c.inputs));
  Model<float> model = init_model<float>(Role::student, config.model, views, config.train.seed);
  return run_training(config, std::move(model), train, val, &stacks);
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,epoch,recon,distill,total\n";
  char buf[160];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g,%.9g\n", r.step, r.epoch, r.recon, r.distill, r.total);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace xrecon
