#include "xrecon/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "xrecon/errors.hpp"
#include "xrecon/volume.hpp"

namespace xrecon {

namespace {

const char* kChannelNames[kChannels] = {"left", "right"};

void note(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << '\n' << std::flush;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

void write_epochs_csv(const std::vector<EpochRow>& rows, const std::filesystem::path& path) {
  std::string text = "epoch,train_recon,val_recon\n";
  char buf[120];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", r.epoch, r.train_recon, r.val_recon);
    text += buf;
  }
  write_text(path, text);
}

}  // namespace

DatasetManifest cmd_gen_data(const RunConfig& config, const std::filesystem::path& out, std::ostream* log) {
  const DatasetManifest m = generate_dataset(config, out);
  note(log, "wrote " + std::to_string(m.split.train.size() + m.split.val.size() + m.split.test.size()) + " phantoms (" +
                std::to_string(m.files.size()) + " files) to " + out.string());
  return m;
}

Checkpoint cmd_train(const TrainArgs& args, std::ostream* log) {
  RunConfig config = args.config;
  Role role = args.role;
  if (role == Role::baseline) config.model.alpha = 0.0;
  if (role == Role::student && config.model.alpha == 0.0) role = Role::baseline;
  config.validate();
  if (role == Role::student && !args.teacher) throw ConfigError("train --role student requires --teacher <checkpoint>");

  const DatasetManifest m = open_dataset(args.data, config);
  const bool augmented = role != Role::baseline;
  const auto train = load_cases(args.data, m.split.train, config, augmented);
  const auto val = load_cases(args.data, m.split.val, config, augmented);
  note(log, std::string("training ") + std::string(role_name(role)) + " on " + std::to_string(train.size()) +
                " phantoms for " + std::to_string(config.train.epochs) + " epochs");

  TrainResult result;
  if (role == Role::teacher) {
    result = train_teacher(config, train, val);
  } else if (role == Role::baseline) {
    result = train_student(config, train, val, nullptr);
  } else {
    Checkpoint teacher = load_checkpoint(*args.teacher);
    result = train_student(config, train, val, &teacher.model);
  }
  for (const auto& e : result.epochs) note(log, fmt("epoch %3.0f  train %.5f  val %.5f", double(e.epoch), e.train_recon, e.val_recon));

  Checkpoint ckpt;
  ckpt.model = std::move(result.model);
  ckpt.config = config;
  ckpt.step = result.best_epoch * train.size();
  ckpt.metrics["best_epoch"] = static_cast<double>(result.best_epoch);
  ckpt.metrics["val_recon"] = result.best_val;
  save_checkpoint(ckpt, args.out);
  write_trace_csv(result.trace, args.out / "trace.csv");
  write_epochs_csv(result.epochs, args.out / "epochs.csv");
  note(log, fmt("best epoch %.0f, val recon %.5f; checkpoint in ", double(result.best_epoch), result.best_val) +
                args.out.string());
  return ckpt;
}

ReconstructResult cmd_reconstruct(const ReconstructArgs& args, std::ostream* log) {
  if (args.seed.has_value() == args.volume.has_value())
    throw ConfigError("reconstruct needs exactly one of --seed or --volume");
  if (args.resolution < 8) throw ConfigError("--resolution must be >= 8");
  Checkpoint ckpt = load_checkpoint(args.checkpoint);
  const RunConfig& config = ckpt.config;
  const Volume3D volume =
      args.seed ? generate_phantom(*args.seed, phantom_options(config)).volume : read_volume(*args.volume);
  const CaseInputs inputs =
      prepare_inputs(volume, config.geometry.build(), config.space, config.model.slabs, false);
  const auto grids = infer_occupancy_grid(ckpt.model, inputs, config.space, args.resolution, config.eval.chunk);

  std::filesystem::path stem = args.out;
  if (stem.extension() == ".obj") stem.replace_extension();
  ReconstructResult out;
  for (std::size_t c = 0; c < kChannels; ++c) {
    out.meshes[c] = marching_cubes(grids[c]);
    out.files[c] = stem;
    out.files[c] += std::string("_") + kChannelNames[c] + ".obj";
    if (out.meshes[c].empty()) note(log, std::string("warning: empty ") + kChannelNames[c] + " surface (no occupancy above 0.5)");
    write_obj(out.meshes[c], out.files[c]);
    note(log, "wrote " + out.files[c].string() + " (" + std::to_string(out.meshes[c].vertices.size()) + " vertices, " +
                  std::to_string(out.meshes[c].triangles.size()) + " triangles)");
  }
  return out;
}

std::filesystem::path timing_path(const std::filesystem::path& report) {
  std::filesystem::path p = report;
  p.replace_extension();
  p += ".timing.json";
  return p;
}

EvalReport cmd_evaluate(const EvaluateArgs& args, std::ostream* log) {
  Checkpoint ckpt = load_checkpoint(args.checkpoint);
  RunConfig config = ckpt.config;
  if (args.eval) config.eval = *args.eval;
  const std::size_t r = args.resolution.value_or(config.eval.resolution);
  if (r < 8) throw ConfigError("--resolution must be >= 8");
  const std::filesystem::path data = args.data.empty() ? std::filesystem::path(config.paths.data) : args.data;
  const DatasetManifest m = open_dataset(data, config);
  const auto& seeds = split_seeds(m, args.split);
  const auto cases = load_cases(data, seeds, config, false);
  EvalReport report = evaluate_reconstruction(ckpt.model, cases, config, r);
  write_text(args.out, report.to_json());
  write_text(timing_path(args.out), report.timing_json());
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto& s = report.summary[c];
    note(log, std::string(kChannelNames[c]) + fmt(": CD %.3f +- %.3f, EMD %.3f", s.cd_mean, s.cd_std, s.emd_mean) +
                  fmt(" +- %.3f, failures %.0f", s.emd_std, double(s.failures)));
  }
  note(log, fmt("inference %.3f s, marching cubes %.3f s per phantom", report.infer_seconds, report.mc_seconds));
  return report;
}

GradCheckSuiteReport cmd_gradcheck(std::uint64_t seed) { return run_gradcheck_suite(seed); }

}  // namespace xrecon
