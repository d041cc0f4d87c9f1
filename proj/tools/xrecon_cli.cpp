// xrecon: bone surface reconstruction from two simulated radiographs.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xrecon/commands.hpp"
#include "xrecon/errors.hpp"

using namespace xrecon;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config;
  bool print_config = false;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c, const char* seed_help, const char* out_help) {
  app->add_option("--config", c.config, "JSON config overlaid on the defaults");
  app->add_flag("--print-config", c.print_config, "Print the effective config and exit");
  app->add_option("--seed", c.seed, seed_help);
  app->add_option("--out", c.out, out_help);
}

RunConfig base_config(const Common& c) { return c.config.empty() ? RunConfig{} : load_config(c.config); }

bool maybe_print(const Common& c, const RunConfig& config) {
  if (!c.print_config) return false;
  std::cout << config_to_json(config);
  return true;
}

std::string require_out(const Common& c, const char* what) {
  if (c.out.empty()) throw ConfigError(std::string("--out is required (") + what + ")");
  return c.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bone surface reconstruction from biplanar DRRs"};
  app.require_subcommand(0, 1);
  Common top;
  app.add_option("--config", top.config, "JSON config overlaid on the defaults");
  app.add_flag("--print-config", top.print_config, "Print the effective config and exit");

  Common gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate phantoms, volumes and DRRs");
  add_common(gen_cmd, gen, "Base phantom seed (data.base_seed)", "Dataset directory (default paths.data)");

  Common tr;
  std::string role = "teacher", teacher, data;
  std::optional<double> alpha;
  auto* train_cmd = app.add_subcommand("train", "Train a teacher, student or baseline");
  add_common(train_cmd, tr, "Training seed (train.seed)", "Checkpoint directory");
  train_cmd->add_option("--role", role, "teacher | student | baseline")->check(CLI::IsMember({"teacher", "student", "baseline"}));
  train_cmd->add_option("--teacher", teacher, "Teacher checkpoint directory (student role)");
  train_cmd->add_option("--alpha", alpha, "Distillation weight; 0 trains the plain baseline");
  train_cmd->add_option("--data", data, "Dataset directory (default paths.data)");

  Common rc;
  std::string ckpt, volume;
  std::size_t resolution = 64;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct left and right surfaces as OBJ");
  add_common(rec_cmd, rc, "Phantom seed to render and reconstruct", "Output <stem>.obj; writes <stem>_left.obj and <stem>_right.obj");
  rec_cmd->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  rec_cmd->add_option("--volume", volume, "Volume stem (<stem>.raw + <stem>.json) instead of --seed");
  rec_cmd->add_option("--resolution", resolution, "Grid resolution R");

  Common ev;
  std::string ev_ckpt, ev_data, split = "test";
  std::optional<std::size_t> ev_res;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a dataset split");
  add_common(eval_cmd, ev, "Unused (sampling seeds derive from phantom seeds)", "Report JSON path");
  eval_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", ev_data, "Dataset directory (default paths.data of the config)");
  eval_cmd->add_option("--split", split, "train | val | test");
  eval_cmd->add_option("--resolution", ev_res, "Grid resolution R (default eval.resolution)");

  Common gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  add_common(grad_cmd, gc, "Seed of the random micro problems", "Optional text report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (app.get_subcommands().empty()) {
      const RunConfig config = base_config(top);
      if (maybe_print(top, config)) return 0;
      std::cout << app.help();
      return kExitConfig;
    }
    if (gen_cmd->parsed()) {
      RunConfig config = base_config(gen);
      if (gen.seed) config.data.base_seed = *gen.seed;
      config.validate();
      if (maybe_print(gen, config)) return 0;
      cmd_gen_data(config, gen.out.empty() ? config.paths.data : gen.out, &std::cerr);
    } else if (train_cmd->parsed()) {
      TrainArgs args;
      args.config = base_config(tr);
      if (tr.seed) args.config.train.seed = *tr.seed;
      if (alpha) args.config.model.alpha = *alpha;
      args.role = parse_role(role);
      if (args.role == Role::baseline) args.config.model.alpha = 0.0;
      args.config.validate();
      if (maybe_print(tr, args.config)) return 0;
      args.data = data.empty() ? args.config.paths.data : data;
      if (!teacher.empty()) args.teacher = teacher;
      args.out = require_out(tr, "checkpoint directory");
      cmd_train(args, &std::cerr);
    } else if (rec_cmd->parsed()) {
      if (rc.print_config) {
        std::cout << config_to_json(load_checkpoint(ckpt).config);
        return 0;
      }
      ReconstructArgs args;
      args.checkpoint = ckpt;
      args.seed = rc.seed;
      if (!volume.empty()) args.volume = volume;
      args.resolution = resolution;
      args.out = require_out(rc, "mesh path");
      cmd_reconstruct(args, &std::cerr);
    } else if (eval_cmd->parsed()) {
      EvaluateArgs args;
      args.checkpoint = ev_ckpt;
      std::optional<RunConfig> overrides;
      if (!ev.config.empty()) overrides = load_config(ev.config);
      if (ev.print_config) {
        RunConfig c = load_checkpoint(ev_ckpt).config;
        if (overrides) c.eval = overrides->eval;
        std::cout << config_to_json(c);
        return 0;
      }
      if (overrides) args.eval = overrides->eval;
      if (!ev_data.empty())
        args.data = ev_data;
      else if (overrides)
        args.data = overrides->paths.data;
      args.split = split;
      args.resolution = ev_res;
      args.out = require_out(ev, "report path");
      cmd_evaluate(args, &std::cerr);
    } else if (grad_cmd->parsed()) {
      const RunConfig config = base_config(gc);
      if (maybe_print(gc, config)) return 0;
      const GradCheckSuiteReport report = cmd_gradcheck(gc.seed.value_or(0));
      std::cout << report.to_text();
      std::cerr << "gradcheck took " << report.seconds << " s\n";
      if (!gc.out.empty()) write_text(gc.out, report.to_text());
      return report.passed() ? 0 : kExitRuntime;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
