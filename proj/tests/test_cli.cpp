#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "support.hpp"
#include "xrecon/checkpoint.hpp"
#include "xrecon/commands.hpp"
#include "xrecon/dataset.hpp"
#include "xrecon/errors.hpp"
#include "xrecon/volume.hpp"

using namespace xrecon;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
  RunConfig c = support::tiny_config();
  c.data.volume_resolution = 32;
  return c;
}

std::string config_error(const std::string& text) {
  try {
    config_from_json(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string(XRECON_CLI_PATH) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const RunConfig d;
  const std::string text = config_to_json(d);
  EXPECT_EQ(config_to_json(config_from_json(text)), text);
  EXPECT_EQ(config_to_json(config_from_json("{}")), text);
  const RunConfig partial = config_from_json(R"({"model": {"slabs": 2}, "train": {"lr": 0.01}})");
  EXPECT_EQ(partial.model.slabs, 2u);
  EXPECT_DOUBLE_EQ(partial.train.lr, 0.01);
  EXPECT_EQ(partial.model.channels, d.model.channels);
}

TEST(Config, ErrorsNameKeyAndType) {
  std::string e = config_error(R"({"model": {"channels": "sixteen"}})");
  EXPECT_NE(e.find("model.channels"), std::string::npos) << e;
  EXPECT_NE(e.find("non-negative integer"), std::string::npos) << e;
  EXPECT_NE(e.find("string"), std::string::npos) << e;
  e = config_error(R"({"model": {"chanels": 4}})");
  EXPECT_NE(e.find("unknown key 'model.chanels'"), std::string::npos) << e;
  e = config_error(R"({"space": {"min": [1, 2]}})");
  EXPECT_NE(e.find("space.min"), std::string::npos) << e;
  e = config_error(R"({"model": {"slabs": 0}})");
  EXPECT_NE(e.find("model.slabs"), std::string::npos) << e;
  e = config_error(R"({"data": {"points": 7}})");
  EXPECT_NE(e.find("data.points"), std::string::npos) << e;
  EXPECT_NE(config_error("{not json"), "");
  EXPECT_NE(config_error(R"({"train": 3})"), "");
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, HashesTrackRelevantBlocks) {
  RunConfig a, b;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.train.epochs = 3;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(data_config_hash(a), data_config_hash(b));
  b.data.points = 512;
  EXPECT_EQ(data_config_hash(a), data_config_hash(b));
  b.model.slabs = 2;
  EXPECT_NE(data_config_hash(a), data_config_hash(b));
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  support::TempDir dir("ckpt");
  Checkpoint c;
  c.config = small_config();
  c.model = init_model<float>(Role::student, c.config.model, 2, 7);
  c.step = 12;
  c.metrics["val_recon"] = 0.125;
  save_checkpoint(c, dir / "a");
  const Checkpoint back = load_checkpoint(dir / "a");
  EXPECT_EQ(back.model.role, Role::student);
  EXPECT_EQ(back.step, 12u);
  EXPECT_EQ(back.metrics.at("val_recon"), 0.125);
  for (const auto& [name, p] : c.model.params) {
    const auto& r = back.model.params.at(name);
    ASSERT_TRUE(std::equal(p.data().begin(), p.data().end(), r.data().begin())) << name;
  }
  save_checkpoint(back, dir / "b");
  EXPECT_EQ(read_text(dir / "a" / "manifest.json"), read_text(dir / "b" / "manifest.json"));
  EXPECT_EQ(read_text(dir / "a" / "params.bin"), read_text(dir / "b" / "params.bin"));
  EXPECT_EQ(checkpoint_hash(dir / "a"), checkpoint_hash(dir / "b"));
  const json m = json::parse(read_text(dir / "a" / "manifest.json"));
  EXPECT_EQ(m["format_version"], kCheckpointFormat);
  EXPECT_EQ(m["role"], "student");
}

TEST(Checkpoint, RejectsVersionAndShapeMismatch) {
  support::TempDir dir("ckpt_bad");
  Checkpoint c;
  c.config = small_config();
  c.model = init_model<float>(Role::teacher, c.config.model, 2, 1);
  save_checkpoint(c, dir / "v");
  json m = json::parse(read_text(dir / "v" / "manifest.json"));
  m["format_version"] = 99;
  write_text(dir / "v" / "manifest.json", m.dump(2));
  try {
    load_checkpoint(dir / "v");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("99"), std::string::npos) << what;
    EXPECT_NE(what.find("version 1"), std::string::npos) << what;
  }
  save_checkpoint(c, dir / "s");
  m = json::parse(read_text(dir / "s" / "manifest.json"));
  m["config"]["model"]["channels"] = 8;
  write_text(dir / "s" / "manifest.json", m.dump(2));
  EXPECT_THROW(load_checkpoint(dir / "s"), ConfigError);
  save_checkpoint(c, dir / "t");
  write_text(dir / "t" / "params.bin", "short");
  EXPECT_ANY_THROW(load_checkpoint(dir / "t"));
  EXPECT_ANY_THROW(load_checkpoint(dir / "missing"));
}

TEST(Dataset, GenerationIsIdempotentAndComplete) {
  support::TempDir dir("data");
  const RunConfig c = small_config();
  const auto m = generate_dataset(c, dir / "d");
  const std::size_t phantoms = 4, views = 2, k = 4;
  EXPECT_EQ(m.files.size(), phantoms * (2 + views * (1 + k) * 2));
  for (const auto& f : m.files) EXPECT_TRUE(fs::exists(dir / "d" / f)) << f;
  const std::string first = read_text(dir / "d" / m.files[3]);
  const std::string manifest = read_text(dir / "d" / "manifest.json");
  generate_dataset(c, dir / "d");
  EXPECT_EQ(read_text(dir / "d" / m.files[3]), first);
  EXPECT_EQ(read_text(dir / "d" / "manifest.json"), manifest);

  const auto opened = open_dataset(dir / "d", c);
  EXPECT_EQ(split_seeds(opened, "test").size(), 1u);
  EXPECT_THROW(split_seeds(opened, "holdout"), ConfigError);
  RunConfig other = c;
  other.geometry.sdd = 1400;
  EXPECT_THROW(open_dataset(dir / "d", other), ConfigError);
  EXPECT_THROW(open_dataset(dir / "nowhere", c), ConfigError);

  // Stored renders reproduce freshly prepared inputs.
  const auto loaded = load_cases(dir / "d", opened.split.val, c, true);
  const auto fresh = prepare_case(opened.split.val[0], c, true);
  EXPECT_EQ(loaded[0].inputs[1].original.pixels, fresh.inputs[1].original.pixels);
  EXPECT_EQ(loaded[0].inputs[0].augmented[2].pixels, fresh.inputs[0].augmented[2].pixels);
}

TEST(Commands, StudentNeedsTeacherAndReconstructNeedsOneSource) {
  support::TempDir dir("cmd");
  TrainArgs t;
  t.config = small_config();
  t.role = Role::student;
  t.data = dir / "d";
  t.out = dir / "s";
  EXPECT_THROW(cmd_train(t, nullptr), ConfigError);
  t.role = Role::teacher;
  EXPECT_THROW(cmd_train(t, nullptr), ConfigError);  // no dataset yet
  ReconstructArgs r;
  r.checkpoint = dir / "s";
  r.out = dir / "m.obj";
  EXPECT_THROW(cmd_reconstruct(r, nullptr), ConfigError);
  r.seed = 1;
  r.volume = dir / "v";
  EXPECT_THROW(cmd_reconstruct(r, nullptr), ConfigError);
  EXPECT_EQ(timing_path("out/report.json"), fs::path("out/report.timing.json"));
}

TEST(Cli, ExitCodesAndPrintConfig) {
  support::TempDir dir("cli_codes");
  CliRun r = run_cli("--print-config");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(config_to_json(config_from_json(r.out)), config_to_json(RunConfig{}));
  write_text(dir / "bad.json", R"({"model": {"slabs": "four"}})");
  EXPECT_EQ(run_cli("gen-data --config " + q(dir / "bad.json") + " --out " + q(dir / "d")).code, 2);
  EXPECT_EQ(run_cli("train --role wizard --out x").code, 2);
  EXPECT_EQ(run_cli("train --bogus").code, 2);
  EXPECT_EQ(run_cli("train --out " + q(dir / "t") + " --data " + q(dir / "none")).code, 2);
  EXPECT_EQ(run_cli("reconstruct --checkpoint " + q(dir / "none") + " --seed 1 --out " + q(dir / "m")).code, 1);
  write_text(dir / "c.json", R"({"train": {"seed": 5}})");
  r = run_cli("train --config " + q(dir / "c.json") + " --seed 9 --alpha 0.5 --print-config");
  EXPECT_EQ(r.code, 0);
  const RunConfig printed = config_from_json(r.out);
  EXPECT_EQ(printed.train.seed, 9u);
  EXPECT_DOUBLE_EQ(printed.model.alpha, 0.5);
}

TEST(Cli, PipelineIsByteReproducible) {
  support::TempDir dir("cli_pipeline");
  write_text(dir / "config.json", config_to_json(small_config()));
  const std::string cfg = " --config " + q(dir / "config.json");
  const std::vector<std::string> outputs{"teacher/manifest.json", "teacher/params.bin", "teacher/trace.csv",
                                         "student/manifest.json", "student/params.bin", "student/epochs.csv",
                                         "base/params.bin",       "mesh_left.obj",      "mesh_right.obj",
                                         "report.json",           "data/manifest.json"};
  for (const char* run : {"a", "b"}) {
    const fs::path d = dir / run;
    ASSERT_EQ(run_cli("gen-data" + cfg + " --out " + q(d / "data")).code, 0);
    ASSERT_EQ(run_cli("train" + cfg + " --role teacher --data " + q(d / "data") + " --out " + q(d / "teacher")).code, 0);
    ASSERT_EQ(run_cli("train" + cfg + " --role student --teacher " + q(d / "teacher") + " --data " + q(d / "data") +
                      " --out " + q(d / "student"))
                  .code,
              0);
    ASSERT_EQ(run_cli("train" + cfg + " --role student --alpha 0 --data " + q(d / "data") + " --out " + q(d / "base")).code, 0);
    ASSERT_EQ(run_cli("reconstruct --checkpoint " + q(d / "student") + " --seed 4242 --resolution 24 --out " +
                      q(d / "mesh.obj"))
                  .code,
              0);
    ASSERT_EQ(run_cli("evaluate --checkpoint " + q(d / "student") + " --data " + q(d / "data") + " --out " +
                      q(d / "report.json"))
                  .code,
              0);
    EXPECT_TRUE(fs::exists(d / "report.timing.json"));
  }
  for (const auto& f : outputs) EXPECT_EQ(read_text(dir / "a" / f), read_text(dir / "b" / f)) << f;
  EXPECT_EQ(json::parse(read_text(dir / "a" / "base" / "manifest.json"))["role"], "baseline");
  EXPECT_EQ(run_cli("evaluate --checkpoint " + q(dir / "a" / "student") + " --data " + q(dir / "a" / "data") +
                    " --split holdout --out " + q(dir / "r.json"))
                .code,
            2);
}
