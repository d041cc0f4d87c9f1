#include "xrecon/dataset.hpp"

#include <algorithm>

#include <json.hpp>

#include "xrecon/errors.hpp"
#include "xrecon/volume.hpp"

namespace xrecon {

using nlohmann::json;

std::string volume_stem(std::uint64_t seed) { return "volumes/" + std::to_string(seed); }
std::string image_stem(std::uint64_t seed, std::size_t view) {
  return "drr/" + std::to_string(seed) + "_v" + std::to_string(view);
}
std::string slab_image_stem(std::uint64_t seed, std::size_t view, std::size_t slab) {
  return image_stem(seed, view) + "_k" + std::to_string(slab);
}

namespace {

void add_pair(std::vector<std::string>& files, const std::string& stem) {
  files.push_back(stem + ".json");
  files.push_back(stem + ".raw");
}

}  // namespace

DatasetManifest generate_dataset(const RunConfig& config, const std::filesystem::path& dir) {
  config.validate();
  DatasetManifest m;
  m.data_hash = data_config_hash(config);
  m.views = config.geometry.views.size();
  m.slabs = config.model.slabs;
  m.split = make_dataset(config.data.n_train, config.data.n_val, config.data.n_test, config.data.base_seed);
  const auto geoms = config.geometry.build();

  json phantoms = json::array();
  auto emit = [&](const std::vector<std::uint64_t>& seeds, const char* split) {
    for (std::uint64_t seed : seeds) {
      const Phantom ph = generate_phantom(seed, phantom_options(config));
      write_volume(ph.volume, dir / volume_stem(seed));
      add_pair(m.files, volume_stem(seed));
      const CaseInputs inputs = prepare_inputs(ph.volume, geoms, config.space, config.model.slabs, true);
      for (std::size_t v = 0; v < inputs.size(); ++v) {
        write_image(inputs[v].original, dir / image_stem(seed, v));
        add_pair(m.files, image_stem(seed, v));
        for (std::size_t k = 0; k < inputs[v].augmented.size(); ++k) {
          write_image(inputs[v].augmented[k], dir / slab_image_stem(seed, v, k));
          add_pair(m.files, slab_image_stem(seed, v, k));
        }
      }
      phantoms.push_back({{"seed", seed}, {"split", split}});
    }
  };
  emit(m.split.train, "train");
  emit(m.split.val, "val");
  emit(m.split.test, "test");
  std::sort(m.files.begin(), m.files.end());

  json j;
  j["format_version"] = kDatasetFormat;
  j["data_hash"] = m.data_hash;
  j["views"] = m.views;
  j["slabs"] = m.slabs;
  j["phantoms"] = phantoms;
  j["files"] = m.files;
  write_text(dir / "manifest.json", j.dump(2) + "\n");
  return m;
}

DatasetManifest read_dataset_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  DatasetManifest m;
  try {
    const json j = json::parse(read_text(path));
    const int version = j.at("format_version").get<int>();
    if (version != kDatasetFormat)
      throw ConfigError(path.string() + ": dataset format version " + std::to_string(version) + ", expected " +
                        std::to_string(kDatasetFormat));
    m.data_hash = j.at("data_hash").get<std::string>();
    m.views = j.at("views").get<std::size_t>();
    m.slabs = j.at("slabs").get<std::size_t>();
    m.files = j.at("files").get<std::vector<std::string>>();
    for (const auto& p : j.at("phantoms")) {
      const auto seed = p.at("seed").get<std::uint64_t>();
      const auto split = p.at("split").get<std::string>();
      if (split == "train")
        m.split.train.push_back(seed);
      else if (split == "val")
        m.split.val.push_back(seed);
      else if (split == "test")
        m.split.test.push_back(seed);
      else
        throw ParseError(path.string() + ": unknown split '" + split + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return m;
}

DatasetManifest open_dataset(const std::filesystem::path& dir, const RunConfig& config) {
  if (!std::filesystem::exists(dir / "manifest.json"))
    throw ConfigError("no dataset at " + dir.string() + " (run gen-data first)");
  DatasetManifest m = read_dataset_manifest(dir);
  const std::string want = data_config_hash(config);
  if (m.data_hash != want)
    throw ConfigError("dataset at " + dir.string() + " was generated with different data settings (hash " + m.data_hash +
                      ", config " + want + "); rerun gen-data");
  return m;
}

const std::vector<std::uint64_t>& split_seeds(const DatasetManifest& manifest, std::string_view split) {
  if (split == "train") return manifest.split.train;
  if (split == "val") return manifest.split.val;
  if (split == "test") return manifest.split.test;
  throw ConfigError("unknown split '" + std::string(split) + "' (expected train, val or test)");
}

std::vector<PreparedCase> load_cases(const std::filesystem::path& dir, const std::vector<std::uint64_t>& seeds,
                                     const RunConfig& config, bool with_augmented) {
  const auto geoms = config.geometry.build();
  const PhantomOptions opt = phantom_options(config);
  std::vector<PreparedCase> out;
  out.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    PreparedCase c;
    c.seed = seed;
    c.spec = make_phantom_spec(seed, opt);
    for (std::size_t v = 0; v < geoms.size(); ++v) {
      ViewInputs in;
      in.geometry = geoms[v];
      in.slabs = divide_subspaces(config.space, geoms[v], config.model.slabs, v);
      in.original = read_image(dir / image_stem(seed, v));
      if (with_augmented)
        for (std::size_t k = 0; k < config.model.slabs; ++k) in.augmented.push_back(read_image(dir / slab_image_stem(seed, v, k)));
      c.inputs.push_back(std::move(in));
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace xrecon
