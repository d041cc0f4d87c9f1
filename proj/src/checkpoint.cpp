#include "xrecon/checkpoint.hpp"

#include <json.hpp>

#include "xrecon/errors.hpp"
#include "xrecon/volume.hpp"

namespace xrecon {

using nlohmann::json;

namespace {

constexpr const char* kFeatureOrder = "view-major [fused, add]";

std::filesystem::path manifest_path(const std::filesystem::path& dir) { return dir / "manifest.json"; }
std::filesystem::path blob_path(const std::filesystem::path& dir) { return dir / "params.bin"; }

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  json j;
  j["format_version"] = kCheckpointFormat;
  j["role"] = std::string(role_name(ckpt.model.role));
  j["views"] = ckpt.model.views;
  j["feature_order"] = ckpt.model.role == Role::student ? kFeatureOrder : "view-major";
  j["config"] = json::parse(config_to_json(ckpt.config));
  j["step"] = ckpt.step;
  j["metrics"] = json::object();
  for (const auto& [k, v] : ckpt.metrics) j["metrics"][k] = v;
  json params = json::array();
  std::vector<float> blob;
  blob.reserve(ckpt.model.params.total_elements());
  for (const auto& [name, t] : ckpt.model.params) {
    params.push_back({{"name", name}, {"shape", t.shape()}});
    blob.insert(blob.end(), t.data().begin(), t.data().end());
  }
  j["parameters"] = params;
  std::filesystem::create_directories(dir);
  write_f32_blob(blob_path(dir), blob);
  write_text(manifest_path(dir), j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::filesystem::path mpath = manifest_path(dir);
  json j;
  try {
    j = json::parse(read_text(mpath));
  } catch (const json::exception& e) {
    throw ParseError(mpath.string() + ": " + e.what());
  }
  Checkpoint ckpt;
  std::vector<std::pair<std::string, ad::Shape>> stored;
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormat) {
      throw ConfigError("checkpoint " + dir.string() + " has format version " + std::to_string(version) +
                        ", this build reads version " + std::to_string(kCheckpointFormat));
    }
    ckpt.config = config_from_json(j.at("config").dump());
    ckpt.model.role = parse_role(j.at("role").get<std::string>());
    ckpt.model.views = j.at("views").get<std::size_t>();
    ckpt.step = j.at("step").get<std::size_t>();
    for (const auto& [k, v] : j.at("metrics").items()) ckpt.metrics[k] = v.get<double>();
    for (const auto& p : j.at("parameters")) stored.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<ad::Shape>());
  } catch (const json::exception& e) {
    throw ParseError(mpath.string() + ": " + e.what());
  }
  if (ckpt.model.views != ckpt.config.geometry.views.size())
    throw ConfigError("checkpoint " + dir.string() + ": view count disagrees with its config");

  // The stored config fixes the architecture; the manifest must describe exactly it.
  Model<float> expected = init_model<float>(ckpt.model.role, ckpt.config.model, ckpt.model.views, 0);
  if (stored.size() != expected.params.size())
    throw ConfigError("checkpoint " + dir.string() + ": " + std::to_string(stored.size()) + " parameters, architecture has " +
                      std::to_string(expected.params.size()));
  std::size_t i = 0;
  for (const auto& [name, t] : expected.params) {
    const auto& [sname, sshape] = stored[i++];
    if (sname != name || sshape != t.shape()) {
      throw ConfigError("checkpoint " + dir.string() + ": parameter '" + sname + "' " + ad::shape_string(sshape) +
                        " does not match expected '" + name + "' " + ad::shape_string(t.shape()));
    }
  }
  const std::vector<float> blob = read_f32_blob(blob_path(dir), expected.params.total_elements());
  std::size_t off = 0;
  for (auto& [name, t] : expected.params) {
    std::copy(blob.begin() + static_cast<std::ptrdiff_t>(off), blob.begin() + static_cast<std::ptrdiff_t>(off + t.size()),
              t.data().begin());
    off += t.size();
  }
  ckpt.model.config = ckpt.config.model;
  ckpt.model.params = std::move(expected.params);
  return ckpt;
}

std::string checkpoint_hash(const std::filesystem::path& dir) {
  return fnv1a_hex(read_text(manifest_path(dir)) + read_text(blob_path(dir)));
}

}  // namespace xrecon
