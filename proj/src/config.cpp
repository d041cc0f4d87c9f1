#include "xrecon/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xrecon/errors.hpp"

namespace xrecon {

using nlohmann::json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json to_json_tree(const RunConfig& c) {
  json j;
  j["geometry"] = {{"sid", c.geometry.sid},         {"sdd", c.geometry.sdd},
                   {"rows", c.geometry.rows},       {"cols", c.geometry.cols},
                   {"spacing", c.geometry.spacing}, {"views", c.geometry.views}};
  j["space"] = {{"min", vec_json(c.space.min)}, {"max", vec_json(c.space.max)}};
  j["data"] = {{"n_train", c.data.n_train},     {"n_val", c.data.n_val},   {"n_test", c.data.n_test},
               {"base_seed", c.data.base_seed}, {"points", c.data.points}, {"volume_resolution", c.data.volume_resolution}};
  j["model"] = {{"channels", c.model.channels},
                {"slabs", c.model.slabs},
                {"distill_layers", c.model.distill_layers},
                {"hidden", c.model.hidden},
                {"coord_channels", c.model.coord_channels},
                {"alpha", c.model.alpha}};
  j["train"] = {{"epochs", c.train.epochs}, {"lr", c.train.lr}, {"seed", c.train.seed}, {"val_points", c.train.val_points}};
  j["eval"] = {{"resolution", c.eval.resolution}, {"n_points", c.eval.n_points},
               {"runs", c.eval.runs},             {"emd_points", c.eval.emd_points},
               {"emd_limit", c.eval.emd_limit},   {"gt_resolution", c.eval.gt_resolution},
               {"chunk", c.eval.chunk},           {"emd", c.eval.emd}};
  j["paths"] = {{"data", c.paths.data}};
  return j;
}

RunConfig from_json_tree(const json& j) {
  RunConfig c;
  const json& g = j.at("geometry");
  c.geometry.sid = g.at("sid").get<double>();
  c.geometry.sdd = g.at("sdd").get<double>();
  c.geometry.rows = g.at("rows").get<std::size_t>();
  c.geometry.cols = g.at("cols").get<std::size_t>();
  c.geometry.spacing = g.at("spacing").get<double>();
  c.geometry.views = g.at("views").get<std::vector<double>>();
  c.space.min = vec_from(j.at("space").at("min"));
  c.space.max = vec_from(j.at("space").at("max"));
  const json& d = j.at("data");
  c.data.n_train = d.at("n_train").get<std::size_t>();
  c.data.n_val = d.at("n_val").get<std::size_t>();
  c.data.n_test = d.at("n_test").get<std::size_t>();
  c.data.base_seed = d.at("base_seed").get<std::uint64_t>();
  c.data.points = d.at("points").get<std::size_t>();
  c.data.volume_resolution = d.at("volume_resolution").get<std::size_t>();
  const json& m = j.at("model");
  c.model.channels = m.at("channels").get<std::size_t>();
  c.model.slabs = m.at("slabs").get<std::size_t>();
  c.model.distill_layers = m.at("distill_layers").get<std::vector<std::size_t>>();
  c.model.hidden = m.at("hidden").get<std::vector<std::size_t>>();
  c.model.coord_channels = m.at("coord_channels").get<bool>();
  c.model.alpha = m.at("alpha").get<double>();
  const json& t = j.at("train");
  c.train.epochs = t.at("epochs").get<std::size_t>();
  c.train.lr = t.at("lr").get<double>();
  c.train.seed = t.at("seed").get<std::uint64_t>();
  c.train.val_points = t.at("val_points").get<std::size_t>();
  const json& e = j.at("eval");
  c.eval.resolution = e.at("resolution").get<std::size_t>();
  c.eval.n_points = e.at("n_points").get<std::size_t>();
  c.eval.runs = e.at("runs").get<std::size_t>();
  c.eval.emd_points = e.at("emd_points").get<std::size_t>();
  c.eval.emd_limit = e.at("emd_limit").get<std::size_t>();
  c.eval.gt_resolution = e.at("gt_resolution").get<std::size_t>();
  c.eval.chunk = e.at("chunk").get<std::size_t>();
  c.eval.emd = e.at("emd").get<bool>();
  c.paths.data = j.at("paths").at("data").get<std::string>();
  return c;
}

std::string type_name(const json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number_unsigned()) return "non-negative integer";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_object()) return "object";
  if (j.is_array()) {
    if (!j.empty()) return "array of " + type_name(j.front()) + "s";
    return "array";
  }
  return "null";
}

bool compatible(const json& expected, const json& got) {
  if (expected.is_boolean()) return got.is_boolean();
  if (expected.is_number_unsigned()) return got.is_number_unsigned();
  if (expected.is_number()) return got.is_number();
  if (expected.is_string()) return got.is_string();
  if (expected.is_array()) {
    if (!got.is_array()) return false;
    if (expected.empty()) return true;
    for (const auto& item : got)
      if (!compatible(expected.front(), item)) return false;
    return true;
  }
  return false;
}

// Overlays `user` onto `base`, rejecting keys absent from the defaults.
void overlay(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string name = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("config: unknown key '" + name + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, name);
      continue;
    }
    if (name == "space.min" || name == "space.max") {
      if (!value.is_array() || value.size() != 3 || !compatible(slot, value))
        throw ConfigError("config: key '" + name + "' expects an array of 3 numbers, got " + type_name(value));
    } else if (!compatible(slot, value)) {
      throw ConfigError("config: key '" + name + "' expects " + type_name(slot) + ", got " + type_name(value));
    }
    slot = value;
  }
}

}  // namespace

std::vector<ConeBeamGeometry> GeometryConfig::build() const {
  std::vector<ConeBeamGeometry> out;
  for (double angle : views) {
    ConeBeamGeometry g;
    g.sid = sid;
    g.sdd = sdd;
    g.rows = rows;
    g.cols = cols;
    g.spacing_u = spacing;
    g.spacing_v = spacing;
    g.view_angle = angle;
    g.validate();
    out.push_back(g);
  }
  return out;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  try {
    geometry.build();
    space.validate();
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
  if (geometry.views.empty()) fail("geometry.views must list at least one angle");
  if (data.n_train == 0 || data.n_val == 0 || data.n_test == 0) fail("data split counts must be >= 1");
  if (data.points == 0 || data.points % 2 != 0) fail("data.points must be a positive even number");
  if (data.volume_resolution < 2) fail("data.volume_resolution must be >= 2");
  if (geometry.rows % 4 != 0 || geometry.cols % 4 != 0) fail("geometry.rows and geometry.cols must be multiples of 4");
  if (model.channels == 0) fail("model.channels must be >= 1");
  if (model.slabs == 0) fail("model.slabs must be >= 1");
  if (!(model.alpha >= 0)) fail("model.alpha must be >= 0");
  if (model.distill_layers.empty()) fail("model.distill_layers must not be empty");
  for (std::size_t l : model.distill_layers)
    if (l < 1 || l > 3) fail("model.distill_layers entries must be in 1..3");
  for (std::size_t h : model.hidden)
    if (h == 0) fail("model.hidden widths must be >= 1");
  if (!(train.lr > 0)) fail("train.lr must be positive");
  if (train.epochs == 0) fail("train.epochs must be >= 1");
  if (train.val_points == 0 || train.val_points % 2 != 0) fail("train.val_points must be a positive even number");
  if (eval.resolution < 8) fail("eval.resolution must be >= 8");
  if (eval.gt_resolution < 8) fail("eval.gt_resolution must be >= 8");
  if (eval.n_points == 0 || eval.runs == 0 || eval.chunk == 0) fail("eval.n_points, eval.runs and eval.chunk must be >= 1");
  if (eval.emd_points == 0 || eval.emd_points > eval.emd_limit) fail("eval.emd_points must be in 1..eval.emd_limit");
}

std::string config_to_json(const RunConfig& config) { return to_json_tree(config).dump(2) + "\n"; }

RunConfig config_from_json(const std::string& text) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  json merged = to_json_tree(RunConfig{});
  overlay(merged, user, "");
  RunConfig c;
  try {
    c = from_json_tree(merged);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(config_to_json(config)); }

std::string data_config_hash(const RunConfig& config) {
  const json full = to_json_tree(config);
  json j;
  j["geometry"] = full["geometry"];
  j["space"] = full["space"];
  j["data"] = full["data"];
  j["data"].erase("points");
  j["slabs"] = config.model.slabs;
  return fnv1a_hex(j.dump());
}

}  // namespace xrecon
