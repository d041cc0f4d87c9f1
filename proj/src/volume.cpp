#include "xrecon/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "xrecon/errors.hpp"

namespace xrecon {

using nlohmann::json;

Volume3D::Volume3D(std::array<std::size_t, 3> d, Vec3 sp, Vec3 org)
    : dims(d), spacing(sp), origin(org), values(d[0] * d[1] * d[2], 0.0f) {}

Volume3D Volume3D::covering(const ReconSpace& space, std::size_t n) {
  const Vec3 e = space.extent();
  const Vec3 sp{e.x / static_cast<double>(n), e.y / static_cast<double>(n), e.z / static_cast<double>(n)};
  return Volume3D({n, n, n}, sp, space.min + sp * 0.5);
}

Vec3 Volume3D::voxel_center(std::size_t i, std::size_t j, std::size_t k) const {
  return {origin.x + spacing.x * static_cast<double>(i), origin.y + spacing.y * static_cast<double>(j),
          origin.z + spacing.z * static_cast<double>(k)};
}

double Volume3D::sample(const Vec3& p) const {
  const double fx = (p.x - origin.x) / spacing.x;
  const double fy = (p.y - origin.y) / spacing.y;
  const double fz = (p.z - origin.z) / spacing.z;
  const auto nx = static_cast<double>(dims[0] - 1), ny = static_cast<double>(dims[1] - 1),
             nz = static_cast<double>(dims[2] - 1);
  if (fx < 0 || fy < 0 || fz < 0 || fx > nx || fy > ny || fz > nz) return 0.0;
  const auto i = std::min(static_cast<std::size_t>(fx), dims[0] - 2);
  const auto j = std::min(static_cast<std::size_t>(fy), dims[1] - 2);
  const auto k = std::min(static_cast<std::size_t>(fz), dims[2] - 2);
  const double tx = fx - static_cast<double>(i), ty = fy - static_cast<double>(j), tz = fz - static_cast<double>(k);
  const std::size_t sx = 1, sy = dims[0], sz = dims[0] * dims[1];
  const float* v = values.data() + index(i, j, k);
  const double c00 = v[0] * (1 - tx) + v[sx] * tx;
  const double c10 = v[sy] * (1 - tx) + v[sy + sx] * tx;
  const double c01 = v[sz] * (1 - tx) + v[sz + sx] * tx;
  const double c11 = v[sz + sy] * (1 - tx) + v[sz + sy + sx] * tx;
  const double c0 = c00 * (1 - ty) + c10 * ty;
  const double c1 = c01 * (1 - ty) + c11 * ty;
  return c0 * (1 - tz) + c1 * tz;
}

void Volume3D::validate() const {
  if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2) throw InvalidArgument("volume: dims must be >= 2 per axis");
  if (values.size() != dims[0] * dims[1] * dims[2]) throw InvalidArgument("volume: value count does not match dims");
  if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0)) throw InvalidArgument("volume: spacing must be positive");
  for (float v : values) {
    if (!std::isfinite(v) || v < 0) throw InvalidArgument("volume: attenuation must be finite and >= 0");
  }
}

DRRImage normalize_image(const DRRImage& img) {
  DRRImage out = img;
  if (img.pixels.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const double lo = *lo_it, hi = *hi_it;
  const double range = hi - lo;
  for (float& p : out.pixels) p = range > 0 ? static_cast<float>((p - lo) / range) : 0.0f;
  // Normalizing twice keeps the first record.
  if (!img.normalized) {
    out.norm_min = lo;
    out.norm_max = hi;
  }
  out.normalized = true;
  return out;
}

DRRImage denormalize_image(const DRRImage& img) {
  DRRImage out = img;
  if (!img.normalized) return out;
  const double range = img.norm_max - img.norm_min;
  for (float& p : out.pixels) p = static_cast<float>(img.norm_min + p * range);
  out.normalized = false;
  return out;
}

namespace {

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  std::filesystem::path p = stem;
  p += ext;
  return p;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return text;
}

void write_f32_blob(const std::filesystem::path& path, const std::vector<float>& values) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  std::vector<std::uint32_t> words(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t w = std::bit_cast<std::uint32_t>(values[i]);
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
    words[i] = w;
  }
  out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<float> read_f32_blob(const std::filesystem::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * 4) {
    throw ParseError(path.string() + ": expected " + std::to_string(expected * 4) + " bytes, found " +
                     std::to_string(bytes));
  }
  in.seekg(0);
  std::vector<std::uint32_t> words(expected);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  std::vector<float> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t w = words[i];
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
    out[i] = std::bit_cast<float>(w);
  }
  return out;
}

void write_volume(const Volume3D& vol, const std::filesystem::path& stem) {
  json j;
  j["dims"] = vol.dims;
  j["spacing"] = {vol.spacing.x, vol.spacing.y, vol.spacing.z};
  j["origin"] = {vol.origin.x, vol.origin.y, vol.origin.z};
  j["dtype"] = "float32";
  j["endian"] = "little";
  write_text(with_ext(stem, ".json"), j.dump(2) + "\n");
  write_f32_blob(with_ext(stem, ".raw"), vol.values);
}

Volume3D read_volume(const std::filesystem::path& stem) {
  const json j = read_json(with_ext(stem, ".json"));
  try {
    const auto dims = j.at("dims").get<std::array<std::size_t, 3>>();
    const auto sp = j.at("spacing").get<std::array<double, 3>>();
    const auto org = j.at("origin").get<std::array<double, 3>>();
    Volume3D vol(dims, {sp[0], sp[1], sp[2]}, {org[0], org[1], org[2]});
    vol.values = read_f32_blob(with_ext(stem, ".raw"), dims[0] * dims[1] * dims[2]);
    vol.validate();
    return vol;
  } catch (const json::exception& e) {
    throw ParseError(stem.string() + ".json: " + e.what());
  }
}

void write_image(const DRRImage& img, const std::filesystem::path& stem) {
  json j;
  j["view"] = img.view;
  j["rows"] = img.rows;
  j["cols"] = img.cols;
  j["normalized"] = img.normalized;
  j["norm_min"] = img.norm_min;
  j["norm_max"] = img.norm_max;
  j["dtype"] = "float32";
  j["endian"] = "little";
  write_text(with_ext(stem, ".json"), j.dump(2) + "\n");
  write_f32_blob(with_ext(stem, ".raw"), img.pixels);
}

DRRImage read_image(const std::filesystem::path& stem) {
  const json j = read_json(with_ext(stem, ".json"));
  try {
    DRRImage img;
    img.view = j.at("view").get<std::size_t>();
    img.rows = j.at("rows").get<std::size_t>();
    img.cols = j.at("cols").get<std::size_t>();
    img.normalized = j.at("normalized").get<bool>();
    img.norm_min = j.at("norm_min").get<double>();
    img.norm_max = j.at("norm_max").get<double>();
    img.pixels = read_f32_blob(with_ext(stem, ".raw"), img.rows * img.cols);
    return img;
  } catch (const json::exception& e) {
    throw ParseError(stem.string() + ".json: " + e.what());
  }
}

void write_pgm(const DRRImage& img, const std::filesystem::path& path) {
  const DRRImage n = normalize_image(img);
  std::string data = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
  for (float p : n.pixels) data.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(p * 255.0f))));
  write_text(path, data);
}

}  // namespace xrecon
