#include "xrecon/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "xrecon/errors.hpp"

namespace xrecon {

OccupancyGrid::OccupancyGrid(std::array<std::size_t, 3> d, Vec3 sp, Vec3 org)
    : dims(d), spacing(sp), origin(org), values(d[0] * d[1] * d[2], 0.0f) {}

OccupancyGrid OccupancyGrid::covering(const ReconSpace& space, std::size_t r) {
  if (r < 2) throw InvalidArgument("OccupancyGrid: resolution must be >= 2");
  const Vec3 e = space.extent();
  const auto n = static_cast<double>(r);
  const Vec3 sp{e.x / n, e.y / n, e.z / n};
  return OccupancyGrid({r, r, r}, sp, space.min + sp * 0.5);
}

Vec3 OccupancyGrid::position(std::size_t i, std::size_t j, std::size_t k) const {
  return {origin.x + spacing.x * static_cast<double>(i), origin.y + spacing.y * static_cast<double>(j),
          origin.z + spacing.z * static_cast<double>(k)};
}

void OccupancyGrid::validate() const {
  if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2) throw InvalidArgument("OccupancyGrid: dims must be >= 2 per axis");
  if (values.size() != dims[0] * dims[1] * dims[2]) throw InvalidArgument("OccupancyGrid: value count does not match dims");
  for (float v : values)
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidArgument("OccupancyGrid: values must lie in [0, 1]");
}

double TriangleMesh::area() const {
  double total = 0;
  for (const auto& t : triangles)
    total += 0.5 * norm(cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]));
  return total;
}

std::vector<Vec3> sample_surface_points(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw EmptyInputError("sample_surface_points: mesh has no triangles");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    total += 0.5 * norm(cross(mesh.vertices[tri[1]] - mesh.vertices[tri[0]], mesh.vertices[tri[2]] - mesh.vertices[tri[0]]));
    cumulative[t] = total;
  }
  if (!(total > 0)) throw EmptyInputError("sample_surface_points: mesh has zero area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double pick = u01(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& tri = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
    const double r1 = std::sqrt(u01(rng)), r2 = u01(rng);
    const double a = 1 - r1, b = r1 * (1 - r2), c = r1 * r2;
    out.push_back(mesh.vertices[tri[0]] * a + mesh.vertices[tri[1]] * b + mesh.vertices[tri[2]] * c);
  }
  return out;
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::string text;
  text.reserve(mesh.vertices.size() * 40 + mesh.triangles.size() * 24);
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.6f %.6f %.6f\n", v.x, v.y, v.z);
    text += buf;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    text += buf;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TriangleMesh mesh;
  std::vector<std::pair<std::size_t, std::array<long long, 3>>> faces;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x = 0, y = 0, z = 0;
      if (!(ls >> x >> y >> z)) fail("vertex needs three coordinates");
      mesh.vertices.push_back({x, y, z});
    } else if (tag == "f") {
      std::vector<long long> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        try {
          std::size_t used = 0;
          const long long v = std::stoll(head, &used);
          if (used != head.size() || v == 0) fail("bad face index '" + tok + "'");
          // Negative indices count back from the latest vertex.
          idx.push_back(v > 0 ? v - 1 : static_cast<long long>(mesh.vertices.size()) + v);
        } catch (const std::logic_error&) {
          fail("bad face index '" + tok + "'");
        }
      }
      if (idx.size() < 3) fail("face needs at least three vertices");
      for (std::size_t q = 1; q + 1 < idx.size(); ++q) faces.push_back({line_no, {idx[0], idx[q], idx[q + 1]}});
    } else if (tag == "vn" || tag == "vt" || tag == "o" || tag == "g" || tag == "s" || tag == "usemtl" ||
               tag == "mtllib") {
      continue;
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  const auto count = static_cast<long long>(mesh.vertices.size());
  for (const auto& [ln, f] : faces) {
    for (long long v : f) {
      if (v < 0 || v >= count) {
        line_no = ln;
        fail("face index " + std::to_string(v + 1) + " out of range (" + std::to_string(count) + " vertices)");
      }
    }
    mesh.triangles.push_back(
        {static_cast<std::uint32_t>(f[0]), static_cast<std::uint32_t>(f[1]), static_cast<std::uint32_t>(f[2])});
  }
  return mesh;
}

}  // namespace xrecon
