#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "xrecon/errors.hpp"
#include "xrecon/mesh.hpp"

namespace xrecon {

namespace {

// Corner c of a cube sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
// Faces list their corners counter-clockwise seen from outside the cube.
constexpr std::array<std::array<int, 4>, 6> kFaces{{
    {0, 4, 6, 2},  // x = 0
    {1, 3, 7, 5},  // x = 1
    {0, 1, 5, 4},  // y = 0
    {2, 6, 7, 3},  // y = 1
    {0, 2, 3, 1},  // z = 0
    {4, 5, 7, 6},  // z = 1
}};

int edge_axis(int a, int b) {
  const int d = a ^ b;
  return d == 1 ? 0 : (d == 2 ? 1 : 2);
}

// Local edge slot 0..11: axis * 4 + position of the edge's low corner among
// the four corners with that axis bit clear.
int edge_slot(int a, int b) {
  const int axis = edge_axis(a, b);
  const int lo = std::min(a, b);
  int rest = 0;
  int bit = 0;
  for (int ax = 0; ax < 3; ++ax) {
    if (ax == axis) continue;
    rest |= ((lo >> ax) & 1) << bit;
    ++bit;
  }
  return axis * 4 + rest;
}

double cross_norm(const Vec3& a, const Vec3& b, const Vec3& c) { return norm(cross(b - a, c - a)); }

}  // namespace

TriangleMesh marching_cubes(const OccupancyGrid& grid, double iso) {
  grid.validate();

  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
  const auto [nx, ny, nz] = grid.dims;

  std::array<double, 8> val{};
  std::array<std::size_t, 8> gidx{};
  std::array<int, 12> next{};
  std::array<std::uint32_t, 12> vert{};
  std::vector<std::uint32_t> loop;

  for (std::size_t k = 0; k + 1 < nz; ++k)
    for (std::size_t j = 0; j + 1 < ny; ++j)
      for (std::size_t i = 0; i + 1 < nx; ++i) {
        int mask = 0;
        for (int c = 0; c < 8; ++c) {
          gidx[c] = grid.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
          val[c] = grid.values[gidx[c]];
          if (val[c] > iso) mask |= 1 << c;
        }
        if (mask == 0 || mask == 255) continue;

        auto inside = [&](int c) { return (mask >> c) & 1; };
        auto vertex_on = [&](int a, int b) -> std::uint32_t {
          const int lo = std::min(a, b), hi = std::max(a, b);
          const int axis = edge_axis(a, b);
          const std::uint64_t key = static_cast<std::uint64_t>(gidx[lo]) * 3 + static_cast<std::uint64_t>(axis);
          const auto it = edge_vertex.find(key);
          if (it != edge_vertex.end()) return it->second;
          double t = (iso - val[lo]) / (val[hi] - val[lo]);
          t = std::clamp(t, 1e-4, 1.0 - 1e-4);
          const double fi = static_cast<double>(i + (lo & 1)) + (axis == 0 ? t : 0.0);
          const double fj = static_cast<double>(j + ((lo >> 1) & 1)) + (axis == 1 ? t : 0.0);
          const double fk = static_cast<double>(k + ((lo >> 2) & 1)) + (axis == 2 ? t : 0.0);
          const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
          mesh.vertices.push_back({grid.origin.x + grid.spacing.x * fi, grid.origin.y + grid.spacing.y * fj,
                                   grid.origin.z + grid.spacing.z * fk});
          edge_vertex.emplace(key, id);
          return id;
        };

        next.fill(-1);
        for (const auto& face : kFaces) {
          // Crossings in counter-clockwise order; `leaving` marks inside -> outside.
          std::array<int, 4> slot{};
          std::array<bool, 4> leaving{};
          int count = 0;
          for (int e = 0; e < 4; ++e) {
            const int a = face[e], b = face[(e + 1) % 4];
            if (inside(a) == inside(b)) continue;
            slot[count] = edge_slot(a, b);
            leaving[count] = inside(a);
            vert[slot[count]] = vertex_on(a, b);
            ++count;
          }
          if (count == 2) {
            const int from = leaving[0] ? 0 : 1;
            next[slot[from]] = slot[1 - from];
          } else if (count == 4) {
            const double v0 = val[face[0]], v1 = val[face[1]], v2 = val[face[2]], v3 = val[face[3]];
            const double saddle = (v0 * v2 - v1 * v3) / (v0 + v2 - v1 - v3);
            const bool inside_joined = saddle > iso;
            // Crossing e lies on edge (face[e], face[e+1]); leaving crossings
            // pair either with the following crossing (inside corners joined)
            // or the preceding one (inside corners separated).
            for (int e = 0; e < 4; ++e) {
              if (!leaving[e]) continue;
              const int partner = inside_joined ? (e + 1) % 4 : (e + 3) % 4;
              next[slot[e]] = slot[partner];
            }
          }
        }

        std::array<bool, 12> used{};
        for (int s = 0; s < 12; ++s) {
          if (next[s] < 0 || used[s]) continue;
          loop.clear();
          int cur = s;
          while (!used[cur]) {
            used[cur] = true;
            loop.push_back(vert[cur]);
            cur = next[cur];
            if (cur < 0) throw NumericError("marching_cubes: open contour in cube (non-finite grid values?)");
          }
          // The chained loop winds around the inward normal; emit it reversed.
          auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
            if (cross_norm(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]) == 0.0) return;
            mesh.triangles.push_back({a, c, b});
          };
          if (loop.size() == 3) {
            emit(loop[0], loop[1], loop[2]);
            continue;
          }
          Vec3 centroid{};
          for (std::uint32_t v : loop) centroid += mesh.vertices[v];
          centroid = centroid / static_cast<double>(loop.size());
          const auto center = static_cast<std::uint32_t>(mesh.vertices.size());
          mesh.vertices.push_back(centroid);
          for (std::size_t q = 0; q < loop.size(); ++q) emit(center, loop[q], loop[(q + 1) % loop.size()]);
        }
      }
  return mesh;
}

}  // namespace xrecon
