#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "xrecon/errors.hpp"
#include "xrecon/mesh.hpp"
#include "xrecon/volume.hpp"

using namespace xrecon;

namespace {

// Linear ramp across the surface, clamped to [0, 1]: 0.5 on the sphere.
OccupancyGrid sphere_grid(std::size_t r, double radius) {
  OccupancyGrid g = OccupancyGrid::covering(ReconSpace{}, r);
  const double h = g.spacing.x;
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t i = 0; i < r; ++i) {
        const double sdf = norm(g.position(i, j, k)) - radius;
        g.at(i, j, k) = float(std::clamp(0.5 - sdf / (2 * h), 0.0, 1.0));
      }
  return g;
}

// Sum of random Gaussian bumps, forced to zero on the grid border so every
// iso-surface is closed.
OccupancyGrid random_smooth_grid(std::uint64_t seed, std::size_t r) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> pos(-25, 25), width(5, 14), amp(0.4, 1.2);
  std::vector<std::tuple<Vec3, double, double>> bumps;
  for (int b = 0; b < 6; ++b) bumps.emplace_back(Vec3{pos(gen), pos(gen), pos(gen)}, width(gen), amp(gen));
  OccupancyGrid g = OccupancyGrid::covering(ReconSpace{}, r);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t i = 0; i < r; ++i) {
        if (i == 0 || j == 0 || k == 0 || i + 1 == r || j + 1 == r || k + 1 == r) continue;
        double v = 0;
        for (const auto& [c, w, a] : bumps) v += a * std::exp(-std::pow(norm(g.position(i, j, k) - c) / w, 2));
        g.at(i, j, k) = float(std::min(v, 1.0));
      }
  return g;
}

// Every undirected edge is shared by exactly two triangles, with opposite
// directions (consistent orientation).
bool watertight(const TriangleMesh& m) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : m.triangles)
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = t[e], b = t[(e + 1) % 3];
      if (a == b) return false;
      if (++directed[{a, b}] > 1) return false;
    }
  for (const auto& [e, n] : directed)
    if (!directed.count({e.second, e.first})) return false;
  return true;
}

double signed_volume(const TriangleMesh& m) {
  double v = 0;
  for (const auto& t : m.triangles) v += dot(m.vertices[t[0]], cross(m.vertices[t[1]], m.vertices[t[2]])) / 6;
  return v;
}

double max_radius_error(const TriangleMesh& m, double radius) {
  double worst = 0;
  for (const Vec3& v : m.vertices) worst = std::max(worst, std::abs(norm(v) - radius));
  return worst;
}

}  // namespace

TEST(MarchingCubes, SphereRadiusErrorShrinksWithResolution) {
  const double radius = 25.0;
  const auto m32 = marching_cubes(sphere_grid(32, radius));
  const auto m64 = marching_cubes(sphere_grid(64, radius));
  const double e32 = max_radius_error(m32, radius) / 2.5;   // in voxels
  const double e64 = max_radius_error(m64, radius) / 1.25;
  EXPECT_LE(e32, 1.0);
  EXPECT_LE(e64, 0.5);
  EXPECT_LT(max_radius_error(m64, radius), max_radius_error(m32, radius));
  EXPECT_TRUE(watertight(m32));
  EXPECT_TRUE(watertight(m64));
  EXPECT_NEAR(m64.area(), 4 * std::numbers::pi * radius * radius, 0.02 * 4 * std::numbers::pi * radius * radius);
}

TEST(MarchingCubes, TrianglesFaceOutward) {
  const auto m = marching_cubes(sphere_grid(32, 20.0));
  const double want = 4.0 / 3 * std::numbers::pi * 8000;
  EXPECT_NEAR(signed_volume(m), want, 0.03 * want);
  for (const auto& t : m.triangles) {
    const Vec3 n = cross(m.vertices[t[1]] - m.vertices[t[0]], m.vertices[t[2]] - m.vertices[t[0]]);
    const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3;
    EXPECT_GT(dot(n, c), 0.0);
  }
}

TEST(MarchingCubes, WatertightOnRandomSmoothFields) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = marching_cubes(random_smooth_grid(seed, 40));
    ASSERT_FALSE(m.empty()) << seed;
    EXPECT_TRUE(watertight(m)) << "field " << seed;
    EXPECT_GT(signed_volume(m), 0.0);
  }
}

TEST(MarchingCubes, ComplementGivesSameSurfaceReversed) {
  for (std::uint64_t seed : {3u, 7u}) {
    const auto g = random_smooth_grid(seed, 32);
    OccupancyGrid c = g;
    for (float& v : c.values) v = 1.0f - v;
    const auto a = marching_cubes(g), b = marching_cubes(c);
    EXPECT_EQ(a.vertices.size(), b.vertices.size());
    EXPECT_EQ(a.triangles.size(), b.triangles.size());
    EXPECT_NEAR(a.area(), b.area(), 1e-6 * a.area());
    EXPECT_NEAR(signed_volume(a), -signed_volume(b), 1e-6 * std::abs(signed_volume(a)));
  }
}

TEST(MarchingCubes, UniformFieldsAreEmpty) {
  OccupancyGrid g = OccupancyGrid::covering(ReconSpace{}, 8);
  EXPECT_TRUE(marching_cubes(g).empty());
  std::fill(g.values.begin(), g.values.end(), 1.0f);
  EXPECT_TRUE(marching_cubes(g).empty());
}

TEST(MarchingCubes, SingleVoxelGivesClosedOctahedron) {
  OccupancyGrid g = OccupancyGrid::covering(ReconSpace{}, 5);
  g.at(2, 2, 2) = 1.0f;
  const auto m = marching_cubes(g);
  EXPECT_EQ(m.vertices.size(), 6u);
  EXPECT_EQ(m.triangles.size(), 8u);
  EXPECT_TRUE(watertight(m));
}

TEST(MarchingCubes, InvalidGridThrows) {
  OccupancyGrid g = OccupancyGrid::covering(ReconSpace{}, 4);
  g.values[0] = 1.5f;
  EXPECT_THROW(marching_cubes(g), InvalidArgument);
  EXPECT_THROW(OccupancyGrid::covering(ReconSpace{}, 1), InvalidArgument);
}

TEST(Surface, SamplesLieOnMeshAndAreSeeded) {
  const auto m = marching_cubes(sphere_grid(32, 20.0));
  const auto a = sample_surface_points(m, 500, 1), b = sample_surface_points(m, 500, 1);
  const auto c = sample_surface_points(m, 500, 2);
  ASSERT_EQ(a.size(), 500u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_NEAR(norm(a[i]), 20.0, 1.0);
  }
  EXPECT_FALSE(a[0] == c[0]);
  EXPECT_THROW(sample_surface_points(TriangleMesh{}, 10, 0), EmptyInputError);
}

TEST(Obj, RoundTrip) {
  support::TempDir dir("obj");
  const auto m = marching_cubes(sphere_grid(16, 20.0));
  write_obj(m, dir / "a.obj");
  const auto back = read_obj(dir / "a.obj");
  ASSERT_EQ(back.vertices.size(), m.vertices.size());
  EXPECT_EQ(back.triangles, m.triangles);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) EXPECT_NEAR(norm(back.vertices[i] - m.vertices[i]), 0.0, 1e-5);
  write_obj(back, dir / "b.obj");
  EXPECT_EQ(read_text(dir / "a.obj"), read_text(dir / "b.obj"));
}

TEST(Obj, AcceptsSlashFormsAndComments) {
  support::TempDir dir("obj_forms");
  write_text(dir / "m.obj", "# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 3\n");
  const auto m = read_obj(dir / "m.obj");
  EXPECT_EQ(m.vertices.size(), 3u);
  ASSERT_EQ(m.triangles.size(), 1u);
  EXPECT_EQ(m.triangles[0], (std::array<std::uint32_t, 3>{0, 1, 2}));
}

TEST(Obj, ParseErrorsNameTheLine) {
  support::TempDir dir("obj_bad");
  write_text(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n");
  try {
    read_obj(dir / "bad.obj");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
  }
  write_text(dir / "bad2.obj", "v 0 zero 0\n");
  EXPECT_THROW(read_obj(dir / "bad2.obj"), ParseError);
  EXPECT_THROW(read_obj(dir / "missing.obj"), IoError);
}
