#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "xrecon/geometry.hpp"

namespace xrecon {

/// Scalar field sampled at cell centers of a box: value (i,j,k) sits at
/// origin + spacing * (i,j,k). x varies fastest.
struct OccupancyGrid {
  std::array<std::size_t, 3> dims{0, 0, 0};
  Vec3 spacing{1, 1, 1};
  Vec3 origin{};
  std::vector<float> values;

  OccupancyGrid() = default;
  OccupancyGrid(std::array<std::size_t, 3> d, Vec3 sp, Vec3 org);
  /// R^3 cell centers spanning `space`.
  static OccupancyGrid covering(const ReconSpace& space, std::size_t r);

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + dims[0] * (j + dims[1] * k); }
  float& at(std::size_t i, std::size_t j, std::size_t k) { return values[index(i, j, k)]; }
  float at(std::size_t i, std::size_t j, std::size_t k) const { return values[index(i, j, k)]; }
  Vec3 position(std::size_t i, std::size_t j, std::size_t k) const;
  /// Throws InvalidArgument unless dims >= 2 and values are finite in [0, 1].
  void validate() const;
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const noexcept { return triangles.empty(); }
  double area() const;
};

/// Iso-surface extraction. Ambiguous faces are resolved with the asymptotic
/// decider so neighbouring cubes always agree, which keeps closed surfaces
/// watertight. Triangles face outward (toward decreasing values).
TriangleMesh marching_cubes(const OccupancyGrid& grid, double iso = 0.5);

/// Area-weighted uniform samples on the surface. Throws EmptyInputError for an
/// empty mesh.
std::vector<Vec3> sample_surface_points(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
/// Reads `v x y z` and `f a b c` records (1-based, `a/b/c` forms accepted).
/// Throws ParseError naming the line on malformed input.
TriangleMesh read_obj(const std::filesystem::path& path);

}  // namespace xrecon
