#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "xrecon/geometry.hpp"
#include "xrecon/volume.hpp"

namespace xrecon {

inline constexpr std::size_t kChannels = 2;  // left, right
enum class Lobe : std::size_t { left = 0, right = 1 };

/// Orthonormal frame; columns are the local axes expressed in world space.
struct Rotation {
  std::array<Vec3, 3> cols{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  Vec3 to_local(const Vec3& v) const { return {dot(cols[0], v), dot(cols[1], v), dot(cols[2], v)}; }
  Vec3 to_world(const Vec3& v) const { return cols[0] * v.x + cols[1] * v.y + cols[2] * v.z; }
};

struct Ellipsoid {
  Vec3 center;
  Vec3 radii;
  Rotation rotation;
};

struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius = 1;
};

using Primitive = std::variant<Ellipsoid, Capsule>;

/// Closed-set membership (boundary counts as inside).
bool contains(const Primitive& prim, const Vec3& p);
/// Exact Euclidean signed distance, negative inside.
double signed_distance(const Primitive& prim, const Vec3& p);
double analytic_volume(const Primitive& prim);
/// World-space bounding box (min, max).
std::pair<Vec3, Vec3> bounding_box(const Primitive& prim);
/// Exact distance from p to an axis-aligned ellipsoid centered at the origin.
double distance_to_ellipsoid(const Vec3& radii, const Vec3& p);

struct PhantomOptions {
  ReconSpace space{};
  std::size_t volume_resolution = 64;
  double bone_attenuation = 1.0;
  double tissue_attenuation = 0.2;
  double margin = 2.0;  // mm between lobes and recon-space faces
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  std::array<std::vector<Primitive>, kChannels> lobes;
  Ellipsoid tissue;
  ReconSpace space;
};

/// Deterministic two-lobe phantom: each lobe is a union of 2-4 ellipsoids and
/// capsules, inside a soft-tissue ellipsoid.
PhantomSpec make_phantom_spec(std::uint64_t seed, const PhantomOptions& options = {});
Volume3D voxelize(const PhantomSpec& spec, const PhantomOptions& options = {});

struct Phantom {
  PhantomSpec spec;
  Volume3D volume;
};
Phantom generate_phantom(std::uint64_t seed, const PhantomOptions& options = {});

/// Per-channel exact membership against the analytic primitives.
std::array<int, kChannels> occupancy_oracle(const PhantomSpec& spec, const Vec3& p);
/// Per-channel signed distance: min over the lobe's primitives.
std::array<double, kChannels> signed_distance(const PhantomSpec& spec, const Vec3& p);

/// Sampled points with ground-truth labels and an optional prediction slot.
struct OccupancyBatch {
  std::vector<Vec3> points;
  std::vector<std::array<float, kChannels>> labels;
  std::vector<std::array<float, kChannels>> predictions;

  std::size_t size() const noexcept { return points.size(); }
};

struct SamplingOptions {
  double band = 2.0;        // mm, near-surface band half-width
  double perturbation = 1.0;  // mm, std-dev of the surface jitter
};

/// N/2 uniform points over the recon space and N/2 points within `band` of a
/// lobe surface. Throws InvalidArgument for odd N and DegeneratePhantomError
/// when rejection sampling exceeds 1000*N trials.
OccupancyBatch sample_training_points(const PhantomSpec& spec, std::size_t n, std::uint64_t seed,
                                      const SamplingOptions& options = {});

struct DatasetSplit {
  std::vector<std::uint64_t> train;
  std::vector<std::uint64_t> val;
  std::vector<std::uint64_t> test;
};

/// Consecutive, disjoint seed ranges starting at base_seed.
DatasetSplit make_dataset(std::size_t n_train, std::size_t n_val, std::size_t n_test, std::uint64_t base_seed);

}  // namespace xrecon
