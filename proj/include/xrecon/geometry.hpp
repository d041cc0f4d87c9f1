#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace xrecon {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Vec3&) const = default;
  double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return a / norm(a); }

/// Point source and flat detector rotated about the world z axis through the
/// isocenter. At view_angle 0 rays travel along +y (AP); at pi/2 along -x
/// (lateral, source on the +x side). Detector v is world +z, u = v x axis.
struct ConeBeamGeometry {
  double sid = 1000.0;  // source to isocenter, mm
  double sdd = 1500.0;  // source to detector, mm
  std::size_t rows = 64;
  std::size_t cols = 64;
  double spacing_u = 2.0;  // mm per pixel along u (columns)
  double spacing_v = 2.0;  // mm per pixel along v (rows)
  double view_angle = 0.0;
  Vec3 isocenter{};

  /// Throws InvalidArgument when sdd <= sid, sid <= 0, detector < 2x2 or spacing <= 0.
  void validate() const;

  Vec3 axis() const;
  Vec3 u_axis() const;
  Vec3 v_axis() const;
  Vec3 source() const { return isocenter - axis() * sid; }
  Vec3 detector_center() const { return isocenter + axis() * (sdd - sid); }
  /// World position of continuous detector pixel coordinate (u, v).
  Vec3 pixel_position(double u, double v) const;
};

struct Projection {
  double u = 0;      // column coordinate, 0 at the detector corner pixel center
  double v = 0;      // row coordinate
  double depth = 0;  // signed distance along the principal axis from the isocenter
};

/// Perspective projection from the source onto the detector. Throws
/// ProjectionError when p is at or behind the source plane.
Projection project_point(const ConeBeamGeometry& geom, const Vec3& p);

/// Signed view-depth of p (mm), negative toward the source.
double view_depth(const ConeBeamGeometry& geom, const Vec3& p);

/// Axis-aligned target volume, centered on the isocenter.
struct ReconSpace {
  Vec3 min{-40, -40, -40};
  Vec3 max{40, 40, 40};

  void validate() const;
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return (min + max) * 0.5; }
  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
  }
};

/// Equal-thickness partition of the recon space along one view's depth axis.
struct ViewSlabs {
  std::size_t view = 0;
  std::vector<double> boundaries;  // K+1, strictly increasing
  std::vector<double> midpoints;   // K

  std::size_t count() const noexcept { return midpoints.size(); }
  /// Index of the slab holding depth d; slabs are half-open except the last.
  /// Returns count() when d is outside the partition.
  std::size_t slab_of(double d) const;
};

ViewSlabs divide_subspaces(const ReconSpace& space, const ConeBeamGeometry& geom, std::size_t count,
                           std::size_t view = 0);

inline constexpr double kDepthClamp = 1e-6;  // mm

/// Normalized inverse-distance weights of depth d to each slab midpoint.
std::vector<double> depth_weights(double d, const ViewSlabs& slabs);

}  // namespace xrecon
