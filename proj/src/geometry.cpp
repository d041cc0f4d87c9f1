#include "xrecon/geometry.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "xrecon/errors.hpp"

namespace xrecon {

void ConeBeamGeometry::validate() const {
  if (!(sid > 0)) throw InvalidArgument("geometry: sid must be positive, got " + std::to_string(sid));
  if (!(sdd > sid)) throw InvalidArgument("geometry: sdd must exceed sid");
  if (rows < 2 || cols < 2) throw InvalidArgument("geometry: detector must be at least 2x2 pixels");
  if (!(spacing_u > 0) || !(spacing_v > 0)) throw InvalidArgument("geometry: pixel spacing must be positive");
}

Vec3 ConeBeamGeometry::axis() const { return {-std::sin(view_angle), std::cos(view_angle), 0.0}; }

Vec3 ConeBeamGeometry::v_axis() const { return {0.0, 0.0, 1.0}; }

Vec3 ConeBeamGeometry::u_axis() const { return cross(v_axis(), axis()); }

Vec3 ConeBeamGeometry::pixel_position(double u, double v) const {
  const double du = (u - 0.5 * static_cast<double>(cols - 1)) * spacing_u;
  const double dv = (v - 0.5 * static_cast<double>(rows - 1)) * spacing_v;
  return detector_center() + u_axis() * du + v_axis() * dv;
}

double view_depth(const ConeBeamGeometry& geom, const Vec3& p) { return dot(p - geom.isocenter, geom.axis()); }

Projection project_point(const ConeBeamGeometry& geom, const Vec3& p) {
  const Vec3 a = geom.axis();
  const Vec3 rel = p - geom.source();
  const double along = dot(rel, a);
  if (!(along > 0)) throw ProjectionError("project_point: point lies at or behind the source plane");
  const Vec3 lateral = rel - a * along;
  const double mag = geom.sdd / along;
  Projection out;
  out.u = 0.5 * static_cast<double>(geom.cols - 1) + dot(lateral, geom.u_axis()) * mag / geom.spacing_u;
  out.v = 0.5 * static_cast<double>(geom.rows - 1) + dot(lateral, geom.v_axis()) * mag / geom.spacing_v;
  out.depth = along - geom.sid;
  return out;
}

void ReconSpace::validate() const {
  const Vec3 e = extent();
  if (!(e.x > 0 && e.y > 0 && e.z > 0)) throw InvalidArgument("recon space: extent must be positive on all axes");
}

std::size_t ViewSlabs::slab_of(double d) const {
  const std::size_t k = count();
  if (k == 0 || d < boundaries.front() || d > boundaries.back()) return k;
  auto it = std::upper_bound(boundaries.begin(), boundaries.end(), d);
  const auto idx = static_cast<std::size_t>(it - boundaries.begin());
  return idx == 0 ? 0 : std::min(idx - 1, k - 1);
}

ViewSlabs divide_subspaces(const ReconSpace& space, const ConeBeamGeometry& geom, std::size_t count,
                           std::size_t view) {
  if (count == 0) throw InvalidArgument("divide_subspaces: subspace count must be >= 1");
  space.validate();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner{(c & 1) ? space.max.x : space.min.x, (c & 2) ? space.max.y : space.min.y,
                      (c & 4) ? space.max.z : space.min.z};
    const double d = view_depth(geom, corner);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  ViewSlabs slabs;
  slabs.view = view;
  const double width = (hi - lo) / static_cast<double>(count);
  for (std::size_t k = 0; k <= count; ++k) {
    slabs.boundaries.push_back(k == count ? hi : lo + width * static_cast<double>(k));
  }
  for (std::size_t k = 0; k < count; ++k) {
    slabs.midpoints.push_back(0.5 * (slabs.boundaries[k] + slabs.boundaries[k + 1]));
  }
  return slabs;
}

std::vector<double> depth_weights(double d, const ViewSlabs& slabs) {
  std::vector<double> w(slabs.count());
  double total = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = 1.0 / std::max(std::abs(d - slabs.midpoints[k]), kDepthClamp);
    total += w[k];
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace xrecon
