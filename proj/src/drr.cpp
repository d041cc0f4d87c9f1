#include "xrecon/drr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xrecon/errors.hpp"

namespace xrecon {

namespace {

double resolve_step(const Volume3D& vol, const RenderOptions& options) {
  if (options.step) {
    if (!(*options.step > 0)) throw InvalidArgument("render_drr: step must be positive");
    return *options.step;
  }
  return std::min({vol.spacing.x, vol.spacing.y, vol.spacing.z}) / 4.0;
}

// Ray/box intersection against the hull of voxel centers. Returns false on a miss.
bool clip_ray(const Volume3D& vol, const Vec3& origin, const Vec3& dir, double& t0, double& t1) {
  t0 = 0;
  t1 = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < 3; ++a) {
    const double lo = vol.origin[a];
    const double hi = vol.origin[a] + vol.spacing[a] * static_cast<double>(vol.dims[a] - 1);
    const double o = origin[a], d = dir[a];
    if (std::abs(d) < 1e-15) {
      if (o < lo || o > hi) return false;
      continue;
    }
    double ta = (lo - o) / d, tb = (hi - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 > t0;
}

// Marches every detector ray once and bins each sample into the interval
// containing its depth. `intervals` empty means a single unmasked image.
std::vector<DRRImage> march(const Volume3D& vol, const ConeBeamGeometry& geom, std::size_t view,
                            const std::vector<DepthInterval>& intervals, const RenderOptions& options) {
  geom.validate();
  vol.validate();
  const double step = resolve_step(vol, options);
  const std::size_t outputs = intervals.empty() ? 1 : intervals.size();
  std::vector<DRRImage> images(outputs);
  for (auto& img : images) {
    img.view = view;
    img.rows = geom.rows;
    img.cols = geom.cols;
    img.pixels.assign(geom.rows * geom.cols, 0.0f);
  }
  const Vec3 src = geom.source();
  const Vec3 axis = geom.axis();
  const double src_depth = dot(src - geom.isocenter, axis);
  std::vector<double> acc(outputs);
  for (std::size_t r = 0; r < geom.rows; ++r) {
    for (std::size_t c = 0; c < geom.cols; ++c) {
      const Vec3 dir = normalized(geom.pixel_position(static_cast<double>(c), static_cast<double>(r)) - src);
      double t0 = 0, t1 = 0;
      if (!clip_ray(vol, src, dir, t0, t1)) continue;
      const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) / step));
      if (n == 0) continue;
      const double dt = (t1 - t0) / static_cast<double>(n);
      const double depth_rate = dot(dir, axis);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = t0 + (static_cast<double>(i) + 0.5) * dt;
        const double mu = vol.sample(src + dir * t);
        if (mu == 0.0) continue;
        if (intervals.empty()) {
          acc[0] += mu;
          continue;
        }
        const double depth = src_depth + t * depth_rate;
        for (std::size_t k = 0; k < intervals.size(); ++k) {
          if (intervals[k].contains(depth)) {
            acc[k] += mu;
            break;
          }
        }
      }
      for (std::size_t k = 0; k < outputs; ++k) images[k].pixels[r * geom.cols + c] = static_cast<float>(acc[k] * dt);
    }
  }
  return images;
}

}  // namespace

DepthInterval slab_interval(const ViewSlabs& slabs, std::size_t k) {
  if (k >= slabs.count()) throw InvalidArgument("slab_interval: slab index out of range");
  return {slabs.boundaries[k], slabs.boundaries[k + 1], k + 1 == slabs.count()};
}

DRRImage render_drr(const Volume3D& vol, const ConeBeamGeometry& geom, std::size_t view,
                    const std::optional<DepthInterval>& mask, const RenderOptions& options) {
  std::vector<DepthInterval> intervals;
  if (mask) intervals.push_back(*mask);
  return march(vol, geom, view, intervals, options).front();
}

std::vector<DRRImage> render_augmented_set(const Volume3D& vol, const ConeBeamGeometry& geom, const ViewSlabs& slabs,
                                           const RenderOptions& options) {
  std::vector<DepthInterval> intervals;
  for (std::size_t k = 0; k < slabs.count(); ++k) intervals.push_back(slab_interval(slabs, k));
  return march(vol, geom, slabs.view, intervals, options);
}

}  // namespace xrecon
