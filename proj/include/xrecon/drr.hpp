#pragma once

#include <optional>
#include <vector>

#include "xrecon/geometry.hpp"
#include "xrecon/volume.hpp"

namespace xrecon {

struct RenderOptions {
  /// Ray-marching step in mm. Defaults to a quarter of the smallest voxel spacing.
  std::optional<double> step;
};

/// Depth interval [lo, hi) along the view axis; `closed` makes it [lo, hi].
struct DepthInterval {
  double lo = 0;
  double hi = 0;
  bool closed = false;
  bool contains(double d) const { return d >= lo && (closed ? d <= hi : d < hi); }
};

/// Interval of slab k of `slabs` (the last slab is closed).
DepthInterval slab_interval(const ViewSlabs& slabs, std::size_t k);

/// Line integral of attenuation from the source to every pixel center, by
/// fixed-step midpoint sampling with trilinear lookups. With `mask`, samples
/// whose view-depth falls outside the interval contribute nothing.
DRRImage render_drr(const Volume3D& vol, const ConeBeamGeometry& geom, std::size_t view,
                    const std::optional<DepthInterval>& mask = std::nullopt, const RenderOptions& options = {});

/// One masked render per slab, ordered near to far, computed in a single march.
std::vector<DRRImage> render_augmented_set(const Volume3D& vol, const ConeBeamGeometry& geom, const ViewSlabs& slabs,
                                           const RenderOptions& options = {});

}  // namespace xrecon
