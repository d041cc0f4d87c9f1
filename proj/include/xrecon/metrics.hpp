#pragma once

#include <vector>

#include "xrecon/geometry.hpp"

namespace xrecon {

using PointSet = std::vector<Vec3>;

/// Half the sum of the two mean nearest-neighbour distances (Euclidean, mm).
/// Brute force up to 512 points per set, a uniform-grid search above.
double chamfer_distance(const PointSet& a, const PointSet& b);
/// Always brute force; the reference the accelerated path must match.
double chamfer_distance_brute(const PointSet& a, const PointSet& b);

inline constexpr std::size_t kDefaultEmdLimit = 512;

/// Mean matched distance under the optimal bijection, solved exactly with the
/// Hungarian algorithm. Throws InvalidArgument for unequal sizes and
/// CapabilityError above `limit` points.
double earth_movers_distance(const PointSet& a, const PointSet& b, std::size_t limit = kDefaultEmdLimit);

/// Minimum-cost perfect assignment for a square row-major cost matrix.
/// Returns the column assigned to each row.
std::vector<std::size_t> hungarian_assignment(const std::vector<double>& cost, std::size_t n);

}  // namespace xrecon
