#include "xrecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xrecon/errors.hpp"

namespace xrecon {

namespace {

constexpr std::size_t kBruteLimit = 512;

void check_points(const PointSet& s, const char* what) {
  if (s.empty()) throw EmptyInputError(std::string(what) + ": point set is empty");
  for (const Vec3& p : s)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw InvalidArgument(std::string(what) + ": non-finite coordinate");
}

double mean_nn_brute(const PointSet& from, const PointSet& to) {
  double sum = 0;
  for (const Vec3& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : to) best = std::min(best, norm(p - q));
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

// Exact nearest-neighbour search over a uniform grid of `to`.
class PointGrid {
 public:
  PointGrid(const PointSet& to, Vec3 lo, Vec3 hi) : pts_(to), lo_(lo) {
    const Vec3 e = hi - lo;
    const double vol = std::max(e.x, 1e-9) * std::max(e.y, 1e-9) * std::max(e.z, 1e-9);
    cell_ = std::max(std::cbrt(vol / static_cast<double>(to.size())) * 1.5, 1e-6);
    for (std::size_t a = 0; a < 3; ++a) n_[a] = static_cast<std::size_t>(std::floor(e[a] / cell_)) + 1;
    start_.assign(n_[0] * n_[1] * n_[2] + 1, 0);
    std::vector<std::size_t> cell_of(to.size());
    for (std::size_t i = 0; i < to.size(); ++i) {
      cell_of[i] = linear(coord(to[i]));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    items_.resize(to.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < to.size(); ++i) items_[fill[cell_of[i]]++] = i;
  }

  double nearest(const Vec3& p) const {
    const auto c = coord(p);
    double best = std::numeric_limits<double>::infinity();
    const std::size_t max_r = std::max({n_[0], n_[1], n_[2]});
    for (std::size_t r = 0; r <= max_r; ++r) {
      visit_shell(c, static_cast<long long>(r), p, best);
      if (best <= static_cast<double>(r) * cell_) break;
    }
    return best;
  }

 private:
  std::array<std::size_t, 3> coord(const Vec3& p) const {
    std::array<std::size_t, 3> c{};
    for (std::size_t a = 0; a < 3; ++a) {
      const double f = std::floor((p[a] - lo_[a]) / cell_);
      c[a] = static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(n_[a] - 1)));
    }
    return c;
  }
  std::size_t linear(const std::array<std::size_t, 3>& c) const { return c[0] + n_[0] * (c[1] + n_[1] * c[2]); }

  void visit_shell(const std::array<std::size_t, 3>& c, long long r, const Vec3& p, double& best) const {
    for (long long dz = -r; dz <= r; ++dz)
      for (long long dy = -r; dy <= r; ++dy)
        for (long long dx = -r; dx <= r; ++dx) {
          if (std::max({std::llabs(dx), std::llabs(dy), std::llabs(dz)}) != r) continue;
          const long long x = static_cast<long long>(c[0]) + dx, y = static_cast<long long>(c[1]) + dy,
                          z = static_cast<long long>(c[2]) + dz;
          if (x < 0 || y < 0 || z < 0 || x >= static_cast<long long>(n_[0]) || y >= static_cast<long long>(n_[1]) ||
              z >= static_cast<long long>(n_[2]))
            continue;
          const std::size_t cell = linear({static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                           static_cast<std::size_t>(z)});
          for (std::size_t q = start_[cell]; q < start_[cell + 1]; ++q) best = std::min(best, norm(p - pts_[items_[q]]));
        }
  }

  const PointSet& pts_;
  Vec3 lo_;
  double cell_ = 1;
  std::array<std::size_t, 3> n_{};
  std::vector<std::size_t> start_;
  std::vector<std::size_t> items_;
};

double mean_nn_grid(const PointSet& from, const PointSet& to, Vec3 lo, Vec3 hi) {
  const PointGrid grid(to, lo, hi);
  double sum = 0;
  for (const Vec3& p : from) sum += grid.nearest(p);
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance_brute(const PointSet& a, const PointSet& b) {
  check_points(a, "chamfer_distance");
  check_points(b, "chamfer_distance");
  return 0.5 * (mean_nn_brute(a, b) + mean_nn_brute(b, a));
}

double chamfer_distance(const PointSet& a, const PointSet& b) {
  check_points(a, "chamfer_distance");
  check_points(b, "chamfer_distance");
  if (a.size() <= kBruteLimit && b.size() <= kBruteLimit) return chamfer_distance_brute(a, b);
  Vec3 lo = a.front(), hi = a.front();
  for (const PointSet* s : {&a, &b})
    for (const Vec3& p : *s) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
  return 0.5 * (mean_nn_grid(a, b, lo, hi) + mean_nn_grid(b, a, lo, hi));
}

std::vector<std::size_t> hungarian_assignment(const std::vector<double>& cost, std::size_t n) {
  if (cost.size() != n * n) throw InvalidArgument("hungarian_assignment: cost matrix must be n x n");
  // Shortest augmenting paths with row/column potentials; 1-based with a
  // virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n);
  for (std::size_t j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

double earth_movers_distance(const PointSet& a, const PointSet& b, std::size_t limit) {
  check_points(a, "earth_movers_distance");
  check_points(b, "earth_movers_distance");
  if (a.size() != b.size()) {
    throw InvalidArgument("earth_movers_distance: sets differ in size (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  const std::size_t n = a.size();
  if (n > limit) {
    throw CapabilityError("earth_movers_distance: " + std::to_string(n) + " points exceed the exact-solver limit of " +
                          std::to_string(limit) + "; subsample both sets first");
  }
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = norm(a[i] - b[j]);
  const auto assign = hungarian_assignment(cost, n);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += cost[i * n + assign[i]];
  return sum / static_cast<double>(n);
}

}  // namespace xrecon
