#include "xrecon/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xrecon/errors.hpp"

namespace xrecon {

namespace {

double robust_length(double a, double b) {
  const double m = std::max(std::abs(a), std::abs(b));
  if (m == 0) return 0;
  return m * std::sqrt((a / m) * (a / m) + (b / m) * (b / m));
}

double robust_length(double a, double b, double c) {
  const double m = std::max({std::abs(a), std::abs(b), std::abs(c)});
  if (m == 0) return 0;
  return m * std::sqrt((a / m) * (a / m) + (b / m) * (b / m) + (c / m) * (c / m));
}

// Bisection for the unique root of the secular equation (Eberly, "Distance
// from a point to an ellipse, an ellipsoid, or a hyperellipsoid").
double root_2d(double r0, double z0, double z1, double g) {
  const double n0 = r0 * z0;
  double s0 = z1 - 1, s1 = g < 0 ? 0 : robust_length(n0, z1) - 1, s = 0;
  for (int i = 0; i < 1100; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double a = n0 / (s + r0), b = z1 / (s + 1);
    g = a * a + b * b - 1;
    if (g > 0) {
      s0 = s;
    } else if (g < 0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

double root_3d(double r0, double r1, double z0, double z1, double z2, double g) {
  const double n0 = r0 * z0, n1 = r1 * z1;
  double s0 = z2 - 1, s1 = g < 0 ? 0 : robust_length(n0, n1, z2) - 1, s = 0;
  for (int i = 0; i < 1100; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double a = n0 / (s + r0), b = n1 / (s + r1), c = z2 / (s + 1);
    g = a * a + b * b + c * c - 1;
    if (g > 0) {
      s0 = s;
    } else if (g < 0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

// e0 >= e1 > 0, y0, y1 >= 0.
double ellipse_distance(double e0, double e1, double y0, double y1) {
  if (y1 > 0) {
    if (y0 > 0) {
      const double z0 = y0 / e0, z1 = y1 / e1, g = z0 * z0 + z1 * z1 - 1;
      if (g == 0) return 0;
      const double r0 = (e0 / e1) * (e0 / e1);
      const double s = root_2d(r0, z0, z1, g);
      const double x0 = r0 * y0 / (s + r0), x1 = y1 / (s + 1);
      return std::hypot(x0 - y0, x1 - y1);
    }
    return std::abs(y1 - e1);
  }
  const double numer0 = e0 * y0, denom0 = e0 * e0 - e1 * e1;
  if (numer0 < denom0) {
    const double xde0 = numer0 / denom0;
    const double x0 = e0 * xde0, x1 = e1 * std::sqrt(1 - xde0 * xde0);
    return std::hypot(x0 - y0, x1);
  }
  return std::abs(y0 - e0);
}

// e0 >= e1 >= e2 > 0, y0, y1, y2 >= 0.
double ellipsoid_distance_sorted(double e0, double e1, double e2, double y0, double y1, double y2) {
  if (y2 > 0) {
    if (y1 > 0) {
      if (y0 > 0) {
        const double z0 = y0 / e0, z1 = y1 / e1, z2 = y2 / e2;
        const double g = z0 * z0 + z1 * z1 + z2 * z2 - 1;
        if (g == 0) return 0;
        const double r0 = (e0 / e2) * (e0 / e2), r1 = (e1 / e2) * (e1 / e2);
        const double s = root_3d(r0, r1, z0, z1, z2, g);
        const double x0 = r0 * y0 / (s + r0), x1 = r1 * y1 / (s + r1), x2 = y2 / (s + 1);
        return robust_length(x0 - y0, x1 - y1, x2 - y2);
      }
      return ellipse_distance(e1, e2, y1, y2);
    }
    if (y0 > 0) return ellipse_distance(e0, e2, y0, y2);
    return std::abs(y2 - e2);
  }
  const double denom0 = e0 * e0 - e2 * e2, denom1 = e1 * e1 - e2 * e2;
  const double numer0 = e0 * y0, numer1 = e1 * y1;
  if (numer0 < denom0 && numer1 < denom1) {
    const double xde0 = numer0 / denom0, xde1 = numer1 / denom1;
    const double discr = 1 - xde0 * xde0 - xde1 * xde1;
    if (discr > 0) {
      const double x0 = e0 * xde0, x1 = e1 * xde1, x2 = e2 * std::sqrt(discr);
      return robust_length(x0 - y0, x1 - y1, x2);
    }
  }
  return ellipse_distance(e0, e1, y0, y1);
}

double segment_distance(const Vec3& a, const Vec3& b, const Vec3& p) {
  const Vec3 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + ab * t));
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  for (;;) {
    const Vec3 v{n01(rng), n01(rng), n01(rng)};
    const double len = norm(v);
    if (len > 1e-9) return v / len;
  }
}

Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  double w = n01(rng), x = n01(rng), y = n01(rng), z = n01(rng);
  const double len = std::sqrt(w * w + x * x + y * y + z * z);
  w /= len, x /= len, y /= len, z /= len;
  Rotation r;
  r.cols[0] = {1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y)};
  r.cols[1] = {2 * (x * y - w * z), 1 - 2 * (x * x + z * z), 2 * (y * z + w * x)};
  r.cols[2] = {2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)};
  return r;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// A few points on the primitive's surface, for containment checks.
std::vector<Vec3> surface_probe(const Primitive& prim) {
  std::vector<Vec3> pts;
  std::vector<Vec3> dirs;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz)
        if (dx || dy || dz) dirs.push_back(normalized(Vec3{double(dx), double(dy), double(dz)}));
  if (const auto* e = std::get_if<Ellipsoid>(&prim)) {
    for (const Vec3& d : dirs)
      pts.push_back(e->center + e->rotation.to_world({d.x * e->radii.x, d.y * e->radii.y, d.z * e->radii.z}));
  } else {
    const auto& c = std::get<Capsule>(prim);
    for (const Vec3& d : dirs) {
      pts.push_back(c.a + d * c.radius);
      pts.push_back(c.b + d * c.radius);
    }
  }
  return pts;
}

// Lobe primitives must stay on their side of x = 0 (keeps channels disjoint)
// and inside the recon space with margin.
bool lobe_fits(const std::vector<Primitive>& lobe, Lobe side, const PhantomSpec& spec, double margin) {
  for (const auto& prim : lobe) {
    const auto [lo, hi] = bounding_box(prim);
    if (side == Lobe::left && hi.x > -1.0) return false;
    if (side == Lobe::right && lo.x < 1.0) return false;
    for (std::size_t a = 0; a < 3; ++a) {
      if (lo[a] < spec.space.min[a] + margin || hi[a] > spec.space.max[a] - margin) return false;
    }
    for (const Vec3& p : surface_probe(prim)) {
      if (!contains(Primitive{spec.tissue}, p)) return false;
    }
  }
  return true;
}

std::vector<Primitive> make_lobe(std::mt19937_64& rng, Lobe side) {
  const double sign = side == Lobe::left ? -1.0 : 1.0;
  const Vec3 anchor{sign * uniform(rng, 12.0, 18.0), uniform(rng, -6.0, 6.0), uniform(rng, -6.0, 6.0)};
  std::vector<Primitive> lobe;
  lobe.push_back(Ellipsoid{anchor, {uniform(rng, 7.0, 11.0), uniform(rng, 5.0, 8.0), uniform(rng, 9.0, 14.0)},
                           random_rotation(rng)});
  const int extra = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int i = 0; i < extra; ++i) {
    if (uniform(rng, 0.0, 1.0) < 0.5) {
      const Vec3 a = anchor + Vec3{uniform(rng, -4, 4), uniform(rng, -4, 4), uniform(rng, -4, 4)};
      const Vec3 b = a + random_unit(rng) * uniform(rng, 8.0, 16.0);
      lobe.push_back(Capsule{a, b, uniform(rng, 2.5, 4.5)});
    } else {
      const Vec3 c = anchor + random_unit(rng) * uniform(rng, 4.0, 9.0);
      lobe.push_back(
          Ellipsoid{c, {uniform(rng, 3.0, 6.0), uniform(rng, 3.0, 6.0), uniform(rng, 3.0, 6.0)}, random_rotation(rng)});
    }
  }
  return lobe;
}

}  // namespace

double distance_to_ellipsoid(const Vec3& radii, const Vec3& p) {
  std::array<std::pair<double, double>, 3> axes{
      {{radii.x, std::abs(p.x)}, {radii.y, std::abs(p.y)}, {radii.z, std::abs(p.z)}}};
  std::sort(axes.begin(), axes.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  return ellipsoid_distance_sorted(axes[0].first, axes[1].first, axes[2].first, axes[0].second, axes[1].second,
                                   axes[2].second);
}

bool contains(const Primitive& prim, const Vec3& p) {
  if (const auto* e = std::get_if<Ellipsoid>(&prim)) {
    const Vec3 l = e->rotation.to_local(p - e->center);
    const double q = (l.x / e->radii.x) * (l.x / e->radii.x) + (l.y / e->radii.y) * (l.y / e->radii.y) +
                     (l.z / e->radii.z) * (l.z / e->radii.z);
    return q <= 1.0;
  }
  const auto& c = std::get<Capsule>(prim);
  return segment_distance(c.a, c.b, p) <= c.radius;
}

double signed_distance(const Primitive& prim, const Vec3& p) {
  if (const auto* e = std::get_if<Ellipsoid>(&prim)) {
    const double d = distance_to_ellipsoid(e->radii, e->rotation.to_local(p - e->center));
    return contains(prim, p) ? -d : d;
  }
  const auto& c = std::get<Capsule>(prim);
  const double d = segment_distance(c.a, c.b, p) - c.radius;
  // Keep the sign consistent with the closed-set membership test.
  return contains(prim, p) ? std::min(d, 0.0) : std::max(d, 0.0);
}

double analytic_volume(const Primitive& prim) {
  if (const auto* e = std::get_if<Ellipsoid>(&prim)) {
    return 4.0 / 3.0 * std::numbers::pi * e->radii.x * e->radii.y * e->radii.z;
  }
  const auto& c = std::get<Capsule>(prim);
  const double r = c.radius;
  return std::numbers::pi * r * r * norm(c.b - c.a) + 4.0 / 3.0 * std::numbers::pi * r * r * r;
}

std::pair<Vec3, Vec3> bounding_box(const Primitive& prim) {
  if (const auto* e = std::get_if<Ellipsoid>(&prim)) {
    const auto& R = e->rotation.cols;
    Vec3 half;
    for (std::size_t i = 0; i < 3; ++i) {
      const double a = R[0][i] * e->radii.x, b = R[1][i] * e->radii.y, c = R[2][i] * e->radii.z;
      const double h = std::sqrt(a * a + b * b + c * c);
      (i == 0 ? half.x : i == 1 ? half.y : half.z) = h;
    }
    return {e->center - half, e->center + half};
  }
  const auto& c = std::get<Capsule>(prim);
  const Vec3 r{c.radius, c.radius, c.radius};
  const Vec3 lo{std::min(c.a.x, c.b.x), std::min(c.a.y, c.b.y), std::min(c.a.z, c.b.z)};
  const Vec3 hi{std::max(c.a.x, c.b.x), std::max(c.a.y, c.b.y), std::max(c.a.z, c.b.z)};
  return {lo - r, hi + r};
}

PhantomSpec make_phantom_spec(std::uint64_t seed, const PhantomOptions& options) {
  options.space.validate();
  std::mt19937_64 rng(seed);
  PhantomSpec spec;
  spec.seed = seed;
  spec.space = options.space;
  spec.tissue = Ellipsoid{{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)},
                          {uniform(rng, 37.0, 39.0), uniform(rng, 30.0, 34.0), uniform(rng, 37.0, 39.0)},
                          Rotation{}};
  for (Lobe side : {Lobe::left, Lobe::right}) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      auto lobe = make_lobe(rng, side);
      if (lobe_fits(lobe, side, spec, options.margin)) {
        spec.lobes[static_cast<std::size_t>(side)] = std::move(lobe);
        placed = true;
      }
    }
    if (!placed) throw DegeneratePhantomError("phantom: could not place lobe for seed " + std::to_string(seed));
  }
  return spec;
}

Volume3D voxelize(const PhantomSpec& spec, const PhantomOptions& options) {
  Volume3D vol = Volume3D::covering(spec.space, options.volume_resolution);
  std::vector<std::pair<Vec3, Vec3>> boxes;
  std::vector<const Primitive*> prims;
  for (const auto& lobe : spec.lobes)
    for (const auto& prim : lobe) {
      boxes.push_back(bounding_box(prim));
      prims.push_back(&prim);
    }
  const Primitive tissue{spec.tissue};
  for (std::size_t k = 0; k < vol.dims[2]; ++k)
    for (std::size_t j = 0; j < vol.dims[1]; ++j)
      for (std::size_t i = 0; i < vol.dims[0]; ++i) {
        const Vec3 p = vol.voxel_center(i, j, k);
        bool bone = false;
        for (std::size_t q = 0; q < prims.size() && !bone; ++q) {
          const auto& [lo, hi] = boxes[q];
          if (p.x < lo.x || p.y < lo.y || p.z < lo.z || p.x > hi.x || p.y > hi.y || p.z > hi.z) continue;
          bone = contains(*prims[q], p);
        }
        float mu = 0.0f;
        if (bone) {
          mu = static_cast<float>(options.bone_attenuation);
        } else if (contains(tissue, p)) {
          mu = static_cast<float>(options.tissue_attenuation);
        }
        vol.at(i, j, k) = mu;
      }
  return vol;
}

Phantom generate_phantom(std::uint64_t seed, const PhantomOptions& options) {
  PhantomSpec spec = make_phantom_spec(seed, options);
  Volume3D vol = voxelize(spec, options);
  return {std::move(spec), std::move(vol)};
}

std::array<int, kChannels> occupancy_oracle(const PhantomSpec& spec, const Vec3& p) {
  std::array<int, kChannels> out{0, 0};
  if (!spec.space.contains(p)) return out;
  for (std::size_t c = 0; c < kChannels; ++c)
    for (const auto& prim : spec.lobes[c])
      if (contains(prim, p)) {
        out[c] = 1;
        break;
      }
  return out;
}

std::array<double, kChannels> signed_distance(const PhantomSpec& spec, const Vec3& p) {
  std::array<double, kChannels> out{};
  for (std::size_t c = 0; c < kChannels; ++c) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& prim : spec.lobes[c]) best = std::min(best, signed_distance(prim, p));
    out[c] = best;
  }
  return out;
}

OccupancyBatch sample_training_points(const PhantomSpec& spec, std::size_t n, std::uint64_t seed,
                                      const SamplingOptions& options) {
  if (n % 2 != 0) throw InvalidArgument("sample_training_points: N must be even, got " + std::to_string(n));
  std::mt19937_64 rng(seed);
  OccupancyBatch batch;
  batch.points.reserve(n);
  const ReconSpace& s = spec.space;
  for (std::size_t i = 0; i < n / 2; ++i) {
    batch.points.push_back({uniform(rng, s.min.x, s.max.x), uniform(rng, s.min.y, s.max.y),
                            uniform(rng, s.min.z, s.max.z)});
  }
  std::vector<const Primitive*> prims;
  for (const auto& lobe : spec.lobes)
    for (const auto& prim : lobe) prims.push_back(&prim);
  if (prims.empty()) throw DegeneratePhantomError("sample_training_points: phantom has no primitives");
  std::normal_distribution<double> jitter(0.0, options.perturbation);
  std::uniform_int_distribution<std::size_t> pick(0, prims.size() - 1);
  const std::size_t max_trials = 1000 * n;
  std::size_t trials = 0;
  while (batch.points.size() < n) {
    if (++trials > max_trials) {
      throw DegeneratePhantomError("sample_training_points: near-surface rejection sampling exhausted " +
                                   std::to_string(max_trials) + " trials");
    }
    const Primitive& prim = *prims[pick(rng)];
    Vec3 p;
    const Vec3 dir = random_unit(rng);
    if (const auto* e = std::get_if<Ellipsoid>(&prim)) {
      p = e->center + e->rotation.to_world({dir.x * e->radii.x, dir.y * e->radii.y, dir.z * e->radii.z});
    } else {
      const auto& c = std::get<Capsule>(prim);
      p = c.a + (c.b - c.a) * uniform(rng, 0.0, 1.0) + dir * c.radius;
    }
    p += Vec3{jitter(rng), jitter(rng), jitter(rng)};
    if (!s.contains(p)) continue;
    const auto sdf = signed_distance(spec, p);
    if (std::min(std::abs(sdf[0]), std::abs(sdf[1])) > options.band) continue;
    batch.points.push_back(p);
  }
  batch.labels.reserve(n);
  for (const Vec3& p : batch.points) {
    const auto o = occupancy_oracle(spec, p);
    batch.labels.push_back({static_cast<float>(o[0]), static_cast<float>(o[1])});
  }
  return batch;
}

DatasetSplit make_dataset(std::size_t n_train, std::size_t n_val, std::size_t n_test, std::uint64_t base_seed) {
  if (n_train == 0 || n_val == 0 || n_test == 0) throw InvalidArgument("make_dataset: split counts must be >= 1");
  DatasetSplit split;
  std::uint64_t next = base_seed;
  for (std::size_t i = 0; i < n_train; ++i) split.train.push_back(next++);
  for (std::size_t i = 0; i < n_val; ++i) split.val.push_back(next++);
  for (std::size_t i = 0; i < n_test; ++i) split.test.push_back(next++);
  return split;
}

}  // namespace xrecon
