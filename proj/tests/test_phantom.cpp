#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "xrecon/errors.hpp"
#include "xrecon/phantom.hpp"

using namespace xrecon;

namespace {

Vec3 random_point(std::mt19937_64& gen, const ReconSpace& s) {
  std::uniform_real_distribution<double> u(0, 1);
  return {s.min.x + u(gen) * (s.max.x - s.min.x), s.min.y + u(gen) * (s.max.y - s.min.y),
          s.min.z + u(gen) * (s.max.z - s.min.z)};
}

}  // namespace

TEST(Primitives, SphereDistanceAndVolume) {
  const Primitive sphere = Ellipsoid{{1, 2, 3}, {5, 5, 5}, {}};
  EXPECT_NEAR(signed_distance(sphere, {1, 2, 13}), 5.0, 1e-9);
  EXPECT_NEAR(signed_distance(sphere, {1, 2, 3}), -5.0, 1e-9);
  EXPECT_NEAR(analytic_volume(sphere), 4.0 / 3 * std::numbers::pi * 125, 1e-9);
  EXPECT_TRUE(contains(sphere, {6, 2, 3}));
  EXPECT_FALSE(contains(sphere, {6.01, 2, 3}));
}

TEST(Primitives, EllipsoidDistanceIsExact) {
  const Vec3 radii{6, 3, 2};
  // Along a principal axis the distance is the axis gap.
  EXPECT_NEAR(distance_to_ellipsoid(radii, {10, 0, 0}), 4.0, 1e-9);
  EXPECT_NEAR(distance_to_ellipsoid(radii, {0, 0, -7}), 5.0, 1e-9);
  // Brute force: closest of many surface samples.
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> d(-10, 10);
  for (int n = 0; n < 20; ++n) {
    const Vec3 p{d(gen), d(gen), d(gen)};
    if (p.x * p.x / 36 + p.y * p.y / 9 + p.z * p.z / 4 <= 1) continue;
    double best = 1e300;
    for (int i = 0; i <= 400; ++i)
      for (int j = 0; j < 400; ++j) {
        const double th = std::numbers::pi * i / 400, ph = 2 * std::numbers::pi * j / 400;
        const Vec3 s{6 * std::sin(th) * std::cos(ph), 3 * std::sin(th) * std::sin(ph), 2 * std::cos(th)};
        best = std::min(best, norm(s - p));
      }
    const double got = distance_to_ellipsoid(radii, p);
    EXPECT_LE(got, best + 1e-9);
    EXPECT_NEAR(got, best, 0.05);
  }
}

TEST(Primitives, CapsuleDistance) {
  const Primitive cap = Capsule{{0, 0, 0}, {10, 0, 0}, 2};
  EXPECT_NEAR(signed_distance(cap, {5, 5, 0}), 3.0, 1e-12);
  EXPECT_NEAR(signed_distance(cap, {-4, 0, 0}), 2.0, 1e-12);
  EXPECT_NEAR(signed_distance(cap, {5, 0, 0}), -2.0, 1e-12);
  EXPECT_NEAR(analytic_volume(cap), std::numbers::pi * 4 * 10 + 4.0 / 3 * std::numbers::pi * 8, 1e-9);
}

TEST(Primitives, AnalyticVolumeMatchesMonteCarlo) {
  Rotation rot;
  const double c = std::cos(0.5), s = std::sin(0.5);
  rot.cols = {Vec3{c, s, 0}, Vec3{-s, c, 0}, Vec3{0, 0, 1}};
  const Primitive e = Ellipsoid{{0, 0, 0}, {8, 4, 3}, rot};
  const auto [lo, hi] = bounding_box(e);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0, 1);
  const int n = 200000;
  int in = 0;
  for (int i = 0; i < n; ++i) {
    const Vec3 p{lo.x + u(gen) * (hi.x - lo.x), lo.y + u(gen) * (hi.y - lo.y), lo.z + u(gen) * (hi.z - lo.z)};
    in += contains(e, p);
  }
  const Vec3 ext = hi - lo;
  const double box = ext.x * ext.y * ext.z;
  EXPECT_NEAR(box * in / n, analytic_volume(e), 0.02 * analytic_volume(e));
}

TEST(Phantom, SameSeedSameVolumeDifferentSeedDifferentVolume) {
  const PhantomOptions opt{.volume_resolution = 32};
  const auto a = generate_phantom(11, opt), b = generate_phantom(11, opt), c = generate_phantom(12, opt);
  EXPECT_EQ(a.volume.values, b.volume.values);
  EXPECT_NE(a.volume.values, c.volume.values);
}

TEST(Phantom, LobesAreDisjointAndInsideSpace) {
  std::mt19937_64 gen(2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = make_phantom_spec(seed);
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
      EXPECT_GE(spec.lobes[ch].size(), 2u);
      EXPECT_LE(spec.lobes[ch].size(), 4u);
      for (const auto& prim : spec.lobes[ch]) {
        const auto [lo, hi] = bounding_box(prim);
        EXPECT_TRUE(spec.space.contains(lo) && spec.space.contains(hi));
      }
    }
    for (int i = 0; i < 20000; ++i) {
      const auto o = occupancy_oracle(spec, random_point(gen, spec.space));
      EXPECT_FALSE(o[0] && o[1]);
    }
  }
}

TEST(Phantom, VoxelsAgreeWithOracle) {
  const Phantom ph = generate_phantom(21);
  std::mt19937_64 gen(21);
  const int n = 100000;
  int agree = 0;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = random_point(gen, ph.spec.space);
    const auto o = occupancy_oracle(ph.spec, p);
    const bool bone = ph.volume.sample(p) > 0.6;
    agree += bone == bool(o[0] || o[1]);
  }
  EXPECT_GT(double(agree) / n, 0.99);
}

TEST(Phantom, SdfSignMatchesOracle) {
  const auto spec = make_phantom_spec(33);
  std::mt19937_64 gen(33);
  for (int i = 0; i < 100000; ++i) {
    const Vec3 p = random_point(gen, spec.space);
    const auto o = occupancy_oracle(spec, p);
    const auto d = signed_distance(spec, p);
    for (std::size_t c = 0; c < kChannels; ++c) {
      if (std::abs(d[c]) < 1e-9) continue;
      ASSERT_EQ(o[c] == 1, d[c] < 0) << "point " << i << " channel " << c;
    }
  }
}

TEST(Sampling, HalfUniformHalfNearSurface) {
  const auto spec = make_phantom_spec(40);
  const auto batch = sample_training_points(spec, 10, 1);
  ASSERT_EQ(batch.size(), 10u);
  ASSERT_EQ(batch.labels.size(), 10u);
  for (std::size_t i = 5; i < 10; ++i) {
    const auto d = signed_distance(spec, batch.points[i]);
    EXPECT_LE(std::min(std::abs(d[0]), std::abs(d[1])), 2.0);
  }
  EXPECT_THROW(sample_training_points(spec, 11, 1), InvalidArgument);
}

TEST(Sampling, LabelsFollowOracleAndBandHolds) {
  const auto spec = make_phantom_spec(41);
  const auto batch = sample_training_points(spec, 4000, 7);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto o = occupancy_oracle(spec, batch.points[i]);
    EXPECT_EQ(batch.labels[i][0], float(o[0]));
    EXPECT_EQ(batch.labels[i][1], float(o[1]));
    EXPECT_TRUE(spec.space.contains(batch.points[i]));
    if (i >= 2000) {
      const auto d = signed_distance(spec, batch.points[i]);
      EXPECT_LE(std::min(std::abs(d[0]), std::abs(d[1])), 2.0);
    }
  }
}

TEST(Sampling, UniformHalfInsideFractionIsBinomial) {
  const auto spec = make_phantom_spec(42);
  // Reference occupied fraction from a fine deterministic lattice.
  const int m = 80;
  long inside = 0;
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        const Vec3 p{-40 + 80.0 * (i + 0.5) / m, -40 + 80.0 * (j + 0.5) / m, -40 + 80.0 * (k + 0.5) / m};
        const auto o = occupancy_oracle(spec, p);
        inside += o[0] || o[1];
      }
  const double f = double(inside) / (double(m) * m * m);
  const std::size_t n = 20000;
  const auto batch = sample_training_points(spec, 2 * n, 3);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += batch.labels[i][0] > 0 || batch.labels[i][1] > 0;
  const double sigma = std::sqrt(n * f * (1 - f));
  EXPECT_GT(f, 0.01);
  EXPECT_NEAR(double(hits), n * f, 4 * sigma + 0.002 * n);
}

TEST(Sampling, DeterministicPerSeed) {
  const auto spec = make_phantom_spec(43);
  const auto a = sample_training_points(spec, 64, 5), b = sample_training_points(spec, 64, 5);
  const auto c = sample_training_points(spec, 64, 6);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(a.points[i], b.points[i]);
  EXPECT_FALSE(a.points[0] == c.points[0]);
}

TEST(Sampling, EmptyPhantomIsDegenerate) {
  PhantomSpec spec = make_phantom_spec(44);
  spec.lobes = {};
  EXPECT_THROW(sample_training_points(spec, 8, 1), DegeneratePhantomError);
}

TEST(Dataset, SplitsAreDisjointConsecutiveRanges) {
  const auto s = make_dataset(8, 2, 4, 500);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.val.size(), 2u);
  EXPECT_EQ(s.test.size(), 4u);
  std::set<std::uint64_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 14u);
  EXPECT_EQ(*all.begin(), 500u);
  EXPECT_EQ(*all.rbegin(), 513u);
  EXPECT_THROW(make_dataset(0, 1, 1, 0), InvalidArgument);
}
