#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "xrecon/errors.hpp"
#include "xrecon/metrics.hpp"

using namespace xrecon;

namespace {

PointSet random_set(std::size_t n, std::mt19937_64& gen, double scale = 10) {
  std::uniform_real_distribution<double> d(-scale, scale);
  PointSet s;
  for (std::size_t i = 0; i < n; ++i) s.push_back({d(gen), d(gen), d(gen)});
  return s;
}

double cd_oracle(const PointSet& a, const PointSet& b) {
  auto one_way = [](const PointSet& x, const PointSet& y) {
    double sum = 0;
    for (const Vec3& p : x) {
      double best = 1e300;
      for (const Vec3& q : y) best = std::min(best, norm(p - q));
      sum += best;
    }
    return sum / double(x.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

double emd_oracle(const PointSet& a, const PointSet& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += norm(a[i] - b[perm[i]]);
    best = std::min(best, sum);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / double(a.size());
}

PointSet shifted(PointSet s, const Vec3& t) {
  for (Vec3& p : s) p += t;
  return s;
}

}  // namespace

TEST(Chamfer, MatchesBruteForceOnSmallSets) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 8, m = 1 + (trial * 5) % 8;
    const auto a = random_set(n, gen), b = random_set(m, gen);
    EXPECT_NEAR(chamfer_distance(a, b), cd_oracle(a, b), 1e-9);
  }
}

TEST(Emd, MatchesAllPermutationsOnSmallSets) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const auto a = random_set(n, gen), b = random_set(n, gen);
    EXPECT_NEAR(earth_movers_distance(a, b), emd_oracle(a, b), 1e-9) << "n=" << n;
  }
}

TEST(Metrics, SymmetryAndTranslationInvariance) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_set(40, gen), b = random_set(40, gen);
    const Vec3 t{3.5, -17.25, 8};
    EXPECT_NEAR(chamfer_distance(a, b), chamfer_distance(b, a), 1e-9);
    EXPECT_NEAR(earth_movers_distance(a, b), earth_movers_distance(b, a), 1e-9);
    EXPECT_NEAR(chamfer_distance(shifted(a, t), shifted(b, t)), chamfer_distance(a, b), 1e-9);
    EXPECT_NEAR(earth_movers_distance(shifted(a, t), shifted(b, t)), earth_movers_distance(a, b), 1e-9);
  }
}

TEST(Metrics, ChamferNeverExceedsEmd) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 60;
    const auto a = random_set(n, gen), b = random_set(n, gen, 5 + trial % 7);
    EXPECT_LE(chamfer_distance(a, b), earth_movers_distance(a, b) + 1e-12);
  }
}

TEST(Metrics, IdenticalSetsAreZero) {
  std::mt19937_64 gen(5);
  auto a = random_set(30, gen);
  EXPECT_EQ(chamfer_distance(a, a), 0.0);
  auto b = a;
  std::reverse(b.begin(), b.end());
  EXPECT_NEAR(earth_movers_distance(a, b), 0.0, 1e-12);
}

TEST(Metrics, KnownValues) {
  const PointSet a{{0, 0, 0}, {10, 0, 0}}, b{{0, 1, 0}, {10, 3, 0}};
  EXPECT_DOUBLE_EQ(earth_movers_distance(a, b), 2.0);
  EXPECT_DOUBLE_EQ(chamfer_distance(a, b), 2.0);
  const PointSet c{{0, 0, 0}}, d{{0, 0, 1}, {0, 0, 3}};
  EXPECT_DOUBLE_EQ(chamfer_distance(c, d), 0.5 * (1 + 2));
}

TEST(Chamfer, GridPathMatchesBruteForce) {
  std::mt19937_64 gen(6);
  for (std::size_t n : {513u, 1024u, 2000u}) {
    const auto a = random_set(n, gen, 30), b = random_set(n + 17, gen, 25);
    EXPECT_NEAR(chamfer_distance(a, b), chamfer_distance_brute(a, b), 1e-9);
  }
  // Clustered sets with a far outlier stress the cell search radius.
  auto a = random_set(800, gen, 1);
  a.push_back({200, 200, 200});
  const auto b = random_set(900, gen, 2);
  EXPECT_NEAR(chamfer_distance(a, b), chamfer_distance_brute(a, b), 1e-9);
}

TEST(Hungarian, SolvesKnownAssignment) {
  const std::vector<double> cost{4, 1, 3, 2, 0, 5, 3, 2, 2};
  const auto assign = hungarian_assignment(cost, 3);
  double total = 0;
  for (std::size_t i = 0; i < 3; ++i) total += cost[i * 3 + assign[i]];
  EXPECT_DOUBLE_EQ(total, 5.0);
  EXPECT_THROW(hungarian_assignment(cost, 2), InvalidArgument);
}

TEST(Metrics, InvalidInputs) {
  std::mt19937_64 gen(7);
  const auto a = random_set(4, gen), b = random_set(5, gen);
  EXPECT_THROW(earth_movers_distance(a, b), InvalidArgument);
  EXPECT_THROW(chamfer_distance(a, PointSet{}), EmptyInputError);
  EXPECT_THROW(earth_movers_distance(PointSet{}, PointSet{}), EmptyInputError);
  const auto big = random_set(20, gen);
  EXPECT_THROW(earth_movers_distance(big, big, 10), CapabilityError);
  PointSet bad = a;
  bad[0].x = std::nan("");
  EXPECT_THROW(chamfer_distance(bad, a), InvalidArgument);
}

TEST(Emd, ExactAtDefaultLimit) {
  std::mt19937_64 gen(8);
  const auto a = random_set(512, gen), b = shifted(a, {0.5, 0, 0});
  EXPECT_NEAR(earth_movers_distance(a, b), 0.5, 1e-9);
}
