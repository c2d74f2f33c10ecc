#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "kae/detection.hpp"
#include "kae/errors.hpp"
#include "oracles.hpp"

using namespace kae;

namespace {

double dist(const Point3& a, const Point3& b) { return std::sqrt(oracle::sqdist(a, b)); }

double covering_radius(const std::vector<Point3>& cloud, const std::vector<Point3>& picks) {
  double worst = 0.0;
  for (const auto& p : cloud) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : picks) best = std::min(best, dist(p, q));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST(PointScores, ColumnMax) {
  const Tensor d({2, 3}, {0.2, 0.5, 0.3, 0.6, 0.1, 0.3});
  EXPECT_EQ(point_scores(d), (std::vector<double>{0.6, 0.5, 0.3}));
}

TEST(PointScores, MatchesOracle) {
  std::mt19937_64 rng(2);
  const auto v = oracle::random_values(4 * 9, rng, 0.0, 1.0);
  EXPECT_EQ(point_scores(Tensor({4, 9}, v)), oracle::column_max(v, 4, 9));
}

TEST(Nms, CollinearExample) {
  const std::vector<Point3> cloud{{0, 0, 0}, {0.05, 0, 0}, {0.1, 0, 0}};
  const std::vector<double> scores{0.5, 0.9, 0.4};
  const NmsConfig cfg{0.1, NmsFallback::kTopUp};
  const auto one = nms_select(cloud, scores, 1, cfg);
  EXPECT_EQ(one.indices, (std::vector<std::size_t>{1}));
  EXPECT_EQ(one.primary_count, 1u);
  const auto two = nms_select(cloud, scores, 2, cfg);
  EXPECT_EQ(two.indices, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(two.primary_count, 1u);
  EXPECT_EQ(two.points[1], cloud[0]);
  EXPECT_EQ(two.scores, (std::vector<double>{0.9, 0.5}));
}

TEST(Nms, ZeroRadiusIsTopK) {
  std::mt19937_64 rng(3);
  const auto cloud = oracle::random_points(30, rng);
  const auto scores = oracle::random_values(30, rng, 0.0, 1.0);
  const auto picked = nms_select(cloud, scores, 7, NmsConfig{0.0, NmsFallback::kTopUp});
  std::vector<std::size_t> order(30);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(7);
  EXPECT_EQ(picked.indices, order);
  EXPECT_EQ(picked.primary_count, 7u);
}

TEST(Nms, TiesGoToLowerIndex) {
  const std::vector<Point3> cloud{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  const std::vector<double> scores{0.3, 0.7, 0.7};
  EXPECT_EQ(nms_select(cloud, scores, 1).indices, (std::vector<std::size_t>{1}));
}

TEST(Nms, ShrinkRadiusFallback) {
  const std::vector<Point3> cloud{{0, 0, 0}, {0.05, 0, 0}, {0.1, 0, 0}, {0.3, 0, 0}};
  const std::vector<double> scores{0.5, 0.9, 0.4, 0.1};
  const auto r = nms_select(cloud, scores, 3, NmsConfig{0.2, NmsFallback::kShrinkRadius});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r.indices[0], 1u);
  EXPECT_EQ(r.indices[1], 3u);
  EXPECT_EQ(r.primary_count, 2u);
  std::set<std::size_t> unique(r.indices.begin(), r.indices.end());
  EXPECT_EQ(unique.size(), 3u);
}

TEST(NmsProperty, ExactCountSpacingDeterminism) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cloud = oracle::random_points(40, rng);
    const auto scores = oracle::random_values(40, rng, 0.0, 1.0);
    for (auto fb : {NmsFallback::kTopUp, NmsFallback::kShrinkRadius}) {
      const NmsConfig cfg{0.6, fb};
      const auto r = nms_select(cloud, scores, 12, cfg);
      ASSERT_EQ(r.size(), 12u);
      std::set<std::size_t> unique(r.indices.begin(), r.indices.end());
      EXPECT_EQ(unique.size(), 12u);
      for (std::size_t a = 0; a < r.primary_count; ++a)
        for (std::size_t b = a + 1; b < r.primary_count; ++b)
          EXPECT_GE(dist(r.points[a], r.points[b]), cfg.radius);
      EXPECT_EQ(nms_select(cloud, scores, 12, cfg).indices, r.indices);
    }
  }
}

TEST(Nms, Errors) {
  const std::vector<Point3> cloud{{0, 0, 0}, {1, 0, 0}};
  const std::vector<double> scores{0.1, 0.2};
  EXPECT_THROW(nms_select(cloud, scores, 3), ConfigError);
  EXPECT_THROW(nms_select(cloud, std::vector<double>{0.1}, 1), ShapeError);
}

TEST(Fps, ThreePointExample) {
  const std::vector<Point3> cloud{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}};
  EXPECT_EQ(fps_select(cloud, 2).indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(fps_select(cloud, 3).indices, (std::vector<std::size_t>{0, 2, 1}));
  EXPECT_EQ(fps_select(cloud, 2, 1).indices, (std::vector<std::size_t>{1, 2}));
}

TEST(Fps, FullSelectionIsPermutation) {
  std::mt19937_64 rng(5);
  const auto cloud = oracle::random_points(15, rng);
  auto idx = fps_select(cloud, 15).indices;
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(idx[i], i);
}

TEST(FpsProperty, MatchesOracleAndCoverageShrinks) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cloud = oracle::random_points(20, rng);
    EXPECT_EQ(fps_select(cloud, 8).indices, oracle::fps(cloud, 8, 0));
    EXPECT_EQ(fps_select(cloud, 5, 3).indices, oracle::fps(cloud, 5, 3));
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= 20; ++k) {
      const double cover = covering_radius(cloud, fps_select(cloud, k).points);
      EXPECT_LE(cover, prev);
      prev = cover;
    }
  }
}

TEST(Fps, Errors) {
  const std::vector<Point3> cloud{{0, 0, 0}};
  EXPECT_THROW(fps_select(cloud, 2), ConfigError);
  EXPECT_THROW(fps_select(cloud, 1, 1), ConfigError);
}

TEST(RandomSelect, DistinctAndSeeded) {
  std::mt19937_64 rng(7);
  const auto cloud = oracle::random_points(25, rng);
  const auto a = random_select(cloud, 10, 99);
  EXPECT_EQ(a.indices, random_select(cloud, 10, 99).indices);
  EXPECT_NE(a.indices, random_select(cloud, 10, 100).indices);
  std::set<std::size_t> unique(a.indices.begin(), a.indices.end());
  EXPECT_EQ(unique.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.points[i], cloud[a.indices[i]]);
  EXPECT_THROW(random_select(cloud, 26, 0), ConfigError);
}

TEST(RandomSelect, UniformFrequencies) {
  std::mt19937_64 rng(8);
  const auto cloud = oracle::random_points(10, rng);
  std::vector<int> hits(10, 0);
  for (std::uint64_t s = 0; s < 10000; ++s) ++hits[random_select(cloud, 1, s).indices[0]];
  for (int h : hits) EXPECT_NEAR(h / 10000.0, 0.1, 0.01);
}
