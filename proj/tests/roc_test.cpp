#include "muffler/roc.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.h"

namespace muffler {
namespace {

ScoreMatrix square(std::size_t n, std::vector<double> values) {
  ScoreMatrix m;
  for (std::uint32_t i = 0; i < n; ++i) {
    m.ingress_ids.push_back(i);
    m.egress_ids.push_back(100 + i);
  }
  m.values = std::move(values);
  return m;
}

std::map<std::uint32_t, std::uint32_t> diagonal(std::size_t n) {
  std::map<std::uint32_t, std::uint32_t> t;
  for (std::uint32_t i = 0; i < n; ++i) {
    t[i] = 100 + i;
  }
  return t;
}

void expect_same(const RocCurve& got, const std::vector<RocPoint>& want) {
  ASSERT_EQ(got.points.size(), want.size());
  for (std::size_t k = 0; k < want.size(); ++k) {
    EXPECT_NEAR(got.points[k].fpr, want[k].fpr, 1e-9) << k;
    EXPECT_NEAR(got.points[k].tpr, want[k].tpr, 1e-9) << k;
    EXPECT_EQ(got.points[k].threshold, want[k].threshold) << k;
  }
}

TEST(Roc, PerfectScoresReachTopLeft) {
  const RocCurve c = roc(square(3, {1, 0, 0, 0, 1, 0, 0, 0, 1}), diagonal(3));
  bool corner = false;
  for (const RocPoint& p : c.points) {
    corner = corner || (p.fpr == 0.0 && p.tpr == 1.0);
  }
  EXPECT_TRUE(corner);
  EXPECT_DOUBLE_EQ(tpr_at_fpr(c, 0.0), 1.0);
}

TEST(Roc, ConstantScoresAreDiagonal) {
  const RocCurve c = roc(square(4, std::vector<double>(16, 0.3)), diagonal(4));
  ASSERT_EQ(c.points.size(), 2u);
  EXPECT_TRUE(std::isinf(c.points[0].threshold));
  EXPECT_EQ(c.points[1].fpr, 1.0);
  EXPECT_EQ(c.points[1].tpr, 1.0);
}

TEST(Roc, HandBuiltThreeByThree) {
  const ScoreMatrix m = square(3, {0.9, 0.2, 0.5,
                                   0.6, 0.4, 0.1,
                                   0.3, 0.8, 0.7});
  const auto truth = diagonal(3);
  const RocCurve c = roc(m, truth);
  expect_same(c, oracle::roc(m, truth));
  // Thresholds 0.9 .. 0.1: TP rises at 0.9, 0.7, 0.4.
  EXPECT_EQ(c.points.size(), 10u);
  EXPECT_NEAR(c.points[1].tpr, 1.0 / 3, 1e-12);  // 0.9
  EXPECT_NEAR(c.points[2].fpr, 1.0 / 6, 1e-12);  // 0.8
}

TEST(Roc, MissingTruthRejected) {
  auto truth = diagonal(3);
  truth.erase(1);
  EXPECT_THROW(roc(square(3, std::vector<double>(9, 0)), truth), std::invalid_argument);
  truth = diagonal(3);
  truth[1] = 555;
  EXPECT_THROW(roc(square(3, std::vector<double>(9, 0)), truth), std::invalid_argument);
}

TEST(TprAtFpr, StepConvention) {
  RocCurve c;
  c.points = {{0, 0, INFINITY}, {0.05, 0.4, 0.9}, {0.1, 0.6, 0.8}, {0.2, 0.9, 0.5}, {1, 1, 0}};
  EXPECT_DOUBLE_EQ(tpr_at_fpr(c, 0.1), 0.6);
  EXPECT_DOUBLE_EQ(tpr_at_fpr(c, 0.15), 0.6);
  EXPECT_DOUBLE_EQ(tpr_at_fpr(c, 0.01), 0.0);
  EXPECT_DOUBLE_EQ(tpr_at_fpr(c, 1.0), 1.0);
}

TEST(RocCsv, RoundTrip) {
  const ScoreMatrix m = square(3, {0.9, 0.2, 0.5, 0.6, 0.4, 0.1, 0.3, 0.8, 0.7});
  const RocCurve c = roc(m, diagonal(3));
  std::stringstream ss;
  write_roc_csv(ss, c);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "threshold,fpr,tpr");
  const RocCurve back = read_roc_csv(ss);
  ASSERT_EQ(back.points.size(), c.points.size());
  EXPECT_TRUE(std::isinf(back.points[0].threshold));
  for (std::size_t k = 1; k < c.points.size(); ++k) {
    EXPECT_NEAR(back.points[k].fpr, c.points[k].fpr, 1e-12);
    EXPECT_NEAR(back.points[k].tpr, c.points[k].tpr, 1e-12);
  }
}

TEST(RocProperty, MatchesEnumerationAndIsMonotone) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
    std::vector<double> v(n * n);
    for (double& x : v) {
      x = std::uniform_int_distribution<int>(0, 12)(rng) / 12.0;
    }
    const ScoreMatrix m = square(n, v);
    const RocCurve c = roc(m, diagonal(n));
    expect_same(c, oracle::roc(m, diagonal(n)));
    for (std::size_t k = 1; k < c.points.size(); ++k) {
      ASSERT_GE(c.points[k].fpr, c.points[k - 1].fpr);
      ASSERT_GE(c.points[k].tpr, c.points[k - 1].tpr);
    }
  }
}

}  // namespace
}  // namespace muffler
