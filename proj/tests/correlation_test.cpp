#include "muffler/correlation.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.h"
#include "test_util.h"

namespace muffler {
namespace {

using testing_util::steady_flow;

TEST(Spearman, Monotone) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{30, 20, 10}), -1.0);
}

TEST(Spearman, TiesUseAverageRanks) {
  const std::vector<double> x{1, 2, 2, 4};
  const std::vector<double> y{1, 3, 2, 4};
  EXPECT_NEAR(spearman(x, y), oracle::spearman(x, y), 1e-12);
  EXPECT_NEAR(spearman(x, y), 0.9486832980505138, 1e-12);
  EXPECT_EQ(average_ranks(x), (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Spearman, ConstantInputIsZero) {
  EXPECT_EQ(spearman(std::vector<double>{5, 5, 5}, std::vector<double>{1, 2, 3}), 0.0);
}

TEST(Spearman, BadLengths) {
  EXPECT_THROW(spearman(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}),
               std::invalid_argument);
}

TEST(SpearmanProperty, OracleSymmetryMonotoneInvariance) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 3000; ++i) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 20)(rng);
    const int levels = std::uniform_int_distribution<int>(2, 30)(rng);
    std::vector<double> x(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = std::uniform_int_distribution<int>(0, levels)(rng);
      y[k] = std::uniform_int_distribution<int>(0, levels)(rng);
    }
    const double r = spearman(x, y);
    ASSERT_NEAR(r, oracle::spearman(x, y), 1e-9);
    ASSERT_NEAR(r, spearman(y, x), 1e-12);
    std::vector<double> tx(n);
    std::transform(x.begin(), x.end(), tx.begin(), [](double v) { return std::exp(v / 7) - 3; });
    ASSERT_NEAR(r, spearman(tx, y), 1e-12);
  }
}

TEST(Features, WindowsAndCumulativeBytes) {
  FlowTrace f{0, Segment::Ingress,
              {{from_ms(0), 100, Direction::ToService, false},
               {from_ms(100), 300, Direction::ToService, false},
               {from_ms(1200), 50, Direction::ToClient, false}}};
  const FeatureSeries s = extract_features(f, from_ms(0), from_ms(1500), from_ms(500));
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.cumulative_bytes, (std::vector<double>{400, 400, 450}));
  EXPECT_EQ(s.packets, (std::vector<std::uint32_t>{2, 0, 1}));
  EXPECT_DOUBLE_EQ(s.mean_packet_size[0], 200);
  EXPECT_DOUBLE_EQ(s.mean_ipd_ms[0], 100);  // only one gap inside the flow
  EXPECT_DOUBLE_EQ(s.mean_ipd_ms[2], 1100);

  const FeatureSeries up = extract_features(f, from_ms(0), from_ms(1500), from_ms(500),
                                            Direction::ToClient);
  EXPECT_EQ(up.cumulative_bytes, (std::vector<double>{0, 0, 50}));
}

TEST(Raptor, SelfIsOne) {
  const FlowTrace f = steady_flow(1, from_ms(0), from_ms(10000), from_ms(37), 500);
  EXPECT_DOUBLE_EQ(raptor_score(f, f), 1.0);
}

TEST(Raptor, ConstantVersusIdle) {
  const FlowTrace busy = steady_flow(1, from_ms(0), from_ms(10000), from_ms(10), 1000);
  const FlowTrace idle{2, Segment::Egress, {{from_ms(0), 40, Direction::ToService, false}}};
  EXPECT_LE(raptor_score(busy, idle), 1e-9);
}

TEST(Raptor, SmallShiftStillCorrelates) {
  const FlowTrace a = steady_flow(1, from_ms(0), from_ms(10000), from_ms(23), 700);
  const FlowTrace b = steady_flow(2, from_ms(200), from_ms(10000), from_ms(23), 700);
  EXPECT_GE(raptor_score(a, b), 0.95);
}

TEST(Raptor, DisjointFlowsUndefined) {
  const FlowTrace a = steady_flow(1, from_ms(0), from_ms(1000), from_ms(10), 100);
  const FlowTrace b = steady_flow(2, from_ms(5000), from_ms(1000), from_ms(10), 100);
  EXPECT_THROW(raptor_score(a, b), UndefinedScore);
  EXPECT_THROW(raptor_score(a, FlowTrace{}), UndefinedScore);
}

TEST(ScoreMatrix, UndefinedPairsScoreMinusOne) {
  const std::vector<FlowTrace> in{steady_flow(0, from_ms(0), from_ms(1000), from_ms(10), 100)};
  const std::vector<FlowTrace> out{steady_flow(5, from_ms(0), from_ms(1000), from_ms(10), 100),
                                   steady_flow(6, from_ms(9000), from_ms(1000), from_ms(10), 100)};
  const ScoreMatrix m = score_matrix(in, out);
  EXPECT_EQ(m.ingress_ids, (std::vector<std::uint32_t>{0}));
  EXPECT_EQ(m.egress_ids, (std::vector<std::uint32_t>{5, 6}));
  EXPECT_DOUBLE_EQ(m.at(0, 0), 1.0);
  EXPECT_EQ(m.at(0, 1), -1.0);
}

TEST(GroundTruth, SingleCandidate) {
  const std::vector<FlowTrace> in{steady_flow(3, from_ms(0), from_ms(2000), from_ms(10), 100)};
  const std::vector<FlowTrace> out{steady_flow(8, from_ms(0), from_ms(2000), from_ms(50), 900)};
  const auto truth = ground_truth_pairs(in, out);
  ASSERT_EQ(truth.size(), 1u);
  EXPECT_EQ(truth.at(3), 8u);
}

TEST(GroundTruth, DuplicatesGoToLowestId) {
  const FlowTrace f = steady_flow(0, from_ms(0), from_ms(2000), from_ms(10), 100);
  FlowTrace a = f, b = f;
  a.flow_id = 9;
  b.flow_id = 4;
  const std::vector<FlowTrace> in{f};
  const std::vector<FlowTrace> out{a, b};
  EXPECT_EQ(ground_truth_pairs(in, out).at(0), 4u);
}

TEST(GroundTruth, PicksMatchingShape) {
  const std::vector<FlowTrace> in{steady_flow(0, from_ms(0), from_ms(3000), from_ms(10), 100),
                                  steady_flow(1, from_ms(0), from_ms(3000), from_ms(80), 1400)};
  const std::vector<FlowTrace> out{steady_flow(10, from_ms(0), from_ms(3000), from_ms(80), 1400),
                                   steady_flow(11, from_ms(0), from_ms(3000), from_ms(10), 100)};
  const auto truth = ground_truth_pairs(in, out);
  EXPECT_EQ(truth.at(0), 11u);
  EXPECT_EQ(truth.at(1), 10u);
}

// Reordering the egress set does not change the matching (no ties here).
TEST(GroundTruthProperty, EgressOrderIrrelevant) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<FlowTrace> in, out;
    for (std::uint32_t k = 0; k < 6; ++k) {
      const auto gap = from_ms(std::uniform_int_distribution<int>(5, 200)(rng));
      const auto bytes = std::uniform_int_distribution<std::uint32_t>(50, 1500)(rng);
      in.push_back(steady_flow(k, from_ms(0), from_ms(3000), gap, bytes));
      out.push_back(steady_flow(100 + k, from_ms(0), from_ms(3000), gap, bytes + 7));
    }
    const auto before = ground_truth_pairs(in, out);
    std::shuffle(out.begin(), out.end(), rng);
    EXPECT_EQ(ground_truth_pairs(in, out), before);
  }
}

}  // namespace
}  // namespace muffler
