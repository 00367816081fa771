#include "muffler/overhead.h"

#include <gtest/gtest.h>

namespace muffler {
namespace {

FlowTrace trace(std::initializer_list<PacketEvent> events) { return {0, Segment::Ingress, events}; }

TEST(BandwidthOverhead, Examples) {
  const FlowTrace p = trace({{from_ms(0), 100, Direction::ToService, false}});
  EXPECT_DOUBLE_EQ(bandwidth_overhead(p, p), 0.0);

  FlowTrace big = trace({{from_ms(0), 10000, Direction::ToService, false}});
  FlowTrace padded = trace({{from_ms(0), 10356, Direction::ToService, false}});
  EXPECT_NEAR(bandwidth_overhead(big, padded), 0.0356, 1e-12);
}

TEST(BandwidthOverhead, RelayHeaders) {
  FlowTrace p, q;
  for (int i = 0; i < 1000; ++i) {
    p.events.push_back({from_ms(i), 1452, Direction::ToClient, false});
    q.events.push_back({from_ms(i), 1460, Direction::ToClient, false});
  }
  EXPECT_NEAR(bandwidth_overhead(p, q), 8.0 / 1452.0, 1e-12);
}

TEST(BandwidthOverhead, EmptyOriginalRejected) {
  EXPECT_THROW(bandwidth_overhead(FlowTrace{}, trace({{from_ms(0), 1, Direction::ToService, false}})),
               std::invalid_argument);
}

TEST(LatencyOverhead, Examples) {
  const FlowTrace a = trace({{from_ms(0), 1, Direction::ToService, false},
                             {from_ms(10000), 1, Direction::ToClient, false}});
  EXPECT_DOUBLE_EQ(latency_overhead(a, a), 0.0);
  const FlowTrace b = trace({{from_ms(5000), 1, Direction::ToService, false},
                             {from_ms(17000), 1, Direction::ToClient, false}});
  EXPECT_DOUBLE_EQ(latency_overhead(a, b), 0.2);
}

TEST(LatencyOverhead, ControlFramesIgnored) {
  const FlowTrace a = trace({{from_ms(0), 100, Direction::ToService, false},
                             {from_ms(4000), 100, Direction::ToClient, false}});
  const FlowTrace b = trace({{from_ms(0), 108, Direction::ToService, false},
                             {from_ms(2000), 8, Direction::ToService, true},
                             {from_ms(4000), 108, Direction::ToClient, false},
                             {from_ms(9000), 8, Direction::ToService, true}});
  EXPECT_DOUBLE_EQ(latency_overhead(a, b), 0.0);
}

TEST(LatencyOverhead, ZeroDurationRejected) {
  const FlowTrace a = trace({{from_ms(0), 1, Direction::ToService, false}});
  EXPECT_THROW(latency_overhead(a, a), std::invalid_argument);
}

}  // namespace
}  // namespace muffler
