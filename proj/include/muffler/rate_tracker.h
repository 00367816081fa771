#pragma once

#include <cstdint>
#include <deque>
#include <unordered_map>

#include "muffler/types.h"

namespace muffler {

// Sliding-window bytes-per-second estimator for real and virtual connections.
//
// A sample recorded at time s contributes to bps(c, t) iff t - window < s <= t.
// The estimate is always the in-window byte sum divided by the full window
// length, independent of how long the connection has existed.
class RateTracker {
 public:
  explicit RateTracker(Timestamp window = from_ms(1000));

  // Timestamps for one connection must be non-decreasing.
  void record(RealId conn, std::uint64_t bytes, Timestamp at) { record_key(key(conn), bytes, at); }
  void record(VirtualId conn, std::uint64_t bytes, Timestamp at) {
    record_key(key(conn), bytes, at);
  }

  double bps(RealId conn, Timestamp at) const { return bps_key(key(conn), at); }
  double bps(VirtualId conn, Timestamp at) const { return bps_key(key(conn), at); }

  void forget(RealId conn) { series_.erase(key(conn)); }
  void forget(VirtualId conn) { series_.erase(key(conn)); }

  Timestamp window() const { return window_; }

 private:
  struct Sample {
    Timestamp at;
    std::uint64_t cumulative;  // bytes recorded up to and including this sample
  };
  struct Series {
    std::deque<Sample> samples;
    std::uint64_t evicted = 0;  // cumulative bytes of samples dropped from the front
  };

  static std::uint64_t key(RealId id) { return value(id); }
  static std::uint64_t key(VirtualId id) { return (std::uint64_t{1} << 32) | value(id); }

  void record_key(std::uint64_t k, std::uint64_t bytes, Timestamp at);
  double bps_key(std::uint64_t k, Timestamp at) const;

  Timestamp window_;
  std::unordered_map<std::uint64_t, Series> series_;
};

}  // namespace muffler
