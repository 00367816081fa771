#pragma once

#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <optional>
#include <vector>

#include "muffler/types.h"

namespace muffler {

inline constexpr std::size_t kReorderCap = 256;
inline constexpr Timestamp kReorderTimeout = from_ms(5000);

// Restores per-real-connection order for units that crossed independently
// ordered virtual connections. Sequence numbers are 16-bit and wrap; anything
// within [expected, expected + capacity) is accepted, anything in the half
// space behind `expected` is treated as a duplicate.
class ReorderBuffer {
 public:
  struct Unit {
    std::vector<std::uint8_t> payload;
    bool end_of_stream = false;
  };

  enum class PushResult { Accepted, Duplicate, Overflow };

  explicit ReorderBuffer(std::uint16_t first_expected = 1, std::size_t capacity = kReorderCap);

  PushResult push(std::uint16_t seq, Unit unit, Timestamp at);

  // Pops the next in-order unit if it has arrived.
  std::optional<Unit> pop_ready();

  // True when units are parked behind a gap that has not moved for `timeout`.
  bool stalled(Timestamp now, Timestamp timeout = kReorderTimeout) const;

  std::size_t pending() const { return pending_.size(); }
  std::uint16_t expected() const { return expected_; }

 private:
  std::uint16_t distance(std::uint16_t seq) const {
    return static_cast<std::uint16_t>(seq - expected_);
  }

  std::uint16_t expected_;
  std::size_t capacity_;
  std::unordered_map<std::uint16_t, Unit> pending_;  // keyed by sequence number
  std::optional<Timestamp> blocked_since_;
  Timestamp last_push_{0};
};

}  // namespace muffler
