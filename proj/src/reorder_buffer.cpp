#include "muffler/reorder_buffer.h"

#include <stdexcept>
#include <utility>

namespace muffler {

ReorderBuffer::ReorderBuffer(std::uint16_t first_expected, std::size_t capacity)
    : expected_(first_expected), capacity_(capacity) {
  if (capacity_ == 0 || capacity_ > 0x8000) {
    throw std::invalid_argument("reorder capacity must be in [1, 32768]");
  }
}

ReorderBuffer::PushResult ReorderBuffer::push(std::uint16_t seq, Unit unit, Timestamp at) {
  const std::uint16_t d = distance(seq);
  if (d >= 0x8000 || pending_.contains(seq)) {
    return PushResult::Duplicate;
  }
  if (d >= capacity_ || pending_.size() >= capacity_) {
    return PushResult::Overflow;
  }
  pending_.emplace(seq, std::move(unit));
  last_push_ = at;
  if (!pending_.contains(expected_) && !blocked_since_) {
    blocked_since_ = at;
  }
  return PushResult::Accepted;
}

std::optional<ReorderBuffer::Unit> ReorderBuffer::pop_ready() {
  auto it = pending_.find(expected_);
  if (it == pending_.end()) {
    return std::nullopt;
  }
  Unit unit = std::move(it->second);
  pending_.erase(it);
  ++expected_;
  if (pending_.empty()) {
    blocked_since_.reset();
  } else if (!pending_.contains(expected_)) {
    // Progress was made; the clock restarts for the new gap.
    blocked_since_ = last_push_;
  }
  return unit;
}

bool ReorderBuffer::stalled(Timestamp now, Timestamp timeout) const {
  return blocked_since_ && !pending_.contains(expected_) && now - *blocked_since_ >= timeout;
}

}  // namespace muffler
