#include "muffler/rate_tracker.h"

#include <algorithm>
#include <stdexcept>

namespace muffler {

RateTracker::RateTracker(Timestamp window) : window_(window) {
  if (window_.count() <= 0) {
    throw std::invalid_argument("rate window must be positive");
  }
}

void RateTracker::record_key(std::uint64_t k, std::uint64_t bytes, Timestamp at) {
  Series& s = series_[k];
  const std::uint64_t prev = s.samples.empty() ? s.evicted : s.samples.back().cumulative;
  if (!s.samples.empty() && s.samples.back().at == at) {
    s.samples.back().cumulative = prev + bytes;
  } else {
    s.samples.push_back({at, prev + bytes});
  }
  // Keep everything a query at `at` or later could still need.
  const Timestamp horizon = at - window_;
  while (s.samples.size() > 1 && s.samples.front().at <= horizon) {
    s.evicted = s.samples.front().cumulative;
    s.samples.pop_front();
  }
}

double RateTracker::bps_key(std::uint64_t k, Timestamp at) const {
  const auto it = series_.find(k);
  if (it == series_.end() || it->second.samples.empty()) {
    return 0.0;
  }
  const Series& s = it->second;
  // Cumulative byte count of all samples with timestamp <= t.
  auto cumulative_at = [&s](Timestamp t) {
    auto pos = std::upper_bound(s.samples.begin(), s.samples.end(), t,
                                [](Timestamp v, const Sample& sm) { return v < sm.at; });
    return pos == s.samples.begin() ? s.evicted : std::prev(pos)->cumulative;
  };
  const std::uint64_t upper = cumulative_at(at);
  const std::uint64_t lower = cumulative_at(at - window_);
  const double seconds = std::chrono::duration<double>(window_).count();
  return static_cast<double>(upper - lower) / seconds;
}

}  // namespace muffler
