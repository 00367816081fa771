#include "muffler/overhead.h"

#include <stdexcept>

namespace muffler {
namespace {

// Last non-control timestamp relative to the trace's first event.
Timestamp payload_span(const FlowTrace& trace) {
  if (trace.events.empty()) {
    return Timestamp{0};
  }
  for (auto it = trace.events.rbegin(); it != trace.events.rend(); ++it) {
    if (!it->control) {
      return it->t - trace.start();
    }
  }
  return Timestamp{0};
}

}  // namespace

double bandwidth_overhead(const FlowTrace& original, const FlowTrace& obfuscated) {
  const auto base = static_cast<double>(original.total_bytes());
  if (base <= 0.0) {
    throw std::invalid_argument("bandwidth_overhead: original trace is empty");
  }
  return (static_cast<double>(obfuscated.total_bytes()) - base) / base;
}

double latency_overhead(const FlowTrace& original, const FlowTrace& obfuscated) {
  const auto t_n = static_cast<double>(payload_span(original).count());
  if (t_n <= 0.0) {
    throw std::invalid_argument("latency_overhead: original trace has zero duration");
  }
  const auto t_k = static_cast<double>(payload_span(obfuscated).count());
  return (t_k - t_n) / t_n;
}

}  // namespace muffler
