#pragma once

#include "muffler/flow_trace.h"

namespace muffler {

struct OverheadReport {
  double bandwidth = 0.0;  // O(D) = (|P'| - |P|) / |P|
  double latency = 0.0;    // T(D) = (t_k - t_n) / t_n
};

// Throws std::invalid_argument when the original carries no bytes.
double bandwidth_overhead(const FlowTrace& original, const FlowTrace& obfuscated);

// Both traces are shifted to start at 0. t_n is the original's last packet,
// t_k the obfuscated trace's last non-control packet. Throws
// std::invalid_argument when the original has zero duration.
double latency_overhead(const FlowTrace& original, const FlowTrace& obfuscated);

}  // namespace muffler
