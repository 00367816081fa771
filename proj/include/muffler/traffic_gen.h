#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "muffler/flow_trace.h"

namespace muffler {

enum class Profile { Browsing, Download };

Profile parse_profile(const std::string& text);
const char* to_string(Profile profile);

inline constexpr std::uint32_t kDefaultSegmentSize = 1448;

// Deterministic synthetic workloads, seen from the user side of each real
// connection. Browsing: request/response cycles with lognormal response sizes
// and exponential think times. Download: one request followed by a sustained
// stream of full segments. Flow IDs are 0 .. n_flows-1.
std::vector<FlowTrace> generate_flows(Profile profile, std::size_t n_flows, Timestamp duration,
                                      std::uint64_t seed,
                                      std::uint32_t segment_size = kDefaultSegmentSize);

}  // namespace muffler
