#pragma once

#include <cstdint>
#include <vector>

#include "muffler/flow_trace.h"

namespace muffler::testing_util {

// One packet of `bytes` every `gap` in both directions over [start, start + length).
inline FlowTrace steady_flow(std::uint32_t id, Timestamp start, Timestamp length, Timestamp gap,
                             std::uint32_t bytes, Segment segment = Segment::Ingress) {
  FlowTrace f{id, segment, {}};
  for (Timestamp t = start; t < start + length; t += gap) {
    f.events.push_back({t, bytes, Direction::ToService, false});
    f.events.push_back({t + gap / 2, bytes * 3, Direction::ToClient, false});
  }
  return f;
}

}  // namespace muffler::testing_util
