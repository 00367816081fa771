#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "muffler/types.h"

namespace muffler {

// Where a flow was observed: the ingress segment (F_i, user side) or the
// egress segment (F_e, between the proxies or the relay and the service).
enum class Segment { Ingress, Egress };

enum class Direction { ToService, ToClient };

const char* to_string(Segment segment);
const char* to_string(Direction dir);

struct PacketEvent {
  Timestamp t;
  std::uint32_t bytes = 0;
  Direction dir = Direction::ToService;
  // Header-only proxy frames (Create/Remove/KeepAlive). Not serialized.
  bool control = false;

  bool operator==(const PacketEvent&) const = default;
};

// Timestamped packet-length sequence of one flow.
struct FlowTrace {
  std::uint32_t flow_id = 0;
  Segment segment = Segment::Ingress;
  std::vector<PacketEvent> events;

  Timestamp start() const { return events.empty() ? Timestamp{0} : events.front().t; }
  Timestamp end() const { return events.empty() ? Timestamp{0} : events.back().t; }
  std::uint64_t total_bytes() const;
  std::uint64_t bytes_in(Direction dir) const;

  bool operator==(const FlowTrace&) const = default;
};

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(const std::string& what, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// `flow_id,direction,t_micros,bytes,dir` with a header row; flows in the
// order given, events in trace order.
void write_traces_csv(std::ostream& out, std::span<const FlowTrace> flows);

// Accepts the header row or not. Events are grouped by (flow_id, direction)
// in order of first appearance and must be time-ordered within a flow.
std::vector<FlowTrace> read_traces_csv(std::istream& in);

// Every event of `flows` in one time-ordered trace (stable for equal times).
FlowTrace merge_flows(std::span<const FlowTrace> flows, std::uint32_t flow_id, Segment segment);

// Checks non-decreasing timestamps and positive lengths.
bool is_well_formed(const FlowTrace& flow);

}  // namespace muffler
