#include "muffler/flow_trace.h"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

namespace muffler {

const char* to_string(Segment segment) {
  return segment == Segment::Ingress ? "ingress" : "egress";
}

const char* to_string(Direction dir) {
  return dir == Direction::ToService ? "to-service" : "to-client";
}

std::uint64_t FlowTrace::total_bytes() const {
  std::uint64_t total = 0;
  for (const auto& e : events) {
    total += e.bytes;
  }
  return total;
}

std::uint64_t FlowTrace::bytes_in(Direction dir) const {
  std::uint64_t total = 0;
  for (const auto& e : events) {
    if (e.dir == dir) {
      total += e.bytes;
    }
  }
  return total;
}

TraceParseError::TraceParseError(const std::string& what, std::size_t line)
    : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}

void write_traces_csv(std::ostream& out, std::span<const FlowTrace> flows) {
  out << "flow_id,direction,t_micros,bytes,dir\n";
  for (const FlowTrace& flow : flows) {
    for (const PacketEvent& e : flow.events) {
      out << flow.flow_id << ',' << to_string(flow.segment) << ',' << e.t.count() << ','
          << e.bytes << ',' << to_string(e.dir) << '\n';
    }
  }
}

namespace {

template <typename T>
T parse_number(std::string_view field, const char* name, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw TraceParseError(std::string("invalid ") + name + " '" + std::string(field) + "'", line);
  }
  return v;
}

}  // namespace

std::vector<FlowTrace> read_traces_csv(std::istream& in) {
  std::vector<FlowTrace> flows;
  std::map<std::pair<std::uint32_t, Segment>, std::size_t> index;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') {
      text.pop_back();
    }
    if (text.empty()) {
      continue;
    }
    if (line == 1 && text.rfind("flow_id,", 0) == 0) {
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view rest(text);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) {
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 5) {
      throw TraceParseError("expected 5 fields, got " + std::to_string(fields.size()), line);
    }
    const auto flow_id = parse_number<std::uint32_t>(fields[0], "flow_id", line);
    Segment segment;
    if (fields[1] == "ingress") {
      segment = Segment::Ingress;
    } else if (fields[1] == "egress") {
      segment = Segment::Egress;
    } else {
      throw TraceParseError("unknown direction tag '" + std::string(fields[1]) + "'", line);
    }
    const auto t = parse_number<std::int64_t>(fields[2], "t_micros", line);
    const auto bytes = parse_number<std::uint32_t>(fields[3], "bytes", line);
    if (bytes == 0) {
      throw TraceParseError("packet length must be at least 1", line);
    }
    Direction dir;
    if (fields[4] == "to-service") {
      dir = Direction::ToService;
    } else if (fields[4] == "to-client") {
      dir = Direction::ToClient;
    } else {
      throw TraceParseError("unknown dir '" + std::string(fields[4]) + "'", line);
    }
    auto [it, inserted] = index.try_emplace({flow_id, segment}, flows.size());
    if (inserted) {
      flows.push_back(FlowTrace{flow_id, segment, {}});
    }
    FlowTrace& flow = flows[it->second];
    if (!flow.events.empty() && Timestamp{t} < flow.events.back().t) {
      throw TraceParseError("timestamps must be non-decreasing within a flow", line);
    }
    flow.events.push_back({Timestamp{t}, bytes, dir, false});
  }
  return flows;
}

FlowTrace merge_flows(std::span<const FlowTrace> flows, std::uint32_t flow_id, Segment segment) {
  FlowTrace merged{flow_id, segment, {}};
  for (const FlowTrace& f : flows) {
    merged.events.insert(merged.events.end(), f.events.begin(), f.events.end());
  }
  std::stable_sort(merged.events.begin(), merged.events.end(),
                   [](const PacketEvent& a, const PacketEvent& b) { return a.t < b.t; });
  return merged;
}

bool is_well_formed(const FlowTrace& flow) {
  for (std::size_t i = 0; i < flow.events.size(); ++i) {
    if (flow.events[i].bytes == 0) {
      return false;
    }
    if (i > 0 && flow.events[i].t < flow.events[i - 1].t) {
      return false;
    }
  }
  return true;
}

}  // namespace muffler
