#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "muffler/flow_trace.h"
#include "muffler/mapping.h"
#include "muffler/proxy.h"

namespace muffler {

// Point-to-point link between the proxies (or, for the direct relay, between
// the relay and the service). Each direction serializes at bandwidth_bps and
// is FIFO; jitter adds a uniform extra delay without reordering within a link.
struct LinkModel {
  Timestamp latency = from_ms(2);
  double bandwidth_bps = 100e6;  // 0 = unlimited
  Timestamp jitter{0};
  bool fragment_reads = false;   // hand received bytes to the proxy in random pieces
};

struct SimOptions {
  ObfuscationConfig config;
  LinkModel link;
  ProxyOptions proxy;
  std::uint64_t seed = 1;
  Timestamp tick_interval = from_ms(100);
  Timestamp connect_delay = from_ms(5);  // base connection establishment
};

struct FlowOutcome {
  std::uint32_t flow_id = 0;
  std::uint64_t sent_to_service = 0;
  std::uint64_t delivered_to_service = 0;
  std::uint64_t sent_to_client = 0;
  std::uint64_t delivered_to_client = 0;
  bool content_ok = true;  // every delivered byte matched what was sent, in order
  bool client_eof = false;
  bool service_eof = false;
  bool reset = false;

  bool intact() const;
};

struct SimResult {
  // User-side view of each real connection: requests at send time, responses
  // at delivery time. Flow IDs follow the workload.
  std::vector<FlowTrace> ingress;
  // Wire view between the two proxies: one flow per virtual connection, one
  // event per frame. For the direct relay, one flow per real connection.
  std::vector<FlowTrace> egress;
  std::vector<FlowOutcome> outcomes;
  ProxyStats ingress_stats;
  ProxyStats egress_stats;
  std::uint64_t payload_bytes = 0;
  std::uint64_t wire_bytes = 0;
  std::uint64_t frames = 0;

  bool all_intact() const;
};

// Replays `workload` (user-side flows, as produced by generate_flows) through
// an ingress proxy, loopback base connections and an egress proxy in virtual
// time. Identical inputs give identical results.
SimResult simulate_muffler(std::span<const FlowTrace> workload, const SimOptions& options);

// The same workload over a direct 1:1 relay with no framing.
SimResult simulate_direct(std::span<const FlowTrace> workload, const SimOptions& options);

// Deterministic content of byte `offset` onward of one direction of a flow.
void fill_payload(std::uint32_t flow_id, Direction dir, std::uint64_t offset,
                  std::span<std::uint8_t> out);

}  // namespace muffler
