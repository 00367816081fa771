#include "muffler/traffic_gen.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace muffler {
namespace {

std::int64_t micros(double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1e6)); }

// Splits `total` bytes into segment-size packets spaced by `gap` plus jitter.
Timestamp emit_response(FlowTrace& flow, Timestamp at, std::uint64_t total,
                        std::uint32_t segment_size, Timestamp limit, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> gap(200, 1200);
  while (total > 0 && at <= limit) {
    const auto n = static_cast<std::uint32_t>(std::min<std::uint64_t>(total, segment_size));
    flow.events.push_back({at, n, Direction::ToClient, false});
    total -= n;
    at += Timestamp{gap(rng)};
  }
  return at;
}

FlowTrace browsing_flow(std::uint32_t id, Timestamp duration, std::uint32_t segment_size,
                        std::mt19937_64& rng) {
  FlowTrace flow{id, Segment::Ingress, {}};
  std::uniform_int_distribution<std::int64_t> start(0, micros(2.0));
  std::uniform_int_distribution<std::uint32_t> request_size(200, 900);
  std::uniform_int_distribution<std::int64_t> server_delay(micros(0.010), micros(0.040));
  std::lognormal_distribution<double> response_size(std::log(15000.0), 1.0);
  std::exponential_distribution<double> think(1.0 / 1.2);

  Timestamp t{start(rng)};
  while (t < duration) {
    flow.events.push_back({t, request_size(rng), Direction::ToService, false});
    const auto total = static_cast<std::uint64_t>(
        std::clamp(response_size(rng), 300.0, 4.0 * 1024 * 1024));
    const Timestamp done = emit_response(flow, t + Timestamp{server_delay(rng)}, total,
                                         segment_size, duration, rng);
    t = done + Timestamp{micros(0.05 + think(rng))};
  }
  return flow;
}

FlowTrace download_flow(std::uint32_t id, Timestamp duration, std::uint32_t segment_size,
                        std::mt19937_64& rng) {
  FlowTrace flow{id, Segment::Ingress, {}};
  std::uniform_int_distribution<std::int64_t> start(0, micros(0.5));
  std::uniform_int_distribution<std::int64_t> server_delay(micros(0.010), micros(0.040));
  // Pacing scales with the segment so every flow runs near 12 Mbit/s.
  const auto spacing = static_cast<std::int64_t>(segment_size) * 8 * 1'000'000 / 12'000'000;
  std::uniform_int_distribution<std::int64_t> jitter(0, std::max<std::int64_t>(spacing / 10, 1));

  Timestamp t{start(rng)};
  flow.events.push_back({t, 300, Direction::ToService, false});
  t += Timestamp{server_delay(rng)};
  while (t < duration) {
    flow.events.push_back({t, segment_size, Direction::ToClient, false});
    t += Timestamp{spacing + jitter(rng)};
  }
  return flow;
}

}  // namespace

Profile parse_profile(const std::string& text) {
  if (text == "browsing") return Profile::Browsing;
  if (text == "download") return Profile::Download;
  throw std::invalid_argument("unknown workload profile '" + text + "'");
}

const char* to_string(Profile profile) {
  return profile == Profile::Browsing ? "browsing" : "download";
}

std::vector<FlowTrace> generate_flows(Profile profile, std::size_t n_flows, Timestamp duration,
                                      std::uint64_t seed, std::uint32_t segment_size) {
  if (n_flows == 0) {
    throw std::invalid_argument("generate_flows: n_flows must be >= 1");
  }
  if (segment_size == 0) {
    throw std::invalid_argument("generate_flows: segment_size must be >= 1");
  }
  std::vector<FlowTrace> flows;
  flows.reserve(n_flows);
  for (std::size_t i = 0; i < n_flows; ++i) {
    // Each flow has its own stream so adding flows never perturbs earlier ones.
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), 0x6d756666u};
    std::mt19937_64 rng(seq);
    const auto id = static_cast<std::uint32_t>(i);
    flows.push_back(profile == Profile::Browsing ? browsing_flow(id, duration, segment_size, rng)
                                                 : download_flow(id, duration, segment_size, rng));
  }
  return flows;
}

}  // namespace muffler
