#include "muffler/simulation.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <unordered_map>
#include <utility>

#include "muffler/transport.h"
#include "muffler/wire.h"

namespace muffler {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Timestamp transmission_time(std::size_t bytes, double bandwidth_bps) {
  if (bandwidth_bps <= 0.0) {
    return Timestamp{0};
  }
  return Timestamp{static_cast<std::int64_t>(
      std::ceil(static_cast<double>(bytes) * 8.0 * 1e6 / bandwidth_bps))};
}

// Serialization and FIFO delivery for one direction of a link.
struct LinkClock {
  Timestamp busy_until{std::numeric_limits<std::int64_t>::min() / 4};
  Timestamp last_arrival{std::numeric_limits<std::int64_t>::min() / 4};

  // Returns {transmission start, arrival}.
  std::pair<Timestamp, Timestamp> send(Timestamp now, std::size_t bytes, const LinkModel& link,
                                       std::mt19937_64& rng) {
    const Timestamp start = std::max(now, busy_until);
    busy_until = start + transmission_time(bytes, link.bandwidth_bps);
    Timestamp arrival = busy_until + link.latency;
    if (link.jitter.count() > 0) {
      std::uniform_int_distribution<std::int64_t> extra(0, link.jitter.count());
      arrival += Timestamp{extra(rng)};
    }
    arrival = std::max(arrival, last_arrival);
    last_arrival = arrival;
    return {start, arrival};
  }
};

std::size_t dir_index(Direction dir) { return dir == Direction::ToService ? 0 : 1; }

struct FlowState {
  const FlowTrace* spec = nullptr;
  std::optional<RealId> id;
  bool client_active = false;
  bool service_active = false;
  std::uint64_t sent[2] = {0, 0};
  std::uint64_t received[2] = {0, 0};
  FlowOutcome outcome;
  FlowTrace view;
};

class MufflerSim {
 public:
  MufflerSim(std::span<const FlowTrace> workload, const SimOptions& options)
      : options_(options),
        rng_(options.seed),
        hosts_{Host(*this, kIngress), Host(*this, kEgress)},
        ingress_(Role::Ingress, options.config, hosts_[kIngress], options.proxy),
        egress_(Role::Egress, options.config, hosts_[kEgress], options.proxy) {
    flows_.resize(workload.size());
    for (std::size_t f = 0; f < workload.size(); ++f) {
      FlowState& flow = flows_[f];
      flow.spec = &workload[f];
      flow.outcome.flow_id = workload[f].flow_id;
      flow.view = FlowTrace{workload[f].flow_id, Segment::Ingress, {}};
    }
  }

  SimResult run() {
    Timestamp first = Timestamp::max();
    Timestamp last{0};
    for (std::size_t f = 0; f < flows_.size(); ++f) {
      const FlowTrace& spec = *flows_[f].spec;
      if (spec.events.empty()) {
        continue;
      }
      first = std::min(first, spec.start());
      last = std::max(last, spec.end());
      schedule(spec.start(), Kind::ClientOpen, f);
      Timestamp close_at = spec.start();
      for (std::size_t k = 0; k < spec.events.size(); ++k) {
        if (spec.events[k].dir == Direction::ToService) {
          schedule(spec.events[k].t, Kind::ClientSend, f, k);
          close_at = spec.events[k].t;
        }
      }
      schedule(close_at, Kind::ClientClose, f);
    }
    if (first == Timestamp::max()) {
      first = Timestamp{0};
    }
    // Base connections come up before the first user connects.
    now_ = first - options_.connect_delay - options_.tick_interval;
    deadline_ = last + from_ms(120000);
    ingress_.start(now_);
    egress_.start(now_);
    schedule(now_ + options_.tick_interval, Kind::Tick);

    while (!queue_.empty()) {
      std::pop_heap(queue_.begin(), queue_.end(), Later{});
      Event ev = std::move(queue_.back());
      queue_.pop_back();
      now_ = ev.t;
      if (ev.kind != Kind::Tick) {
        --pending_;
      }
      dispatch(ev);
    }
    return collect();
  }

 private:
  static constexpr int kIngress = 0;
  static constexpr int kEgress = 1;

  enum class Kind {
    ClientOpen,
    ClientSend,
    ClientClose,
    ServiceSend,
    ServiceClose,
    VirtualUp,
    VirtualDown,
    Deliver,
    Tick,
  };

  struct Event {
    Timestamp t;
    std::uint64_t seq;
    Kind kind;
    std::size_t a = 0;
    std::size_t b = 0;
    std::uint32_t generation = 0;
    std::vector<std::uint8_t> data;
  };

  struct Later {
    bool operator()(const Event& x, const Event& y) const {
      return x.t != y.t ? x.t > y.t : x.seq > y.seq;
    }
  };

  struct Link {
    std::unique_ptr<LoopbackTransport> end[2];
    bool up = false;
    std::uint32_t generation = 0;
    LinkClock clock[2];
  };

  class Host final : public ProxyHost {
   public:
    Host(MufflerSim& sim, int side) : sim_(sim), side_(side) {}
    bool write_virtual(VirtualId vc, std::span<const std::uint8_t> frame) override {
      return sim_.write_virtual(side_, vc, frame);
    }
    std::size_t virtual_backlog(VirtualId vc) const override {
      return sim_.virtual_backlog(side_, vc);
    }
    void open_virtual(VirtualId vc) override { sim_.open_virtual(vc); }
    void reset_virtual(VirtualId vc) override { sim_.reset_virtual(side_, vc); }
    void open_real(RealId id) override { sim_.open_service(id); }
    void deliver_real(RealId id, std::span<const std::uint8_t> bytes) override {
      sim_.deliver_real(side_, id, bytes);
    }
    void end_real(RealId id) override { sim_.end_real(side_, id); }
    void reset_real(RealId id) override { sim_.reset_real(side_, id); }

   private:
    MufflerSim& sim_;
    int side_;
  };

  void schedule(Timestamp t, Kind kind, std::size_t a = 0, std::size_t b = 0,
                std::uint32_t generation = 0, std::vector<std::uint8_t> data = {}) {
    queue_.push_back(Event{t, next_seq_++, kind, a, b, generation, std::move(data)});
    std::push_heap(queue_.begin(), queue_.end(), Later{});
    if (kind != Kind::Tick) {
      ++pending_;
    }
  }

  ProxyEndpoint& proxy(int side) { return side == kIngress ? ingress_ : egress_; }

  std::optional<std::size_t> flow_of(int side, RealId id) const {
    const auto& map = side == kIngress ? ingress_flow_ : egress_flow_;
    const auto it = map.find(id);
    if (it == map.end()) {
      return std::nullopt;
    }
    return it->second;
  }

  void dispatch(Event& ev) {
    switch (ev.kind) {
      case Kind::ClientOpen: return client_open(ev.a);
      case Kind::ClientSend: return client_send(ev.a, ev.b);
      case Kind::ClientClose: return client_close(ev.a);
      case Kind::ServiceSend: return service_send(ev.a, ev.b);
      case Kind::ServiceClose: return service_close(ev.a);
      case Kind::VirtualUp: return virtual_up(ev.a, ev.generation);
      case Kind::VirtualDown: {
        proxy(static_cast<int>(ev.b)).on_virtual_down(VirtualId{static_cast<std::uint32_t>(ev.a)},
                                                      now_);
        return;
      }
      case Kind::Deliver: return deliver(ev);
      case Kind::Tick: return tick();
    }
  }

  void client_open(std::size_t f) {
    FlowState& flow = flows_[f];
    const auto id = ingress_.on_real_open(now_);
    if (!id) {
      flow.outcome.reset = true;
      return;
    }
    flow.id = id;
    flow.client_active = true;
    ingress_flow_[*id] = f;
  }

  std::vector<std::uint8_t> make_payload(FlowState& flow, Direction dir, std::uint32_t size) {
    std::vector<std::uint8_t> bytes(size);
    fill_payload(flow.spec->flow_id, dir, flow.sent[dir_index(dir)], bytes);
    flow.sent[dir_index(dir)] += size;
    return bytes;
  }

  void client_send(std::size_t f, std::size_t k) {
    FlowState& flow = flows_[f];
    if (!flow.client_active) {
      return;
    }
    const PacketEvent& e = flow.spec->events[k];
    const auto bytes = make_payload(flow, Direction::ToService, e.bytes);
    flow.outcome.sent_to_service += e.bytes;
    flow.view.events.push_back({now_, e.bytes, Direction::ToService, false});
    ingress_.on_real_data(*flow.id, bytes, now_);
  }

  void client_close(std::size_t f) {
    FlowState& flow = flows_[f];
    if (!flow.client_active) {
      return;
    }
    flow.client_active = false;
    ingress_.on_real_close(*flow.id, now_);
  }

  void open_service(RealId id) {
    const auto f = flow_of(kIngress, id);
    if (!f) {
      return;
    }
    egress_flow_[id] = *f;
    FlowState& flow = flows_[*f];
    flow.service_active = true;
    const FlowTrace& spec = *flow.spec;
    Timestamp close_at = now_;
    for (std::size_t k = 0; k < spec.events.size(); ++k) {
      if (spec.events[k].dir == Direction::ToClient) {
        const Timestamp at = std::max(spec.events[k].t, now_);
        schedule(at, Kind::ServiceSend, *f, k);
        close_at = std::max(close_at, at);
      }
    }
    schedule(close_at, Kind::ServiceClose, *f);
  }

  void service_send(std::size_t f, std::size_t k) {
    FlowState& flow = flows_[f];
    if (!flow.service_active) {
      return;
    }
    const PacketEvent& e = flow.spec->events[k];
    const auto bytes = make_payload(flow, Direction::ToClient, e.bytes);
    flow.outcome.sent_to_client += e.bytes;
    egress_.on_real_data(*flow.id, bytes, now_);
  }

  void service_close(std::size_t f) {
    FlowState& flow = flows_[f];
    if (!flow.service_active) {
      return;
    }
    flow.service_active = false;
    egress_.on_real_close(*flow.id, now_);
  }

  void deliver_real(int side, RealId id, std::span<const std::uint8_t> bytes) {
    const auto f = flow_of(side, id);
    if (!f) {
      return;
    }
    FlowState& flow = flows_[*f];
    const Direction dir = side == kIngress ? Direction::ToClient : Direction::ToService;
    expected_.resize(bytes.size());
    fill_payload(flow.spec->flow_id, dir, flow.received[dir_index(dir)], expected_);
    if (std::memcmp(expected_.data(), bytes.data(), bytes.size()) != 0) {
      flow.outcome.content_ok = false;
    }
    flow.received[dir_index(dir)] += bytes.size();
    if (side == kIngress) {
      flow.outcome.delivered_to_client += bytes.size();
      flow.view.events.push_back(
          {now_, static_cast<std::uint32_t>(bytes.size()), Direction::ToClient, false});
    } else {
      flow.outcome.delivered_to_service += bytes.size();
    }
  }

  void end_real(int side, RealId id) {
    if (const auto f = flow_of(side, id)) {
      (side == kIngress ? flows_[*f].outcome.client_eof : flows_[*f].outcome.service_eof) = true;
    }
  }

  void reset_real(int side, RealId id) {
    if (const auto f = flow_of(side, id)) {
      FlowState& flow = flows_[*f];
      flow.outcome.reset = true;
      (side == kIngress ? flow.client_active : flow.service_active) = false;
    }
  }

  Link& link(VirtualId vc) {
    if (value(vc) >= links_.size()) {
      links_.resize(value(vc) + 1);
      egress_view_.resize(links_.size());
    }
    return links_[value(vc)];
  }

  void open_virtual(VirtualId vc) {
    Link& l = link(vc);
    if (l.up) {
      return;
    }
    auto [a, b] = LoopbackTransport::make_pair();
    l.end[kIngress] = std::move(a);
    l.end[kEgress] = std::move(b);
    ++l.generation;
    schedule(now_ + options_.connect_delay, Kind::VirtualUp, value(vc), 0, l.generation);
  }

  void virtual_up(std::size_t index, std::uint32_t generation) {
    Link& l = links_[index];
    if (l.generation != generation || l.up) {
      return;
    }
    l.up = true;
    l.clock[0] = LinkClock{};
    l.clock[1] = LinkClock{};
    const VirtualId vc{static_cast<std::uint32_t>(index)};
    ingress_.on_virtual_up(vc, now_);
    egress_.on_virtual_up(vc, now_);
  }

  void reset_virtual(int side, VirtualId vc) {
    Link& l = link(vc);
    if (!l.up) {
      return;
    }
    l.up = false;
    ++l.generation;
    l.end[kIngress]->close();
    l.end[kEgress]->close();
    schedule(now_, Kind::VirtualDown, value(vc), static_cast<std::size_t>(1 - side));
  }

  bool write_virtual(int side, VirtualId vc, std::span<const std::uint8_t> frame) {
    Link& l = link(vc);
    if (!l.up || !l.end[side]->write(frame)) {
      return false;
    }
    LoopbackTransport& peer = *l.end[1 - side];
    std::vector<std::uint8_t> bytes(peer.available());
    peer.read_some(bytes);
    const auto [start, arrival] = l.clock[side].send(now_, bytes.size(), options_.link, rng_);

    const auto cmd = static_cast<wire::CommandType>((frame[0] << 8) | frame[1]);
    FlowTrace& wire_flow = egress_view_[value(vc)];
    wire_flow.flow_id = value(vc);
    wire_flow.segment = Segment::Egress;
    wire_flow.events.push_back({start, static_cast<std::uint32_t>(frame.size()),
                                side == kIngress ? Direction::ToService : Direction::ToClient,
                                cmd != wire::CommandType::Relay});
    schedule(arrival, Kind::Deliver, value(vc), static_cast<std::size_t>(1 - side), l.generation,
             std::move(bytes));
    return true;
  }

  std::size_t virtual_backlog(int side, VirtualId vc) const {
    if (value(vc) >= links_.size()) {
      return 0;
    }
    return links_[value(vc)].clock[side].busy_until > now_ ? 1 : 0;
  }

  void deliver(Event& ev) {
    auto stale = [&] { return links_[ev.a].generation != ev.generation || !links_[ev.a].up; };
    if (stale()) {
      return;
    }
    const VirtualId vc{static_cast<std::uint32_t>(ev.a)};
    ProxyEndpoint& receiver = proxy(static_cast<int>(ev.b));
    std::span<const std::uint8_t> rest(ev.data);
    if (options_.link.fragment_reads) {
      std::uniform_int_distribution<std::size_t> cut(1, std::max<std::size_t>(rest.size(), 1));
      while (rest.size() > 1) {
        const std::size_t n = std::min(cut(rng_), rest.size());
        receiver.on_virtual_data(vc, rest.first(n), now_);
        rest = rest.subspan(n);
        if (stale()) {
          return;
        }
      }
    }
    if (!rest.empty()) {
      receiver.on_virtual_data(vc, rest, now_);
    }
  }

  bool all_done() const {
    return std::all_of(flows_.begin(), flows_.end(), [](const FlowState& f) {
      return f.spec->events.empty() || f.outcome.reset ||
             (f.outcome.client_eof && f.outcome.service_eof);
    });
  }

  void tick() {
    ingress_.tick(now_);
    egress_.tick(now_);
    if ((pending_ > 0 || !all_done()) && now_ < deadline_) {
      schedule(now_ + options_.tick_interval, Kind::Tick);
    }
  }

  SimResult collect() {
    SimResult result;
    for (FlowState& flow : flows_) {
      result.ingress.push_back(std::move(flow.view));
      result.outcomes.push_back(flow.outcome);
      result.payload_bytes += flow.outcome.sent_to_service + flow.outcome.sent_to_client;
    }
    for (FlowTrace& f : egress_view_) {
      if (!f.events.empty()) {
        result.wire_bytes += f.total_bytes();
        result.frames += f.events.size();
        result.egress.push_back(std::move(f));
      }
    }
    result.ingress_stats = ingress_.stats();
    result.egress_stats = egress_.stats();
    return result;
  }

  SimOptions options_;
  std::mt19937_64 rng_;
  Host hosts_[2];
  ProxyEndpoint ingress_;
  ProxyEndpoint egress_;
  std::vector<FlowState> flows_;
  std::unordered_map<RealId, std::size_t> ingress_flow_;
  std::unordered_map<RealId, std::size_t> egress_flow_;
  std::vector<Link> links_;
  std::vector<FlowTrace> egress_view_;
  std::vector<Event> queue_;
  std::vector<std::uint8_t> expected_;
  std::uint64_t next_seq_ = 0;
  std::size_t pending_ = 0;
  Timestamp now_{0};
  Timestamp deadline_{0};
};

}  // namespace

bool FlowOutcome::intact() const {
  return content_ok && !reset && client_eof && service_eof &&
         sent_to_service == delivered_to_service && sent_to_client == delivered_to_client;
}

bool SimResult::all_intact() const {
  return std::all_of(outcomes.begin(), outcomes.end(),
                     [](const FlowOutcome& o) { return o.intact(); });
}

void fill_payload(std::uint32_t flow_id, Direction dir, std::uint64_t offset,
                  std::span<std::uint8_t> out) {
  const std::uint64_t key = (static_cast<std::uint64_t>(flow_id) << 33) ^
                            (static_cast<std::uint64_t>(dir_index(dir)) << 32) ^
                            0x5bd1e9955bd1e995ULL;
  std::size_t i = 0;
  while (i < out.size()) {
    const std::uint64_t pos = offset + i;
    const std::uint64_t block = splitmix64(key ^ splitmix64(pos >> 3));
    std::size_t lane = pos & 7;
    for (; lane < 8 && i < out.size(); ++lane, ++i) {
      out[i] = static_cast<std::uint8_t>(block >> (lane * 8));
    }
  }
}

SimResult simulate_muffler(std::span<const FlowTrace> workload, const SimOptions& options) {
  options.config.validate();
  MufflerSim sim(workload, options);
  return sim.run();
}

SimResult simulate_direct(std::span<const FlowTrace> workload, const SimOptions& options) {
  std::mt19937_64 rng(options.seed);
  SimResult result;
  for (const FlowTrace& spec : workload) {
    FlowTrace user{spec.flow_id, Segment::Ingress, {}};
    FlowTrace wire{spec.flow_id, Segment::Egress, {}};
    FlowOutcome outcome;
    outcome.flow_id = spec.flow_id;
    LinkClock clock[2];
    // The service side exists once the connection request has crossed the link.
    const Timestamp service_open = spec.start() + options.link.latency;
    for (const PacketEvent& e : spec.events) {
      if (e.dir == Direction::ToService) {
        const auto [start, arrival] = clock[0].send(e.t, e.bytes, options.link, rng);
        user.events.push_back({e.t, e.bytes, Direction::ToService, false});
        wire.events.push_back({start, e.bytes, Direction::ToService, false});
        outcome.sent_to_service += e.bytes;
        outcome.delivered_to_service += e.bytes;
        (void)arrival;
      } else {
        const Timestamp at = std::max(e.t, service_open);
        const auto [start, arrival] = clock[1].send(at, e.bytes, options.link, rng);
        wire.events.push_back({start, e.bytes, Direction::ToClient, false});
        user.events.push_back({arrival, e.bytes, Direction::ToClient, false});
        outcome.sent_to_client += e.bytes;
        outcome.delivered_to_client += e.bytes;
      }
    }
    outcome.client_eof = outcome.service_eof = true;
    auto by_time = [](const PacketEvent& a, const PacketEvent& b) { return a.t < b.t; };
    std::stable_sort(user.events.begin(), user.events.end(), by_time);
    std::stable_sort(wire.events.begin(), wire.events.end(), by_time);
    result.payload_bytes += outcome.sent_to_service + outcome.sent_to_client;
    result.wire_bytes += wire.total_bytes();
    result.frames += wire.events.size();
    result.ingress.push_back(std::move(user));
    result.egress.push_back(std::move(wire));
    result.outcomes.push_back(outcome);
  }
  return result;
}

}  // namespace muffler
