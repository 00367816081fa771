#include "muffler/runtime.h"

#include <poll.h>

#include <fstream>
#include <iostream>

namespace muffler {

namespace {

constexpr Timestamp kTickInterval = from_ms(100);
constexpr Timestamp kReconnectDelay = from_ms(1000);
constexpr std::size_t kReadChunk = 64 * 1024;

}  // namespace

ProxyRuntime::ProxyRuntime(const RunConfig& config)
    : config_(config),
      epoch_(std::chrono::steady_clock::now()),
      listener_(std::make_unique<TcpListener>(config.listen)),
      endpoint_(config.role, config.obfuscation, *this),
      buf_(kReadChunk) {
  endpoint_.start(now());
}

ProxyRuntime::~ProxyRuntime() = default;

Timestamp ProxyRuntime::now() const {
  return std::chrono::duration_cast<Timestamp>(std::chrono::steady_clock::now() - epoch_);
}

std::size_t ProxyRuntime::base_connections_up() const {
  std::size_t n = 0;
  for (const Base& b : bases_) {
    n += b.up ? 1 : 0;
  }
  return n;
}

void ProxyRuntime::record(std::uint32_t flow, std::size_t bytes, Direction dir) {
  if (!config_.trace_output || bytes == 0) {
    return;
  }
  FlowTrace& t = traces_[flow];
  t.flow_id = flow;
  t.segment = config_.role == Role::Ingress ? Segment::Ingress : Segment::Egress;
  t.events.push_back({now(), static_cast<std::uint32_t>(bytes), dir, false});
}

// ---- ProxyHost -------------------------------------------------------------

bool ProxyRuntime::write_virtual(VirtualId vc, std::span<const std::uint8_t> frame) {
  if (value(vc) >= bases_.size()) {
    return false;
  }
  Base& b = bases_[value(vc)];
  if (!b.up || !b.conn->write(frame)) {
    return false;
  }
  if (config_.role == Role::Egress) {
    record(value(vc), frame.size(), Direction::ToClient);
  }
  return true;
}

std::size_t ProxyRuntime::virtual_backlog(VirtualId vc) const {
  if (value(vc) >= bases_.size() || !bases_[value(vc)].conn) {
    return 0;
  }
  return bases_[value(vc)].conn->pending_output();
}

void ProxyRuntime::open_virtual(VirtualId vc) {
  if (config_.role != Role::Ingress || value(vc) >= config_.base_connections) {
    return;
  }
  if (value(vc) >= bases_.size()) {
    bases_.resize(value(vc) + 1);
  }
  Base& b = bases_[value(vc)];
  b.wanted = true;
  if (!b.conn) {
    connect_base(vc);
  }
}

void ProxyRuntime::connect_base(VirtualId vc) {
  Base& b = bases_[value(vc)];
  try {
    b.conn = TcpTransport::connect(config_.peer);
  } catch (const TransportError& e) {
    std::cerr << "base connection " << value(vc) << ": " << e.what() << '\n';
    b.conn.reset();
    b.retry_at = now() + kReconnectDelay;
    return;
  }
  if (b.conn->connected()) {
    b.up = true;
    endpoint_.on_virtual_up(vc, now());
  }
}

void ProxyRuntime::base_failed(VirtualId vc) {
  Base& b = bases_[value(vc)];
  const bool was_up = b.up;
  b.up = false;
  b.conn.reset();
  b.retry_at = now() + kReconnectDelay;
  if (was_up) {
    endpoint_.on_virtual_down(vc, now());
  }
  if (config_.role == Role::Egress) {
    b.wanted = false;
  }
}

void ProxyRuntime::reset_virtual(VirtualId vc) {
  if (value(vc) < bases_.size() && bases_[value(vc)].conn) {
    base_failed(vc);
  }
}

void ProxyRuntime::open_real(RealId id) {
  Real r;
  try {
    r.conn = TcpTransport::connect(config_.service);
  } catch (const TransportError& e) {
    std::cerr << "service connection: " << e.what() << '\n';
    endpoint_.on_real_reset(id, now());
    return;
  }
  reals_[id] = std::move(r);
}

void ProxyRuntime::deliver_real(RealId id, std::span<const std::uint8_t> bytes) {
  const auto it = reals_.find(id);
  if (it == reals_.end()) {
    return;
  }
  if (!it->second.conn->write(bytes)) {
    endpoint_.on_real_reset(id, now());
    return;
  }
  if (config_.role == Role::Ingress) {
    record(trace_ids_[id], bytes.size(), Direction::ToClient);
  }
}

void ProxyRuntime::end_real(RealId id) {
  const auto it = reals_.find(id);
  if (it == reals_.end()) {
    return;
  }
  it->second.conn->shutdown_write();
  it->second.write_done = true;
}

void ProxyRuntime::reset_real(RealId id) {
  const auto it = reals_.find(id);
  if (it != reals_.end()) {
    it->second.conn->close();
    reals_.erase(it);
  }
}

// ---- loop ------------------------------------------------------------------

void ProxyRuntime::accept_all() {
  while (auto conn = listener_->accept()) {
    if (config_.role == Role::Ingress) {
      const auto id = endpoint_.on_real_open(now());
      if (!id) {
        continue;  // ID space exhausted; drop the user connection
      }
      trace_ids_[*id] = next_trace_id_++;
      reals_[*id] = Real{std::move(conn)};
    } else {
      // Lowest free slot.
      std::size_t slot = 0;
      while (slot < bases_.size() && bases_[slot].conn) {
        ++slot;
      }
      if (slot == bases_.size()) {
        bases_.emplace_back();
      }
      Base& b = bases_[slot];
      b.conn = std::move(conn);
      b.up = true;
      b.wanted = true;
      endpoint_.on_virtual_up(VirtualId{static_cast<std::uint32_t>(slot)}, now());
    }
  }
}

void ProxyRuntime::service_base(VirtualId vc, short revents) {
  Base& b = bases_[value(vc)];
  if (!b.up) {
    if (revents & (POLLOUT | POLLERR | POLLHUP)) {
      b.conn->finish_connect();
      if (b.conn->failed()) {
        base_failed(vc);
        return;
      }
      b.up = true;
      endpoint_.on_virtual_up(vc, now());
    }
    return;
  }
  if (revents & POLLOUT) {
    b.conn->flush();
  }
  if (revents & (POLLIN | POLLHUP | POLLERR)) {
    for (;;) {
      const std::size_t n = bases_[value(vc)].conn->read_some(buf_);
      if (n == 0) {
        break;
      }
      if (config_.role == Role::Egress) {
        record(value(vc), n, Direction::ToService);
      }
      endpoint_.on_virtual_data(vc, std::span(buf_).first(n), now());
      if (!bases_[value(vc)].up) {
        return;  // dropped on a protocol error
      }
    }
  }
  Base& after = bases_[value(vc)];
  if (after.conn && (after.conn->failed() || after.conn->at_eof())) {
    base_failed(vc);
  }
}

void ProxyRuntime::service_real(RealId id, short revents) {
  auto it = reals_.find(id);
  TcpTransport& conn = *it->second.conn;
  if (!conn.connected()) {
    conn.finish_connect();
  }
  if (revents & POLLOUT) {
    conn.flush();
  }
  if (!it->second.read_done && (revents & (POLLIN | POLLHUP | POLLERR))) {
    for (;;) {
      const std::size_t n = conn.read_some(buf_);
      if (n == 0) {
        break;
      }
      if (config_.role == Role::Ingress) {
        record(trace_ids_[id], n, Direction::ToService);
      }
      endpoint_.on_real_data(id, std::span(buf_).first(n), now());
      it = reals_.find(id);
      if (it == reals_.end()) {
        return;
      }
    }
    if (conn.at_eof()) {
      it->second.read_done = true;
      endpoint_.on_real_close(id, now());
    }
  }
  it = reals_.find(id);
  if (it == reals_.end()) {
    return;
  }
  if (it->second.conn->failed()) {
    reals_.erase(it);
    endpoint_.on_real_reset(id, now());
    return;
  }
  reap_real(id);
}

// Both directions finished and flushed: the connection is no longer needed.
void ProxyRuntime::reap_real(RealId id) {
  const auto it = reals_.find(id);
  if (it == reals_.end()) {
    return;
  }
  const Real& r = it->second;
  if (r.read_done && r.write_done && r.conn->pending_output() == 0) {
    reals_.erase(it);
  }
}

void ProxyRuntime::step(int timeout_ms) {
  std::vector<pollfd> fds;
  std::vector<std::pair<int, std::uint32_t>> owners;  // 0 listener, 1 base, 2 real
  fds.push_back({listener_->fd(), POLLIN, 0});
  owners.emplace_back(0, 0);
  for (std::uint32_t i = 0; i < bases_.size(); ++i) {
    const Base& b = bases_[i];
    if (!b.conn) {
      continue;
    }
    short events = POLLIN;
    if (!b.up || b.conn->pending_output() > 0) {
      events |= POLLOUT;
    }
    fds.push_back({b.conn->fd(), events, 0});
    owners.emplace_back(1, i);
  }
  for (const auto& [id, r] : reals_) {
    short events = r.read_done ? 0 : POLLIN;
    if (!r.conn->connected() || r.conn->pending_output() > 0) {
      events |= POLLOUT;
    }
    fds.push_back({r.conn->fd(), events, 0});
    owners.emplace_back(2, value(id));
  }

  const int ready = ::poll(fds.data(), fds.size(), timeout_ms);
  if (ready > 0) {
    for (std::size_t k = 0; k < fds.size(); ++k) {
      if (fds[k].revents == 0) {
        continue;
      }
      const auto [kind, index] = owners[k];
      if (kind == 0) {
        accept_all();
      } else if (kind == 1) {
        if (index < bases_.size() && bases_[index].conn && bases_[index].conn->fd() == fds[k].fd) {
          service_base(VirtualId{index}, fds[k].revents);
        }
      } else {
        const RealId id{static_cast<std::uint16_t>(index)};
        const auto it = reals_.find(id);
        if (it != reals_.end() && it->second.conn->fd() == fds[k].fd) {
          service_real(id, fds[k].revents);
        }
      }
    }
  }

  const Timestamp t = now();
  if (config_.role == Role::Ingress) {
    for (std::uint32_t i = 0; i < bases_.size(); ++i) {
      Base& b = bases_[i];
      if (b.wanted && !b.conn && t >= b.retry_at && endpoint_.engine().table().is_active(VirtualId{i})) {
        connect_base(VirtualId{i});
      }
    }
  }
  if (t >= next_tick_) {
    endpoint_.tick(t);
    next_tick_ = t + kTickInterval;
  }
}

void ProxyRuntime::run(const std::atomic<bool>& stop) {
  while (!stop.load()) {
    step(50);
  }
  write_traces();
}

std::vector<FlowTrace> ProxyRuntime::traces() const {
  std::vector<FlowTrace> out;
  for (const auto& [id, t] : traces_) {
    out.push_back(t);
  }
  return out;
}

void ProxyRuntime::write_traces() const {
  if (!config_.trace_output) {
    return;
  }
  std::ofstream out(*config_.trace_output, std::ios::binary);
  if (!out) {
    throw TransportError("cannot write " + *config_.trace_output);
  }
  write_traces_csv(out, traces());
}

}  // namespace muffler
