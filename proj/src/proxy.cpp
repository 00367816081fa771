#include "muffler/proxy.h"

#include <algorithm>
#include <string>
#include <utility>

namespace muffler {

using wire::CommandType;
using wire::FrameHeader;

std::uint64_t ProxyStats::total_frames() const {
  std::uint64_t total = 0;
  for (const auto n : frames_sent) {
    total += n;
  }
  return total;
}

ProxyEndpoint::ProxyEndpoint(Role role, const ObfuscationConfig& config, ProxyHost& host,
                             ProxyOptions options)
    : role_(role), host_(host), options_(options), engine_(config) {}

ProxyEndpoint::VirtualConn& ProxyEndpoint::vconn(VirtualId vc) {
  if (value(vc) >= virtuals_.size()) {
    virtuals_.resize(value(vc) + 1);
  }
  return virtuals_[value(vc)];
}

std::optional<ProxyEndpoint::VirtualStatus> ProxyEndpoint::virtual_status(VirtualId vc) const {
  if (value(vc) >= virtuals_.size()) {
    return std::nullopt;
  }
  return virtuals_[value(vc)].status;
}

void ProxyEndpoint::start(Timestamp now) { rebalance(now); }

std::vector<VirtualId> ProxyEndpoint::candidates() const {
  std::vector<VirtualId> out;
  for (const VirtualId vc : engine_.table().virtual_ids) {
    if (value(vc) < virtuals_.size() && virtuals_[value(vc)].up) {
      out.push_back(vc);
    }
  }
  if (out.empty()) {
    // Nothing active is usable yet; fall back to any live base connection.
    for (std::uint32_t i = 0; i < virtuals_.size(); ++i) {
      if (virtuals_[i].up) {
        out.push_back(VirtualId{i});
      }
    }
  }
  return out;
}

void ProxyEndpoint::rebalance(Timestamp now) {
  const auto actions = engine_.rebalance(now);
  apply_actions(actions, now);
}

void ProxyEndpoint::apply_actions(std::span<const MappingAction> actions, Timestamp now) {
  for (const MappingAction& action : actions) {
    VirtualConn& v = vconn(action.vc);
    if (action.kind == MappingAction::Kind::ActivateVirtual) {
      v.status = VirtualStatus::Active;
      if (!v.up && role_ == Role::Ingress) {
        host_.open_virtual(action.vc);
      }
    } else {
      v.status = host_.virtual_backlog(action.vc) > 0 ? VirtualStatus::Draining
                                                       : VirtualStatus::Inactive;
    }
  }
  (void)now;
}

void ProxyEndpoint::on_virtual_up(VirtualId vc, Timestamp now) {
  VirtualConn& v = vconn(vc);
  v.up = true;
  v.last_sent = now;
  v.decoder.reset();
  if (engine_.table().is_active(vc)) {
    v.status = VirtualStatus::Active;
  }
}

void ProxyEndpoint::on_virtual_down(VirtualId vc, Timestamp now) {
  if (value(vc) >= virtuals_.size()) {
    return;
  }
  VirtualConn& v = virtuals_[value(vc)];
  const bool was_up = v.up;
  v.up = false;
  v.decoder.reset();
  const std::set<RealId> touched = std::exchange(v.touched, {});
  for (const RealId id : touched) {
    if (reals_.contains(id)) {
      reset_real(id, now, true);
    }
  }
  if (was_up && role_ == Role::Ingress && engine_.table().is_active(vc)) {
    host_.open_virtual(vc);
  }
}

bool ProxyEndpoint::write_frame(VirtualId vc, const FrameHeader& header,
                                std::span<const std::uint8_t> payload, Timestamp now) {
  scratch_.clear();
  wire::encode_frame_into(header, payload, scratch_);
  if (!host_.write_virtual(vc, scratch_)) {
    return false;
  }
  VirtualConn& v = vconn(vc);
  v.last_sent = now;
  if (header.cmd != CommandType::KeepAlive) {
    v.touched.insert(RealId{header.conn_id});
  }
  engine_.rates().record(vc, scratch_.size(), now);
  ++stats_.frames_sent[static_cast<std::size_t>(header.cmd)];
  stats_.wire_bytes_sent += scratch_.size();
  stats_.payload_bytes_sent += payload.size();
  return true;
}

bool ProxyEndpoint::send_control(const FrameHeader& header, Timestamp now) {
  auto pool = candidates();
  for (int attempt = 0; attempt < 2 && !pool.empty(); ++attempt) {
    const VirtualId vc = select_virtual_shuffle(engine_.rates(), pool, now);
    if (write_frame(vc, header, {}, now)) {
      return true;
    }
    drop_virtual(vc, now);
    pool = candidates();
  }
  return false;
}

bool ProxyEndpoint::send_relay(RealId id, std::span<const std::uint8_t> chunk, Timestamp now) {
  const std::uint16_t seq = take_sequence(engine_.table(), id);
  const FrameHeader header{CommandType::Relay, value(id), static_cast<std::uint16_t>(chunk.size()),
                           seq};
  engine_.rates().record(id, chunk.size(), now);
  auto pool = candidates();
  for (int attempt = 0; attempt < 2 && !pool.empty(); ++attempt) {
    const VirtualId vc = engine_.select(id, pool, now);
    if (write_frame(vc, header, chunk, now)) {
      return true;
    }
    drop_virtual(vc, now);
    if (!reals_.contains(id)) {
      return false;
    }
    pool = candidates();
  }
  return false;
}

void ProxyEndpoint::drop_virtual(VirtualId vc, Timestamp now) {
  host_.reset_virtual(vc);
  on_virtual_down(vc, now);
}

std::optional<RealId> ProxyEndpoint::on_real_open(Timestamp now) {
  if (role_ != Role::Ingress) {
    throw StateError("only the ingress proxy accepts real connections");
  }
  const auto id = engine_.allocate(now);
  if (!id) {
    return std::nullopt;
  }
  engine_.register_real(*id, now);
  auto [it, inserted] = reals_.try_emplace(*id, options_);
  it->second.opened = true;
  rebalance(now);
  if (!send_control({CommandType::Create, value(*id), 0, 0}, now)) {
    reset_real(*id, now, false);
    return std::nullopt;
  }
  return id;
}

void ProxyEndpoint::on_real_data(RealId id, std::span<const std::uint8_t> bytes, Timestamp now) {
  auto it = reals_.find(id);
  if (it == reals_.end() || it->second.local_closed) {
    throw StateError("data for unregistered real connection " + std::to_string(value(id)));
  }
  while (!bytes.empty()) {
    const std::size_t n = std::min(bytes.size(), wire::kMaxFramePayload);
    if (!send_relay(id, bytes.first(n), now)) {
      if (reals_.contains(id)) {
        reset_real(id, now, true);
      }
      return;
    }
    bytes = bytes.subspan(n);
  }
}

void ProxyEndpoint::on_real_close(RealId id, Timestamp now) {
  auto it = reals_.find(id);
  if (it == reals_.end() || it->second.local_closed) {
    return;
  }
  const std::uint16_t seq = take_sequence(engine_.table(), id);
  it->second.local_closed = true;
  if (!send_control({CommandType::Remove, value(id), 0, seq}, now)) {
    reset_real(id, now, true);
    return;
  }
  maybe_teardown(id, now);
}

void ProxyEndpoint::on_real_reset(RealId id, Timestamp now) {
  if (reals_.contains(id)) {
    reset_real(id, now, false);
  }
}

void ProxyEndpoint::reset_real(RealId id, Timestamp now, bool notify_host) {
  auto it = reals_.find(id);
  if (it == reals_.end()) {
    return;
  }
  ++stats_.real_resets;
  notify_host = notify_host && it->second.opened;
  const bool send_remove = !it->second.local_closed;
  if (send_remove) {
    // There is no reset command; an early Remove ends the peer's stream.
    it->second.local_closed = true;
    const std::uint16_t seq = take_sequence(engine_.table(), id);
    send_control({CommandType::Remove, value(id), 0, seq}, now);
  }
  reals_.erase(id);
  if (engine_.table().real_ids.contains(id)) {
    engine_.unregister_real(id, now);
  }
  if (notify_host) {
    host_.reset_real(id);
  }
  rebalance(now);
}

void ProxyEndpoint::maybe_teardown(RealId id, Timestamp now) {
  auto it = reals_.find(id);
  if (it == reals_.end() || !it->second.local_closed || !it->second.peer_closed) {
    return;
  }
  reals_.erase(it);
  engine_.unregister_real(id, now);
  rebalance(now);
}

void ProxyEndpoint::on_virtual_data(VirtualId vc, std::span<const std::uint8_t> bytes,
                                    Timestamp now) {
  VirtualConn& v = vconn(vc);
  v.decoder.feed(bytes);
  for (;;) {
    std::optional<wire::Frame> frame;
    try {
      frame = vconn(vc).decoder.next();
    } catch (const wire::ProtocolError&) {
      ++stats_.protocol_errors;
      drop_virtual(vc, now);
      return;
    }
    if (!frame) {
      return;
    }
    ++stats_.frames_received;
    handle_frame(vc, std::move(*frame), now);
  }
}

ProxyEndpoint::RealConn* ProxyEndpoint::ensure_remote_real(RealId id, Timestamp now) {
  if (auto it = reals_.find(id); it != reals_.end()) {
    return &it->second;
  }
  if (role_ != Role::Egress) {
    return nullptr;
  }
  const auto& quarantine = engine_.table().quarantined_until;
  if (auto q = quarantine.find(id); q != quarantine.end() && now < q->second) {
    return nullptr;
  }
  engine_.register_real(id, now);
  auto [it, inserted] = reals_.try_emplace(id, options_);
  rebalance(now);
  return &it->second;
}

void ProxyEndpoint::handle_frame(VirtualId vc, wire::Frame frame, Timestamp now) {
  const RealId id{frame.header.conn_id};
  switch (frame.header.cmd) {
    case CommandType::KeepAlive:
      return;
    case CommandType::Create: {
      if (role_ != Role::Egress) {
        return;
      }
      // Create is authoritative: it may reuse an ID still quarantined here.
      if (!reals_.contains(id)) {
        engine_.table().quarantined_until.erase(id);
      }
      RealConn* real = ensure_remote_real(id, now);
      vconn(vc).touched.insert(id);
      if (!real->opened) {
        real->opened = true;
        host_.open_real(id);
        flush(id, now);
      }
      return;
    }
    case CommandType::Relay:
    case CommandType::Remove: {
      if (!ensure_remote_real(id, now)) {
        return;  // late frame for a closed connection
      }
      vconn(vc).touched.insert(id);
      ReorderBuffer::Unit unit{std::move(frame.payload),
                               frame.header.cmd == CommandType::Remove};
      enqueue(id, frame.header.sequence, std::move(unit), now);
      return;
    }
  }
}

void ProxyEndpoint::enqueue(RealId id, std::uint16_t seq, ReorderBuffer::Unit unit,
                            Timestamp now) {
  RealConn& real = reals_.at(id);
  if (real.rx.push(seq, std::move(unit), now) == ReorderBuffer::PushResult::Overflow) {
    reset_real(id, now, true);
    return;
  }
  flush(id, now);
}

void ProxyEndpoint::flush(RealId id, Timestamp now) {
  for (;;) {
    auto it = reals_.find(id);
    if (it == reals_.end() || !it->second.opened || it->second.peer_closed) {
      return;
    }
    auto unit = it->second.rx.pop_ready();
    if (!unit) {
      return;
    }
    if (unit->end_of_stream) {
      it->second.peer_closed = true;
      host_.end_real(id);
      maybe_teardown(id, now);
      return;
    }
    stats_.payload_bytes_delivered += unit->payload.size();
    host_.deliver_real(id, unit->payload);
  }
}

void ProxyEndpoint::tick(Timestamp now) {
  if (engine_.remap_due(now)) {
    rebalance(now);
  }
  for (std::uint32_t i = 0; i < virtuals_.size(); ++i) {
    VirtualConn& v = virtuals_[i];
    if (v.status == VirtualStatus::Draining && host_.virtual_backlog(VirtualId{i}) == 0) {
      v.status = VirtualStatus::Inactive;
    }
    if (v.up && now - v.last_sent >= options_.keepalive_interval) {
      if (!write_frame(VirtualId{i}, {CommandType::KeepAlive, 0, 0, 0}, {}, now)) {
        drop_virtual(VirtualId{i}, now);
      }
    }
  }
  std::vector<RealId> stalled;
  for (const auto& [id, real] : reals_) {
    if (real.rx.stalled(now, options_.reorder_timeout)) {
      stalled.push_back(id);
    }
  }
  std::sort(stalled.begin(), stalled.end());
  for (const RealId id : stalled) {
    reset_real(id, now, true);
  }
}

}  // namespace muffler
