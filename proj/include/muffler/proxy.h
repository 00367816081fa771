#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "muffler/mapping.h"
#include "muffler/reorder_buffer.h"
#include "muffler/types.h"
#include "muffler/wire.h"

namespace muffler {

inline constexpr Timestamp kKeepAliveInterval = from_ms(15000);

enum class Role { Ingress, Egress };

// Everything a proxy endpoint needs from its runtime. The endpoint itself
// does no I/O and never reads a clock.
class ProxyHost {
 public:
  virtual ~ProxyHost() = default;

  // Writes one complete encoded frame; false if the connection failed.
  virtual bool write_virtual(VirtualId vc, std::span<const std::uint8_t> frame) = 0;
  // Bytes written to `vc` that have not yet left this host.
  virtual std::size_t virtual_backlog(VirtualId) const { return 0; }
  // Ingress only: establish base connection `vc`, then report on_virtual_up.
  virtual void open_virtual(VirtualId) {}
  // The stream on `vc` is unusable; close it (ingress re-establishes).
  virtual void reset_virtual(VirtualId) {}

  // Egress only: connect to the service on behalf of real connection `id`.
  virtual void open_real(RealId) {}
  virtual void deliver_real(RealId id, std::span<const std::uint8_t> bytes) = 0;
  // The peer finished sending on `id` (half-close toward the application).
  virtual void end_real(RealId id) = 0;
  virtual void reset_real(RealId id) = 0;
};

struct ProxyStats {
  std::array<std::uint64_t, 5> frames_sent{};  // indexed by command code
  std::uint64_t wire_bytes_sent = 0;
  std::uint64_t payload_bytes_sent = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t payload_bytes_delivered = 0;
  std::uint64_t real_resets = 0;
  std::uint64_t protocol_errors = 0;

  std::uint64_t frames(wire::CommandType cmd) const {
    return frames_sent[static_cast<std::size_t>(cmd)];
  }
  std::uint64_t total_frames() const;
};

struct ProxyOptions {
  Timestamp keepalive_interval = kKeepAliveInterval;
  std::size_t reorder_capacity = kReorderCap;
  Timestamp reorder_timeout = kReorderTimeout;
};

// One side of the proxy pair. The ingress side accepts real connections from
// users and owns the base connection pool; the egress side accepts base
// connections and opens real connections toward the service. Both sides
// obfuscate what they send with their own mapping engine and de-obfuscate
// what they receive.
class ProxyEndpoint {
 public:
  enum class VirtualStatus { Inactive, Active, Draining };

  ProxyEndpoint(Role role, const ObfuscationConfig& config, ProxyHost& host,
                ProxyOptions options = {});

  // Initial rebalance: the ingress side opens its first M_min base connections.
  void start(Timestamp now);

  void on_virtual_up(VirtualId vc, Timestamp now);
  void on_virtual_down(VirtualId vc, Timestamp now);
  void on_virtual_data(VirtualId vc, std::span<const std::uint8_t> bytes, Timestamp now);

  // Ingress only. nullopt when the ID space is exhausted (connection refused).
  std::optional<RealId> on_real_open(Timestamp now);
  // Throws StateError for an unknown or already-closed ID.
  void on_real_data(RealId id, std::span<const std::uint8_t> bytes, Timestamp now);
  void on_real_close(RealId id, Timestamp now);
  // The application side of `id` failed; drop it and tell the peer.
  void on_real_reset(RealId id, Timestamp now);

  // Periodic work: remap cadence, drain completion, keep-alives, reorder
  // stall detection. Never sends Relay frames.
  void tick(Timestamp now);

  Role role() const { return role_; }
  const MappingEngine& engine() const { return engine_; }
  const ProxyStats& stats() const { return stats_; }
  bool has_real(RealId id) const { return reals_.contains(id); }
  std::size_t live_reals() const { return reals_.size(); }
  std::optional<VirtualStatus> virtual_status(VirtualId vc) const;

 private:
  struct VirtualConn {
    bool up = false;
    VirtualStatus status = VirtualStatus::Inactive;
    Timestamp last_sent{0};
    wire::FrameDecoder decoder;
    std::set<RealId> touched;  // real connections with frames sent or received here
  };

  struct RealConn {
    explicit RealConn(const ProxyOptions& options) : rx(1, options.reorder_capacity) {}
    ReorderBuffer rx;
    bool opened = false;        // application side exists (egress: Create seen)
    bool local_closed = false;  // we sent Remove
    bool peer_closed = false;   // the peer's Remove was delivered in order
  };

  VirtualConn& vconn(VirtualId vc);
  std::vector<VirtualId> candidates() const;
  void apply_actions(std::span<const MappingAction> actions, Timestamp now);
  void rebalance(Timestamp now);

  // Writes a frame chosen by `pick` among candidates; reselects once on failure.
  bool send_control(const wire::FrameHeader& header, Timestamp now);
  bool send_relay(RealId id, std::span<const std::uint8_t> chunk, Timestamp now);
  bool write_frame(VirtualId vc, const wire::FrameHeader& header,
                   std::span<const std::uint8_t> payload, Timestamp now);

  void handle_frame(VirtualId vc, wire::Frame frame, Timestamp now);
  RealConn* ensure_remote_real(RealId id, Timestamp now);
  void enqueue(RealId id, std::uint16_t seq, ReorderBuffer::Unit unit, Timestamp now);
  void flush(RealId id, Timestamp now);
  void maybe_teardown(RealId id, Timestamp now);
  void reset_real(RealId id, Timestamp now, bool notify_host);
  void drop_virtual(VirtualId vc, Timestamp now);

  Role role_;
  ProxyHost& host_;
  ProxyOptions options_;
  MappingEngine engine_;
  std::vector<VirtualConn> virtuals_;
  std::unordered_map<RealId, RealConn> reals_;
  std::vector<std::uint8_t> scratch_;
  ProxyStats stats_;
};

}  // namespace muffler
