#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <unordered_map>
#include <vector>

#include "muffler/config.h"
#include "muffler/flow_trace.h"
#include "muffler/proxy.h"
#include "muffler/transport.h"

namespace muffler {

// Single-threaded poll(2) loop driving one ProxyEndpoint over TCP.
//
// Ingress: accepts users on `listen` and keeps base connections to `peer`.
// Egress: accepts base connections on `listen` and opens one connection to
// `service` per real connection. Base connections are numbered locally on
// each side; frames only carry real connection IDs.
class ProxyRuntime final : private ProxyHost {
 public:
  explicit ProxyRuntime(const RunConfig& config);
  ~ProxyRuntime() override;

  std::uint16_t listen_port() const { return listener_->port(); }

  // One poll round (waits at most timeout_ms), then timers.
  void step(int timeout_ms);
  // Steps until `stop` becomes true. Writes the trace file on the way out.
  void run(const std::atomic<bool>& stop);

  const ProxyEndpoint& endpoint() const { return endpoint_; }
  std::size_t base_connections_up() const;

  // Ingress: user-side view of every real connection. Egress: wire view of
  // every base connection.
  std::vector<FlowTrace> traces() const;
  void write_traces() const;

 private:
  struct Base {
    std::unique_ptr<TcpTransport> conn;
    bool up = false;
    bool wanted = false;  // ingress: keep this one open
    Timestamp retry_at{0};
  };
  struct Real {
    std::unique_ptr<TcpTransport> conn;
    bool read_done = false;
    bool write_done = false;
  };

  Timestamp now() const;

  // ProxyHost
  bool write_virtual(VirtualId vc, std::span<const std::uint8_t> frame) override;
  std::size_t virtual_backlog(VirtualId vc) const override;
  void open_virtual(VirtualId vc) override;
  void reset_virtual(VirtualId vc) override;
  void open_real(RealId id) override;
  void deliver_real(RealId id, std::span<const std::uint8_t> bytes) override;
  void end_real(RealId id) override;
  void reset_real(RealId id) override;

  void accept_all();
  void connect_base(VirtualId vc);
  void base_failed(VirtualId vc);
  void service_base(VirtualId vc, short revents);
  void service_real(RealId id, short revents);
  void reap_real(RealId id);
  void record(std::uint32_t flow, std::size_t bytes, Direction dir);

  RunConfig config_;
  std::chrono::steady_clock::time_point epoch_;
  std::unique_ptr<TcpListener> listener_;
  ProxyEndpoint endpoint_;
  std::vector<Base> bases_;
  std::unordered_map<RealId, Real> reals_;
  std::map<std::uint32_t, FlowTrace> traces_;
  std::uint32_t next_trace_id_ = 0;
  std::unordered_map<RealId, std::uint32_t> trace_ids_;
  Timestamp next_tick_{0};
  std::vector<std::uint8_t> buf_;
};

}  // namespace muffler
