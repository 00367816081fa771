#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace muffler {

// Reliable, ordered, bidirectional byte stream. All calls are non-blocking.
class Transport {
 public:
  virtual ~Transport() = default;

  // Queues the whole buffer or nothing; false once the stream has failed or
  // been closed. A single write is never interleaved with another.
  virtual bool write(std::span<const std::uint8_t> bytes) = 0;

  // Copies up to out.size() available bytes; 0 when nothing is available.
  virtual std::size_t read_some(std::span<std::uint8_t> out) = 0;

  // Half-close: no more writes, reads continue.
  virtual void shutdown_write() = 0;
  virtual void close() = 0;

  virtual bool is_open() const = 0;
  // The peer will send nothing more and everything it sent has been read.
  virtual bool at_eof() const = 0;
  // Bytes accepted by write() but not yet handed to the peer.
  virtual std::size_t pending_output() const = 0;
};

// In-process channel: the two ends of a pair share one buffer per direction.
class LoopbackTransport final : public Transport {
 public:
  static std::pair<std::unique_ptr<LoopbackTransport>, std::unique_ptr<LoopbackTransport>>
  make_pair();

  bool write(std::span<const std::uint8_t> bytes) override;
  std::size_t read_some(std::span<std::uint8_t> out) override;
  void shutdown_write() override;
  void close() override;
  bool is_open() const override;
  bool at_eof() const override;
  std::size_t pending_output() const override { return 0; }

  std::size_t available() const;

 private:
  struct Pipe {
    std::vector<std::uint8_t> data;
    std::size_t head = 0;
    bool writer_done = false;
  };
  struct Shared {
    std::mutex mu;
    Pipe pipes[2];
    bool closed[2] = {false, false};
  };

  LoopbackTransport(std::shared_ptr<Shared> shared, int side)
      : shared_(std::move(shared)), side_(side) {}

  Pipe& inbound() { return shared_->pipes[side_]; }
  Pipe& outbound() { return shared_->pipes[1 - side_]; }

  std::shared_ptr<Shared> shared_;
  int side_;
};

// Rendezvous point for loopback connect/accept.
class LoopbackListener {
 public:
  std::unique_ptr<Transport> connect();
  std::unique_ptr<Transport> accept();  // nullptr when no connection is pending

 private:
  std::mutex mu_;
  std::deque<std::unique_ptr<Transport>> backlog_;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SocketAddress {
  std::string host;
  std::uint16_t port = 0;

  std::string to_string() const;
};

// Accepts "host:port", "[v6addr]:port" and ":port" (wildcard).
SocketAddress parse_address(const std::string& text);

class TcpTransport final : public Transport {
 public:
  // Starts a non-blocking connect. Throws TransportError on resolution failure.
  static std::unique_ptr<TcpTransport> connect(const SocketAddress& address);

  explicit TcpTransport(int fd, bool connected = true);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  bool write(std::span<const std::uint8_t> bytes) override;
  std::size_t read_some(std::span<std::uint8_t> out) override;
  void shutdown_write() override;
  void close() override;
  bool is_open() const override { return fd_ >= 0 && !failed_; }
  bool at_eof() const override { return eof_; }
  std::size_t pending_output() const override { return out_.size() - out_head_; }

  // Pushes queued bytes to the socket; returns false on a hard error.
  bool flush();
  bool connected() const { return connected_; }
  bool failed() const { return failed_; }
  int fd() const { return fd_; }
  // Called by the event loop when a pending connect becomes writable.
  void finish_connect();

 private:
  int fd_;
  bool connected_;
  bool failed_ = false;
  bool eof_ = false;
  bool shutdown_requested_ = false;
  bool shutdown_done_ = false;
  std::vector<std::uint8_t> out_;
  std::size_t out_head_ = 0;
};

class TcpListener {
 public:
  explicit TcpListener(const SocketAddress& address);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::unique_ptr<TcpTransport> accept();  // nullptr when nothing is pending
  std::uint16_t port() const { return port_; }
  int fd() const { return fd_; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace muffler
