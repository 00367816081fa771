#include "muffler/transport.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace muffler {

// ---- loopback ---------------------------------------------------------------

std::pair<std::unique_ptr<LoopbackTransport>, std::unique_ptr<LoopbackTransport>>
LoopbackTransport::make_pair() {
  auto shared = std::make_shared<Shared>();
  return {std::unique_ptr<LoopbackTransport>(new LoopbackTransport(shared, 0)),
          std::unique_ptr<LoopbackTransport>(new LoopbackTransport(shared, 1))};
}

bool LoopbackTransport::write(std::span<const std::uint8_t> bytes) {
  std::lock_guard lock(shared_->mu);
  if (shared_->closed[side_] || shared_->closed[1 - side_] || outbound().writer_done) {
    return false;
  }
  Pipe& pipe = outbound();
  if (pipe.head > 0 && pipe.head * 2 >= pipe.data.size()) {
    pipe.data.erase(pipe.data.begin(), pipe.data.begin() + static_cast<std::ptrdiff_t>(pipe.head));
    pipe.head = 0;
  }
  pipe.data.insert(pipe.data.end(), bytes.begin(), bytes.end());
  return true;
}

std::size_t LoopbackTransport::read_some(std::span<std::uint8_t> out) {
  std::lock_guard lock(shared_->mu);
  if (shared_->closed[side_]) {
    return 0;
  }
  Pipe& pipe = inbound();
  const std::size_t n = std::min(out.size(), pipe.data.size() - pipe.head);
  std::copy_n(pipe.data.begin() + static_cast<std::ptrdiff_t>(pipe.head), n, out.begin());
  pipe.head += n;
  if (pipe.head == pipe.data.size()) {
    pipe.data.clear();
    pipe.head = 0;
  }
  return n;
}

std::size_t LoopbackTransport::available() const {
  std::lock_guard lock(shared_->mu);
  const Pipe& pipe = shared_->pipes[side_];
  return pipe.data.size() - pipe.head;
}

void LoopbackTransport::shutdown_write() {
  std::lock_guard lock(shared_->mu);
  outbound().writer_done = true;
}

void LoopbackTransport::close() {
  std::lock_guard lock(shared_->mu);
  shared_->closed[side_] = true;
  outbound().writer_done = true;
}

bool LoopbackTransport::is_open() const {
  std::lock_guard lock(shared_->mu);
  return !shared_->closed[side_];
}

bool LoopbackTransport::at_eof() const {
  std::lock_guard lock(shared_->mu);
  const Pipe& pipe = shared_->pipes[side_];
  return (pipe.writer_done || shared_->closed[1 - side_]) && pipe.head == pipe.data.size();
}

std::unique_ptr<Transport> LoopbackListener::connect() {
  auto [client, server] = LoopbackTransport::make_pair();
  std::lock_guard lock(mu_);
  backlog_.push_back(std::move(server));
  return client;
}

std::unique_ptr<Transport> LoopbackListener::accept() {
  std::lock_guard lock(mu_);
  if (backlog_.empty()) {
    return nullptr;
  }
  auto t = std::move(backlog_.front());
  backlog_.pop_front();
  return t;
}

// ---- addresses --------------------------------------------------------------

std::string SocketAddress::to_string() const {
  if (host.find(':') != std::string::npos) {
    return "[" + host + "]:" + std::to_string(port);
  }
  return host + ":" + std::to_string(port);
}

SocketAddress parse_address(const std::string& text) {
  SocketAddress addr;
  std::string port_text;
  if (!text.empty() && text.front() == '[') {
    const auto close = text.find(']');
    if (close == std::string::npos || close + 1 >= text.size() || text[close + 1] != ':') {
      throw std::invalid_argument("malformed address '" + text + "'");
    }
    addr.host = text.substr(1, close - 1);
    port_text = text.substr(close + 2);
  } else {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || text.find(':') != colon) {
      throw std::invalid_argument("address '" + text + "' must be host:port");
    }
    addr.host = text.substr(0, colon);
    port_text = text.substr(colon + 1);
  }
  if (port_text.empty() ||
      !std::all_of(port_text.begin(), port_text.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
      port_text.size() > 5 || std::stoul(port_text) > 65535) {
    throw std::invalid_argument("invalid port in address '" + text + "'");
  }
  addr.port = static_cast<std::uint16_t>(std::stoul(port_text));
  return addr;
}

namespace {

struct AddrInfo {
  addrinfo* head = nullptr;
  ~AddrInfo() {
    if (head) freeaddrinfo(head);
  }
};

void resolve(const SocketAddress& address, bool passive, AddrInfo& out) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = passive ? AI_PASSIVE : 0;
  const std::string port = std::to_string(address.port);
  const char* host = address.host.empty() ? nullptr : address.host.c_str();
  if (int rc = getaddrinfo(host, port.c_str(), &hints, &out.head); rc != 0) {
    throw TransportError("cannot resolve " + address.to_string() + ": " + gai_strerror(rc));
  }
}

void set_nonblocking(int fd) {
  const int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

void set_nodelay(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

// ---- TCP --------------------------------------------------------------------

std::unique_ptr<TcpTransport> TcpTransport::connect(const SocketAddress& address) {
  AddrInfo info;
  resolve(address, false, info);
  for (addrinfo* ai = info.head; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      continue;
    }
    set_nonblocking(fd);
    set_nodelay(fd);
    const int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc == 0) {
      return std::make_unique<TcpTransport>(fd, true);
    }
    if (errno == EINPROGRESS) {
      return std::make_unique<TcpTransport>(fd, false);
    }
    ::close(fd);
  }
  throw TransportError("cannot connect to " + address.to_string() + ": " + std::strerror(errno));
}

TcpTransport::TcpTransport(int fd, bool connected) : fd_(fd), connected_(connected) {
  set_nonblocking(fd_);
}

TcpTransport::~TcpTransport() { close(); }

void TcpTransport::finish_connect() {
  if (connected_ || fd_ < 0) {
    return;
  }
  int err = 0;
  socklen_t len = sizeof(err);
  getsockopt(fd_, SOL_SOCKET, SO_ERROR, &err, &len);
  if (err != 0) {
    failed_ = true;
    return;
  }
  connected_ = true;
  flush();
}

bool TcpTransport::write(std::span<const std::uint8_t> bytes) {
  if (!is_open() || shutdown_requested_) {
    return false;
  }
  out_.insert(out_.end(), bytes.begin(), bytes.end());
  return flush();
}

bool TcpTransport::flush() {
  if (!is_open()) {
    return false;
  }
  if (!connected_) {
    return true;
  }
  while (out_head_ < out_.size()) {
    const ssize_t n =
        ::send(fd_, out_.data() + out_head_, out_.size() - out_head_, MSG_NOSIGNAL);
    if (n > 0) {
      out_head_ += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      break;
    }
    if (n < 0 && errno == EINTR) {
      continue;
    }
    failed_ = true;
    return false;
  }
  if (out_head_ == out_.size()) {
    out_.clear();
    out_head_ = 0;
    if (shutdown_requested_ && !shutdown_done_) {
      ::shutdown(fd_, SHUT_WR);
      shutdown_done_ = true;
    }
  } else if (out_head_ > (1u << 20)) {
    out_.erase(out_.begin(), out_.begin() + static_cast<std::ptrdiff_t>(out_head_));
    out_head_ = 0;
  }
  return true;
}

std::size_t TcpTransport::read_some(std::span<std::uint8_t> out) {
  if (!is_open() || !connected_ || eof_ || out.empty()) {
    return 0;
  }
  for (;;) {
    const ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
    if (n > 0) {
      return static_cast<std::size_t>(n);
    }
    if (n == 0) {
      eof_ = true;
      return 0;
    }
    if (errno == EINTR) {
      continue;
    }
    if (errno != EAGAIN && errno != EWOULDBLOCK) {
      failed_ = true;
    }
    return 0;
  }
}

void TcpTransport::shutdown_write() {
  if (!is_open()) {
    return;
  }
  shutdown_requested_ = true;
  flush();
}

void TcpTransport::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpListener::TcpListener(const SocketAddress& address) {
  AddrInfo info;
  resolve(address, true, info);
  for (addrinfo* ai = info.head; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      continue;
    }
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 128) == 0) {
      set_nonblocking(fd);
      sockaddr_storage bound{};
      socklen_t len = sizeof(bound);
      getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
      port_ = ntohs(bound.ss_family == AF_INET6
                        ? reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port
                        : reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
      fd_ = fd;
      return;
    }
    ::close(fd);
  }
  throw TransportError("cannot listen on " + address.to_string() + ": " + std::strerror(errno));
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) {
    ::close(fd_);
  }
}

std::unique_ptr<TcpTransport> TcpListener::accept() {
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) {
    return nullptr;
  }
  set_nodelay(fd);
  return std::make_unique<TcpTransport>(fd, true);
}

}  // namespace muffler
