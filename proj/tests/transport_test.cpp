#include "muffler/transport.h"

#include <gtest/gtest.h>

#include <chrono>
#include <thread>

namespace muffler {
namespace {

using Bytes = std::vector<std::uint8_t>;

TEST(Loopback, BytesFlowBothWays) {
  auto [a, b] = LoopbackTransport::make_pair();
  ASSERT_TRUE(a->write(Bytes{1, 2, 3}));
  ASSERT_TRUE(b->write(Bytes{9}));
  Bytes buf(8);
  EXPECT_EQ(b->read_some(buf), 3u);
  EXPECT_EQ(buf[2], 3);
  EXPECT_EQ(a->read_some(buf), 1u);
  EXPECT_EQ(buf[0], 9);
  EXPECT_EQ(a->read_some(buf), 0u);
}

TEST(Loopback, HalfCloseAndClose) {
  auto [a, b] = LoopbackTransport::make_pair();
  a->write(Bytes{1});
  a->shutdown_write();
  EXPECT_FALSE(a->write(Bytes{2}));
  EXPECT_FALSE(b->at_eof());
  Bytes buf(4);
  b->read_some(buf);
  EXPECT_TRUE(b->at_eof());
  EXPECT_TRUE(b->write(Bytes{3}));
  b->close();
  EXPECT_FALSE(b->is_open());
  EXPECT_FALSE(a->write(Bytes{4}));
}

TEST(Loopback, Listener) {
  LoopbackListener l;
  EXPECT_EQ(l.accept(), nullptr);
  auto client = l.connect();
  auto server = l.accept();
  ASSERT_NE(server, nullptr);
  client->write(Bytes{7});
  Bytes buf(1);
  EXPECT_EQ(server->read_some(buf), 1u);
}

TEST(Address, Parse) {
  EXPECT_EQ(parse_address("127.0.0.1:80").port, 80);
  EXPECT_EQ(parse_address("[::1]:443").host, "::1");
  EXPECT_EQ(parse_address(":9").host, "");
  EXPECT_THROW(parse_address("localhost"), std::invalid_argument);
  EXPECT_THROW(parse_address("h:99999"), std::invalid_argument);
  EXPECT_THROW(parse_address("h:"), std::invalid_argument);
}

TEST(Tcp, LocalExchange) {
  TcpListener listener({"127.0.0.1", 0});
  ASSERT_NE(listener.port(), 0);
  auto client = TcpTransport::connect({"127.0.0.1", listener.port()});
  std::unique_ptr<TcpTransport> server;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (!server && std::chrono::steady_clock::now() < deadline) {
    server = listener.accept();
    client->finish_connect();
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  ASSERT_NE(server, nullptr);
  ASSERT_TRUE(client->write(Bytes{1, 2, 3, 4}));
  client->shutdown_write();
  Bytes got, buf(16);
  while (!server->at_eof() && std::chrono::steady_clock::now() < deadline) {
    client->flush();
    const std::size_t n = server->read_some(buf);
    got.insert(got.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
  }
  EXPECT_EQ(got, (Bytes{1, 2, 3, 4}));
}

TEST(Tcp, ListenConflict) {
  TcpListener a({"127.0.0.1", 0});
  EXPECT_THROW(TcpListener({"127.0.0.1", a.port()}), TransportError);
}

}  // namespace
}  // namespace muffler
