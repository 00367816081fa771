#include "muffler/wire.h"

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

namespace muffler::wire {
namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

TEST(WireEncode, RelayLayout) {
  const Bytes abc = bytes_of("abc");
  const Frame f = Frame::relay(7, 1, abc);
  EXPECT_EQ(f.header.length, 3);
  EXPECT_EQ(encode_frame(f),
            (Bytes{0x00, 0x03, 0x00, 0x07, 0x00, 0x03, 0x00, 0x01, 0x61, 0x62, 0x63}));
}

TEST(WireEncode, KeepAliveLayout) {
  EXPECT_EQ(encode_frame(Frame::keep_alive()), (Bytes{0, 4, 0, 0, 0, 0, 0, 0}));
}

TEST(WireEncode, CreateLayout) {
  EXPECT_EQ(encode_frame(Frame::create(1)), (Bytes{0, 1, 0, 1, 0, 0, 0, 0}));
}

TEST(WireEncode, RemoveCarriesSequence) {
  EXPECT_EQ(encode_frame(Frame::remove(0x0102, 0x0304)), (Bytes{0, 2, 1, 2, 0, 0, 3, 4}));
}

TEST(WireEncode, OversizePayloadRejected) {
  Frame f = Frame::relay(1, 1, {});
  f.payload.assign(kMaxFramePayload + 1, 0);
  f.header.length = 0;
  EXPECT_THROW(encode_frame(f), EncodeError);

  Bytes out{9};
  const Bytes big(kMaxFramePayload + 1, 0);
  EXPECT_THROW(encode_frame_into({CommandType::Relay, 1, 0, 1}, big, out), EncodeError);
  EXPECT_EQ(out, Bytes{9});  // nothing appended
}

TEST(WireEncode, MaxPayloadAccepted) {
  const Bytes max(kMaxFramePayload, 0xab);
  EXPECT_EQ(encode_frame(Frame::relay(1, 1, max)).size(), kFrameHeaderSize + kMaxFramePayload);
}

TEST(WireDecode, InverseOfEncode) {
  const Bytes abc = bytes_of("abc");
  const Bytes encoded = encode_frame(Frame::relay(7, 1, abc));
  const DecodeResult r = decode_frames(encoded);
  ASSERT_EQ(r.frames.size(), 1u);
  EXPECT_EQ(r.frames[0], Frame::relay(7, 1, abc));
  EXPECT_EQ(r.consumed, 11u);
}

TEST(WireDecode, TruncatedFrameWaits) {
  const Bytes abc = bytes_of("abc");
  Bytes encoded = encode_frame(Frame::relay(7, 1, abc));
  encoded.pop_back();
  const DecodeResult r = decode_frames(encoded);
  EXPECT_TRUE(r.frames.empty());
  EXPECT_EQ(r.consumed, 0u);
}

TEST(WireDecode, TwoKeepAlives) {
  Bytes two = encode_frame(Frame::keep_alive());
  const Bytes one = two;
  two.insert(two.end(), one.begin(), one.end());
  const DecodeResult r = decode_frames(two);
  ASSERT_EQ(r.frames.size(), 2u);
  EXPECT_EQ(r.frames[0], Frame::keep_alive());
  EXPECT_EQ(r.frames[1], Frame::keep_alive());
  EXPECT_EQ(r.consumed, 16u);
}

TEST(WireDecode, UnknownCommandReportsOffset) {
  Bytes stream = encode_frame(Frame::create(3));
  const Bytes bad{0x00, 0x09, 0, 0, 0, 0, 0, 0};
  stream.insert(stream.end(), bad.begin(), bad.end());
  try {
    decode_frames(stream);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.offset(), 8u);
  }
}

TEST(WireDecode, OversizeLengthRejected) {
  const Bytes bad{0x00, 0x03, 0x00, 0x01, 0x40, 0x01, 0x00, 0x01};  // 16385
  EXPECT_THROW(decode_frames(bad), ProtocolError);
}

TEST(WireDecode, ControlFrameWithLengthRejected) {
  const Bytes bad{0x00, 0x01, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00, 0xff};
  EXPECT_THROW(decode_frames(bad), ProtocolError);
}

TEST(WireDecode, CommandCodes) {
  EXPECT_EQ(command_from_code(1), CommandType::Create);
  EXPECT_EQ(command_from_code(2), CommandType::Remove);
  EXPECT_EQ(command_from_code(3), CommandType::Relay);
  EXPECT_EQ(command_from_code(4), CommandType::KeepAlive);
  EXPECT_FALSE(command_from_code(0));
  EXPECT_FALSE(command_from_code(5));
}

TEST(FrameDecoder, ByteAtATime) {
  const Bytes payload = bytes_of("hello world");
  Bytes stream = encode_frame(Frame::create(5));
  const Bytes relay = encode_frame(Frame::relay(5, 1, payload));
  stream.insert(stream.end(), relay.begin(), relay.end());

  FrameDecoder dec;
  std::vector<Frame> got;
  for (const std::uint8_t b : stream) {
    dec.feed(std::span(&b, 1));
    while (auto f = dec.next()) {
      got.push_back(*f);
    }
  }
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0], Frame::create(5));
  EXPECT_EQ(got[1], Frame::relay(5, 1, payload));
  EXPECT_EQ(dec.buffered(), 0u);
  EXPECT_EQ(dec.stream_offset(), stream.size());
}

TEST(FrameDecoder, ErrorOffsetIsStreamRelative) {
  FrameDecoder dec;
  const Bytes ka = encode_frame(Frame::keep_alive());
  for (int i = 0; i < 3; ++i) {
    dec.feed(ka);
    ASSERT_TRUE(dec.next());
  }
  dec.feed(Bytes{0xff, 0xff, 0, 0, 0, 0, 0, 0});
  try {
    dec.next();
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.offset(), 24u);
  }
  dec.reset();
  dec.feed(ka);
  EXPECT_TRUE(dec.next());
}

// Random frames, random cut points: decoding the pieces gives the frames back.
TEST(WireProperty, ArbitrarySplitRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Frame> frames;
    Bytes stream;
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    for (int i = 0; i < n; ++i) {
      const auto code = std::uniform_int_distribution<int>(1, 4)(rng);
      const auto id = static_cast<std::uint16_t>(rng());
      const auto seq = static_cast<std::uint16_t>(rng());
      Frame f;
      if (code == 1) {
        f = Frame::create(id);
      } else if (code == 2) {
        f = Frame::remove(id, seq);
      } else if (code == 3) {
        Bytes p(std::uniform_int_distribution<std::size_t>(0, 3000)(rng));
        for (auto& b : p) {
          b = static_cast<std::uint8_t>(rng());
        }
        f = Frame::relay(id, seq, p);
      } else {
        f = Frame::keep_alive();
      }
      const Bytes e = encode_frame(f);
      stream.insert(stream.end(), e.begin(), e.end());
      frames.push_back(std::move(f));
    }
    FrameDecoder dec;
    std::vector<Frame> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
      const std::size_t k =
          std::min(stream.size() - pos, std::uniform_int_distribution<std::size_t>(1, 700)(rng));
      dec.feed(std::span(stream).subspan(pos, k));
      pos += k;
      while (auto f = dec.next()) {
        got.push_back(std::move(*f));
      }
    }
    EXPECT_EQ(got, frames);
  }
}

}  // namespace
}  // namespace muffler::wire
