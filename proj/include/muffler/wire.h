#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace muffler::wire {

// Command codes are frozen; both proxies must agree on them.
enum class CommandType : std::uint16_t {
  Create = 1,
  Remove = 2,
  Relay = 3,
  KeepAlive = 4,
};

inline constexpr std::size_t kFrameHeaderSize = 8;
inline constexpr std::size_t kMaxFramePayload = 16384;

std::optional<CommandType> command_from_code(std::uint16_t code);
const char* to_string(CommandType cmd);

// The 8-byte control command that prefixes every unit on a virtual
// connection. Four big-endian 16-bit fields, in this order.
struct FrameHeader {
  CommandType cmd = CommandType::KeepAlive;
  std::uint16_t conn_id = 0;   // operand1: real connection ID
  std::uint16_t length = 0;    // operand2: payload length, Relay only
  std::uint16_t sequence = 0;  // reserved: per-real sequence number

  bool operator==(const FrameHeader&) const = default;
};

struct Frame {
  FrameHeader header;
  std::vector<std::uint8_t> payload;

  static Frame create(std::uint16_t conn_id);
  static Frame remove(std::uint16_t conn_id, std::uint16_t sequence);
  static Frame relay(std::uint16_t conn_id, std::uint16_t sequence,
                     std::span<const std::uint8_t> payload);
  static Frame keep_alive();

  std::size_t wire_size() const { return kFrameHeaderSize + payload.size(); }

  bool operator==(const Frame&) const = default;
};

class EncodeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised while decoding; offset() is the stream offset of the offending
// frame header.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Appends the encoding of header+payload to `out`. Validates the frame
// invariants first so nothing is appended on failure.
void encode_frame_into(const FrameHeader& header, std::span<const std::uint8_t> payload,
                       std::vector<std::uint8_t>& out);

std::vector<std::uint8_t> encode_frame(const Frame& frame);

FrameHeader decode_header(std::span<const std::uint8_t, kFrameHeaderSize> bytes,
                          std::size_t stream_offset = 0);

struct DecodeResult {
  std::vector<Frame> frames;
  std::size_t consumed = 0;
};

// Decodes every complete frame at the front of `buffer`. A trailing partial
// frame is left unconsumed.
DecodeResult decode_frames(std::span<const std::uint8_t> buffer);

// Incremental decoder owning the carry-over bytes of one virtual connection.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);

  // Next complete frame, or nullopt when more bytes are needed. Throws
  // ProtocolError; the decoder must be reset() afterwards.
  std::optional<Frame> next();

  std::size_t buffered() const { return buf_.size() - head_; }
  std::size_t stream_offset() const { return consumed_; }
  void reset();

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t head_ = 0;
  std::size_t consumed_ = 0;
};

}  // namespace muffler::wire
