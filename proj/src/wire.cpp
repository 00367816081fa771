#include "muffler/wire.h"

#include <algorithm>
#include <utility>

namespace muffler::wire {
namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

void validate(const FrameHeader& header, std::size_t payload_size) {
  if (payload_size > kMaxFramePayload) {
    throw EncodeError("frame payload of " + std::to_string(payload_size) +
                      " bytes exceeds the maximum of " + std::to_string(kMaxFramePayload));
  }
  if (header.length != payload_size) {
    throw EncodeError("header length " + std::to_string(header.length) +
                      " does not match payload size " + std::to_string(payload_size));
  }
  if (header.cmd != CommandType::Relay && payload_size != 0) {
    throw EncodeError(std::string(to_string(header.cmd)) + " frames carry no payload");
  }
  if (!command_from_code(static_cast<std::uint16_t>(header.cmd))) {
    throw EncodeError("unknown command type");
  }
}

}  // namespace

std::optional<CommandType> command_from_code(std::uint16_t code) {
  switch (code) {
    case 1: return CommandType::Create;
    case 2: return CommandType::Remove;
    case 3: return CommandType::Relay;
    case 4: return CommandType::KeepAlive;
    default: return std::nullopt;
  }
}

const char* to_string(CommandType cmd) {
  switch (cmd) {
    case CommandType::Create: return "Create";
    case CommandType::Remove: return "Remove";
    case CommandType::Relay: return "Relay";
    case CommandType::KeepAlive: return "KeepAlive";
  }
  return "Unknown";
}

Frame Frame::create(std::uint16_t conn_id) {
  return Frame{{CommandType::Create, conn_id, 0, 0}, {}};
}

Frame Frame::remove(std::uint16_t conn_id, std::uint16_t sequence) {
  return Frame{{CommandType::Remove, conn_id, 0, sequence}, {}};
}

Frame Frame::relay(std::uint16_t conn_id, std::uint16_t sequence,
                   std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxFramePayload) {
    throw EncodeError("relay payload exceeds the maximum frame payload");
  }
  return Frame{{CommandType::Relay, conn_id, static_cast<std::uint16_t>(payload.size()), sequence},
               {payload.begin(), payload.end()}};
}

Frame Frame::keep_alive() { return Frame{{CommandType::KeepAlive, 0, 0, 0}, {}}; }

ProtocolError::ProtocolError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

void encode_frame_into(const FrameHeader& header, std::span<const std::uint8_t> payload,
                       std::vector<std::uint8_t>& out) {
  validate(header, payload.size());
  put_u16(out, static_cast<std::uint16_t>(header.cmd));
  put_u16(out, header.conn_id);
  put_u16(out, header.length);
  put_u16(out, header.sequence);
  out.insert(out.end(), payload.begin(), payload.end());
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  std::vector<std::uint8_t> out;
  encode_frame_into(frame.header, frame.payload, out);
  return out;
}

FrameHeader decode_header(std::span<const std::uint8_t, kFrameHeaderSize> bytes,
                          std::size_t stream_offset) {
  const std::uint16_t code = get_u16(bytes.data());
  const auto cmd = command_from_code(code);
  if (!cmd) {
    throw ProtocolError("unknown command code " + std::to_string(code), stream_offset);
  }
  FrameHeader header{*cmd, get_u16(bytes.data() + 2), get_u16(bytes.data() + 4),
                     get_u16(bytes.data() + 6)};
  if (header.length > kMaxFramePayload) {
    throw ProtocolError("payload length " + std::to_string(header.length) + " exceeds maximum",
                        stream_offset);
  }
  if (header.cmd != CommandType::Relay && header.length != 0) {
    throw ProtocolError(std::string(to_string(header.cmd)) + " frame with non-zero length",
                        stream_offset);
  }
  return header;
}

DecodeResult decode_frames(std::span<const std::uint8_t> buffer) {
  DecodeResult result;
  std::size_t pos = 0;
  while (buffer.size() - pos >= kFrameHeaderSize) {
    const FrameHeader header =
        decode_header(buffer.subspan(pos).first<kFrameHeaderSize>(), pos);
    const std::size_t total = kFrameHeaderSize + header.length;
    if (buffer.size() - pos < total) {
      break;
    }
    const auto payload = buffer.subspan(pos + kFrameHeaderSize, header.length);
    result.frames.push_back(Frame{header, {payload.begin(), payload.end()}});
    pos += total;
  }
  result.consumed = pos;
  return result;
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (head_ > 0 && head_ * 2 >= buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head_));
    head_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameDecoder::next() {
  const std::span<const std::uint8_t> avail(buf_.data() + head_, buf_.size() - head_);
  if (avail.size() < kFrameHeaderSize) {
    return std::nullopt;
  }
  const FrameHeader header = decode_header(avail.first<kFrameHeaderSize>(), consumed_);
  const std::size_t total = kFrameHeaderSize + header.length;
  if (avail.size() < total) {
    return std::nullopt;
  }
  const auto payload = avail.subspan(kFrameHeaderSize, header.length);
  Frame frame{header, {payload.begin(), payload.end()}};
  head_ += total;
  consumed_ += total;
  if (head_ == buf_.size()) {
    buf_.clear();
    head_ = 0;
  }
  return frame;
}

void FrameDecoder::reset() {
  buf_.clear();
  head_ = 0;
  consumed_ = 0;
}

}  // namespace muffler::wire
