#pragma once

#include <chrono>
#include <cstdint>
#include <functional>

namespace muffler {

// All timestamps are microseconds since a caller-chosen origin. The proxy and
// the rate tracker never read a clock themselves.
using Timestamp = std::chrono::microseconds;

// Identifier of a real (user <-> service) connection, as carried on the wire.
enum class RealId : std::uint16_t {};

// Handle of a virtual connection within one proxy's pool of base connections.
enum class VirtualId : std::uint32_t {};

constexpr std::uint16_t value(RealId id) { return static_cast<std::uint16_t>(id); }
constexpr std::uint32_t value(VirtualId id) { return static_cast<std::uint32_t>(id); }

constexpr Timestamp from_ms(std::int64_t ms) { return std::chrono::milliseconds(ms); }

}  // namespace muffler

template <>
struct std::hash<muffler::RealId> {
  std::size_t operator()(muffler::RealId id) const noexcept { return muffler::value(id); }
};

template <>
struct std::hash<muffler::VirtualId> {
  std::size_t operator()(muffler::VirtualId id) const noexcept { return muffler::value(id); }
};
