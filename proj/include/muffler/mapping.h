#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "muffler/rate_tracker.h"
#include "muffler/types.h"

namespace muffler {

// Parameters of the shuffling/splitting schema. Defaults are the evaluated
// settings: S = 4, alpha = 0.1, beta = 2, M_min = 3.
struct ObfuscationConfig {
  double alpha = 0.1;                    // shuffling factor, 0 < alpha < 1
  double beta = 2.0;                     // splitting factor, beta > 1
  std::uint32_t shuffle_threshold = 4;   // S: shuffle iff N > S
  std::uint32_t m_min = 3;               // floor on the virtual connection count
  Timestamp remap_interval = from_ms(1000);
  Timestamp rate_window = from_ms(1000);

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

enum class Mode { Shuffle, Split };

const char* to_string(Mode mode);

inline constexpr Timestamp kQuarantine = from_ms(5000);

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

Mode select_mode(std::size_t n_real, const ObfuscationConfig& config);

// Shuffle: max(floor(alpha N), m_min), capped at max(N - 1, 1).
// Split:   max(ceil(beta N), m_min).
std::size_t target_virtual_count(std::size_t n_real, Mode mode, const ObfuscationConfig& config);

// argmin_j BPS(V_j); ties go to the earliest position. Requires a non-empty
// candidate list.
VirtualId select_virtual_shuffle(const RateTracker& rates, std::span<const VirtualId> virtual_ids,
                                 Timestamp at);

// argmax_j |BPS(R_i) - BPS(V_j)|; ties go to the earliest position.
VirtualId select_virtual_split(RealId real_id, const RateTracker& rates,
                               std::span<const VirtualId> virtual_ids, Timestamp at);

struct MappingAction {
  enum class Kind { ActivateVirtual, DeactivateVirtual };
  Kind kind;
  VirtualId vc;

  bool operator==(const MappingAction&) const = default;
};

struct MappingTable {
  std::set<RealId> real_ids;
  std::vector<VirtualId> virtual_ids;  // active set, in activation order
  Mode mode = Mode::Split;
  std::unordered_map<RealId, std::uint16_t> next_sequence;
  std::map<RealId, Timestamp> quarantined_until;
  std::uint32_t pool_size = 0;  // handles 0 .. pool_size-1 have been handed out

  std::size_t n_real() const { return real_ids.size(); }
  bool is_active(VirtualId vc) const;
};

// Updates table.mode and returns the activations/deactivations needed to
// reach the target count. Deactivation picks the least-loaded active
// connections; activation reuses the lowest inactive handle before growing
// the pool.
std::vector<MappingAction> rebalance(MappingTable& table, const RateTracker& rates,
                                     const ObfuscationConfig& config, Timestamp at);

void apply(MappingTable& table, std::span<const MappingAction> actions);

void register_real(MappingTable& table, RealId id, Timestamp at);
void unregister_real(MappingTable& table, RealId id, Timestamp at);

// Lowest-numbered free ID, skipping live and
// quarantined IDs. nullopt when the ID space is exhausted.
std::optional<RealId> allocate_real_id(MappingTable& table, Timestamp at);

// Returns the next Relay sequence number for `id` and advances it (wraps at
// 2^16). Relay numbering starts at 1.
std::uint16_t take_sequence(MappingTable& table, RealId id);

// Single-owner bundle of the table, the rate tracker, and the remap cadence.
class MappingEngine {
 public:
  explicit MappingEngine(ObfuscationConfig config);

  const ObfuscationConfig& config() const { return config_; }
  const MappingTable& table() const { return table_; }
  MappingTable& table() { return table_; }
  RateTracker& rates() { return rates_; }
  const RateTracker& rates() const { return rates_; }

  std::optional<RealId> allocate(Timestamp at) { return allocate_real_id(table_, at); }
  void register_real(RealId id, Timestamp at);
  void unregister_real(RealId id, Timestamp at);

  // Rebalances and applies; returns what changed so the owner can open or
  // drain base connections.
  std::vector<MappingAction> rebalance(Timestamp at);
  bool remap_due(Timestamp at) const { return at - last_remap_ >= config_.remap_interval; }

  // Mode-appropriate selector over `candidates` (non-empty).
  VirtualId select(RealId real_id, std::span<const VirtualId> candidates, Timestamp at) const;

 private:
  ObfuscationConfig config_;
  MappingTable table_;
  RateTracker rates_;
  Timestamp last_remap_{0};
};

}  // namespace muffler
