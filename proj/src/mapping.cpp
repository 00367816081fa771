#include "muffler/mapping.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace muffler {
namespace {

// Absorbs representation error in products like 0.29 * 100.
constexpr double kRoundingSlack = 1e-9;

}  // namespace

void ObfuscationConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha: shuffling factor must satisfy 0 < alpha < 1, got " +
                                std::to_string(alpha));
  }
  if (!(beta > 1.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("beta: splitting factor must be > 1, got " + std::to_string(beta));
  }
  if (shuffle_threshold < 1) {
    throw std::invalid_argument("shuffle_threshold: must be >= 1");
  }
  if (m_min < 1) {
    throw std::invalid_argument("m_min: must be >= 1");
  }
  if (remap_interval.count() <= 0) {
    throw std::invalid_argument("remap_interval_ms: must be positive");
  }
  if (rate_window.count() <= 0) {
    throw std::invalid_argument("rate_window_ms: must be positive");
  }
}

const char* to_string(Mode mode) { return mode == Mode::Shuffle ? "shuffle" : "split"; }

Mode select_mode(std::size_t n_real, const ObfuscationConfig& config) {
  return n_real > config.shuffle_threshold ? Mode::Shuffle : Mode::Split;
}

std::size_t target_virtual_count(std::size_t n_real, Mode mode, const ObfuscationConfig& config) {
  const auto n = static_cast<double>(n_real);
  const std::size_t m_min = config.m_min;
  if (mode == Mode::Shuffle) {
    const auto scaled = static_cast<std::size_t>(std::floor(config.alpha * n + kRoundingSlack));
    const std::size_t cap = std::max<std::size_t>(n_real > 0 ? n_real - 1 : 0, 1);
    return std::min(std::max(scaled, m_min), cap);
  }
  const auto scaled = static_cast<std::size_t>(std::ceil(config.beta * n - kRoundingSlack));
  return std::max(scaled, m_min);
}

VirtualId select_virtual_shuffle(const RateTracker& rates, std::span<const VirtualId> virtual_ids,
                                 Timestamp at) {
  if (virtual_ids.empty()) {
    throw std::invalid_argument("select_virtual_shuffle: no virtual connections");
  }
  VirtualId best = virtual_ids.front();
  double best_bps = rates.bps(best, at);
  for (const VirtualId vc : virtual_ids.subspan(1)) {
    const double bps = rates.bps(vc, at);
    if (bps < best_bps) {
      best = vc;
      best_bps = bps;
    }
  }
  return best;
}

VirtualId select_virtual_split(RealId real_id, const RateTracker& rates,
                               std::span<const VirtualId> virtual_ids, Timestamp at) {
  if (virtual_ids.empty()) {
    throw std::invalid_argument("select_virtual_split: no virtual connections");
  }
  const double real_bps = rates.bps(real_id, at);
  VirtualId best = virtual_ids.front();
  double best_score = std::abs(real_bps - rates.bps(best, at));
  for (const VirtualId vc : virtual_ids.subspan(1)) {
    const double score = std::abs(real_bps - rates.bps(vc, at));
    if (score > best_score) {
      best = vc;
      best_score = score;
    }
  }
  return best;
}

bool MappingTable::is_active(VirtualId vc) const {
  return std::find(virtual_ids.begin(), virtual_ids.end(), vc) != virtual_ids.end();
}

std::vector<MappingAction> rebalance(MappingTable& table, const RateTracker& rates,
                                     const ObfuscationConfig& config, Timestamp at) {
  table.mode = select_mode(table.n_real(), config);
  const std::size_t target = target_virtual_count(table.n_real(), table.mode, config);
  const std::size_t current = table.virtual_ids.size();
  std::vector<MappingAction> actions;

  if (target > current) {
    std::uint32_t handle = 0;
    for (std::size_t i = current; i < target; ++i) {
      while (handle < table.pool_size && table.is_active(VirtualId{handle})) {
        ++handle;
      }
      actions.push_back({MappingAction::Kind::ActivateVirtual, VirtualId{handle}});
      ++handle;
    }
  } else if (target < current) {
    // Least loaded first; among equals the most recently activated.
    std::vector<std::size_t> order(current);
    for (std::size_t i = 0; i < current; ++i) {
      order[i] = i;
    }
    std::vector<double> load(current);
    for (std::size_t i = 0; i < current; ++i) {
      load[i] = rates.bps(table.virtual_ids[i], at);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (load[a] != load[b]) {
        return load[a] < load[b];
      }
      return a > b;
    });
    for (std::size_t i = 0; i < current - target; ++i) {
      actions.push_back({MappingAction::Kind::DeactivateVirtual, table.virtual_ids[order[i]]});
    }
  }
  return actions;
}

void apply(MappingTable& table, std::span<const MappingAction> actions) {
  for (const MappingAction& action : actions) {
    if (action.kind == MappingAction::Kind::ActivateVirtual) {
      if (!table.is_active(action.vc)) {
        table.virtual_ids.push_back(action.vc);
      }
      table.pool_size = std::max(table.pool_size, value(action.vc) + 1);
    } else {
      std::erase(table.virtual_ids, action.vc);
    }
  }
}

void register_real(MappingTable& table, RealId id, Timestamp at) {
  if (table.real_ids.contains(id)) {
    throw StateError("real connection " + std::to_string(value(id)) + " already registered");
  }
  if (auto q = table.quarantined_until.find(id); q != table.quarantined_until.end()) {
    if (at < q->second) {
      throw StateError("real connection " + std::to_string(value(id)) + " is quarantined");
    }
    table.quarantined_until.erase(q);
  }
  table.real_ids.insert(id);
  table.next_sequence[id] = 1;
}

void unregister_real(MappingTable& table, RealId id, Timestamp at) {
  if (table.real_ids.erase(id) == 0) {
    throw StateError("real connection " + std::to_string(value(id)) + " is not registered");
  }
  table.next_sequence.erase(id);
  table.quarantined_until[id] = at + kQuarantine;
}

std::optional<RealId> allocate_real_id(MappingTable& table, Timestamp at) {
  std::erase_if(table.quarantined_until, [at](const auto& entry) { return entry.second <= at; });
  constexpr std::uint32_t kIdSpace = 1u << 16;
  if (table.real_ids.size() + table.quarantined_until.size() >= kIdSpace) {
    return std::nullopt;
  }
  for (std::uint32_t raw = 0; raw < kIdSpace; ++raw) {
    const RealId id{static_cast<std::uint16_t>(raw)};
    if (!table.real_ids.contains(id) && !table.quarantined_until.contains(id)) {
      return id;
    }
  }
  return std::nullopt;
}

std::uint16_t take_sequence(MappingTable& table, RealId id) {
  auto it = table.next_sequence.find(id);
  if (it == table.next_sequence.end()) {
    throw StateError("no sequence counter for real connection " + std::to_string(value(id)));
  }
  return it->second++;
}

MappingEngine::MappingEngine(ObfuscationConfig config)
    : config_(config), rates_(config.rate_window) {
  config_.validate();
}

void MappingEngine::register_real(RealId id, Timestamp at) {
  muffler::register_real(table_, id, at);
}

void MappingEngine::unregister_real(RealId id, Timestamp at) {
  muffler::unregister_real(table_, id, at);
  rates_.forget(id);
}

std::vector<MappingAction> MappingEngine::rebalance(Timestamp at) {
  auto actions = muffler::rebalance(table_, rates_, config_, at);
  muffler::apply(table_, actions);
  last_remap_ = at;
  return actions;
}

VirtualId MappingEngine::select(RealId real_id, std::span<const VirtualId> candidates,
                                Timestamp at) const {
  return table_.mode == Mode::Shuffle ? select_virtual_shuffle(rates_, candidates, at)
                                      : select_virtual_split(real_id, rates_, candidates, at);
}

}  // namespace muffler
