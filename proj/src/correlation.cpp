#include "muffler/correlation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace muffler {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) {
      ++j;
    }
    // Positions i..j-1 (0-based) share rank mean(i+1 .. j).
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      ranks[order[k]] = rank;
    }
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("spearman: length mismatch");
  }
  if (x.size() < 2) {
    throw std::invalid_argument("spearman: need at least two samples");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  // Both rank vectors have mean (n + 1) / 2.
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    return 0.0;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

FeatureSeries extract_features(const FlowTrace& flow, Timestamp origin, Timestamp end,
                               Timestamp window, std::optional<Direction> dir) {
  if (window.count() <= 0) {
    throw std::invalid_argument("feature window must be positive");
  }
  const auto span = std::max<std::int64_t>((end - origin).count(), 0);
  const auto count = std::max<std::size_t>(
      static_cast<std::size_t>((span + window.count() - 1) / window.count()), 1);

  FeatureSeries fs;
  fs.origin = origin;
  fs.window = window;
  fs.cumulative_bytes.assign(count, 0.0);
  fs.mean_packet_size.assign(count, 0.0);
  fs.mean_ipd_ms.assign(count, 0.0);
  fs.packets.assign(count, 0);
  std::vector<double> bytes(count, 0.0);
  std::vector<double> ipd_sum(count, 0.0);
  std::vector<std::uint32_t> ipd_n(count, 0);

  double before = 0.0;
  std::optional<Timestamp> prev;
  for (const PacketEvent& e : flow.events) {
    if (dir && e.dir != *dir) {
      continue;
    }
    const std::optional<Timestamp> gap_from = prev;
    prev = e.t;
    if (e.t < origin) {
      before += e.bytes;
      continue;
    }
    // Packets at exactly the end fall into the last window.
    const auto idx = std::min(static_cast<std::size_t>((e.t - origin).count() / window.count()),
                              count - 1);
    bytes[idx] += e.bytes;
    ++fs.packets[idx];
    if (gap_from) {
      ipd_sum[idx] += std::chrono::duration<double, std::milli>(e.t - *gap_from).count();
      ++ipd_n[idx];
    }
  }
  double running = before;
  for (std::size_t k = 0; k < count; ++k) {
    running += bytes[k];
    fs.cumulative_bytes[k] = running;
    if (fs.packets[k] > 0) {
      fs.mean_packet_size[k] = bytes[k] / fs.packets[k];
    }
    if (ipd_n[k] > 0) {
      fs.mean_ipd_ms[k] = ipd_sum[k] / ipd_n[k];
    }
  }
  return fs;
}

namespace {

bool is_constant(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

// Cumulative bytes sent in `dir` since `origin`, sampled at each window end.
std::vector<double> progress_series(const FlowTrace& flow, Timestamp origin, Timestamp end,
                                    Timestamp window, Direction dir) {
  auto series = extract_features(flow, origin, end, window, dir).cumulative_bytes;
  double before = 0.0;
  for (const PacketEvent& e : flow.events) {
    if (e.t < origin && e.dir == dir) {
      before += e.bytes;
    }
  }
  for (double& v : series) {
    v -= before;
  }
  return series;
}

}  // namespace

double raptor_score(const FlowTrace& ingress, const FlowTrace& egress, Timestamp window) {
  if (ingress.events.empty() || egress.events.empty()) {
    throw UndefinedScore("raptor_score: empty flow");
  }
  const Timestamp origin = std::max(ingress.start(), egress.start());
  Timestamp end = std::min(ingress.end(), egress.end());
  if (origin > end) {
    throw UndefinedScore("raptor_score: flows do not overlap in time");
  }
  // At least two windows so a rank correlation exists.
  end = std::max(end, origin + 2 * window);

  double sum = 0.0;
  int used = 0;
  for (const Direction dir : {Direction::ToService, Direction::ToClient}) {
    const auto a = progress_series(ingress, origin, end, window, dir);
    const auto b = progress_series(egress, origin, end, window, dir);
    if (is_constant(a) && is_constant(b)) {
      continue;
    }
    sum += spearman(a, b);
    ++used;
  }
  return used == 0 ? 0.0 : sum / used;
}

double averaged_flow_distance(const FeatureSeries& ingress, const FeatureSeries& egress) {
  if (ingress.size() != egress.size()) {
    throw std::invalid_argument("averaged_flow_distance: feature grids differ");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < ingress.size(); ++k) {
    if (ingress.packets[k] == 0) {
      continue;
    }
    sum += std::hypot(ingress.mean_packet_size[k] - egress.mean_packet_size[k],
                      ingress.mean_ipd_ms[k] - egress.mean_ipd_ms[k]);
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::infinity() : sum / static_cast<double>(n);
}

std::map<std::uint32_t, std::uint32_t> ground_truth_pairs(std::span<const FlowTrace> ingress,
                                                          std::span<const FlowTrace> egress,
                                                          Timestamp window) {
  std::map<std::uint32_t, std::uint32_t> pairs;
  if (ingress.empty() || egress.empty()) {
    return pairs;
  }
  Timestamp origin = Timestamp::max();
  Timestamp end = Timestamp::min();
  for (const auto* set : {&ingress, &egress}) {
    for (const FlowTrace& f : *set) {
      if (!f.events.empty()) {
        origin = std::min(origin, f.start());
        end = std::max(end, f.end());
      }
    }
  }
  if (origin > end) {
    origin = end = Timestamp{0};
  }
  std::vector<FeatureSeries> egress_features;
  egress_features.reserve(egress.size());
  for (const FlowTrace& f : egress) {
    egress_features.push_back(extract_features(f, origin, end, window));
  }
  for (const FlowTrace& fi : ingress) {
    const FeatureSeries features = extract_features(fi, origin, end, window);
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::uint32_t> best_id;
    for (std::size_t j = 0; j < egress.size(); ++j) {
      const double d = averaged_flow_distance(features, egress_features[j]);
      const std::uint32_t id = egress[j].flow_id;
      if (!best_id || d < best || (d == best && id < *best_id)) {
        best = d;
        best_id = id;
      }
    }
    pairs[fi.flow_id] = *best_id;
  }
  return pairs;
}

ScoreMatrix score_matrix(std::span<const FlowTrace> ingress, std::span<const FlowTrace> egress,
                         Timestamp window) {
  ScoreMatrix m;
  for (const auto& f : ingress) m.ingress_ids.push_back(f.flow_id);
  for (const auto& f : egress) m.egress_ids.push_back(f.flow_id);
  m.values.assign(ingress.size() * egress.size(), -1.0);
  for (std::size_t i = 0; i < ingress.size(); ++i) {
    for (std::size_t j = 0; j < egress.size(); ++j) {
      try {
        m.at(i, j) = raptor_score(ingress[i], egress[j], window);
      } catch (const UndefinedScore&) {
        m.at(i, j) = -1.0;
      }
    }
  }
  return m;
}

}  // namespace muffler
