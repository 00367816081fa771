#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "muffler/flow_trace.h"

namespace muffler {

inline constexpr Timestamp kDefaultFeatureWindow = from_ms(500);

// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

// Spearman rank correlation with average-rank ties. Throws
// std::invalid_argument on length mismatch or fewer than two samples. A
// constant input has no rank order; the coefficient is then 0.
double spearman(std::span<const double> x, std::span<const double> y);

// Per-window flow features over the grid [origin, origin + k*window).
struct FeatureSeries {
  Timestamp origin{0};
  Timestamp window = kDefaultFeatureWindow;
  std::vector<double> cumulative_bytes;  // bytes up to the end of each window
  std::vector<double> mean_packet_size;  // 0 for empty windows
  std::vector<double> mean_ipd_ms;       // gaps to the previous packet, 0 when none
  std::vector<std::uint32_t> packets;

  std::size_t size() const { return cumulative_bytes.size(); }
};

// Window count is ceil((end - origin) / window), at least one. When `dir` is
// set only packets in that direction are counted.
FeatureSeries extract_features(const FlowTrace& flow, Timestamp origin, Timestamp end,
                               Timestamp window, std::optional<Direction> dir = std::nullopt);

class UndefinedScore : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cumulative-progress correlation in the style of RAPTOR: Spearman over
// per-window cumulative byte counts, averaged over the two directions. The
// grid covers the time both flows overlap. Directions with no variation on either side are left
// out; throws UndefinedScore when the flows do not overlap in time.
double raptor_score(const FlowTrace& ingress, const FlowTrace& egress,
                    Timestamp window = kDefaultFeatureWindow);

// Mean per-window Euclidean distance between (mean packet size [bytes], mean
// inter-packet delay [ms]) feature vectors, over the windows in which the
// ingress flow is active.
double averaged_flow_distance(const FeatureSeries& ingress, const FeatureSeries& egress);

// Matches each ingress flow to the egress flow with the highest averaged flow
// similarity (lowest distance; ties to the lowest egress flow id).
std::map<std::uint32_t, std::uint32_t> ground_truth_pairs(std::span<const FlowTrace> ingress,
                                                          std::span<const FlowTrace> egress,
                                                          Timestamp window = kDefaultFeatureWindow);

struct ScoreMatrix {
  std::vector<std::uint32_t> ingress_ids;
  std::vector<std::uint32_t> egress_ids;
  std::vector<double> values;  // row-major, ingress x egress

  double at(std::size_t row, std::size_t col) const { return values[row * egress_ids.size() + col]; }
  double& at(std::size_t row, std::size_t col) { return values[row * egress_ids.size() + col]; }
};

// raptor_score for every pair; pairs with no overlap score -1.
ScoreMatrix score_matrix(std::span<const FlowTrace> ingress, std::span<const FlowTrace> egress,
                         Timestamp window = kDefaultFeatureWindow);

}  // namespace muffler
