#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "muffler/correlation.h"

namespace muffler {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // pairs scoring >= threshold are flagged correlated

  bool operator==(const RocPoint&) const = default;
};

// Starts at (0, 0) with an infinite threshold and adds one point per distinct
// score, descending. FPR and TPR are non-decreasing along the curve.
struct RocCurve {
  std::vector<RocPoint> points;
};

// True pairs are (ingress, truth[ingress]); every other cell is irrelevant.
// Throws std::invalid_argument when truth misses an ingress flow or names an
// unknown egress flow.
RocCurve roc(const ScoreMatrix& scores, const std::map<std::uint32_t, std::uint32_t>& truth);

// TPR at the largest achieved FPR not above `fpr_target` (step function).
double tpr_at_fpr(const RocCurve& curve, double fpr_target);

void write_roc_csv(std::ostream& out, const RocCurve& curve);
RocCurve read_roc_csv(std::istream& in);

}  // namespace muffler
