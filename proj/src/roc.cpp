#include "muffler/roc.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace muffler {

RocCurve roc(const ScoreMatrix& scores, const std::map<std::uint32_t, std::uint32_t>& truth) {
  struct Cell {
    double score;
    bool positive;
  };
  std::vector<Cell> cells;
  cells.reserve(scores.values.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.ingress_ids.size(); ++i) {
    const auto t = truth.find(scores.ingress_ids[i]);
    if (t == truth.end()) {
      throw std::invalid_argument("roc: no ground truth for ingress flow " +
                                  std::to_string(scores.ingress_ids[i]));
    }
    bool matched = false;
    for (std::size_t j = 0; j < scores.egress_ids.size(); ++j) {
      const bool positive = scores.egress_ids[j] == t->second;
      matched = matched || positive;
      cells.push_back({scores.at(i, j), positive});
    }
    if (!matched) {
      throw std::invalid_argument("roc: ground truth names unknown egress flow " +
                                  std::to_string(t->second));
    }
    ++positives;
  }
  const std::size_t negatives = cells.size() - positives;
  std::sort(cells.begin(), cells.end(),
            [](const Cell& a, const Cell& b) { return a.score > b.score; });

  auto rate = [](std::size_t hits, std::size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
  };
  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < cells.size()) {
    const double threshold = cells[i].score;
    while (i < cells.size() && cells[i].score == threshold) {
      (cells[i].positive ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({rate(fp, negatives), rate(tp, positives), threshold});
  }
  return curve;
}

double tpr_at_fpr(const RocCurve& curve, double fpr_target) {
  if (curve.points.empty()) {
    throw std::invalid_argument("tpr_at_fpr: empty curve");
  }
  double best = 0.0;
  for (const RocPoint& p : curve.points) {
    if (p.fpr <= fpr_target + 1e-12) {
      best = std::max(best, p.tpr);
    }
  }
  return best;
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
  out << "threshold,fpr,tpr\n";
  out << std::setprecision(17);
  for (const RocPoint& p : curve.points) {
    if (std::isinf(p.threshold)) {
      out << "inf";
    } else {
      out << p.threshold;
    }
    out << ',' << p.fpr << ',' << p.tpr << '\n';
  }
}

RocCurve read_roc_csv(std::istream& in) {
  RocCurve curve;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || (n == 1 && line.rfind("threshold", 0) == 0)) {
      continue;
    }
    std::istringstream fields(line);
    std::string threshold;
    std::string fpr;
    std::string tpr;
    if (!std::getline(fields, threshold, ',') || !std::getline(fields, fpr, ',') ||
        !std::getline(fields, tpr)) {
      throw std::runtime_error("roc csv line " + std::to_string(n) + ": expected 3 fields");
    }
    try {
      curve.points.push_back({std::stod(fpr), std::stod(tpr),
                              threshold == "inf" ? std::numeric_limits<double>::infinity()
                                                 : std::stod(threshold)});
    } catch (const std::exception&) {
      throw std::runtime_error("roc csv line " + std::to_string(n) + ": malformed number");
    }
  }
  return curve;
}

}  // namespace muffler
