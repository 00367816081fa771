#pragma once

// Brute-force reference implementations. Deliberately naive and written
// without looking at the library code paths they check.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "muffler/correlation.h"
#include "muffler/roc.h"

namespace muffler::oracle {

// rank_i = 1 + #{x_j < x_i} + (#{x_j == x_i} - 1) / 2
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      less += x[j] < x[i] ? 1 : 0;
      equal += x[j] == x[i] ? 1 : 0;
    }
    r[i] = 1 + less + (equal - 1) / 2;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) {
    return 0.0;
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

// Every distinct threshold, highest first, with the flagged set recounted
// from scratch each time.
inline std::vector<RocPoint> roc(const ScoreMatrix& s,
                                 const std::map<std::uint32_t, std::uint32_t>& truth) {
  std::set<double, std::greater<>> thresholds(s.values.begin(), s.values.end());
  const double positives = static_cast<double>(s.ingress_ids.size());
  const double negatives = static_cast<double>(s.values.size()) - positives;
  std::vector<RocPoint> out{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  for (const double th : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.ingress_ids.size(); ++i) {
      for (std::size_t j = 0; j < s.egress_ids.size(); ++j) {
        if (s.at(i, j) >= th) {
          (truth.at(s.ingress_ids[i]) == s.egress_ids[j] ? tp : fp) += 1;
        }
      }
    }
    out.push_back({negatives > 0 ? fp / negatives : 0.0, tp / positives, th});
  }
  return out;
}

// Shuffle count with alpha = a_num / a_den, in integers.
inline std::size_t shuffle_count(std::size_t n, std::uint64_t a_num, std::uint64_t a_den,
                                 std::size_t m_min) {
  std::size_t m = static_cast<std::size_t>(n * a_num / a_den);
  if (m < m_min) {
    m = m_min;
  }
  const std::size_t cap = n > 1 ? n - 1 : 1;
  return m < cap ? m : cap;
}

// Split count with beta = b_num / b_den, in integers.
inline std::size_t split_count(std::size_t n, std::uint64_t b_num, std::uint64_t b_den,
                               std::size_t m_min) {
  std::size_t m = static_cast<std::size_t>((n * b_num + b_den - 1) / b_den);
  return m < m_min ? m_min : m;
}

// Position of the smallest value; the first one on ties.
inline std::size_t least_loaded(const std::vector<std::uint64_t>& v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] < v[best]) {
      best = j;
    }
  }
  return best;
}

// Position maximizing |r - v_j|; the first one on ties.
inline std::size_t most_dissimilar(std::uint64_t r, const std::vector<std::uint64_t>& v) {
  const auto d = [&](std::size_t k) { return v[k] > r ? v[k] - r : r - v[k]; };
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (d(j) > d(best)) {
      best = j;
    }
  }
  return best;
}

}  // namespace muffler::oracle
