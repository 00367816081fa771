#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

#include "muffler/correlation.h"
#include "muffler/overhead.h"
#include "muffler/roc.h"
#include "muffler/simulation.h"
#include "muffler/traffic_gen.h"

namespace muffler {

struct ExperimentOptions {
  Profile profile = Profile::Browsing;
  std::size_t flows = 50;
  Timestamp duration = from_ms(30000);
  std::uint64_t seed = 1;
  ObfuscationConfig config;
  LinkModel link;
  Timestamp feature_window = kDefaultFeatureWindow;
};

// What an observer holding both segments can do with them.
struct AttackReport {
  ScoreMatrix scores;
  std::map<std::uint32_t, std::uint32_t> truth;
  RocCurve curve;
  double tpr_at_1e1 = 0.0;  // TPR at FPR 0.1
  double tpr_at_1e2 = 0.0;  // TPR at FPR 0.01
};

struct ExperimentResult {
  SimResult baseline;
  SimResult muffler;
  OverheadReport overhead;  // muffler against the baseline
  AttackReport attack_baseline;
  AttackReport attack_muffler;
};

AttackReport attack(const std::vector<FlowTrace>& ingress, const std::vector<FlowTrace>& egress,
                    Timestamp window = kDefaultFeatureWindow);

// O(D) over everything the muffler run put on the wire against what users
// sent and received; T(D) between the user-side views of the two runs.
OverheadReport measure_overhead(const SimResult& baseline, const SimResult& muffler);

// Same workload through the direct relay and through the proxy pair.
ExperimentResult run_experiment(const ExperimentOptions& options);

// Writes ingress.csv, egress.csv (muffler run), ingress_baseline.csv,
// egress_baseline.csv, overhead.txt, roc_baseline.csv, roc_muffler.csv.
void write_experiment(const std::filesystem::path& dir, const ExperimentOptions& options,
                      const ExperimentResult& result);

void write_scores_csv(std::ostream& out, const AttackReport& report);
void write_tpr_table(std::ostream& out, const AttackReport& report);

// Throws std::runtime_error when the file cannot be opened and
// TraceParseError (with the line number) when it is malformed.
std::vector<FlowTrace> load_traces(const std::filesystem::path& path);

}  // namespace muffler
