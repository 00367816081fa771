#include "muffler/experiment.h"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace muffler {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  return out;
}

void save_traces(const std::filesystem::path& path, const std::vector<FlowTrace>& flows) {
  auto out = open_out(path);
  write_traces_csv(out, flows);
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

void save_roc(const std::filesystem::path& path, const RocCurve& curve) {
  auto out = open_out(path);
  write_roc_csv(out, curve);
}

}  // namespace

AttackReport attack(const std::vector<FlowTrace>& ingress, const std::vector<FlowTrace>& egress,
                    Timestamp window) {
  AttackReport r;
  r.scores = score_matrix(ingress, egress, window);
  r.truth = ground_truth_pairs(ingress, egress, window);
  r.curve = roc(r.scores, r.truth);
  r.tpr_at_1e1 = tpr_at_fpr(r.curve, 0.1);
  r.tpr_at_1e2 = tpr_at_fpr(r.curve, 0.01);
  return r;
}

OverheadReport measure_overhead(const SimResult& baseline, const SimResult& muffler) {
  OverheadReport r;
  const FlowTrace user = merge_flows(muffler.ingress, 0, Segment::Ingress);
  const FlowTrace wire = merge_flows(muffler.egress, 0, Segment::Egress);
  r.bandwidth = bandwidth_overhead(user, wire);
  r.latency = latency_overhead(merge_flows(baseline.ingress, 0, Segment::Ingress), user);
  return r;
}

ExperimentResult run_experiment(const ExperimentOptions& options) {
  options.config.validate();
  const auto workload =
      generate_flows(options.profile, options.flows, options.duration, options.seed);
  SimOptions sim;
  sim.config = options.config;
  sim.link = options.link;
  sim.seed = options.seed;

  ExperimentResult r;
  r.baseline = simulate_direct(workload, sim);
  r.muffler = simulate_muffler(workload, sim);
  if (!r.baseline.all_intact() || !r.muffler.all_intact()) {
    throw std::runtime_error("simulation lost or corrupted data");
  }
  r.overhead = measure_overhead(r.baseline, r.muffler);
  r.attack_baseline = attack(r.baseline.ingress, r.baseline.egress, options.feature_window);
  r.attack_muffler = attack(r.muffler.ingress, r.muffler.egress, options.feature_window);
  return r;
}

void write_experiment(const std::filesystem::path& dir, const ExperimentOptions& options,
                      const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  save_traces(dir / "ingress.csv", result.muffler.ingress);
  save_traces(dir / "egress.csv", result.muffler.egress);
  save_traces(dir / "ingress_baseline.csv", result.baseline.ingress);
  save_traces(dir / "egress_baseline.csv", result.baseline.egress);
  save_roc(dir / "roc_baseline.csv", result.attack_baseline.curve);
  save_roc(dir / "roc_muffler.csv", result.attack_muffler.curve);

  auto out = open_out(dir / "overhead.txt");
  const SimResult& m = result.muffler;
  out << std::setprecision(9);
  out << "profile: " << to_string(options.profile) << '\n'
      << "flows: " << options.flows << '\n'
      << "seed: " << options.seed << '\n'
      << "payload_bytes: " << m.payload_bytes << '\n'
      << "wire_bytes: " << m.wire_bytes << '\n'
      << "frames: " << m.frames << '\n'
      << "bandwidth_overhead: " << result.overhead.bandwidth << '\n'
      << "latency_overhead: " << result.overhead.latency << '\n'
      << "tpr_at_fpr_0.1_baseline: " << result.attack_baseline.tpr_at_1e1 << '\n'
      << "tpr_at_fpr_0.1_muffler: " << result.attack_muffler.tpr_at_1e1 << '\n'
      << "tpr_at_fpr_0.01_baseline: " << result.attack_baseline.tpr_at_1e2 << '\n'
      << "tpr_at_fpr_0.01_muffler: " << result.attack_muffler.tpr_at_1e2 << '\n';
}

void write_scores_csv(std::ostream& out, const AttackReport& report) {
  out << "ingress_id,egress_id,score,true_pair\n";
  out << std::setprecision(12);
  const ScoreMatrix& s = report.scores;
  for (std::size_t i = 0; i < s.ingress_ids.size(); ++i) {
    const auto truth = report.truth.find(s.ingress_ids[i]);
    for (std::size_t j = 0; j < s.egress_ids.size(); ++j) {
      const bool is_true = truth != report.truth.end() && truth->second == s.egress_ids[j];
      out << s.ingress_ids[i] << ',' << s.egress_ids[j] << ',' << s.at(i, j) << ','
          << (is_true ? 1 : 0) << '\n';
    }
  }
}

void write_tpr_table(std::ostream& out, const AttackReport& report) {
  out << "fpr_target  tpr\n" << std::fixed << std::setprecision(4);
  out << "0.1         " << report.tpr_at_1e1 << '\n';
  out << "0.01        " << report.tpr_at_1e2 << '\n';
  out << std::defaultfloat;
}

std::vector<FlowTrace> load_traces(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  return read_traces_csv(in);
}

}  // namespace muffler
