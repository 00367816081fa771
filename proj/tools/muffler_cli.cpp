// muffler: run a proxy endpoint, simulate an experiment, attack traces.
//
// Exit codes: 0 success, 2 bad configuration, 1 runtime failure.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "muffler/config.h"
#include "muffler/experiment.h"
#include "muffler/runtime.h"

namespace fs = std::filesystem;
using namespace muffler;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

// Every config key is also a flag; only the ones given end up in `flags`.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void attach(CLI::App& app, bool runtime_keys) {
    app.add_option("-c,--config", file, "key=value config file")->check(CLI::ExistingFile);
    for (const std::string& key : config_keys()) {
      const bool obfuscation = key != "role" && key != "listen" && key != "peer" &&
                               key != "service" && key != "base_connections" &&
                               key != "trace_output";
      if (!runtime_keys && !obfuscation) {
        continue;
      }
      app.add_option("--" + key, values[key], "overrides '" + key + "'");
    }
  }

  RunConfig load(const CLI::App& app) const {
    Settings from_file;
    if (!file.empty()) {
      std::ifstream in(file);
      from_file = parse_settings(in);
    }
    Settings from_flags;
    for (const auto& [key, value] : values) {
      if (app.count("--" + key) > 0) {
        from_flags.emplace_back(key, value);
      }
    }
    return make_config(from_file, from_flags);
  }
};

int cmd_run(const RunConfig& config) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  ProxyRuntime runtime(config);
  std::cerr << (config.role == Role::Ingress ? "ingress" : "egress") << " listening on port "
            << runtime.listen_port() << '\n';
  runtime.run(g_stop);
  return 0;
}

int cmd_simulate(const ExperimentOptions& options, const fs::path& out_dir) {
  const ExperimentResult result = run_experiment(options);
  write_experiment(out_dir, options, result);
  std::cout << "wrote " << out_dir.string() << '\n';
  std::ifstream summary(out_dir / "overhead.txt");
  std::cout << summary.rdbuf();
  return 0;
}

int cmd_attack(const fs::path& dir, const std::string& ingress_name,
               const std::string& egress_name, const fs::path& out_dir, int window_ms) {
  const auto ingress = load_traces(dir / ingress_name);
  const auto egress = load_traces(dir / egress_name);
  const AttackReport report = attack(ingress, egress, from_ms(window_ms));
  fs::create_directories(out_dir);
  {
    std::ofstream scores(out_dir / "scores.csv");
    write_scores_csv(scores, report);
    std::ofstream curve(out_dir / "roc.csv");
    write_roc_csv(curve, report.curve);
    if (!scores || !curve) {
      throw std::runtime_error("cannot write to " + out_dir.string());
    }
  }
  std::cout << ingress.size() << " ingress flows, " << egress.size() << " egress flows\n";
  write_tpr_table(std::cout, report);
  return 0;
}

int cmd_report(const fs::path& dir) {
  std::ifstream summary(dir / "overhead.txt");
  if (!summary) {
    throw std::runtime_error("no overhead.txt in " + dir.string());
  }
  std::cout << summary.rdbuf();
  for (const char* name : {"baseline", "muffler"}) {
    std::ifstream in(dir / ("roc_" + std::string(name) + ".csv"));
    if (!in) {
      throw std::runtime_error("missing roc_" + std::string(name) + ".csv");
    }
    const RocCurve curve = read_roc_csv(in);
    std::cout << "\n" << name << '\n';
    AttackReport r;
    r.tpr_at_1e1 = tpr_at_fpr(curve, 0.1);
    r.tpr_at_1e2 = tpr_at_fpr(curve, 0.01);
    write_tpr_table(std::cout, r);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traffic obfuscation proxy: run, simulate, attack, report"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the ingress or egress proxy over TCP");
  ConfigFlags run_flags;
  run_flags.attach(*run, true);

  auto* sim = app.add_subcommand("simulate", "baseline and proxied runs of a synthetic workload");
  ConfigFlags sim_flags;
  sim_flags.attach(*sim, false);
  std::string profile = "browsing";
  std::size_t flows = 50;
  int duration_ms = 30000;
  std::uint64_t seed = 1;
  std::string out_dir;
  sim->add_option("--profile", profile, "browsing or download")->capture_default_str();
  sim->add_option("--flows", flows)->capture_default_str();
  sim->add_option("--duration-ms", duration_ms)->capture_default_str();
  sim->add_option("--seed", seed)->capture_default_str();
  sim->add_option("-o,--out", out_dir, "experiment directory")->required();

  auto* atk = app.add_subcommand("attack", "score captured traces with the correlation attacker");
  std::string trace_dir;
  std::string ingress_name = "ingress.csv";
  std::string egress_name = "egress.csv";
  std::string attack_out;
  int window_ms = 500;
  atk->add_option("dir", trace_dir, "directory with the trace CSVs")->required();
  atk->add_option("--ingress", ingress_name)->capture_default_str();
  atk->add_option("--egress", egress_name)->capture_default_str();
  atk->add_option("-o,--out", attack_out, "where scores.csv and roc.csv go (default: dir)");
  atk->add_option("--window-ms", window_ms)->check(CLI::PositiveNumber)->capture_default_str();

  auto* rep = app.add_subcommand("report", "summarize an experiment directory");
  std::string report_dir;
  rep->add_option("dir", report_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      RunConfig config;
      try {
        config = run_flags.load(*run);
      } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
      }
      return cmd_run(config);
    }
    if (*sim) {
      ExperimentOptions options;
      try {
        options.config = sim_flags.load(*sim).obfuscation;
        options.profile = parse_profile(profile);
      } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: --profile: " << e.what() << '\n';
        return kExitConfig;
      }
      options.flows = flows;
      options.duration = from_ms(duration_ms);
      options.seed = seed;
      return cmd_simulate(options, out_dir);
    }
    if (*atk) {
      return cmd_attack(trace_dir, ingress_name, egress_name,
                        attack_out.empty() ? fs::path(trace_dir) : fs::path(attack_out), window_ms);
    }
    return cmd_report(report_dir);
  } catch (const TraceParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
