// fatsim: run seeded fat-tree scheduling experiments and write the result
// bundle (per-run JSON reports, summary.json, plot CSVs).
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fatsim/config.hpp"
#include "fatsim/experiment.hpp"
#include "fatsim/topology.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct RunFlags {
  std::string config_file;
  std::optional<std::string> k, capacity, duration, alpha, elephant_threshold, poll_interval, pattern, out;
  std::optional<std::string> elephants, arrival_rate, flow_duration, probe_interval, jobs;
  std::vector<std::string> schedulers;
  std::vector<std::string> seeds;
  bool event_log = false;
};

fatsim::ExperimentConfig build_config(const RunFlags& f) {
  fatsim::ExperimentConfig cfg;
  if (!f.config_file.empty()) fatsim::apply_config_file(cfg, f.config_file);
  if (const char* env = std::getenv("FATSIM_OUT"); env && *env) cfg.output_dir = env;

  auto set = [&](const char* key, const std::optional<std::string>& v) {
    if (v) fatsim::apply_setting(cfg, key, *v);
  };
  set("k", f.k);
  set("capacity", f.capacity);
  set("duration", f.duration);
  set("alpha", f.alpha);
  set("elephant_threshold", f.elephant_threshold);
  set("poll_interval", f.poll_interval);
  set("pattern", f.pattern);
  set("elephants", f.elephants);
  set("arrival_rate", f.arrival_rate);
  set("flow_duration", f.flow_duration);
  set("probe_interval", f.probe_interval);
  set("jobs", f.jobs);
  set("out", f.out);
  if (!f.schedulers.empty()) {
    cfg.schedulers.clear();
    for (const auto& s : f.schedulers)
      for (const auto& item : fatsim::detail::split_list(s))
        cfg.schedulers.push_back(fatsim::parse_scheduler("scheduler", item));
  }
  if (!f.seeds.empty()) {
    cfg.seeds.clear();
    for (const auto& s : f.seeds)
      for (auto v : fatsim::parse_seed_list("seed", s)) cfg.seeds.push_back(v);
  }
  if (f.event_log) cfg.event_logs = true;
  cfg.validate();
  return cfg;
}

int cmd_run(const RunFlags& flags) {
  fatsim::ExperimentConfig cfg;
  try {
    cfg = build_config(flags);
  } catch (const fatsim::ConfigError& e) {
    std::cerr << "fatsim: config error in '" << e.field() << "': " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const auto bundle = fatsim::run_experiment(cfg);
    for (const auto& s : fatsim::summarize(bundle)) {
      std::cout << s.name << ": bisection " << s.bisection_mean / 1e6 << " Mb/s, util@0.5 "
                << (s.cdf.empty() ? 0.0 : s.cdf.value_at(0.5)) << ", loss " << s.loss_mean << ", rtt dev "
                << s.rtt_deviation_mean.value_or(0.0) * 1e3 << " ms\n";
    }
    std::cout << "wrote " << bundle.runs.size() << " reports to " << cfg.output_dir << "\n";
  } catch (const fatsim::ConfigError& e) {
    std::cerr << "fatsim: config error in '" << e.field() << "': " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "fatsim: invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "fatsim: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

int cmd_topology(int k, double capacity) {
  try {
    const auto t = fatsim::Topology::build_fat_tree(k, capacity);
    std::cout << "k=" << k << " switches=" << t.switch_count() << " hosts=" << t.host_count()
              << " links=" << t.links().size() << " switch_ports=" << t.total_switch_ports()
              << " aggregate_upstream_links=" << t.aggregate_upstream_links().size() << "\n";
    const auto hosts = t.hosts();
    const auto paths = t.equal_cost_paths(hosts.front(), hosts.back());
    std::cout << "paths host0 -> host" << hosts.back().index << ": " << paths.size() << "\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << "fatsim: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-level fat-tree scheduling simulator"};
  app.require_subcommand(1);

  RunFlags flags;
  auto* run = app.add_subcommand("run", "Run every (scheduler, seed) pair and write the result bundle");
  run->add_option("-c,--config", flags.config_file, "key = value config file")->check(CLI::ExistingFile);
  run->add_option("--k", flags.k, "fat-tree arity (even)");
  run->add_option("--capacity", flags.capacity, "link capacity, e.g. 10M");
  run->add_option("--scheduler", flags.schedulers, "sp, sp-scalarized, ecmp, hedera, nonblocking (repeatable)");
  run->add_option("--seed", flags.seeds, "seed or range a..b (repeatable)");
  run->add_option("--duration", flags.duration, "simulated seconds");
  run->add_option("--alpha", flags.alpha, "SP scalarized trade-off, Mb/s per elephant");
  run->add_option("--elephant-threshold", flags.elephant_threshold, "Hedera elephant threshold, fraction of capacity");
  run->add_option("--poll-interval", flags.poll_interval, "stats poll interval, seconds");
  run->add_option("--pattern", flags.pattern, "bisection, permutation, stride");
  run->add_option("--elephants", flags.elephants, "elephant flows per run");
  run->add_option("--arrival-rate", flags.arrival_rate, "mean elephant arrivals per second");
  run->add_option("--flow-duration", flags.flow_duration, "elephant lifetime, seconds (inf = until the end)");
  run->add_option("--probe-interval", flags.probe_interval, "mice probe spacing, seconds, or 'none'");
  run->add_option("--jobs", flags.jobs, "concurrent runs");
  run->add_option("--out", flags.out, "output directory (env FATSIM_OUT)");
  run->add_flag("--event-log", flags.event_log, "also write per-run event logs");

  int topo_k = 4;
  std::string topo_capacity = "10M";
  auto* topo = app.add_subcommand("topology", "Print fat-tree counts for an arity");
  topo->add_option("--k", topo_k, "fat-tree arity (even)");
  topo->add_option("--capacity", topo_capacity, "link capacity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (*run) return cmd_run(flags);
  if (*topo) {
    try {
      return cmd_topology(topo_k, fatsim::parse_bandwidth("capacity", topo_capacity));
    } catch (const fatsim::ConfigError& e) {
      std::cerr << "fatsim: " << e.what() << "\n";
      return kExitConfig;
    }
  }
  return 0;
}
