#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "json.hpp"

#include "fatsim/config.hpp"
#include "fatsim/engine.hpp"
#include "fatsim/metrics.hpp"
#include "fatsim/schedulers.hpp"
#include "fatsim/topology.hpp"
#include "fatsim/traffic.hpp"

namespace fatsim {

inline constexpr int kReportSchemaVersion = 1;

// Output could not be produced (I/O), as opposed to a bad configuration.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunResult {
  SchedulerKind scheduler;
  std::uint64_t seed = 0;
  MetricsReport report;
  std::vector<LogRecord> log;  // kept only when event logs are requested
};

struct ResultBundle {
  ExperimentConfig config;
  std::vector<RunResult> runs;  // scheduler-major, seeds in config order
};

// One simulation. Every scheduler sees the same workload for a given seed;
// the non-blocking baseline runs it on the star instead of the fat-tree.
inline RunResult run_single(const ExperimentConfig& cfg, const Topology& fat_tree, const Topology& star,
                            const SchedulerKind& kind, std::uint64_t seed, bool keep_log = false) {
  const auto workload = generate_workload(fat_tree, cfg.workload_for(seed));
  const Topology& topo = kind.variant == SchedulerKind::Variant::NonBlocking ? star : fat_tree;
  Engine engine(topo, kind, cfg.engine_for(seed), workload);
  engine.run();
  RunResult r;
  r.scheduler = kind;
  r.seed = seed;
  r.report = summarize_run(engine, workload);
  if (keep_log) r.log = engine.log();
  return r;
}

inline ResultBundle run_simulations(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto fat_tree = Topology::build_fat_tree(cfg.k, cfg.link_capacity);
  const auto star = Topology::build_non_blocking(cfg.k, cfg.link_capacity);
  const auto kinds = cfg.resolved_schedulers();

  ResultBundle bundle;
  bundle.config = cfg;
  bundle.runs.resize(kinds.size() * cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < bundle.runs.size(); i = next++) {
      const auto& kind = kinds[i / cfg.seeds.size()];
      bundle.runs[i] = run_single(cfg, fat_tree, star, kind, cfg.seeds[i % cfg.seeds.size()], cfg.event_logs);
    }
  };
  const int threads = std::min<int>(cfg.jobs, static_cast<int>(bundle.runs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return bundle;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw RuntimeFailure("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw RuntimeFailure("cannot rename '" + tmp.string() + "': " + ec.message());
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

inline std::string run_file_stem(const RunResult& r) {
  return r.scheduler.name() + "-seed" + std::to_string(r.seed);
}

inline nlohmann::ordered_json bounds_json(const BoundsReport& b) {
  nlohmann::ordered_json j;
  j["t_max_bps"] = b.t_max;
  j["t_min_bps"] = b.t_min;
  j["l_max_proxy"] = detail::optional_json(b.latency.l_max);
  j["l_min_proxy"] = detail::optional_json(b.latency.l_min);
  j["l_max_unbounded"] = !b.latency.l_max.has_value();
  j["l_min_unbounded"] = !b.latency.l_min.has_value();
  j["e_max"] = b.e_max;
  j["per_edge_load_bps"] = b.per_edge_load;
  j["per_aggregate_load_bps"] = b.per_agg_load;
  return j;
}

inline nlohmann::ordered_json report_json(const RunResult& r, const ExperimentConfig& cfg) {
  const auto& m = r.report;
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["scheduler"] = r.scheduler.name();
  j["seed"] = r.seed;
  j["k"] = cfg.k;
  j["link_capacity_bps"] = cfg.link_capacity;
  j["duration_s"] = cfg.duration;

  nlohmann::ordered_json bis;
  bis["mean_bps"] = m.bisection.mean;
  auto series = nlohmann::ordered_json::array();
  for (const auto& [t, v] : m.bisection.points) series.push_back({t, v});
  bis["series"] = series;
  j["bisection_bandwidth"] = bis;

  nlohmann::ordered_json cdf;
  cdf["links"] = "switch-to-switch, each direction counted separately";
  if (!m.utilization.empty()) {
    cdf["p50"] = m.utilization.value_at(0.5);
    cdf["p90"] = m.utilization.value_at(0.9);
  } else {
    cdf["p50"] = nullptr;
    cdf["p90"] = nullptr;
  }
  auto pts = nlohmann::ordered_json::array();
  for (const auto& [u, f] : m.utilization.points()) pts.push_back({u, f});
  cdf["points"] = pts;
  j["utilization_cdf"] = cdf;

  nlohmann::ordered_json mice;
  mice["probes_total"] = m.mice.total;
  mice["probes_delivered"] = m.mice.delivered;
  mice["packet_loss"] = m.mice.loss;
  mice["rtt_mean_deviation_s"] = detail::optional_json(m.mice.rtt_mean_deviation);
  j["mice"] = mice;

  nlohmann::ordered_json mon;
  mon["decisions"] = m.decisions;
  mon["controller_decisions"] = m.controller_load;
  mon["stats_polls"] = m.stats_polls;
  mon["stats_reads"] = m.stats_reads;
  mon["aggregate_elephant_reads"] = m.aggregate_elephant_reads;
  j["monitoring"] = mon;

  j["bounds_offered"] = bounds_json(m.bounds);
  j["bounds_achieved"] = bounds_json(m.bounds_achieved);
  return j;
}

// Per-scheduler aggregates over seeds.
struct SchedulerSummary {
  std::string name;
  std::size_t runs = 0;
  double bisection_mean = 0.0;
  double loss_mean = 0.0;
  std::optional<double> rtt_deviation_mean;
  double controller_fraction = 0.0;
  double e_max_mean = 0.0;
  UtilizationCdf cdf;  // quantile-averaged across seeds
};

// Averages the i-th smallest link utilization across runs, so the aggregate
// keeps one point per link.
inline UtilizationCdf average_cdf(const std::vector<const RunResult*>& runs) {
  std::vector<double> sum;
  std::size_t count = 0;
  for (const auto* r : runs) {
    const auto& pts = r->report.utilization.points();
    if (pts.empty()) continue;
    if (sum.empty()) sum.assign(pts.size(), 0.0);
    if (pts.size() != sum.size()) throw std::logic_error("average_cdf: runs disagree on link count");
    for (std::size_t i = 0; i < pts.size(); ++i) sum[i] += pts[i].first;
    ++count;
  }
  for (auto& s : sum) s /= static_cast<double>(count);
  return UtilizationCdf(std::move(sum));
}

inline std::vector<SchedulerSummary> summarize(const ResultBundle& b) {
  std::vector<SchedulerSummary> out;
  for (const auto& kind : b.config.resolved_schedulers()) {
    SchedulerSummary s;
    s.name = kind.name();
    std::vector<const RunResult*> runs;
    for (const auto& r : b.runs)
      if (r.scheduler.name() == s.name) runs.push_back(&r);
    std::vector<double> bis, loss, rtt, ctrl, emax;
    for (const auto* r : runs) {
      bis.push_back(r->report.bisection.mean);
      loss.push_back(r->report.mice.loss);
      if (r->report.mice.rtt_mean_deviation) rtt.push_back(*r->report.mice.rtt_mean_deviation);
      ctrl.push_back(r->report.decisions > 0 ? static_cast<double>(r->report.controller_load) /
                                                   static_cast<double>(r->report.decisions)
                                             : 0.0);
      emax.push_back(r->report.bounds.e_max);
    }
    s.runs = runs.size();
    s.bisection_mean = detail::mean_of(bis);
    s.loss_mean = detail::mean_of(loss);
    if (!rtt.empty()) s.rtt_deviation_mean = detail::mean_of(rtt);
    s.controller_fraction = detail::mean_of(ctrl);
    s.e_max_mean = detail::mean_of(emax);
    s.cdf = average_cdf(runs);
    out.push_back(std::move(s));
  }
  return out;
}

inline nlohmann::ordered_json summary_json(const ResultBundle& b) {
  const auto sums = summarize(b);
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["k"] = b.config.k;
  j["link_capacity_bps"] = b.config.link_capacity;
  j["duration_s"] = b.config.duration;
  j["seeds"] = b.config.seeds;
  auto per = nlohmann::ordered_json::object();
  for (const auto& s : sums) {
    nlohmann::ordered_json e;
    e["runs"] = s.runs;
    e["bisection_mean_bps"] = s.bisection_mean;
    e["utilization_p50"] = s.cdf.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s.cdf.value_at(0.5));
    e["utilization_p90"] = s.cdf.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s.cdf.value_at(0.9));
    e["mice_loss_mean"] = s.loss_mean;
    e["rtt_mean_deviation_mean_s"] = detail::optional_json(s.rtt_deviation_mean);
    e["controller_fraction"] = s.controller_fraction;
    e["e_max_mean"] = s.e_max_mean;
    per[s.name] = e;
  }
  j["schedulers"] = per;
  // improvement[a][b]: relative bisection gain of a over b, (a - b) / b.
  auto imp = nlohmann::ordered_json::object();
  for (const auto& a : sums) {
    auto row = nlohmann::ordered_json::object();
    for (const auto& o : sums) {
      if (a.name == o.name) continue;
      row[o.name] = o.bisection_mean > 0.0 ? nlohmann::ordered_json((a.bisection_mean - o.bisection_mean) / o.bisection_mean)
                                           : nlohmann::ordered_json(nullptr);
    }
    imp[a.name] = row;
  }
  j["bisection_improvement"] = imp;
  return j;
}

inline std::string event_log_csv(const std::vector<LogRecord>& log) {
  std::string out = "seq,time_s,event,flow_id,value\n";
  for (const auto& r : log) {
    out += std::to_string(r.seq) + "," + detail::fmt_double(r.time) + "," + to_string(r.type) + "," +
           std::to_string(r.flow) + "," + detail::fmt_double(r.value) + "\n";
  }
  return out;
}

// Plot-ready CSVs: bisection means, aggregate CDF points, and per-run loss
// and RTT deviation. Each file starts with a header row.
inline void emit_plot_data(const ResultBundle& b, const std::filesystem::path& dir) {
  if (b.runs.empty() || b.runs.size() != b.config.schedulers.size() * b.config.seeds.size())
    throw RuntimeFailure("emit_plot_data: incomplete result bundle");
  const auto sums = summarize(b);
  using detail::fmt_double;

  std::string bis = "scheduler,runs,bisection_mean_bps\n";
  for (const auto& s : sums) bis += s.name + "," + std::to_string(s.runs) + "," + fmt_double(s.bisection_mean) + "\n";
  detail::write_atomically(dir / "bisection.csv", bis);

  std::string cdf = "utilization,cumulative_fraction,scheduler,link_set\n";
  for (const auto& s : sums) {
    const bool star = s.name == "nonblocking";
    for (const auto& [u, f] : s.cdf.points())
      cdf += fmt_double(u) + "," + fmt_double(f) + "," + s.name + "," +
             (star ? "access-unidirectional" : "fabric-unidirectional") + "\n";
  }
  detail::write_atomically(dir / "cdf.csv", cdf);

  std::string loss = "scheduler,seed,probes_total,probes_delivered,packet_loss\n";
  std::string rtt = "scheduler,seed,rtt_mean_deviation_s\n";
  for (const auto& r : b.runs) {
    const auto& m = r.report.mice;
    loss += r.scheduler.name() + "," + std::to_string(r.seed) + "," + std::to_string(m.total) + "," +
            std::to_string(m.delivered) + "," + fmt_double(m.loss) + "\n";
    rtt += r.scheduler.name() + "," + std::to_string(r.seed) + "," +
           (m.rtt_mean_deviation ? fmt_double(*m.rtt_mean_deviation) : std::string()) + "\n";
  }
  detail::write_atomically(dir / "loss.csv", loss);
  detail::write_atomically(dir / "rtt.csv", rtt);
}

inline void write_bundle(const ResultBundle& b) {
  namespace fs = std::filesystem;
  const fs::path dir = b.config.output_dir;
  std::error_code ec;
  fs::create_directories(dir / "runs", ec);
  if (ec) throw RuntimeFailure("cannot create output directory '" + dir.string() + "': " + ec.message());
  if (b.config.event_logs) {
    fs::create_directories(dir / "events", ec);
    if (ec) throw RuntimeFailure("cannot create '" + (dir / "events").string() + "': " + ec.message());
  }
  for (const auto& r : b.runs) {
    detail::write_atomically(dir / "runs" / (run_file_stem(r) + ".json"), report_json(r, b.config).dump(2) + "\n");
    if (b.config.event_logs)
      detail::write_atomically(dir / "events" / (run_file_stem(r) + ".csv"), event_log_csv(r.log));
  }
  detail::write_atomically(dir / "summary.json", summary_json(b).dump(2) + "\n");
  emit_plot_data(b, dir);
}

inline ResultBundle run_experiment(const ExperimentConfig& cfg) {
  auto bundle = run_simulations(cfg);
  write_bundle(bundle);
  return bundle;
}

}  // namespace fatsim
