#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fatsim/engine.hpp"
#include "fatsim/topology.hpp"
#include "fatsim/traffic.hpp"

namespace fatsim {

struct TimeSeries {
  std::vector<std::pair<double, double>> points;  // (time, value), value holds until the next point
  double mean = 0.0;                              // time-weighted over [0, end]
  double end = 0.0;
};

// Sum of achieved rates of flows whose endpoints sit in opposite bisection
// halves, replayed from the rate-change records of an event log.
inline TimeSeries bisection_bandwidth(std::span<const LogRecord> log, const Topology& t,
                                      std::span<const Flow> workload) {
  std::map<FlowId, bool> crossing;
  for (const auto& f : workload) crossing[f.id] = t.half_of(f.src) != t.half_of(f.dst);

  TimeSeries ts;
  std::map<FlowId, double> rate;
  double current = 0.0;
  double integral = 0.0;
  double last_time = 0.0;
  bool pending = false;
  ts.points.emplace_back(0.0, 0.0);
  // An epoch closes once every record at its timestamp has been applied.
  auto close_epoch = [&] {
    double sum = 0.0;
    for (const auto& [id, v] : rate)
      if (crossing.at(id)) sum += v;
    current = sum;
    if (ts.points.back().first == last_time)
      ts.points.back().second = sum;
    else if (ts.points.back().second != sum)
      ts.points.emplace_back(last_time, sum);
    pending = false;
  };
  for (const auto& r : log) {
    if (r.time > last_time) {
      if (pending) close_epoch();
      integral += current * (r.time - last_time);
      last_time = r.time;
    }
    if (r.type == EventType::End) break;
    if (r.type != EventType::RateChange) continue;
    if (!crossing.contains(r.flow)) throw std::out_of_range("bisection_bandwidth: log names an unknown flow");
    rate[r.flow] = r.value;
    pending = true;
  }
  if (pending) close_epoch();
  ts.end = last_time;
  ts.mean = last_time > 0.0 ? integral / last_time : current;
  return ts;
}

class UtilizationCdf {
 public:
  UtilizationCdf() = default;
  explicit UtilizationCdf(std::vector<double> utilizations) {
    std::sort(utilizations.begin(), utilizations.end());
    const double n = static_cast<double>(utilizations.size());
    for (std::size_t i = 0; i < utilizations.size(); ++i)
      points_.emplace_back(utilizations[i], static_cast<double>(i + 1) / n);
  }

  // (utilization, cumulative link fraction), ascending in both.
  const std::vector<std::pair<double, double>>& points() const { return points_; }
  bool empty() const { return points_.empty(); }

  // Utilization at cumulative fraction p, interpolating linearly between
  // neighbouring points.
  double value_at(double p) const {
    if (points_.empty()) throw std::logic_error("UtilizationCdf: empty");
    if (p <= points_.front().second) return points_.front().first;
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const auto& [u1, f1] = points_[i];
      if (p <= f1) {
        const auto& [u0, f0] = points_[i - 1];
        return u0 + (u1 - u0) * (p - f0) / (f1 - f0);
      }
    }
    return points_.back().first;
  }

 private:
  std::vector<std::pair<double, double>> points_;
};

// Links counted by the utilization CDF: switch-to-switch links, each
// direction separately. The star has none, so its access links stand in.
inline std::vector<LinkIndex> cdf_links(const Topology& t) {
  auto links = t.fabric_links();
  if (links.empty())
    for (LinkIndex i = 0; i < t.links().size(); ++i) links.push_back(i);
  return links;
}

inline UtilizationCdf utilization_cdf(const Topology& t, std::span<const LinkSample> samples) {
  if (samples.empty()) throw std::invalid_argument("utilization_cdf: no snapshots");
  std::vector<double> util;
  for (LinkIndex l : cdf_links(t)) {
    double sum = 0.0;
    for (const auto& s : samples) sum += s.allocated.at(l) / t.link(l).capacity;
    util.push_back(sum / static_cast<double>(samples.size()));
  }
  return UtilizationCdf(std::move(util));
}

struct ProbeSummary {
  std::size_t total = 0;
  std::size_t delivered = 0;
  double loss = 0.0;
  std::optional<double> rtt_mean_deviation;  // undefined when nothing was delivered
};

inline ProbeSummary mice_loss_and_rtt(std::span<const ProbeResult> probes) {
  if (probes.empty()) throw std::invalid_argument("mice_loss_and_rtt: no probes");
  ProbeSummary s;
  s.total = probes.size();
  std::vector<double> rtts;
  for (const auto& p : probes)
    if (p.delivered) rtts.push_back(*p.rtt);
  s.delivered = rtts.size();
  s.loss = static_cast<double>(s.total - s.delivered) / static_cast<double>(s.total);
  if (!rtts.empty()) {
    const double mean = std::accumulate(rtts.begin(), rtts.end(), 0.0) / static_cast<double>(rtts.size());
    double dev = 0.0;
    for (double r : rtts) dev += std::abs(r - mean);
    s.rtt_mean_deviation = dev / static_cast<double>(rtts.size());
  }
  return s;
}

enum class LoadBasis : std::uint8_t { Offered, Achieved };

// Per-link load averaged over the poll snapshots.
inline std::vector<double> average_link_loads(std::span<const LinkSample> samples, std::size_t link_count,
                                              LoadBasis basis) {
  std::vector<double> avg(link_count, 0.0);
  if (samples.empty()) return avg;
  for (const auto& s : samples) {
    const auto& v = basis == LoadBasis::Offered ? s.offered : s.allocated;
    for (std::size_t l = 0; l < link_count; ++l) avg[l] += v.at(l);
  }
  for (auto& x : avg) x /= static_cast<double>(samples.size());
  return avg;
}

inline std::vector<double> link_loads(std::span<const LinkState> links, LoadBasis basis) {
  std::vector<double> out;
  out.reserve(links.size());
  for (const auto& l : links) out.push_back(basis == LoadBasis::Offered ? l.offered : l.allocated);
  return out;
}

// Per edge switch: total upstream load divided by its k/2 upstream paths.
inline std::vector<double> edge_load_distribution(const Topology& t, std::span<const double> loads) {
  std::vector<double> out;
  if (t.kind() != TopologyKind::FatTree) return out;
  const int half = t.k() / 2;
  for (int e = 0; e < t.k() * half; ++e) {
    double total = 0.0;
    for (int a = 0; a < half; ++a) total += loads[t.edge_agg_link(e, a, Direction::Up)];
    out.push_back(total / half);
  }
  return out;
}

// Per aggregate switch: sum over its pod's edges of (edge->aggregate load) / P.
inline std::vector<double> aggregate_load(const Topology& t, std::span<const double> loads) {
  std::vector<double> out;
  if (t.kind() != TopologyKind::FatTree) return out;
  const int half = t.k() / 2;
  for (int g = 0; g < t.k() * half; ++g) {
    const int pod = g / half;
    const int local = g % half;
    double sum = 0.0;
    for (int e = pod * half; e < (pod + 1) * half; ++e) sum += loads[t.edge_agg_link(e, local, Direction::Up)] / half;
    out.push_back(sum);
  }
  return out;
}

struct ThroughputBounds {
  double t_max = 0.0;
  double t_min = 0.0;
};

// Upper bound: sum of per-edge values. Lower bound: the smallest one.
inline ThroughputBounds throughput_bounds(std::span<const double> per_edge) {
  ThroughputBounds b;
  if (per_edge.empty()) return b;
  b.t_max = std::accumulate(per_edge.begin(), per_edge.end(), 0.0);
  b.t_min = *std::min_element(per_edge.begin(), per_edge.end());
  return b;
}

// Reciprocal-throughput latency proxies. nullopt means unbounded.
struct LatencyProxies {
  std::optional<double> l_max;
  std::optional<double> l_min;
};

inline LatencyProxies latency_proxies(double t_max, double t_min) {
  LatencyProxies p;
  if (t_max > 0.0) p.l_max = 1.0 / t_max;
  if (t_min > 0.0) p.l_min = 1.0 / t_min;
  return p;
}

// Balance of one pod: 1 - sum_j (share_j - 1/P)^2 / P, where share_j is the
// fraction of the pod's edge upstream load entering aggregate j.
inline double pod_balance_efficiency(std::span<const double> aggregate_loads) {
  const double total = std::accumulate(aggregate_loads.begin(), aggregate_loads.end(), 0.0);
  if (aggregate_loads.empty() || !(total > 0.0)) return 1.0;
  const double paths = static_cast<double>(aggregate_loads.size());
  double dev = 0.0;
  for (double a : aggregate_loads) {
    const double d = a / total - 1.0 / paths;
    dev += d * d;
  }
  return std::clamp(1.0 - dev / paths, 0.0, 1.0);
}

// Mean pod efficiency over pods that carry load; an idle network counts as 1.
inline double load_balance_efficiency(const Topology& t, std::span<const double> loads) {
  if (t.kind() != TopologyKind::FatTree) return 1.0;
  const int half = t.k() / 2;
  double sum = 0.0;
  int loaded = 0;
  for (int pod = 0; pod < t.k(); ++pod) {
    std::vector<double> into(static_cast<std::size_t>(half), 0.0);
    for (int e = pod * half; e < (pod + 1) * half; ++e)
      for (int a = 0; a < half; ++a) into[a] += loads[t.edge_agg_link(e, a, Direction::Up)];
    if (std::accumulate(into.begin(), into.end(), 0.0) > 0.0) {
      sum += pod_balance_efficiency(into);
      ++loaded;
    }
  }
  return loaded == 0 ? 1.0 : sum / loaded;
}

struct BoundsReport {
  double t_max = 0.0;
  double t_min = 0.0;
  LatencyProxies latency;
  double e_max = 1.0;
  std::vector<double> per_edge_load;
  std::vector<double> per_agg_load;
};

inline BoundsReport compute_bounds(const Topology& t, std::span<const double> loads) {
  BoundsReport b;
  b.per_edge_load = edge_load_distribution(t, loads);
  b.per_agg_load = aggregate_load(t, loads);
  const auto tb = throughput_bounds(b.per_edge_load);
  b.t_max = tb.t_max;
  b.t_min = tb.t_min;
  b.latency = latency_proxies(b.t_max, b.t_min);
  b.e_max = load_balance_efficiency(t, loads);
  return b;
}

struct MetricsReport {
  std::string scheduler;
  std::uint64_t seed = 0;
  TimeSeries bisection;
  UtilizationCdf utilization;
  ProbeSummary mice;
  std::int64_t controller_load = 0;
  std::int64_t decisions = 0;
  std::uint64_t stats_polls = 0;
  std::uint64_t stats_reads = 0;
  std::uint64_t aggregate_elephant_reads = 0;
  BoundsReport bounds;           // offered load
  BoundsReport bounds_achieved;  // achieved rates
};

inline MetricsReport summarize_run(const Engine& engine, std::span<const Flow> workload) {
  const auto& t = engine.topology();
  MetricsReport r;
  r.scheduler = engine.scheduler().name();
  r.seed = engine.config().seed;
  r.bisection = bisection_bandwidth(engine.log(), t, workload);
  if (!engine.samples().empty()) r.utilization = utilization_cdf(t, engine.samples());
  if (!engine.probe_results().empty()) r.mice = mice_loss_and_rtt(engine.probe_results());
  r.controller_load = engine.controller_decisions();
  r.decisions = static_cast<std::int64_t>(engine.decisions().size());
  r.stats_polls = engine.stats_polls();
  r.stats_reads = engine.stats_reads();
  r.aggregate_elephant_reads = engine.aggregate_elephant_reads();
  const auto n = t.links().size();
  r.bounds = compute_bounds(t, average_link_loads(engine.samples(), n, LoadBasis::Offered));
  r.bounds_achieved = compute_bounds(t, average_link_loads(engine.samples(), n, LoadBasis::Achieved));
  return r;
}

}  // namespace fatsim
