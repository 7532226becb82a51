#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fatsim/rng.hpp"
#include "fatsim/topology.hpp"

namespace fatsim {

using FlowId = std::uint32_t;

enum class FlowKind : std::uint8_t { Elephant, Mice };

inline const char* to_string(FlowKind k) { return k == FlowKind::Elephant ? "elephant" : "mice"; }

// Size of one ICMP echo on the wire (bytes); sets the nominal mice demand.
inline constexpr double kProbeBytes = 84.0;

struct Flow {
  FlowId id = 0;
  NodeId src;
  NodeId dst;
  FlowKind kind = FlowKind::Elephant;
  double demand = 0.0;  // bits/s
  double start = 0.0;   // seconds
  double duration = std::numeric_limits<double>::infinity();
  std::optional<double> probe_interval;  // mice only

  std::optional<Path> path;
  double rate = 0.0;  // achieved, engine-maintained

  double end() const { return start + duration; }

  // Demand seen by the rate allocator and by the loss model. Probes are
  // too small to matter at these link speeds and are treated as zero.
  double sharing_demand() const { return kind == FlowKind::Mice ? 0.0 : demand; }
};

enum class Pattern : std::uint8_t { RandomBisection, RandomPermutation, Stride };

inline const char* to_string(Pattern p) {
  switch (p) {
    case Pattern::RandomBisection: return "bisection";
    case Pattern::RandomPermutation: return "permutation";
    case Pattern::Stride: return "stride";
  }
  return "?";
}

inline std::optional<Pattern> parse_pattern(const std::string& s) {
  if (s == "bisection" || s == "random-bisection") return Pattern::RandomBisection;
  if (s == "permutation" || s == "random-permutation") return Pattern::RandomPermutation;
  if (s == "stride") return Pattern::Stride;
  return std::nullopt;
}

struct WorkloadSpec {
  Pattern pattern = Pattern::RandomBisection;
  int elephant_count = 16;
  std::optional<double> mice_probe_interval = 1.0;  // seconds (ping default); nullopt disables probes
  std::uint64_t seed = 1;
  double mean_arrival_rate = 2.0;  // flows per second
  double elephant_demand = mbps(10);
  double flow_duration = std::numeric_limits<double>::infinity();
  int stride = 0;  // Stride pattern only; 0 selects hosts-per-pod

  void validate() const {
    if (elephant_count < 0) throw std::invalid_argument("workload: elephant_count must be >= 0");
    if (mice_probe_interval && !(*mice_probe_interval > 0.0))
      throw std::invalid_argument("workload: probe_interval must be > 0");
    if (!(mean_arrival_rate > 0.0) || !std::isfinite(mean_arrival_rate))
      throw std::invalid_argument("workload: arrival_rate must be > 0");
    if (!(elephant_demand > 0.0)) throw std::invalid_argument("workload: elephant_demand must be > 0");
    if (!(flow_duration >= 0.0)) throw std::invalid_argument("workload: flow_duration must be >= 0");
  }
};

// Seeded synthetic workload. Elephants arrive as a Poisson process; each one
// is paired with a mice probe stream between the same hosts when probing is
// enabled. The list is ordered by arrival time, ids ascending.
inline std::vector<Flow> generate_workload(const Topology& t, const WorkloadSpec& spec) {
  spec.validate();
  const int hosts = t.host_count();
  if (hosts < 2) throw std::invalid_argument("workload: topology needs at least two hosts");

  Rng rng(derive_seed(spec.seed, RngStream::Workload));
  const std::vector<NodeId> host_ids = t.hosts();
  const int n = spec.elephant_count;

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  switch (spec.pattern) {
    case Pattern::RandomBisection: {
      if (t.pod_count() < 2) throw std::invalid_argument("workload: bisection needs at least two pods");
      std::vector<int> halves[2];
      for (int h = 0; h < hosts; ++h) halves[t.half_of(host_ids[h])].push_back(h);
      for (int j = 0; j < n; ++j) {
        const int src = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(hosts)));
        const auto& other = halves[1 - t.half_of(host_ids[src])];
        const int dst = other[rng.uniform_index(other.size())];
        pairs.emplace_back(src, dst);
      }
      break;
    }
    case Pattern::RandomPermutation: {
      if (n > hosts)
        throw std::invalid_argument("workload: permutation allows at most " + std::to_string(hosts) +
                                    " elephants");
      // Sattolo's shuffle yields a single cycle, so no host maps to itself.
      std::vector<int> target(static_cast<std::size_t>(hosts));
      std::iota(target.begin(), target.end(), 0);
      for (int i = hosts - 1; i > 0; --i)
        std::swap(target[i], target[rng.uniform_index(static_cast<std::uint64_t>(i))]);
      std::vector<int> order(static_cast<std::size_t>(hosts));
      std::iota(order.begin(), order.end(), 0);
      for (int i = hosts - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
      for (int j = 0; j < n; ++j) pairs.emplace_back(order[j], target[order[j]]);
      break;
    }
    case Pattern::Stride: {
      const int stride = spec.stride == 0 ? t.hosts_per_pod() : spec.stride;
      if (stride % hosts == 0) throw std::invalid_argument("workload: stride maps hosts onto themselves");
      for (int j = 0; j < n; ++j) {
        const int src = j % hosts;
        pairs.emplace_back(src, ((src + stride) % hosts + hosts) % hosts);
      }
      break;
    }
  }

  std::vector<Flow> flows;
  flows.reserve(pairs.size() * 2);
  double clock = 0.0;
  FlowId next_id = 0;
  for (const auto& [src, dst] : pairs) {
    clock += rng.exponential(spec.mean_arrival_rate);
    Flow e;
    e.id = next_id++;
    e.src = host_ids[src];
    e.dst = host_ids[dst];
    e.kind = FlowKind::Elephant;
    e.demand = spec.elephant_demand;
    e.start = clock;
    e.duration = spec.flow_duration;
    flows.push_back(e);
    if (spec.mice_probe_interval) {
      Flow m = e;
      m.id = next_id++;
      m.kind = FlowKind::Mice;
      m.demand = kProbeBytes * 8.0 / *spec.mice_probe_interval;
      m.probe_interval = spec.mice_probe_interval;
      flows.push_back(m);
    }
  }
  return flows;
}

// Emission times of a mice flow's probes, start to start+duration inclusive,
// clipped to the horizon.
inline std::vector<double> probe_schedule(const Flow& f, double horizon) {
  if (f.kind != FlowKind::Mice) throw std::invalid_argument("probe_schedule: not a mice flow");
  if (!f.probe_interval || !(*f.probe_interval > 0.0))
    throw std::invalid_argument("probe_schedule: probe interval must be > 0");
  const double interval = *f.probe_interval;
  const double span = std::min(f.duration, horizon - f.start);
  std::vector<double> out;
  if (span < 0.0) return out;
  // The epsilon absorbs representation error, e.g. 5 / 0.2.
  const auto count = static_cast<std::size_t>(std::floor(span / interval + 1e-9)) + 1;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(f.start + static_cast<double>(i) * interval);
  return out;
}

}  // namespace fatsim
