#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fatsim/link_state.hpp"
#include "fatsim/maxmin.hpp"
#include "fatsim/rng.hpp"
#include "fatsim/schedulers.hpp"
#include "fatsim/topology.hpp"
#include "fatsim/traffic.hpp"

namespace fatsim {

struct RttModel {
  double base_hop_latency = 50e-6;  // seconds per link traversal
  double queuing_scale = 500e-6;    // seconds
  double rho_cap = 0.99;

  void validate() const {
    if (!(base_hop_latency > 0.0)) throw std::invalid_argument("rtt: base_hop_latency must be > 0");
    if (!(queuing_scale >= 0.0)) throw std::invalid_argument("rtt: queuing_scale must be >= 0");
    if (!(rho_cap > 0.0 && rho_cap < 1.0)) throw std::invalid_argument("rtt: rho_cap must be in (0, 1)");
  }

  double hop_delay(double rho) const {
    rho = std::max(0.0, rho);
    return base_hop_latency + queuing_scale * rho / (1.0 - std::min(rho, rho_cap));
  }
};

struct EngineConfig {
  double horizon = 60.0;
  double poll_interval = 1.0;
  double elephant_threshold = kbps(50);  // bits/s over one poll interval
  RttModel rtt;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("engine: duration must be > 0");
    if (!(poll_interval > 0.0)) throw std::invalid_argument("engine: poll_interval must be > 0");
    if (!(elephant_threshold > 0.0)) throw std::invalid_argument("engine: elephant threshold must be > 0");
    rtt.validate();
  }
};

enum class EventType : std::uint8_t { FlowArrival, FlowDeparture, ProbeEmission, StatsPoll, End, RateChange };

inline const char* to_string(EventType e) {
  switch (e) {
    case EventType::FlowArrival: return "arrival";
    case EventType::FlowDeparture: return "departure";
    case EventType::ProbeEmission: return "probe";
    case EventType::StatsPoll: return "poll";
    case EventType::End: return "end";
    case EventType::RateChange: return "rate";
  }
  return "?";
}

// One record per processed event, plus a RateChange record for every flow
// whose achieved rate moved during that event.
struct LogRecord {
  std::uint64_t seq = 0;
  double time = 0.0;
  EventType type = EventType::End;
  FlowId flow = 0;
  double value = 0.0;  // rate for RateChange, 1/0 delivered for ProbeEmission
};

struct ProbeResult {
  FlowId flow = 0;
  double emit_time = 0.0;
  bool delivered = false;
  std::optional<double> rtt;  // seconds, set iff delivered
};

struct LinkSample {
  double time = 0.0;
  std::vector<double> allocated;
  std::vector<double> offered;
};

// Per-traversal loss probability under offered load.
inline double link_loss_probability(const LinkState& s) {
  if (s.offered <= s.capacity) return 0.0;
  return std::max(0.0, 1.0 - s.capacity / s.offered);
}

// A probe goes out along `path` and comes back along its reverse. Every
// traversal draws once, so the number of draws per probe is fixed.
inline ProbeResult evaluate_probe(const Topology& t, std::span<const LinkState> links, const Path& path,
                                  double emit_time, const RttModel& model, Rng& rng) {
  ProbeResult r;
  r.emit_time = emit_time;
  bool survived = true;
  double rtt = 0.0;
  auto traverse = [&](LinkIndex l) {
    const auto& s = links[l];
    if (rng.uniform01() < link_loss_probability(s)) survived = false;
    rtt += model.hop_delay(s.allocated / s.capacity);
  };
  for (LinkIndex l : path.hops) traverse(l);
  for (LinkIndex l : t.reverse_hops(path)) traverse(l);
  r.delivered = survived;
  if (survived) r.rtt = rtt;
  return r;
}

// Sticky per-flow classifier: a flow becomes an elephant the first time its
// byte count over one poll interval reaches the threshold rate.
inline bool crosses_elephant_threshold(double bytes_in_interval, double interval, double threshold_bps) {
  return bytes_in_interval * 8.0 / interval >= threshold_bps;
}

class Engine {
 public:
  Engine(const Topology& topology, SchedulerKind kind, EngineConfig config, std::vector<Flow> workload)
      : topo_(&topology),
        config_(config),
        dispatcher_(kind, config.seed),
        probe_rng_(derive_seed(config.seed, RngStream::Probe)) {
    config_.validate();
    links_.resize(topology.links().size());
    for (std::size_t i = 0; i < links_.size(); ++i) links_[i].capacity = topology.links()[i].capacity;
    for (auto& f : workload) {
      if (f.src == f.dst) throw std::invalid_argument("engine: flow with src == dst");
      f.path.reset();
      f.rate = 0.0;
      const FlowId id = f.id;
      if (!pending_.emplace(id, std::move(f)).second)
        throw std::invalid_argument("engine: duplicate flow id " + std::to_string(id));
    }
    for (const auto& [id, f] : pending_)
      if (f.start < config_.horizon) push(f.start, EventType::FlowArrival, id);
    for (int i = 1; i * config_.poll_interval <= config_.horizon + 1e-12; ++i)
      push(i * config_.poll_interval, EventType::StatsPoll, 0);
    push(config_.horizon, EventType::End, 0);
  }

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Processes exactly one event. Returns false once the queue is exhausted.
  bool step() {
    if (queue_.empty()) return false;
    const Event ev = queue_.top();
    queue_.pop();
    if (ev.time < clock_) throw std::logic_error("engine: clock would move backwards");
    advance_to(ev.time);
    log_.push_back({ev.seq, ev.time, ev.type, ev.flow, 0.0});
    switch (ev.type) {
      case EventType::FlowArrival: on_arrival(ev); break;
      case EventType::FlowDeparture: on_departure(ev); break;
      case EventType::ProbeEmission: on_probe(ev); break;
      case EventType::StatsPoll: detect_elephants(); break;
      case EventType::End:
        queue_ = {};
        finished_ = true;
        break;
      case EventType::RateChange: break;
    }
    return true;
  }

  void run() {
    while (step()) {
    }
  }

  // Recomputes max-min rates for all active flows and refreshes link state.
  void allocate_rates() {
    std::vector<RateRequest> reqs;
    std::vector<FlowId> ids;
    reqs.reserve(active_.size());
    flagged_.clear();
    for (const auto& [id, f] : active_) {
      if (!f.path) {
        flagged_.push_back(id);
        continue;
      }
      reqs.push_back({f.sharing_demand(), f.path->hops});
      ids.push_back(id);
    }
    std::vector<double> capacity(links_.size());
    for (std::size_t i = 0; i < links_.size(); ++i) capacity[i] = links_[i].capacity;
    const auto rates = max_min_allocate(capacity, reqs);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto& f = active_.at(ids[i]);
      if (f.rate != rates[i]) log_.push_back({next_seq_++, clock_, EventType::RateChange, f.id, rates[i]});
      f.rate = rates[i];
    }
    refresh_links();
  }

  // Runs the classifier over the interval that just ended, then charges the
  // poll's monitoring cost.
  void detect_elephants() {
    for (auto& [id, f] : active_) {
      auto& acct = accounting_[id];
      const double delta = acct.bytes - acct.bytes_at_last_poll;
      acct.bytes_at_last_poll = acct.bytes;
      if (acct.elephant || !f.path) continue;
      if (crosses_elephant_threshold(delta, config_.poll_interval, config_.elephant_threshold)) {
        acct.elephant = true;
        for (LinkIndex l : f.path->hops) {
          ++links_[l].elephant_count;
          ++links_[l].elephants_detected;
        }
      }
    }
    ++stats_polls_;
    stats_reads_ += topo_->total_switch_ports();
    aggregate_elephant_reads_ += topo_->aggregate_upstream_links().size();
    LinkSample s;
    s.time = clock_;
    s.allocated.reserve(links_.size());
    s.offered.reserve(links_.size());
    for (const auto& l : links_) {
      s.allocated.push_back(l.allocated);
      s.offered.push_back(l.offered);
    }
    samples_.push_back(std::move(s));
  }

  const Topology& topology() const { return *topo_; }
  const EngineConfig& config() const { return config_; }
  Dispatcher& dispatcher() { return dispatcher_; }
  const SchedulerKind& scheduler() const { return dispatcher_.kind(); }
  double clock() const { return clock_; }
  bool finished() const { return finished_; }
  const std::vector<LinkState>& link_states() const { return links_; }
  const std::map<FlowId, Flow>& active_flows() const { return active_; }
  const std::vector<LogRecord>& log() const { return log_; }
  const std::vector<ProbeResult>& probe_results() const { return probes_; }
  const std::vector<SchedulerDecision>& decisions() const { return decisions_; }
  const std::vector<LinkSample>& samples() const { return samples_; }
  const std::vector<FlowId>& flagged_flows() const { return flagged_; }
  std::uint64_t stats_polls() const { return stats_polls_; }
  std::uint64_t stats_reads() const { return stats_reads_; }
  std::uint64_t aggregate_elephant_reads() const { return aggregate_elephant_reads_; }

  bool is_elephant(FlowId id) const {
    auto it = accounting_.find(id);
    return it != accounting_.end() && it->second.elephant;
  }

  std::int64_t controller_decisions() const {
    return std::count_if(decisions_.begin(), decisions_.end(),
                         [](const auto& d) { return d.mechanism == Mechanism::Controller; });
  }

 private:
  struct Event {
    double time;
    std::uint64_t seq;
    EventType type;
    FlowId flow;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      // End closes the window after everything else at the horizon.
      const bool a_end = a.type == EventType::End, b_end = b.type == EventType::End;
      if (a_end != b_end) return a_end;
      return a.seq > b.seq;
    }
  };
  struct Accounting {
    double bytes = 0.0;
    double bytes_at_last_poll = 0.0;
    bool elephant = false;
  };

  void push(double time, EventType type, FlowId flow) { queue_.push({time, next_seq_++, type, flow}); }

  void advance_to(double t) {
    const double dt = t - clock_;
    if (dt > 0.0) {
      for (const auto& [id, f] : active_) accounting_[id].bytes += f.rate * dt / 8.0;
      for (auto& l : links_) l.cumulative_bytes += l.allocated * dt / 8.0;
    }
    clock_ = t;
  }

  Flow& pending(FlowId id) {
    auto it = pending_.find(id);
    if (it == pending_.end()) throw std::out_of_range("engine: unknown flow id " + std::to_string(id));
    return it->second;
  }

  Flow& active(FlowId id) {
    auto it = active_.find(id);
    if (it == active_.end()) throw std::out_of_range("engine: unknown flow id " + std::to_string(id));
    return it->second;
  }

  void on_arrival(const Event& ev) {
    Flow f = std::move(pending(ev.flow));
    pending_.erase(ev.flow);
    auto decision = dispatcher_.dispatch(*topo_, links_, f);
    f.path = decision.chosen;
    decisions_.push_back(std::move(decision));
    if (f.kind == FlowKind::Mice && f.probe_interval)
      for (double t : probe_schedule(f, config_.horizon)) push(t, EventType::ProbeEmission, f.id);
    // Pushed after the probes so a probe at exactly end() still sees the flow.
    if (f.end() < config_.horizon) push(f.end(), EventType::FlowDeparture, f.id);
    accounting_[f.id];
    active_.emplace(f.id, std::move(f));
    allocate_rates();
  }

  void on_departure(const Event& ev) {
    Flow& f = active(ev.flow);
    if (f.rate != 0.0) log_.push_back({next_seq_++, clock_, EventType::RateChange, f.id, 0.0});
    active_.erase(ev.flow);
    accounting_.erase(ev.flow);
    allocate_rates();
  }

  void on_probe(const Event& ev) {
    const Flow& f = active(ev.flow);
    ProbeResult r = evaluate_probe(*topo_, links_, *f.path, ev.time, config_.rtt, probe_rng_);
    r.flow = f.id;
    log_.back().value = r.delivered ? 1.0 : 0.0;
    probes_.push_back(r);
  }

  // Link aggregates are rebuilt from the active set in flow-id order, the
  // same order the allocator sums in.
  void refresh_links() {
    for (auto& l : links_) {
      l.allocated = 0.0;
      l.offered = 0.0;
      l.flow_count = 0;
      l.elephant_count = 0;
    }
    for (const auto& [id, f] : active_) {
      if (!f.path) continue;
      const bool eleph = accounting_.at(id).elephant;
      for (LinkIndex l : f.path->hops) {
        auto& s = links_[l];
        s.allocated += f.rate;
        s.offered += f.sharing_demand();
        ++s.flow_count;
        if (eleph) ++s.elephant_count;
      }
    }
  }

  const Topology* topo_;
  EngineConfig config_;
  Dispatcher dispatcher_;
  Rng probe_rng_;

  double clock_ = 0.0;
  bool finished_ = false;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;

  std::map<FlowId, Flow> pending_;
  std::map<FlowId, Flow> active_;
  std::map<FlowId, Accounting> accounting_;
  std::vector<LinkState> links_;
  std::vector<FlowId> flagged_;

  std::vector<LogRecord> log_;
  std::vector<ProbeResult> probes_;
  std::vector<SchedulerDecision> decisions_;
  std::vector<LinkSample> samples_;
  std::uint64_t stats_polls_ = 0;
  std::uint64_t stats_reads_ = 0;
  std::uint64_t aggregate_elephant_reads_ = 0;
};

}  // namespace fatsim
