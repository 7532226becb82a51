#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fatsim/engine.hpp"
#include "fatsim/schedulers.hpp"
#include "fatsim/topology.hpp"
#include "fatsim/traffic.hpp"

namespace fatsim {

// Invalid configuration. field() names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  int k = 4;
  double link_capacity = mbps(10);
  std::vector<SchedulerKind> schedulers{SchedulerKind::sp(), SchedulerKind::ecmp()};
  WorkloadSpec workload;
  std::optional<double> elephant_demand;  // defaults to link capacity
  std::vector<std::uint64_t> seeds = default_seeds();
  double duration = 60.0;
  double poll_interval = 1.0;
  double elephant_detect_threshold = kbps(50);
  double alpha = 1.0;
  double hedera_threshold = 0.1;
  RttModel rtt;
  std::string output_dir = "results";
  bool event_logs = false;
  int jobs = 1;

  static std::vector<std::uint64_t> default_seeds() {
    std::vector<std::uint64_t> s;
    for (std::uint64_t i = 1; i <= 20; ++i) s.push_back(i);
    return s;
  }

  // Scheduler kinds with the shared alpha / threshold applied.
  std::vector<SchedulerKind> resolved_schedulers() const {
    auto out = schedulers;
    for (auto& s : out) {
      s.alpha = alpha;
      s.threshold_fraction = hedera_threshold;
    }
    return out;
  }

  WorkloadSpec workload_for(std::uint64_t seed) const {
    WorkloadSpec w = workload;
    w.seed = seed;
    w.elephant_demand = elephant_demand.value_or(link_capacity);
    return w;
  }

  EngineConfig engine_for(std::uint64_t seed) const {
    EngineConfig e;
    e.horizon = duration;
    e.poll_interval = poll_interval;
    e.elephant_threshold = elephant_detect_threshold;
    e.rtt = rtt;
    e.seed = seed;
    return e;
  }

  void validate() const {
    if (k < 2 || k % 2 != 0) throw ConfigError("k", "must be an even integer >= 2");
    if (!(link_capacity > 0.0)) throw ConfigError("capacity", "must be > 0");
    if (schedulers.empty()) throw ConfigError("schedulers", "at least one scheduler is required");
    if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
    if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("duration", "must be > 0");
    if (!(poll_interval > 0.0)) throw ConfigError("poll_interval", "must be > 0");
    if (!(elephant_detect_threshold > 0.0)) throw ConfigError("elephant_detect_threshold", "must be > 0");
    if (!std::isfinite(alpha) || alpha < 0.0) throw ConfigError("alpha", "must be finite and >= 0");
    if (!(hedera_threshold > 0.0 && hedera_threshold <= 1.0))
      throw ConfigError("elephant_threshold", "must be in (0, 1]");
    if (workload.elephant_count < 0) throw ConfigError("elephants", "must be >= 0");
    if (workload.mice_probe_interval && !(*workload.mice_probe_interval > 0.0))
      throw ConfigError("probe_interval", "must be > 0");
    if (!(workload.mean_arrival_rate > 0.0)) throw ConfigError("arrival_rate", "must be > 0");
    if (!(workload.flow_duration >= 0.0)) throw ConfigError("flow_duration", "must be >= 0");
    if (elephant_demand && !(*elephant_demand > 0.0)) throw ConfigError("elephant_demand", "must be > 0");
    if (!(rtt.base_hop_latency > 0.0)) throw ConfigError("base_hop_latency", "must be > 0");
    if (!(rtt.queuing_scale >= 0.0)) throw ConfigError("queuing_scale", "must be >= 0");
    if (!(rtt.rho_cap > 0.0 && rtt.rho_cap < 1.0)) throw ConfigError("rho_cap", "must be in (0, 1)");
    if (output_dir.empty()) throw ConfigError("out", "must not be empty");
    if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_number(const std::string& field, std::string_view text) {
  const std::string t = trim(text);
  if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(field, "expected a number, got '" + t + "'");
  return v;
}

inline std::int64_t parse_integer(const std::string& field, std::string_view text) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(field, "expected an integer, got '" + t + "'");
  return v;
}

inline bool parse_bool(const std::string& field, const std::string& t) {
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(field, "expected true/false, got '" + t + "'");
}

}  // namespace detail

// Bits per second. Accepts a plain number or one with a k/M/G prefix and an
// optional "bps" / "b/s" unit: "10M", "10Mbps", "50kbps", "1e7".
inline double parse_bandwidth(const std::string& field, const std::string& text) {
  std::string t = detail::trim(text);
  for (std::string_view unit : {"bps", "b/s"})
    if (t.size() > unit.size() && t.ends_with(unit)) t.resize(t.size() - unit.size());
  double scale = 1.0;
  if (!t.empty()) {
    switch (t.back()) {
      case 'k': case 'K': scale = 1e3; break;
      case 'M': scale = 1e6; break;
      case 'G': scale = 1e9; break;
      default: break;
    }
    if (scale != 1.0) t.pop_back();
  }
  return detail::parse_number(field, t) * scale;
}

// "1,2,3", "1..20" or a mix: "1..5,9".
inline std::vector<std::uint64_t> parse_seed_list(const std::string& field, const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : detail::split_list(text)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      const auto v = detail::parse_integer(field, item);
      if (v < 0) throw ConfigError(field, "seeds must be non-negative");
      out.push_back(static_cast<std::uint64_t>(v));
      continue;
    }
    const auto lo = detail::parse_integer(field, item.substr(0, dots));
    const auto hi = detail::parse_integer(field, item.substr(dots + 2));
    if (lo < 0 || hi < lo) throw ConfigError(field, "bad seed range '" + item + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

inline SchedulerKind parse_scheduler(const std::string& field, const std::string& text) {
  auto s = SchedulerKind::parse(detail::trim(text));
  if (!s) throw ConfigError(field, "unknown scheduler '" + text + "' (sp, sp-scalarized, ecmp, hedera, nonblocking)");
  return *s;
}

// Applies one key/value setting. Shared by the config file reader and the
// command-line overrides.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_integer;
  using detail::parse_number;
  const std::string v = detail::trim(value);
  if (key == "k") {
    c.k = static_cast<int>(parse_integer(key, v));
  } else if (key == "capacity") {
    c.link_capacity = parse_bandwidth(key, v);
  } else if (key == "schedulers" || key == "scheduler") {
    c.schedulers.clear();
    for (const auto& s : detail::split_list(v)) c.schedulers.push_back(parse_scheduler(key, s));
  } else if (key == "seeds" || key == "seed") {
    c.seeds = parse_seed_list(key, v);
  } else if (key == "duration") {
    c.duration = parse_number(key, v);
  } else if (key == "poll_interval") {
    c.poll_interval = parse_number(key, v);
  } else if (key == "pattern") {
    auto p = parse_pattern(v);
    if (!p) throw ConfigError(key, "unknown pattern '" + v + "' (bisection, permutation, stride)");
    c.workload.pattern = *p;
  } else if (key == "elephants") {
    c.workload.elephant_count = static_cast<int>(parse_integer(key, v));
  } else if (key == "arrival_rate") {
    c.workload.mean_arrival_rate = parse_number(key, v);
  } else if (key == "flow_duration") {
    c.workload.flow_duration = parse_number(key, v);
  } else if (key == "probe_interval") {
    if (v == "none" || v == "off")
      c.workload.mice_probe_interval.reset();
    else
      c.workload.mice_probe_interval = parse_number(key, v);
  } else if (key == "elephant_demand") {
    c.elephant_demand = parse_bandwidth(key, v);
  } else if (key == "stride") {
    c.workload.stride = static_cast<int>(parse_integer(key, v));
  } else if (key == "alpha") {
    c.alpha = parse_number(key, v);
  } else if (key == "elephant_threshold") {
    c.hedera_threshold = parse_number(key, v);
  } else if (key == "elephant_detect_threshold") {
    c.elephant_detect_threshold = parse_bandwidth(key, v);
  } else if (key == "base_hop_latency") {
    c.rtt.base_hop_latency = parse_number(key, v);
  } else if (key == "queuing_scale") {
    c.rtt.queuing_scale = parse_number(key, v);
  } else if (key == "rho_cap") {
    c.rtt.rho_cap = parse_number(key, v);
  } else if (key == "out") {
    c.output_dir = v;
  } else if (key == "event_log") {
    c.event_logs = detail::parse_bool(key, v);
  } else if (key == "jobs") {
    c.jobs = static_cast<int>(parse_integer(key, v));
  } else {
    throw ConfigError(key, "unknown setting");
  }
}

// Config file: one `key = value` per line, '#' starts a comment.
inline void apply_config_text(ExperimentConfig& c, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
    apply_setting(c, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline void apply_config_file(ExperimentConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(c, ss.str());
}

}  // namespace fatsim
