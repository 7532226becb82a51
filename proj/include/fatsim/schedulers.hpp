#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fatsim/link_state.hpp"
#include "fatsim/rng.hpp"
#include "fatsim/topology.hpp"
#include "fatsim/traffic.hpp"

namespace fatsim {

struct SchedulerKind {
  enum class Variant : std::uint8_t { SpLexicographic, SpScalarized, Ecmp, HederaGreedy, NonBlocking };

  Variant variant = Variant::SpLexicographic;
  double alpha = 1.0;               // Mb/s of residual traded per aggregate-uplink elephant
  double threshold_fraction = 0.1;  // Hedera elephant threshold, fraction of link capacity

  static SchedulerKind sp() { return {Variant::SpLexicographic}; }
  static SchedulerKind sp_scalarized(double alpha) { return {Variant::SpScalarized, alpha}; }
  static SchedulerKind ecmp() { return {Variant::Ecmp}; }
  static SchedulerKind hedera(double threshold = 0.1) { return {Variant::HederaGreedy, 1.0, threshold}; }
  static SchedulerKind non_blocking() { return {Variant::NonBlocking}; }

  bool is_sp() const { return variant == Variant::SpLexicographic || variant == Variant::SpScalarized; }

  void validate() const {
    if (!std::isfinite(alpha) || alpha < 0.0) throw std::invalid_argument("scheduler: alpha must be finite and >= 0");
    if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0))
      throw std::invalid_argument("scheduler: elephant threshold must be in (0, 1]");
  }

  std::string name() const {
    switch (variant) {
      case Variant::SpLexicographic: return "sp";
      case Variant::SpScalarized: return "sp-scalarized";
      case Variant::Ecmp: return "ecmp";
      case Variant::HederaGreedy: return "hedera";
      case Variant::NonBlocking: return "nonblocking";
    }
    return "?";
  }

  static std::optional<SchedulerKind> parse(const std::string& s) {
    if (s == "sp" || s == "sp-lex") return sp();
    if (s == "sp-scalarized") return sp_scalarized(1.0);
    if (s == "ecmp") return ecmp();
    if (s == "hedera") return hedera();
    if (s == "nonblocking" || s == "non-blocking") return non_blocking();
    return std::nullopt;
  }
};

enum class Mechanism : std::uint8_t { ProactiveEcmp, Controller };

inline const char* to_string(Mechanism m) { return m == Mechanism::Controller ? "controller" : "ecmp"; }

struct SchedulerDecision {
  FlowId flow = 0;
  Path chosen;
  Mechanism mechanism = Mechanism::ProactiveEcmp;
  int candidates_considered = 0;
};

// What the controller sees of one candidate path.
struct PathView {
  Path path;
  double min_residual = 0.0;       // bits/s
  int agg_upstream_elephants = 0;  // on the aggregate->core upstream hop, 0 for intra-pod paths
  int hop_count = 0;
};

// Candidate paths of one host pair differ only in their switch-to-switch
// hops, so residual bandwidth is read there. A path with no such hop (both
// hosts on one edge switch) falls back to its access links.
inline double path_min_residual(const Topology& t, std::span<const LinkState> links, const Path& p) {
  double fabric = std::numeric_limits<double>::infinity();
  double all = std::numeric_limits<double>::infinity();
  for (LinkIndex l : p.hops) {
    const double r = std::max(0.0, links[l].residual());
    all = std::min(all, r);
    if (t.link(l).is_fabric()) fabric = std::min(fabric, r);
  }
  return std::isfinite(fabric) ? fabric : all;
}

inline std::vector<PathView> make_path_views(const Topology& t, std::span<const LinkState> links,
                                             const std::vector<Path>& candidates) {
  std::vector<PathView> views;
  views.reserve(candidates.size());
  for (const auto& p : candidates) {
    PathView v{p, path_min_residual(t, links, p), 0, static_cast<int>(p.hop_count())};
    if (auto up = t.aggregate_upstream_of(p)) v.agg_upstream_elephants = links[*up].elephant_count;
    views.push_back(std::move(v));
  }
  return views;
}

// ECMP hash: FNV-1a over (src host, dst host, flow id) as little-endian
// 32-bit words, finished with the MurmurHash3 64-bit mixer so the low bits
// used by the modulo are well spread. Seed-independent.
inline std::uint64_t ecmp_hash(std::uint32_t src, std::uint32_t dst, std::uint32_t flow) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint32_t word : {src, dst, flow})
    for (int b = 0; b < 4; ++b) {
      h ^= (word >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

inline const Path& select_ecmp(const Flow& f, const std::vector<Path>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_ecmp: no candidate paths");
  const auto h = ecmp_hash(static_cast<std::uint32_t>(f.src.index), static_cast<std::uint32_t>(f.dst.index), f.id);
  return candidates[h % candidates.size()];
}

namespace detail {
inline const PathView& first_in_path_order(const std::vector<const PathView*>& views) {
  return **std::min_element(views.begin(), views.end(),
                            [](const PathView* a, const PathView* b) { return path_order_less(a->path, b->path); });
}
}  // namespace detail

// Lexicographic SP selection: shortest paths, then fewest elephants on the
// aggregate uplink, then most residual bandwidth, then canonical path order.
inline const Path& select_sp_lex(const std::vector<PathView>& views) {
  if (views.empty()) throw std::invalid_argument("select_sp_lex: no candidate paths");
  std::vector<const PathView*> keep;
  for (const auto& v : views) keep.push_back(&v);

  const int min_hops = (*std::min_element(keep.begin(), keep.end(), [](auto a, auto b) {
                         return a->hop_count < b->hop_count;
                       }))->hop_count;
  std::erase_if(keep, [&](const PathView* v) { return v->hop_count != min_hops; });

  const int min_eleph = (*std::min_element(keep.begin(), keep.end(), [](auto a, auto b) {
                          return a->agg_upstream_elephants < b->agg_upstream_elephants;
                        }))->agg_upstream_elephants;
  std::erase_if(keep, [&](const PathView* v) { return v->agg_upstream_elephants != min_eleph; });

  const double max_res = (*std::max_element(keep.begin(), keep.end(), [](auto a, auto b) {
                           return a->min_residual < b->min_residual;
                         }))->min_residual;
  std::erase_if(keep, [&](const PathView* v) { return v->min_residual != max_res; });

  return detail::first_in_path_order(keep).path;
}

// argmax of (residual in Mb/s) - alpha * (aggregate-uplink elephants).
inline const Path& select_sp_scalarized(const std::vector<PathView>& views, double alpha) {
  if (views.empty()) throw std::invalid_argument("select_sp_scalarized: no candidate paths");
  if (!std::isfinite(alpha) || alpha < 0.0) throw std::invalid_argument("select_sp_scalarized: bad alpha");
  auto score = [alpha](const PathView& v) { return v.min_residual / 1e6 - alpha * v.agg_upstream_elephants; };
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& v : views) best = std::max(best, score(v));
  std::vector<const PathView*> keep;
  for (const auto& v : views)
    if (score(v) == best) keep.push_back(&v);
  return detail::first_in_path_order(keep).path;
}

// Hedera-style global first fit on the flow's declared demand. Flows below
// the elephant threshold stay on ECMP.
inline const Path& select_hedera_greedy(const Topology& t, std::span<const LinkState> links, const Flow& f,
                                        const std::vector<Path>& candidates, double threshold_fraction) {
  if (candidates.empty()) throw std::invalid_argument("select_hedera_greedy: no candidate paths");
  if (f.demand < threshold_fraction * t.link_capacity()) return select_ecmp(f, candidates);
  std::vector<const Path*> ordered;
  for (const auto& p : candidates) ordered.push_back(&p);
  std::stable_sort(ordered.begin(), ordered.end(), [](auto a, auto b) { return path_order_less(*a, *b); });
  for (const Path* p : ordered)
    if (path_min_residual(t, links, *p) >= f.demand) return *p;
  const Path* best = ordered.front();
  double best_res = path_min_residual(t, links, *best);
  for (const Path* p : ordered) {
    const double r = path_min_residual(t, links, *p);
    if (r > best_res) {
      best = p;
      best_res = r;
    }
  }
  return *best;
}

inline Path select_non_blocking(const Topology& t, const Flow& f) {
  if (t.kind() != TopologyKind::NonBlockingStar)
    throw std::invalid_argument("select_non_blocking: requires the non-blocking star topology");
  return t.equal_cost_paths(f.src, f.dst).front();
}

// Routes each new flow. SP flows are split by a fair coin between the
// proactive ECMP entries and the controller; other kinds call their selector.
class Dispatcher {
 public:
  Dispatcher(SchedulerKind kind, std::uint64_t seed) : kind_(kind), rng_(derive_seed(seed, RngStream::Dispatch)) {
    kind_.validate();
  }

  const SchedulerKind& kind() const { return kind_; }

  // Test hook: pin the SP coin to one side.
  void force_mechanism(std::optional<Mechanism> m) { forced_ = m; }

  SchedulerDecision dispatch(const Topology& t, std::span<const LinkState> links, const Flow& f) {
    if (f.path) throw std::logic_error("dispatch: flow " + std::to_string(f.id) + " already has a path");
    SchedulerDecision d;
    d.flow = f.id;
    if (kind_.variant == SchedulerKind::Variant::NonBlocking) {
      d.chosen = select_non_blocking(t, f);
      d.candidates_considered = 1;
      return d;
    }
    const auto candidates = t.equal_cost_paths(f.src, f.dst);
    d.candidates_considered = static_cast<int>(candidates.size());
    switch (kind_.variant) {
      case SchedulerKind::Variant::Ecmp:
        d.chosen = select_ecmp(f, candidates);
        break;
      case SchedulerKind::Variant::HederaGreedy:
        d.chosen = select_hedera_greedy(t, links, f, candidates, kind_.threshold_fraction);
        d.mechanism = f.demand < kind_.threshold_fraction * t.link_capacity() ? Mechanism::ProactiveEcmp
                                                                              : Mechanism::Controller;
        break;
      case SchedulerKind::Variant::SpLexicographic:
      case SchedulerKind::Variant::SpScalarized: {
        const Mechanism m = forced_ ? *forced_ : (rng_.coin() ? Mechanism::Controller : Mechanism::ProactiveEcmp);
        d.mechanism = m;
        if (m == Mechanism::ProactiveEcmp) {
          d.chosen = select_ecmp(f, candidates);
        } else {
          const auto views = make_path_views(t, links, candidates);
          d.chosen = kind_.variant == SchedulerKind::Variant::SpLexicographic ? select_sp_lex(views)
                                                                              : select_sp_scalarized(views, kind_.alpha);
        }
        break;
      }
      case SchedulerKind::Variant::NonBlocking:
        break;
    }
    return d;
  }

 private:
  SchedulerKind kind_;
  Rng rng_;
  std::optional<Mechanism> forced_;
};

}  // namespace fatsim
