#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace fatsim {

// Bandwidth is carried as bits per second throughout.
constexpr double mbps(double v) { return v * 1e6; }
constexpr double kbps(double v) { return v * 1e3; }

enum class Tier : std::uint8_t { Host, Edge, Aggregate, Core, Crossbar };

inline const char* to_string(Tier t) {
  switch (t) {
    case Tier::Host: return "host";
    case Tier::Edge: return "edge";
    case Tier::Aggregate: return "aggregate";
    case Tier::Core: return "core";
    case Tier::Crossbar: return "crossbar";
  }
  return "?";
}

// Identity of a node. Hosts keep their pod in both the fat-tree and the
// non-blocking star so that bisection halves mean the same thing in both.
struct NodeId {
  Tier tier = Tier::Host;
  std::optional<int> pod;
  int index = 0;  // global index within the tier

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

using NodeIndex = std::uint32_t;
using LinkIndex = std::uint32_t;

enum class LinkKind : std::uint8_t { HostEdge, EdgeAgg, AggCore };
enum class Direction : std::uint8_t { Up, Down };

struct Link {
  NodeId src;
  NodeId dst;
  NodeIndex src_node = 0;
  NodeIndex dst_node = 0;
  double capacity = 0.0;
  LinkKind kind = LinkKind::HostEdge;
  Direction direction = Direction::Up;
  LinkIndex reverse = 0;  // the opposite-direction twin

  bool is_fabric() const { return kind != LinkKind::HostEdge; }
  bool is_aggregate_upstream() const {
    return kind == LinkKind::AggCore && direction == Direction::Up;
  }
};

struct Path {
  std::vector<LinkIndex> hops;
  std::optional<int> aggregate;  // aggregate index within the pod, if the path climbs to one
  std::optional<int> core;       // global core index, inter-pod paths only

  // Canonical order used for every tie-break: (aggregate, core).
  auto order_key() const { return std::tie(aggregate, core); }
  std::size_t hop_count() const { return hops.size(); }

  friend bool operator==(const Path& a, const Path& b) { return a.hops == b.hops; }
};

inline bool path_order_less(const Path& a, const Path& b) { return a.order_key() < b.order_key(); }

enum class TopologyKind : std::uint8_t { FatTree, NonBlockingStar };

class Topology {
 public:
  static Topology build_fat_tree(int k, double link_capacity) {
    validate(k, link_capacity);
    Topology t(TopologyKind::FatTree, k, link_capacity);
    const int half = k / 2;
    const int hosts = k * k * k / 4;
    const int edges = k * half;
    const int aggs = k * half;
    const int cores = half * half;

    for (int h = 0; h < hosts; ++h) t.add_node({Tier::Host, h / (half * half), h});
    for (int e = 0; e < edges; ++e) t.add_node({Tier::Edge, e / half, e});
    for (int a = 0; a < aggs; ++a) t.add_node({Tier::Aggregate, a / half, a});
    for (int c = 0; c < cores; ++c) t.add_node({Tier::Core, std::nullopt, c});

    t.host_base_ = 0;
    t.edge_base_ = static_cast<NodeIndex>(hosts);
    t.agg_base_ = t.edge_base_ + static_cast<NodeIndex>(edges);
    t.core_base_ = t.agg_base_ + static_cast<NodeIndex>(aggs);

    for (int h = 0; h < hosts; ++h)
      t.add_pair(t.host_base_ + h, t.edge_base_ + h / half, LinkKind::HostEdge);
    for (int e = 0; e < edges; ++e) {
      const int pod = e / half;
      for (int a = 0; a < half; ++a)
        t.add_pair(t.edge_base_ + e, t.agg_base_ + pod * half + a, LinkKind::EdgeAgg);
    }
    t.agg_core_base_ = static_cast<LinkIndex>(t.links_.size());
    for (int g = 0; g < aggs; ++g) {
      const int local = g % half;
      for (int c = 0; c < half; ++c)
        t.add_pair(t.agg_base_ + g, t.core_base_ + local * half + c, LinkKind::AggCore);
    }
    t.edge_agg_base_ = static_cast<LinkIndex>(2 * hosts);
    return t;
  }

  // Ideal baseline: every host of the k-ary fat-tree attached to one switch.
  static Topology build_non_blocking(int k, double link_capacity) {
    validate(k, link_capacity);
    Topology t(TopologyKind::NonBlockingStar, k, link_capacity);
    const int half = k / 2;
    const int hosts = k * k * k / 4;
    for (int h = 0; h < hosts; ++h) t.add_node({Tier::Host, h / (half * half), h});
    t.host_base_ = 0;
    t.edge_base_ = t.agg_base_ = t.core_base_ = static_cast<NodeIndex>(hosts);
    t.add_node({Tier::Crossbar, std::nullopt, 0});
    for (int h = 0; h < hosts; ++h) t.add_pair(h, t.core_base_, LinkKind::HostEdge);
    t.edge_agg_base_ = t.agg_core_base_ = static_cast<LinkIndex>(t.links_.size());
    return t;
  }

  TopologyKind kind() const { return kind_; }
  int k() const { return k_; }
  double link_capacity() const { return capacity_; }
  const std::vector<NodeId>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(LinkIndex i) const { return links_.at(i); }
  const NodeId& node(NodeIndex i) const { return nodes_.at(i); }

  int host_count() const { return k_ * k_ * k_ / 4; }
  int switch_count() const { return static_cast<int>(nodes_.size()) - host_count(); }
  int pod_count() const { return k_; }
  int hosts_per_pod() const { return k_ * k_ / 4; }

  std::vector<NodeId> hosts() const {
    return {nodes_.begin(), nodes_.begin() + host_count()};
  }
  std::vector<NodeId> switches() const {
    return {nodes_.begin() + host_count(), nodes_.end()};
  }

  // Bisection halves: pods [0, k/2) versus [k/2, k).
  int half_of(const NodeId& host) const { return host.pod.value_or(0) < k_ / 2 ? 0 : 1; }

  // Number of switch ports, i.e. outgoing links of all switches.
  std::size_t total_switch_ports() const {
    std::size_t ports = 0;
    for (const auto& l : links_)
      if (l.src.tier != Tier::Host) ++ports;
    return ports;
  }

  std::vector<LinkIndex> aggregate_upstream_links() const {
    std::vector<LinkIndex> out;
    for (LinkIndex i = 0; i < links_.size(); ++i)
      if (links_[i].is_aggregate_upstream()) out.push_back(i);
    return out;
  }

  std::vector<LinkIndex> fabric_links() const {
    std::vector<LinkIndex> out;
    for (LinkIndex i = 0; i < links_.size(); ++i)
      if (links_[i].is_fabric()) out.push_back(i);
    return out;
  }

  // Host access links: host -> first switch (up) and first switch -> host (down).
  LinkIndex host_uplink(int host) const { return static_cast<LinkIndex>(2 * host); }
  LinkIndex host_downlink(int host) const { return static_cast<LinkIndex>(2 * host + 1); }

  // edge -> aggregate (up) for edge `edge` (global) and aggregate `agg` (index within pod)
  LinkIndex edge_agg_link(int edge, int agg, Direction d) const {
    return edge_agg_base_ + static_cast<LinkIndex>(2 * (edge * (k_ / 2) + agg)) +
           (d == Direction::Down ? 1 : 0);
  }
  // aggregate -> core (up) for aggregate `agg` (global) and core `c` within its group
  LinkIndex agg_core_link(int agg, int c, Direction d) const {
    return agg_core_base_ + static_cast<LinkIndex>(2 * (agg * (k_ / 2) + c)) +
           (d == Direction::Down ? 1 : 0);
  }

  // The aggregate-to-core upstream link a path climbs through, if any.
  std::optional<LinkIndex> aggregate_upstream_of(const Path& p) const {
    for (LinkIndex l : p.hops)
      if (links_[l].is_aggregate_upstream()) return l;
    return std::nullopt;
  }

  NodeIndex index_of(const NodeId& id) const {
    NodeIndex base = 0;
    int count = 0;
    switch (id.tier) {
      case Tier::Host: base = host_base_; count = host_count(); break;
      case Tier::Edge: base = edge_base_; count = kind_ == TopologyKind::FatTree ? k_ * k_ / 2 : 0; break;
      case Tier::Aggregate: base = agg_base_; count = kind_ == TopologyKind::FatTree ? k_ * k_ / 2 : 0; break;
      case Tier::Core: base = core_base_; count = kind_ == TopologyKind::FatTree ? k_ * k_ / 4 : 0; break;
      case Tier::Crossbar: base = core_base_; count = kind_ == TopologyKind::NonBlockingStar ? 1 : 0; break;
    }
    if (id.index < 0 || id.index >= count || nodes_[base + id.index] != id)
      throw std::out_of_range("unknown node id");
    return base + static_cast<NodeIndex>(id.index);
  }

  // All shortest paths between two hosts, ordered by (aggregate, core).
  std::vector<Path> equal_cost_paths(const NodeId& src, const NodeId& dst) const {
    if (src.tier != Tier::Host || dst.tier != Tier::Host)
      throw std::invalid_argument("equal_cost_paths: endpoints must be hosts");
    index_of(src);
    index_of(dst);
    if (src == dst) throw std::invalid_argument("equal_cost_paths: src == dst");

    const int s = src.index;
    const int d = dst.index;
    std::vector<Path> out;
    if (kind_ == TopologyKind::NonBlockingStar) {
      out.push_back({{host_uplink(s), host_downlink(d)}, std::nullopt, std::nullopt});
      return out;
    }
    const int half = k_ / 2;
    const int se = s / half;
    const int de = d / half;
    const int sp = *src.pod;
    const int dp = *dst.pod;
    if (se == de) {
      out.push_back({{host_uplink(s), host_downlink(d)}, std::nullopt, std::nullopt});
    } else if (sp == dp) {
      for (int a = 0; a < half; ++a)
        out.push_back({{host_uplink(s), edge_agg_link(se, a, Direction::Up),
                        edge_agg_link(de, a, Direction::Down), host_downlink(d)},
                       a,
                       std::nullopt});
    } else {
      for (int a = 0; a < half; ++a)
        for (int c = 0; c < half; ++c)
          out.push_back({{host_uplink(s), edge_agg_link(se, a, Direction::Up),
                          agg_core_link(sp * half + a, c, Direction::Up),
                          agg_core_link(dp * half + a, c, Direction::Down),
                          edge_agg_link(de, a, Direction::Down), host_downlink(d)},
                         a,
                         a * half + c});
    }
    return out;
  }

  // Links a path traverses on the way back, in traversal order.
  std::vector<LinkIndex> reverse_hops(const Path& p) const {
    std::vector<LinkIndex> out;
    out.reserve(p.hops.size());
    for (auto it = p.hops.rbegin(); it != p.hops.rend(); ++it) out.push_back(links_[*it].reverse);
    return out;
  }

 private:
  Topology(TopologyKind kind, int k, double capacity) : kind_(kind), k_(k), capacity_(capacity) {}

  static void validate(int k, double capacity) {
    if (k < 2 || k % 2 != 0)
      throw std::invalid_argument("fat-tree arity k must be even and >= 2, got " + std::to_string(k));
    if (!(capacity > 0.0)) throw std::invalid_argument("link capacity must be positive");
  }

  void add_node(NodeId id) { nodes_.push_back(id); }

  void add_pair(NodeIndex lower, NodeIndex upper, LinkKind kind) {
    const auto up = static_cast<LinkIndex>(links_.size());
    links_.push_back({nodes_[lower], nodes_[upper], lower, upper, capacity_, kind, Direction::Up, up + 1});
    links_.push_back({nodes_[upper], nodes_[lower], upper, lower, capacity_, kind, Direction::Down, up});
  }

  TopologyKind kind_;
  int k_;
  double capacity_;
  std::vector<NodeId> nodes_;
  std::vector<Link> links_;
  NodeIndex host_base_ = 0, edge_base_ = 0, agg_base_ = 0, core_base_ = 0;
  LinkIndex edge_agg_base_ = 0, agg_core_base_ = 0;
};

}  // namespace fatsim
