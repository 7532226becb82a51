#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fatsim/config.hpp"
#include "fatsim/experiment.hpp"
#include "fatsim/metrics.hpp"
#include "oracles.hpp"

using namespace fatsim;

namespace {

Flow elephant(FlowId id, const NodeId& s, const NodeId& d, double start = 0.0) {
  Flow f;
  f.id = id;
  f.src = s;
  f.dst = d;
  f.demand = mbps(10);
  f.start = start;
  return f;
}

EngineConfig config(double horizon) {
  EngineConfig c;
  c.horizon = horizon;
  return c;
}

std::vector<double> zeros(const Topology& t) { return std::vector<double>(t.links().size(), 0.0); }

void add_path(std::vector<double>& loads, const Path& p, double rate) {
  for (LinkIndex l : p.hops) loads[l] += rate;
}

// Every host spreads one unit over all of its inter-pod paths to the host
// at the same position in the next pod.
std::vector<double> uniform_loads(const Topology& t, double per_host) {
  auto loads = zeros(t);
  const auto hosts = t.hosts();
  const int n = t.host_count();
  for (int h = 0; h < n; ++h) {
    const auto paths = t.equal_cost_paths(hosts[h], hosts[(h + t.hosts_per_pod()) % n]);
    for (const auto& p : paths) add_path(loads, p, per_host / static_cast<double>(paths.size()));
  }
  return loads;
}

}  // namespace

TEST(EdgeLoad, IdleNetworkIsZero) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const auto e = edge_load_distribution(t, zeros(t));
  ASSERT_EQ(e.size(), 8u);
  for (double v : e) EXPECT_EQ(v, 0.0);
}

TEST(EdgeLoad, SingleFlowSplitsOverTwoUplinks) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  auto loads = zeros(t);
  add_path(loads, t.equal_cost_paths(t.hosts()[0], t.hosts()[12])[1], mbps(10));
  const auto e = edge_load_distribution(t, loads);
  EXPECT_EQ(e[0], mbps(5));
  for (std::size_t i = 1; i < e.size(); ++i) EXPECT_EQ(e[i], 0.0);
}

TEST(EdgeLoad, UniformLoadIsSymmetric) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const auto e = edge_load_distribution(t, uniform_loads(t, mbps(4)));
  // Two hosts per edge, 4 Mb/s each, over two uplinks.
  for (double v : e) EXPECT_NEAR(v, mbps(4), 1e-6);
}

TEST(AggregateLoad, IdleAndSingleFlow) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  for (double v : aggregate_load(t, zeros(t))) EXPECT_EQ(v, 0.0);

  Engine e(t, SchedulerKind::ecmp(), config(2.0), {elephant(0, t.hosts()[0], t.hosts()[12])});
  e.run();
  const auto& path = *e.active_flows().at(0).path;
  const auto agg = aggregate_load(t, link_loads(e.link_states(), LoadBasis::Achieved));
  for (int g = 0; g < static_cast<int>(agg.size()); ++g) {
    // The path climbs through aggregate `path.aggregate` of pod 0.
    if (g == *path.aggregate)
      EXPECT_EQ(agg[g], mbps(10) / 2);
    else
      EXPECT_EQ(agg[g], 0.0);
  }
  // Cross-check against the edge->aggregate link allocation.
  EXPECT_EQ(e.link_states()[t.edge_agg_link(0, *path.aggregate, Direction::Up)].allocated, mbps(10));
}

TEST(AggregateLoad, UniformWorkloadBalancesEveryAggregate) {
  for (int k : {4, 6}) {
    const auto t = Topology::build_fat_tree(k, mbps(10));
    const auto loads = uniform_loads(t, mbps(3));
    const auto agg = aggregate_load(t, loads);
    for (double v : agg) EXPECT_NEAR(v, agg.front(), 1e-9 * agg.front());
    EXPECT_NEAR(load_balance_efficiency(t, loads), 1.0, 1e-9);
  }
}

TEST(Bisection, NoCrossingFlowsIsZero) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const std::vector<Flow> w{elephant(0, t.hosts()[0], t.hosts()[5]), elephant(1, t.hosts()[9], t.hosts()[14])};
  Engine e(t, SchedulerKind::ecmp(), config(5.0), w);
  e.run();
  const auto ts = bisection_bandwidth(e.log(), t, w);
  for (const auto& [time, v] : ts.points) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(ts.mean, 0.0);
}

TEST(Bisection, EightUncontendedFlowsGiveEightyMbps) {
  const auto star = Topology::build_non_blocking(4, mbps(10));
  std::vector<Flow> w;
  for (int i = 0; i < 8; ++i) w.push_back(elephant(static_cast<FlowId>(i), star.hosts()[i], star.hosts()[8 + i]));
  Engine e(star, SchedulerKind::non_blocking(), config(10.0), w);
  e.run();
  const auto ts = bisection_bandwidth(e.log(), star, w);
  EXPECT_EQ(ts.points.back().second, mbps(80));
  EXPECT_DOUBLE_EQ(ts.mean, mbps(80));
}

TEST(Bisection, TimeWeightedMean) {
  const auto star = Topology::build_non_blocking(4, mbps(10));
  const std::vector<Flow> w{elephant(0, star.hosts()[0], star.hosts()[8], 2.0)};
  Engine e(star, SchedulerKind::non_blocking(), config(10.0), w);
  e.run();
  EXPECT_DOUBLE_EQ(bisection_bandwidth(e.log(), star, w).mean, mbps(10) * 0.8);
}

TEST(Bisection, ContendedMatchesExactAllocation) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const auto hosts = t.hosts();
  std::vector<Flow> w;
  for (int i = 0; i < 12; ++i)
    w.push_back(elephant(static_cast<FlowId>(i), hosts[i % 8], hosts[8 + (i * 3) % 8]));
  w.push_back(elephant(12, hosts[0], hosts[3]));  // same half, not counted
  Engine e(t, SchedulerKind::ecmp(), config(4.0), w);
  e.run();

  oracle::MaxMinCase c;
  c.capacity_mbps.assign(t.links().size(), 10);
  for (const auto& [id, f] : e.active_flows()) {
    c.demand_mbps.push_back(10);
    c.links.push_back(f.path->hops);
  }
  const auto exact = oracle::solve_exact(c);
  double want = 0.0;
  std::size_t i = 0;
  for (const auto& [id, f] : e.active_flows()) {
    if (t.half_of(f.src) != t.half_of(f.dst)) want += exact[i];
    ++i;
  }
  const auto ts = bisection_bandwidth(e.log(), t, w);
  EXPECT_NEAR(ts.points.back().second, want, want * 1e-9);
  EXPECT_LT(want, mbps(120));
}

TEST(UtilizationCdf, IdleLinksStepAtZero) {
  const UtilizationCdf cdf(std::vector<double>(8, 0.0));
  EXPECT_EQ(cdf.value_at(0.5), 0.0);
  EXPECT_EQ(cdf.value_at(1.0), 0.0);
}

TEST(UtilizationCdf, TwoPointDistribution) {
  const UtilizationCdf cdf({1.0, 0.0, 1.0, 0.0});
  EXPECT_EQ(cdf.value_at(0.5), 0.0);
  EXPECT_EQ(cdf.value_at(1.0), 1.0);
  const auto& pts = cdf.points();
  ASSERT_EQ(pts.size(), 4u);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_LE(pts[i - 1].first, pts[i].first);
    EXPECT_LT(pts[i - 1].second, pts[i].second);
  }
  EXPECT_EQ(pts.back().second, 1.0);
}

TEST(UtilizationCdf, FromRunCoversFabricLinks) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  WorkloadSpec spec;
  Engine e(t, SchedulerKind::sp(), config(20.0), generate_workload(t, spec));
  e.run();
  const auto cdf = utilization_cdf(t, e.samples());
  EXPECT_EQ(cdf.points().size(), 64u);
  EXPECT_EQ(cdf.points().back().second, 1.0);
  for (const auto& [u, f] : cdf.points()) {
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, 1.0);
  }
  EXPECT_THROW(utilization_cdf(t, {}), std::invalid_argument);
}

TEST(MiceStats, LossAndDeviation) {
  std::vector<ProbeResult> p(10);
  for (int i = 0; i < 10; ++i) {
    p[i].delivered = i >= 3;
    if (p[i].delivered) p[i].rtt = 1e-3;
  }
  auto s = mice_loss_and_rtt(p);
  EXPECT_DOUBLE_EQ(s.loss, 0.3);
  ASSERT_TRUE(s.rtt_mean_deviation.has_value());
  EXPECT_EQ(*s.rtt_mean_deviation, 0.0);

  std::vector<ProbeResult> q(3);
  for (int i = 0; i < 3; ++i) {
    q[i].delivered = true;
    q[i].rtt = (i + 1) * 1e-3;
  }
  EXPECT_NEAR(*mice_loss_and_rtt(q).rtt_mean_deviation, 2.0 / 3.0 * 1e-3, 1e-15);
}

TEST(MiceStats, NothingDelivered) {
  std::vector<ProbeResult> p(4);
  const auto s = mice_loss_and_rtt(p);
  EXPECT_EQ(s.loss, 1.0);
  EXPECT_FALSE(s.rtt_mean_deviation.has_value());
  EXPECT_THROW(mice_loss_and_rtt({}), std::invalid_argument);
}

TEST(Bounds, UniformEdges) {
  const int k = 4;
  const double L = mbps(6), P = k / 2.0;
  const std::vector<double> per_edge(k / 2, L / P);
  const auto b = throughput_bounds(per_edge);
  EXPECT_DOUBLE_EQ(b.t_max, (k / 2) * L / P);
  EXPECT_DOUBLE_EQ(b.t_min, L / P);
}

TEST(Bounds, OneLoadedEdgeAndIdle) {
  auto b = throughput_bounds(std::vector<double>{mbps(5), 0.0, 0.0});
  EXPECT_EQ(b.t_min, 0.0);
  EXPECT_EQ(b.t_max, mbps(5));
  b = throughput_bounds(std::vector<double>{0.0, 0.0});
  EXPECT_EQ(b.t_max, 0.0);
  EXPECT_EQ(b.t_min, 0.0);
}

TEST(Bounds, MinNotAboveMeanNotAboveMax) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  WorkloadSpec spec;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    spec.seed = seed;
    Engine e(t, SchedulerKind::sp(), config(20.0), generate_workload(t, spec));
    e.run();
    const auto b = compute_bounds(t, average_link_loads(e.samples(), t.links().size(), LoadBasis::Offered));
    double mean = 0.0;
    for (double v : b.per_edge_load) mean += v;
    mean /= static_cast<double>(b.per_edge_load.size());
    EXPECT_LE(b.t_min, mean);
    EXPECT_LE(mean, b.t_max);
    EXPECT_GE(b.e_max, 0.0);
    EXPECT_LE(b.e_max, 1.0);
    if (b.latency.l_max && b.latency.l_min) {
      EXPECT_LE(*b.latency.l_max, *b.latency.l_min);
    }
  }
}

TEST(LatencyProxies, Reciprocals) {
  const auto p = latency_proxies(mbps(80), 0.0);
  ASSERT_TRUE(p.l_max.has_value());
  EXPECT_DOUBLE_EQ(*p.l_max, 1.25e-8);
  EXPECT_FALSE(p.l_min.has_value());
  const auto q = latency_proxies(mbps(20), mbps(20));
  EXPECT_EQ(*q.l_max, *q.l_min);
  EXPECT_FALSE(latency_proxies(0.0, 0.0).l_max.has_value());
}

TEST(Efficiency, BalancedAndLopsidedPods) {
  EXPECT_NEAR(pod_balance_efficiency(std::vector<double>{3.0, 3.0}), 1.0, 1e-9);
  // Deviations (1/2)^2 + (1/2)^2 = 1/2, divided by two paths.
  EXPECT_NEAR(pod_balance_efficiency(std::vector<double>{7.0, 0.0}), 0.75, 1e-9);
  EXPECT_EQ(pod_balance_efficiency(std::vector<double>{0.0, 0.0}), 1.0);
}

TEST(Efficiency, InvariantUnderScaling) {
  const std::vector<double> base{1.0, 4.0, 2.5};
  const double e0 = pod_balance_efficiency(base);
  for (double c : {0.001, 3.0, 1e6}) {
    std::vector<double> s;
    for (double v : base) s.push_back(v * c);
    EXPECT_NEAR(pod_balance_efficiency(s), e0, 1e-12);
  }
  const auto t = Topology::build_fat_tree(4, mbps(10));
  auto loads = zeros(t);
  add_path(loads, t.equal_cost_paths(t.hosts()[0], t.hosts()[12])[0], 3.0);
  add_path(loads, t.equal_cost_paths(t.hosts()[5], t.hosts()[10])[3], 1.0);
  const double e1 = load_balance_efficiency(t, loads);
  for (auto& v : loads) v *= 17.0;
  EXPECT_NEAR(load_balance_efficiency(t, loads), e1, 1e-12);
}

TEST(Efficiency, IdleNetworkIsOne) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  EXPECT_EQ(load_balance_efficiency(t, zeros(t)), 1.0);
}

TEST(Efficiency, SingleFlowOnePodLopsided) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  auto loads = zeros(t);
  add_path(loads, t.equal_cost_paths(t.hosts()[0], t.hosts()[12])[0], mbps(10));
  // Pod 0 sends everything through one aggregate; pod 3 receives but sends
  // nothing upstream, so only pod 0 counts.
  EXPECT_NEAR(load_balance_efficiency(t, loads), 0.75, 1e-12);
}

TEST(Dominance, NonBlockingBoundsEveryScheduler) {
  ExperimentConfig cfg;
  cfg.schedulers = {SchedulerKind::sp(), SchedulerKind::ecmp(), SchedulerKind::hedera(), SchedulerKind::non_blocking()};
  cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  const auto b = run_simulations(cfg);
  const std::size_t n = cfg.seeds.size();
  for (std::size_t s = 0; s < n; ++s) {
    const double ideal = b.runs[3 * n + s].report.bisection.mean;
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_LE(b.runs[k * n + s].report.bisection.mean, ideal * (1 + 1e-12))
          << b.runs[k * n + s].scheduler.name() << " seed " << cfg.seeds[s];
  }
}
