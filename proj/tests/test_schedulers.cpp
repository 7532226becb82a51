#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fatsim/engine.hpp"
#include "fatsim/schedulers.hpp"
#include "oracles.hpp"

using namespace fatsim;

namespace {

// Four synthetic candidates in canonical order (aggregate, core).
std::vector<Path> four_paths() {
  std::vector<Path> p;
  for (int i = 0; i < 4; ++i) p.push_back({{static_cast<LinkIndex>(100 + i)}, i / 2, i});
  return p;
}

PathView view(const Path& p, int hops, int eleph, double res_mbps) {
  return PathView{p, res_mbps * 1e6, eleph, hops};
}

Flow flow(FlowId id, const NodeId& s, const NodeId& d, double demand = mbps(10)) {
  Flow f;
  f.id = id;
  f.src = s;
  f.dst = d;
  f.demand = demand;
  return f;
}

std::vector<LinkState> idle_links(const Topology& t) {
  std::vector<LinkState> links(t.links().size());
  for (auto& l : links) l.capacity = t.link_capacity();
  return links;
}

}  // namespace

TEST(SpLex, WorkedExamplePicksThirdView) {
  const auto p = four_paths();
  const std::vector<PathView> v{view(p[0], 6, 2, 4), view(p[1], 6, 0, 3), view(p[2], 6, 0, 5), view(p[3], 6, 1, 9)};
  EXPECT_EQ(select_sp_lex(v), p[2]);
  EXPECT_EQ(oracle::sp_lex_by_sort(v), p[2]);
}

TEST(SpLex, IdenticalStatsPickFirstInPathOrder) {
  const auto p = four_paths();
  const std::vector<PathView> v{view(p[3], 6, 1, 5), view(p[1], 6, 1, 5), view(p[2], 6, 1, 5)};
  EXPECT_EQ(select_sp_lex(v), p[1]);
}

TEST(SpLex, SingletonAndEmpty) {
  const auto p = four_paths();
  EXPECT_EQ(select_sp_lex({view(p[2], 6, 3, 0)}), p[2]);
  EXPECT_THROW(select_sp_lex({}), std::invalid_argument);
}

TEST(SpLex, ShorterPathWinsOverEverythingElse) {
  const auto p = four_paths();
  EXPECT_EQ(select_sp_lex({view(p[0], 6, 0, 10), view(p[1], 4, 5, 0)}), p[1]);
}

TEST(SpLex, InvariantUnderInputPermutation) {
  std::mt19937_64 gen(11);
  const auto p = four_paths();
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PathView> v;
    for (int i = 0; i < 4; ++i)
      v.push_back(view(p[i], 6, static_cast<int>(gen() % 3), static_cast<double>(gen() % 3) * 5));
    const Path want = select_sp_lex(v);
    for (int s = 0; s < 5; ++s) {
      std::shuffle(v.begin(), v.end(), gen);
      EXPECT_EQ(select_sp_lex(v), want);
    }
  }
}

TEST(SpLex, MatchesScalarizedOnDominantInstances) {
  std::mt19937_64 gen(5);
  const auto p = four_paths();
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<PathView> v;
    for (int i = 0; i < 4; ++i)
      v.push_back(view(p[i], 6, static_cast<int>(gen() % 4), static_cast<double>(gen() % 11)));
    const auto best_res = std::max_element(v.begin(), v.end(), [](auto& a, auto& b) { return a.min_residual < b.min_residual; });
    const auto min_e = std::min_element(v.begin(), v.end(),
                                        [](auto& a, auto& b) { return a.agg_upstream_elephants < b.agg_upstream_elephants; });
    // One path strictly best on both criteria.
    bool dominant = true;
    for (const auto& x : v)
      if (&x != &*best_res && (x.min_residual >= best_res->min_residual ||
                              x.agg_upstream_elephants <= best_res->agg_upstream_elephants))
        dominant = false;
    if (!dominant || min_e->agg_upstream_elephants != best_res->agg_upstream_elephants) continue;
    ++checked;
    for (double alpha : {0.0, 0.5, 1.0, 5.0, 100.0}) EXPECT_EQ(select_sp_scalarized(v, alpha), select_sp_lex(v));
  }
  EXPECT_GT(checked, 50);
}

TEST(SpScalarized, AlphaFlipCase) {
  const auto p = four_paths();
  const std::vector<PathView> v{view(p[0], 6, 0, 5), view(p[1], 6, 1, 9)};
  EXPECT_EQ(select_sp_scalarized(v, 1.0), p[1]);
  EXPECT_EQ(select_sp_scalarized(v, 5.0), p[0]);
}

TEST(SpScalarized, AlphaZeroIsMaxResidual) {
  std::mt19937_64 gen(3);
  const auto p = four_paths();
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<PathView> v;
    for (int i = 0; i < 4; ++i)
      v.push_back(view(p[i], 6, static_cast<int>(gen() % 4), static_cast<double>(gen() % 11)));
    // First path in canonical order among the maximum residuals.
    Path want = p[0];
    double best = -1;
    for (const auto& x : v)
      if (x.min_residual > best) {
        best = x.min_residual;
        want = x.path;
      }
    EXPECT_EQ(select_sp_scalarized(v, 0.0), want);
  }
}

TEST(SpScalarized, EqualElephantsReduceToMaxResidual) {
  const auto p = four_paths();
  const std::vector<PathView> v{view(p[0], 6, 2, 3), view(p[1], 6, 2, 8), view(p[2], 6, 2, 6)};
  for (double alpha : {0.0, 1.0, 7.0, 1000.0}) EXPECT_EQ(select_sp_scalarized(v, alpha), p[1]);
}

TEST(SpScalarized, JointScalingPreservesChoice) {
  std::mt19937_64 gen(17);
  const auto p = four_paths();
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<PathView> v;
    for (int i = 0; i < 4; ++i)
      v.push_back(view(p[i], 6, static_cast<int>(gen() % 4), static_cast<double>(gen() % 11)));
    const double alpha = static_cast<double>(gen() % 6);
    const Path base = select_sp_scalarized(v, alpha);
    for (double c : {2.0, 3.0, 0.5, 10.0}) {
      auto scaled = v;
      for (auto& x : scaled) x.min_residual *= c;
      EXPECT_EQ(select_sp_scalarized(scaled, alpha * c), base) << "c=" << c;
    }
  }
}

TEST(SpScalarized, Errors) {
  const auto p = four_paths();
  EXPECT_THROW(select_sp_scalarized({}, 1.0), std::invalid_argument);
  EXPECT_THROW(select_sp_scalarized({view(p[0], 6, 0, 1)}, std::nan("")), std::invalid_argument);
  EXPECT_THROW(select_sp_scalarized({view(p[0], 6, 0, 1)}, -1.0), std::invalid_argument);
}

TEST(Ecmp, SameFlowSamePath) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const auto c = t.equal_cost_paths(t.hosts()[0], t.hosts()[12]);
  const auto f = flow(77, t.hosts()[0], t.hosts()[12]);
  EXPECT_EQ(select_ecmp(f, c), select_ecmp(f, c));
}

TEST(Ecmp, UniformOverFourPaths) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const auto hosts = t.hosts();
  std::vector<int> hits(4, 0);
  for (FlowId id = 0; id < 10000; ++id) {
    const auto& s = hosts[id % 8];
    const auto& d = hosts[8 + (id * 7) % 8];
    const auto c = t.equal_cost_paths(s, d);
    const auto& chosen = select_ecmp(flow(id, s, d), c);
    hits[std::find(c.begin(), c.end(), chosen) - c.begin()]++;
  }
  for (int h : hits) {
    EXPECT_GE(h, 2375);
    EXPECT_LE(h, 2625);
  }
}

TEST(Ecmp, SingleCandidateAndEmpty) {
  const auto p = four_paths();
  Flow f;
  f.id = 12345;
  EXPECT_EQ(select_ecmp(f, {p[3]}), p[3]);
  EXPECT_THROW(select_ecmp(f, {}), std::invalid_argument);
}

TEST(Hedera, MiceScaleFlowsUseEcmp) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const auto links = idle_links(t);
  const auto c = t.equal_cost_paths(t.hosts()[0], t.hosts()[12]);
  for (FlowId id = 0; id < 50; ++id) {
    const auto f = flow(id, t.hosts()[0], t.hosts()[12], kProbeBytes * 8.0);
    EXPECT_EQ(select_hedera_greedy(t, links, f, c, 0.1), select_ecmp(f, c));
  }
}

TEST(Hedera, FirstFitSkipsCandidatesThatCannotCarryDemand) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  auto links = idle_links(t);
  const auto c = t.equal_cost_paths(t.hosts()[0], t.hosts()[12]);
  // Load the aggregate uplinks of the first two candidates.
  links[c[0].hops[2]].allocated = mbps(6);
  links[c[1].hops[2]].allocated = mbps(3);
  const auto f = flow(1, t.hosts()[0], t.hosts()[12], mbps(8));
  EXPECT_EQ(select_hedera_greedy(t, links, f, c, 0.1), c[2]);
}

TEST(Hedera, FallsBackToLargestResidual) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  auto links = idle_links(t);
  const auto all = t.equal_cost_paths(t.hosts()[0], t.hosts()[12]);
  const std::vector<Path> three(all.begin(), all.begin() + 3);
  links[three[0].hops[2]].allocated = mbps(8);  // residual 2
  links[three[1].hops[2]].allocated = mbps(3);  // residual 7
  links[three[2].hops[2]].allocated = mbps(5);  // residual 5
  const auto f = flow(1, t.hosts()[0], t.hosts()[12], mbps(10));
  EXPECT_EQ(select_hedera_greedy(t, links, f, three, 0.1), three[1]);
  EXPECT_THROW(select_hedera_greedy(t, links, f, {}, 0.1), std::invalid_argument);
}

TEST(NonBlocking, RejectsFatTree) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  EXPECT_THROW(select_non_blocking(t, flow(0, t.hosts()[0], t.hosts()[1])), std::invalid_argument);
}

TEST(NonBlocking, TwoLinkPathsAndFullRatePermutation) {
  const auto star = Topology::build_non_blocking(4, mbps(10));
  const auto hosts = star.hosts();
  std::vector<Flow> w;
  for (int i = 0; i < 16; ++i) {
    auto f = flow(static_cast<FlowId>(i), hosts[i], hosts[(i + 5) % 16]);
    const auto p = select_non_blocking(star, f);
    EXPECT_EQ(p.hops.size(), 2u);
    w.push_back(f);
  }
  EngineConfig cfg;
  cfg.horizon = 2.0;
  Engine e(star, SchedulerKind::non_blocking(), cfg, w);
  e.run();
  for (const auto& [id, f] : e.active_flows()) EXPECT_EQ(f.rate, mbps(10));
}

TEST(Dispatch, ControllerFractionNearHalf) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const auto links = idle_links(t);
  Dispatcher d(SchedulerKind::sp(), 1);
  const auto hosts = t.hosts();
  int controller = 0;
  for (FlowId id = 0; id < 10000; ++id)
    controller += d.dispatch(t, links, flow(id, hosts[id % 8], hosts[8 + id % 8])).mechanism == Mechanism::Controller;
  EXPECT_GE(controller, 4800);
  EXPECT_LE(controller, 5200);
}

TEST(Dispatch, EcmpKindNeverUsesController) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const auto links = idle_links(t);
  Dispatcher d(SchedulerKind::ecmp(), 1);
  const auto hosts = t.hosts();
  for (FlowId id = 0; id < 500; ++id) {
    const auto dec = d.dispatch(t, links, flow(id, hosts[id % 16], hosts[(id + 3) % 16]));
    EXPECT_EQ(dec.mechanism, Mechanism::ProactiveEcmp);
  }
}

TEST(Dispatch, ForcedControllerEqualsLexSelection) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  auto links = idle_links(t);
  const auto hosts = t.hosts();
  const auto c = t.equal_cost_paths(hosts[0], hosts[12]);
  links[c[0].hops[2]].elephant_count = 2;
  links[c[1].hops[2]].allocated = mbps(4);
  Dispatcher d(SchedulerKind::sp(), 1);
  d.force_mechanism(Mechanism::Controller);
  const auto f = flow(3, hosts[0], hosts[12]);
  const auto dec = d.dispatch(t, links, f);
  EXPECT_EQ(dec.mechanism, Mechanism::Controller);
  EXPECT_EQ(dec.chosen, select_sp_lex(make_path_views(t, links, c)));
  EXPECT_EQ(dec.chosen, c[2]);
  EXPECT_EQ(dec.candidates_considered, 4);
}

TEST(Dispatch, EveryDecisionIsACandidate) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const auto links = idle_links(t);
  const auto hosts = t.hosts();
  for (auto kind : {SchedulerKind::sp(), SchedulerKind::sp_scalarized(1.0), SchedulerKind::ecmp(),
                    SchedulerKind::hedera()}) {
    Dispatcher d(kind, 4);
    for (FlowId id = 0; id < 200; ++id) {
      const auto f = flow(id, hosts[id % 16], hosts[(id + 1 + id % 15) % 16]);
      const auto c = t.equal_cost_paths(f.src, f.dst);
      const auto dec = d.dispatch(t, links, f);
      EXPECT_NE(std::find(c.begin(), c.end(), dec.chosen), c.end());
    }
  }
}

TEST(Dispatch, RejectsAlreadyRoutedFlow) {
  const auto t = Topology::build_fat_tree(4, mbps(10));
  const auto links = idle_links(t);
  auto f = flow(0, t.hosts()[0], t.hosts()[5]);
  f.path = t.equal_cost_paths(f.src, f.dst).front();
  Dispatcher d(SchedulerKind::sp(), 1);
  EXPECT_THROW(d.dispatch(t, links, f), std::logic_error);
}

TEST(SchedulerKind, ValidationAndNames) {
  EXPECT_THROW(SchedulerKind::sp_scalarized(-1.0).validate(), std::invalid_argument);
  EXPECT_THROW(SchedulerKind::hedera(0.0).validate(), std::invalid_argument);
  EXPECT_THROW(SchedulerKind::hedera(1.5).validate(), std::invalid_argument);
  for (const char* n : {"sp", "sp-scalarized", "ecmp", "hedera", "nonblocking"})
    EXPECT_EQ(SchedulerKind::parse(n)->name(), n);
  EXPECT_FALSE(SchedulerKind::parse("sieve").has_value());
}
