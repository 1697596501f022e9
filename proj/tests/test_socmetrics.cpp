#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "socstatus/ingest.hpp"
#include "socstatus/socmetrics.hpp"

using namespace socstatus;

namespace {

CommGraph complete(std::size_t n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) e.push_back({u, v});
  return CommGraph::from_edges(n, e);
}

CommGraph star(std::size_t leaves) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId v = 1; v <= leaves; ++v) e.push_back({0, v});
  return CommGraph::from_edges(leaves + 1, e);
}

StatusLabels from_string(const std::string& s) {
  StatusLabels l(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] != '?') l[i] = s[i] == 'M' ? Status::Manager : Status::Subordinate;
  return l;
}

}  // namespace

TEST(Constraint, Dyad) {
  const auto g = oracle::graph_of(2, {{0, 1}});
  EXPECT_DOUBLE_EQ(*burt_constraint(g, 0), 1.0);
}

TEST(Constraint, StarCenter) { EXPECT_NEAR(*burt_constraint(star(4), 0), 0.25, 1e-15); }

TEST(Constraint, Triangle) {
  for (NodeId v = 0; v < 3; ++v) EXPECT_NEAR(*burt_constraint(complete(3), v), 1.125, 1e-15);
}

TEST(Constraint, IsolatedUndefined) { EXPECT_FALSE(burt_constraint(CommGraph::from_edges(2, {}), 0)); }

TEST(StructuralHoles, TieBreakById) {
  const std::vector<std::optional<double>> scores(4, 1.0);
  const auto r = select_structural_holes(scores, from_string("MMSS"), 0.5);
  EXPECT_EQ(r.flagged, (std::vector<bool>{true, true, false, false}));
}

TEST(StructuralHoles, StarCenterManager) {
  const auto r = select_structural_holes(star(4), from_string("MSSSS"), 0.2);
  EXPECT_EQ(r.flagged_count, 1u);
  EXPECT_DOUBLE_EQ(*r.p_manager_is_sh, 1.0);
  EXPECT_DOUBLE_EQ(*r.p_subordinate_is_sh, 0.0);
}

TEST(StructuralHoles, UndefinedScoresRankLast) {
  const std::vector<std::optional<double>> scores{std::nullopt, -2.0, -1.0};
  const auto r = select_structural_holes(scores, from_string("MSS"), 0.6);
  EXPECT_EQ(r.flagged, (std::vector<bool>{false, true, true}));
}

TEST(StructuralHoles, FlagCountIdentity) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = oracle::random_graph(20, 0.2, rng);
    auto labels = oracle::random_labels(20, 0.4, rng);
    labels[0] = Status::Manager;
    labels[1] = Status::Subordinate;
    const double rho = 0.05 + 0.9 * std::uniform_real_distribution<double>()(rng);
    const auto sh = select_structural_holes(r.graph, labels, rho);
    const std::size_t expected = static_cast<std::size_t>(std::ceil(rho * 20 - 1e-9));
    EXPECT_EQ(sh.flagged_count, expected);
    EXPECT_EQ(static_cast<std::size_t>(std::count(sh.flagged.begin(), sh.flagged.end(), true)), expected);
    EXPECT_NEAR(*sh.p_manager_is_sh * static_cast<double>(sh.managers) +
                    *sh.p_subordinate_is_sh * static_cast<double>(sh.subordinates),
                static_cast<double>(expected), 1e-9);
  }
}

TEST(CommonNeighbors, Fixtures) {
  EXPECT_EQ(common_neighbors(complete(3), 0, 1), 1u);
  EXPECT_EQ(common_neighbors(oracle::graph_of(4, {{0, 1}, {2, 3}}), 0, 2), 0u);
  // Chorded 4-cycle 1-2-3-4 with chord {1,3}, zero-based.
  const auto g = oracle::graph_of(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}});
  EXPECT_EQ(common_neighbors(g, 1, 3), 2u);
}

TEST(Homophily, TwoIsolatedManagers) {
  const auto r = homophily_report(CommGraph::from_edges(2, {}), from_string("MM"));
  ASSERT_TRUE(r[TieType::MM].mean);
  EXPECT_DOUBLE_EQ(*r[TieType::MM].mean, 0.0);
  EXPECT_FALSE(r[TieType::MS].mean);
  EXPECT_FALSE(r[TieType::SS].mean);
}

TEST(Homophily, K4AllTwo) {
  const auto r = homophily_report(complete(4), from_string("MMSS"));
  for (TieType t : kTieTypes) EXPECT_DOUBLE_EQ(*r[t].mean, 2.0);
}

TEST(Homophily, RichClubOrdering) {
  SyntheticConfig c;
  c.seed = 17;
  const auto d = generate_synthetic(c);
  const auto r = homophily_report(d.graph, d.labels);
  EXPECT_GT(*r[TieType::MM].mean, *r[TieType::SS].mean);
}

TEST(Balance, Fixtures) {
  // v = 0 with friends 1, 2, 3.
  const auto closed = oracle::graph_of(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {2, 3}, {1, 3}});
  const auto l = from_string("MMMM");
  EXPECT_DOUBLE_EQ(*balance_ratios(closed, l, 0).sb, 1.0);
  const auto open = oracle::graph_of(3, {{0, 1}, {0, 2}});
  EXPECT_DOUBLE_EQ(*balance_ratios(open, from_string("MMM"), 0).sb, 0.0);
  const auto one = oracle::graph_of(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}});
  EXPECT_NEAR(*balance_ratios(one, l, 0).sb, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(*balance_ratios(one, l, 0).sb_odds, 0.5, 1e-15);
}

TEST(Cliques, Fixtures) {
  const auto k4 = maximal_cliques(complete(4));
  EXPECT_EQ(k4.histogram, (std::map<std::size_t, std::size_t>{{4, 1}}));
  EXPECT_EQ(k4.max_size, 4u);
  const auto c4 = maximal_cliques(oracle::graph_of(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}));
  EXPECT_EQ(c4.histogram, (std::map<std::size_t, std::size_t>{{2, 4}}));
  EXPECT_EQ(c4.max_size, 2u);
  const auto two = maximal_cliques(oracle::graph_of(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}));
  EXPECT_EQ(two.histogram, (std::map<std::size_t, std::size_t>{{3, 2}}));
}

TEST(Cliques, BudgetExceeded) {
  // K12 minus a perfect matching has 2^6 maximal cliques.
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId u = 0; u < 12; ++u)
    for (NodeId v = u + 1; v < 12; ++v)
      if (v != u + 1 || u % 2 == 1) e.push_back({u, v});
  const auto g = CommGraph::from_edges(12, e);
  EXPECT_EQ(maximal_cliques(g).total, 64u);
  try {
    maximal_cliques(g, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BudgetExceeded);
  }
}

TEST(Cliques, AllManagersReport) {
  const auto g = oracle::graph_of(5, {{0, 1}, {1, 2}, {0, 2}, {2, 3}, {3, 4}});
  const auto r = clique_report(g, from_string("MMMMM"));
  EXPECT_EQ(r.managers, r.all);
  EXPECT_EQ(r.subordinates.total, 0u);
  EXPECT_TRUE(r.subordinates.histogram.empty());
}

TEST(Cliques, PlantedManagerK5) {
  std::mt19937_64 rng(3);
  auto r = oracle::random_graph(30, 0.05, rng);
  std::vector<std::pair<NodeId, NodeId>> edges = r.graph.edges();
  for (NodeId u = 0; u < 5; ++u)
    for (NodeId v = u + 1; v < 5; ++v)
      if (!r.graph.has_edge(u, v)) edges.push_back({u, v});
  const auto g = CommGraph::from_edges(30, edges);
  StatusLabels l(30);
  for (NodeId v = 0; v < 30; ++v) l[v] = v < 5 ? Status::Manager : Status::Subordinate;
  const auto rep = clique_report(g, l);
  EXPECT_EQ(rep.managers.histogram.count(5), 1u);
}

TEST(Cliques, EveryCliqueMaximal) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = oracle::random_graph(64, 0.15 + 0.02 * trial, rng);
    std::size_t seen = 0;
    for_each_maximal_clique(r.graph, [&](const std::vector<NodeId>& c) {
      ++seen;
      for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) ASSERT_TRUE(r.adj[c[i]][c[j]]);
      for (NodeId w = 0; w < 64; ++w) {
        if (std::find(c.begin(), c.end(), w) != c.end()) continue;
        bool extends = true;
        for (NodeId u : c) extends = extends && r.adj[u][w];
        ASSERT_FALSE(extends) << "clique extends by " << w;
      }
    });
    EXPECT_GT(seen, 0u);
  }
}

TEST(Property, MetricsMatchOracles) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> size(2, 30);
  std::uniform_real_distribution<double> dens(0.05, 0.7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = size(rng);
    const auto r = oracle::random_graph(n, dens(rng), rng);
    const auto labels = oracle::random_labels(n, 0.4, rng);
    for (NodeId v = 0; v < n; ++v) {
      const auto c = burt_constraint(r.graph, v);
      const auto o = oracle::burt_constraint(r.adj, v);
      ASSERT_EQ(c.has_value(), o.has_value());
      if (c) EXPECT_NEAR(*c, *o, 1e-10);

      const auto b = balance_ratios(r.graph, labels, v);
      auto check = [](const std::optional<double>& x, const std::optional<double>& y) {
        ASSERT_EQ(x.has_value(), y.has_value());
        if (x) EXPECT_NEAR(*x, *y, 1e-10);
      };
      check(b.m_sb, oracle::wedge_fraction(r.adj, v, [&](std::size_t u) { return labels.is(u, Status::Manager); }));
      check(b.s_sb, oracle::wedge_fraction(r.adj, v, [&](std::size_t u) { return labels.is(u, Status::Subordinate); }));
      check(b.sb, oracle::wedge_fraction(r.adj, v, [](std::size_t) { return true; }));
      if (r.graph.degree(v) >= 2) EXPECT_NEAR(*b.sb, local_clustering(r.graph, v), 1e-12);

      for (NodeId u = 0; u < n; ++u) EXPECT_EQ(common_neighbors(r.graph, u, v), oracle::common_neighbors(r.adj, u, v));
    }

    // Homophily means against a pair scan.
    if (labels.count_known() >= 2) {
      const auto h = homophily_report(r.graph, labels);
      std::array<double, 3> sum{};
      std::array<std::size_t, 3> cnt{};
      for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) {
          const auto t = static_cast<std::size_t>(tie_type(*labels[u], *labels[v]));
          sum[t] += static_cast<double>(oracle::common_neighbors(r.adj, u, v));
          ++cnt[t];
        }
      for (TieType t : kTieTypes) {
        const auto i = static_cast<std::size_t>(t);
        EXPECT_EQ(h[t].pairs, cnt[i]);
        if (cnt[i]) EXPECT_NEAR(*h[t].mean, sum[i] / static_cast<double>(cnt[i]), 1e-10);
      }
    }
  }
}

TEST(Property, CliquesMatchSubsetSearch) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> size(1, 12);
  std::uniform_real_distribution<double> dens(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto r = oracle::random_graph(size(rng), dens(rng), rng);
    const auto got = maximal_cliques(r.graph);
    const auto want = oracle::maximal_cliques(r.adj);
    ASSERT_EQ(got.histogram, want.histogram) << "trial " << trial;
    EXPECT_EQ(got.isolated_nodes, want.isolated);
  }
}
