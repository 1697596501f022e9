#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "socstatus/error.hpp"
#include "socstatus/graph.hpp"

namespace socstatus {

// ---------------------------------------------------------------------------
// Structural holes
// ---------------------------------------------------------------------------

/// Burt's network constraint on the unweighted projection, with
/// p_xy = 1/deg(x). Isolated nodes have no constraint.
inline std::optional<double> burt_constraint(const CommGraph& g, NodeId v) {
  const auto nb = g.neighbors(v);
  if (nb.empty()) return std::nullopt;
  const double p_v = 1.0 / static_cast<double>(nb.size());
  double total = 0.0;
  for (NodeId j : nb) {
    double indirect = 0.0;
    for (NodeId q : nb) {
      if (q == j || !g.has_edge(q, j)) continue;
      indirect += p_v / static_cast<double>(g.degree(q));
    }
    const double c = p_v + indirect;
    total += c * c;
  }
  return total;
}

/// Maps a graph to one hole-spanning score per node (higher spans more
/// holes); std::nullopt ranks last.
using StructuralHoleScorer = std::function<std::vector<std::optional<double>>(const CommGraph&)>;

inline std::vector<std::optional<double>> negated_constraint_scores(const CommGraph& g) {
  std::vector<std::optional<double>> scores(g.size());
  for (NodeId v = 0; v < g.size(); ++v)
    if (auto c = burt_constraint(g, v)) scores[v] = -*c;
  return scores;
}

inline StructuralHoleScorer burt_scorer() { return negated_constraint_scores; }

struct SHReport {
  std::vector<std::optional<double>> scores;
  std::vector<bool> flagged;
  std::size_t flagged_count = 0;
  std::size_t managers = 0;
  std::size_t subordinates = 0;
  std::optional<double> p_manager_is_sh;
  std::optional<double> p_subordinate_is_sh;
};

/// ceil(rho * n) with a guard against representation error in rho * n.
inline std::size_t top_fraction_count(double rho, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n) - 1e-9));
}

/// Ranking of labeled nodes by score descending, undefined scores last, ties
/// broken by ascending node id.
inline std::vector<NodeId> rank_labeled(const std::vector<std::optional<double>>& scores,
                                        const StatusLabels& labels) {
  std::vector<NodeId> order;
  for (NodeId v = 0; v < labels.size(); ++v)
    if (labels.known(v)) order.push_back(v);
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    const auto& sa = scores[a];
    const auto& sb = scores[b];
    if (sa.has_value() != sb.has_value()) return sa.has_value();
    if (!sa) return false;
    return *sa > *sb;
  });
  return order;
}

/// Flags the top ceil(rho * n_labeled) labeled nodes given precomputed scores.
inline SHReport select_structural_holes(const std::vector<std::optional<double>>& scores,
                                        const StatusLabels& labels, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorKind::Config, "rho must lie in (0, 1)");
  if (scores.size() != labels.size()) throw Error(ErrorKind::Shape, "score count does not match labels");
  const auto order = rank_labeled(scores, labels);
  if (order.empty()) throw Error(ErrorKind::Config, "structural-hole selection needs labeled nodes");

  SHReport r;
  r.scores = scores;
  r.flagged.assign(labels.size(), false);
  r.flagged_count = std::min(top_fraction_count(rho, order.size()), order.size());
  for (std::size_t i = 0; i < r.flagged_count; ++i) r.flagged[order[i]] = true;

  std::size_t flagged_m = 0;
  std::size_t flagged_s = 0;
  for (NodeId v = 0; v < labels.size(); ++v) {
    if (labels.is(v, Status::Manager)) {
      ++r.managers;
      flagged_m += r.flagged[v];
    } else if (labels.is(v, Status::Subordinate)) {
      ++r.subordinates;
      flagged_s += r.flagged[v];
    }
  }
  if (r.managers > 0) r.p_manager_is_sh = static_cast<double>(flagged_m) / static_cast<double>(r.managers);
  if (r.subordinates > 0)
    r.p_subordinate_is_sh = static_cast<double>(flagged_s) / static_cast<double>(r.subordinates);
  return r;
}

inline SHReport select_structural_holes(const CommGraph& g, const StatusLabels& labels, double rho,
                                        const StructuralHoleScorer& scorer = burt_scorer()) {
  return select_structural_holes(scorer(g), labels, rho);
}

// ---------------------------------------------------------------------------
// Link homophily
// ---------------------------------------------------------------------------

inline std::size_t common_neighbors(const CommGraph& g, NodeId u, NodeId v) {
  const auto a = g.neighbors(u);
  const auto b = g.neighbors(v);
  std::size_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      if (*i != u && *i != v) ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

enum class TieType : std::uint8_t { MM = 0, MS = 1, SS = 2 };
inline constexpr std::array<TieType, 3> kTieTypes{TieType::MM, TieType::MS, TieType::SS};

inline const char* to_string(TieType t) {
  switch (t) {
    case TieType::MM: return "MM";
    case TieType::MS: return "MS";
    case TieType::SS: return "SS";
  }
  return "?";
}

inline TieType tie_type(Status a, Status b) {
  if (a == Status::Manager && b == Status::Manager) return TieType::MM;
  if (a == Status::Subordinate && b == Status::Subordinate) return TieType::SS;
  return TieType::MS;
}

struct TieSummary {
  std::size_t pairs = 0;
  std::optional<double> mean;
  std::optional<double> ci_halfwidth;
};

struct HomophilyReport {
  std::array<TieSummary, 3> ties;
  bool edges_only = false;

  const TieSummary& operator[](TieType t) const { return ties[static_cast<std::size_t>(t)]; }
};

/// Mean common-neighbor count per tie type with a normal-approximation
/// confidence half-width 1.96 * s / sqrt(m) (s is the sample std).
inline HomophilyReport homophily_report(const CommGraph& g, const StatusLabels& labels, bool edges_only = false) {
  if (labels.count_known() < 2) throw Error(ErrorKind::Config, "homophily needs at least two labeled nodes");
  std::array<double, 3> sum{};
  std::array<double, 3> sum_sq{};
  std::array<std::size_t, 3> pairs{};
  for (NodeId u = 0; u < g.size(); ++u) {
    if (!labels.known(u)) continue;
    for (NodeId v = u + 1; v < g.size(); ++v) {
      if (!labels.known(v)) continue;
      if (edges_only && !g.has_edge(u, v)) continue;
      const auto t = static_cast<std::size_t>(tie_type(*labels[u], *labels[v]));
      const auto c = static_cast<double>(common_neighbors(g, u, v));
      sum[t] += c;
      sum_sq[t] += c * c;
      ++pairs[t];
    }
  }
  HomophilyReport r;
  r.edges_only = edges_only;
  for (std::size_t t = 0; t < 3; ++t) {
    auto& s = r.ties[t];
    s.pairs = pairs[t];
    if (pairs[t] == 0) continue;
    const double m = static_cast<double>(pairs[t]);
    s.mean = sum[t] / m;
    if (pairs[t] >= 2) {
      const double var = std::max(0.0, (sum_sq[t] - m * *s.mean * *s.mean) / (m - 1.0));
      s.ci_halfwidth = 1.96 * std::sqrt(var) / std::sqrt(m);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Social balance
// ---------------------------------------------------------------------------

struct BalanceRatios {
  std::optional<double> m_sb;
  std::optional<double> s_sb;
  std::optional<double> sb;
  /// balanced / unbalanced over all friends; undefined without open wedges.
  std::optional<double> sb_odds;
};

namespace detail {

struct WedgeCount {
  std::size_t closed = 0;
  std::size_t total = 0;
};

inline WedgeCount count_wedges(const CommGraph& g, const std::vector<NodeId>& friends) {
  WedgeCount w;
  for (std::size_t i = 0; i < friends.size(); ++i) {
    for (std::size_t j = i + 1; j < friends.size(); ++j) {
      ++w.total;
      if (g.has_edge(friends[i], friends[j])) ++w.closed;
    }
  }
  return w;
}

inline std::optional<double> wedge_ratio(const WedgeCount& w) {
  if (w.total == 0) return std::nullopt;
  return static_cast<double>(w.closed) / static_cast<double>(w.total);
}

}  // namespace detail

/// Closed-wedge fractions around v over manager friends, subordinate friends
/// and all friends. A friend set with fewer than two members is undefined.
inline BalanceRatios balance_ratios(const CommGraph& g, const StatusLabels& labels, NodeId v) {
  std::vector<NodeId> all(g.neighbors(v).begin(), g.neighbors(v).end());
  std::vector<NodeId> managers;
  std::vector<NodeId> subordinates;
  for (NodeId u : all) {
    if (labels.is(u, Status::Manager)) managers.push_back(u);
    if (labels.is(u, Status::Subordinate)) subordinates.push_back(u);
  }
  BalanceRatios r;
  r.m_sb = detail::wedge_ratio(detail::count_wedges(g, managers));
  r.s_sb = detail::wedge_ratio(detail::count_wedges(g, subordinates));
  const auto w = detail::count_wedges(g, all);
  r.sb = detail::wedge_ratio(w);
  if (w.total > w.closed)
    r.sb_odds = static_cast<double>(w.closed) / static_cast<double>(w.total - w.closed);
  return r;
}

struct GroupMean {
  std::optional<double> mean;
  std::size_t defined = 0;
  std::size_t undefined = 0;
};

enum class BalanceKind : std::uint8_t { ManagerFriends = 0, SubordinateFriends = 1, AllFriends = 2 };

struct BalanceReport {
  std::vector<BalanceRatios> per_node;
  // [group][kind], group 0 = managers, 1 = subordinates.
  std::array<std::array<GroupMean, 3>, 2> group_means;

  const GroupMean& mean(Status group, BalanceKind kind) const {
    return group_means[static_cast<std::size_t>(group)][static_cast<std::size_t>(kind)];
  }
};

inline std::optional<double> balance_value(const BalanceRatios& r, BalanceKind kind) {
  switch (kind) {
    case BalanceKind::ManagerFriends: return r.m_sb;
    case BalanceKind::SubordinateFriends: return r.s_sb;
    case BalanceKind::AllFriends: return r.sb;
  }
  return std::nullopt;
}

inline BalanceReport balance_report(const CommGraph& g, const StatusLabels& labels) {
  BalanceReport r;
  r.per_node.reserve(g.size());
  for (NodeId v = 0; v < g.size(); ++v) r.per_node.push_back(balance_ratios(g, labels, v));
  for (Status group : {Status::Manager, Status::Subordinate}) {
    for (std::size_t k = 0; k < 3; ++k) {
      auto& gm = r.group_means[static_cast<std::size_t>(group)][k];
      double sum = 0.0;
      for (NodeId v = 0; v < g.size(); ++v) {
        if (!labels.is(v, group)) continue;
        if (auto x = balance_value(r.per_node[v], static_cast<BalanceKind>(k))) {
          sum += *x;
          ++gm.defined;
        } else {
          ++gm.undefined;
        }
      }
      if (gm.defined > 0) gm.mean = sum / static_cast<double>(gm.defined);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Maximal cliques
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kDefaultCliqueBudget = 10'000'000;

struct CliqueDistribution {
  std::map<std::size_t, std::size_t> histogram;
  std::size_t max_size = 0;
  std::size_t total = 0;
  std::size_t isolated_nodes = 0;

  friend bool operator==(const CliqueDistribution&, const CliqueDistribution&) = default;
};

namespace detail {

class CliqueEnumerator {
 public:
  CliqueEnumerator(const CommGraph& g, std::uint64_t budget,
                   const std::function<void(const std::vector<NodeId>&)>* visit)
      : g_(g), budget_(budget), visit_(visit) {}

  void run(CliqueDistribution& out) {
    out_ = &out;
    const auto order = degeneracy_order();
    std::vector<std::size_t> position(g_.size());
    for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
    for (NodeId v : order) {
      if (g_.degree(v) == 0) {
        ++out.isolated_nodes;
        continue;
      }
      std::vector<NodeId> p;
      std::vector<NodeId> x;
      for (NodeId u : g_.neighbors(v)) (position[u] > position[v] ? p : x).push_back(u);
      clique_.assign(1, v);
      expand(std::move(p), std::move(x));
    }
  }

 private:
  std::vector<NodeId> degeneracy_order() const {
    const std::size_t n = g_.size();
    std::vector<std::size_t> deg(n);
    std::size_t max_deg = 0;
    for (NodeId v = 0; v < n; ++v) max_deg = std::max(max_deg, deg[v] = g_.degree(v));
    std::vector<std::vector<NodeId>> buckets(max_deg + 1);
    for (NodeId v = 0; v < n; ++v) buckets[deg[v]].push_back(v);
    std::vector<bool> removed(n, false);
    std::vector<NodeId> order;
    order.reserve(n);
    std::size_t d = 0;
    while (order.size() < n) {
      d = 0;
      while (buckets[d].empty()) ++d;
      NodeId v = buckets[d].back();
      buckets[d].pop_back();
      if (removed[v] || deg[v] != d) continue;
      removed[v] = true;
      order.push_back(v);
      for (NodeId u : g_.neighbors(v)) {
        if (removed[u]) continue;
        --deg[u];
        buckets[deg[u]].push_back(u);
      }
    }
    return order;
  }

  std::size_t neighbors_in(NodeId u, const std::vector<NodeId>& set) const {
    std::size_t c = 0;
    for (NodeId w : set) c += g_.has_edge(u, w);
    return c;
  }

  void report() {
    if (++found_ > budget_)
      throw Error(ErrorKind::BudgetExceeded, "maximal clique count exceeds budget " + std::to_string(budget_));
    ++out_->histogram[clique_.size()];
    ++out_->total;
    out_->max_size = std::max(out_->max_size, clique_.size());
    if (visit_) (*visit_)(clique_);
  }

  // Bron-Kerbosch with Tomita pivoting: the pivot maximizes |P ∩ N(pivot)|.
  void expand(std::vector<NodeId> p, std::vector<NodeId> x) {
    if (p.empty()) {
      if (x.empty()) report();
      return;
    }
    NodeId pivot = p.front();
    std::size_t best = 0;
    bool first = true;
    for (const auto* set : {&p, &x}) {
      for (NodeId u : *set) {
        const std::size_t c = neighbors_in(u, p);
        if (first || c > best) {
          pivot = u;
          best = c;
          first = false;
        }
      }
    }
    std::vector<NodeId> candidates;
    for (NodeId u : p)
      if (!g_.has_edge(pivot, u)) candidates.push_back(u);
    for (NodeId u : candidates) {
      std::vector<NodeId> p2;
      std::vector<NodeId> x2;
      for (NodeId w : p)
        if (g_.has_edge(u, w)) p2.push_back(w);
      for (NodeId w : x)
        if (g_.has_edge(u, w)) x2.push_back(w);
      clique_.push_back(u);
      expand(std::move(p2), std::move(x2));
      clique_.pop_back();
      p.erase(std::find(p.begin(), p.end(), u));
      x.push_back(u);
    }
  }

  const CommGraph& g_;
  std::uint64_t budget_;
  const std::function<void(const std::vector<NodeId>&)>* visit_;
  CliqueDistribution* out_ = nullptr;
  std::vector<NodeId> clique_;
  std::uint64_t found_ = 0;
};

}  // namespace detail

/// Histogram of maximal cliques of size >= 2 by size. Isolated nodes are
/// counted separately. Throws BudgetExceeded past `budget` cliques.
inline CliqueDistribution maximal_cliques(const CommGraph& g, std::uint64_t budget = kDefaultCliqueBudget) {
  CliqueDistribution out;
  detail::CliqueEnumerator(g, budget, nullptr).run(out);
  return out;
}

/// Same enumeration, also handing every maximal clique to `visit`.
inline CliqueDistribution for_each_maximal_clique(const CommGraph& g,
                                                  const std::function<void(const std::vector<NodeId>&)>& visit,
                                                  std::uint64_t budget = kDefaultCliqueBudget) {
  CliqueDistribution out;
  detail::CliqueEnumerator(g, budget, &visit).run(out);
  return out;
}

struct CliqueReport {
  CliqueDistribution managers;
  CliqueDistribution subordinates;
  CliqueDistribution all;
};

inline CliqueReport clique_report(const CommGraph& g, const StatusLabels& labels,
                                  std::uint64_t budget = kDefaultCliqueBudget) {
  if (labels.size() != g.size()) throw Error(ErrorKind::Shape, "labels do not cover the graph");
  CliqueReport r;
  r.managers =
      maximal_cliques(induced_subgraph(g, [&](NodeId v) { return labels.is(v, Status::Manager); }).graph, budget);
  r.subordinates =
      maximal_cliques(induced_subgraph(g, [&](NodeId v) { return labels.is(v, Status::Subordinate); }).graph, budget);
  r.all = maximal_cliques(g, budget);
  return r;
}

}  // namespace socstatus
