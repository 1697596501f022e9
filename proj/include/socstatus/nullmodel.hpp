#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "socstatus/error.hpp"
#include "socstatus/graph.hpp"
#include "socstatus/socmetrics.hpp"

namespace socstatus {

/// A label-dependent observable of a graph. Undefined values are NaN.
using Statistic = std::function<double(const CommGraph&, const StatusLabels&)>;

struct NamedStatistic {
  std::string name;
  Statistic fn;
};

/// Uniformly random rearrangement of a fully observed label multiset.
template <class Rng>
StatusLabels permute_labels(const StatusLabels& labels, Rng& rng) {
  if (!labels.fully_observed())
    throw Error(ErrorKind::PartialLabels, "label shuffling needs every node labeled");
  auto values = labels.values();
  std::shuffle(values.begin(), values.end(), rng);
  StatusLabels out(std::move(values));
  assert(out.count(Status::Manager) == labels.count(Status::Manager));
  return out;
}

/// Generator for shuffle `index` of a run seeded with `seed`; independent of
/// which thread evaluates it.
inline std::mt19937_64 shuffle_generator(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

struct PermutationReport {
  std::string statistic;
  double observed = 0.0;
  double null_mean = 0.0;
  double null_std = 0.0;
  std::optional<double> z;
  std::size_t n_shuffles = 0;
  std::size_t undefined_shuffles = 0;
  bool significant = false;
  bool degenerate = false;
  /// Two-sided normal-approximation p-value of z.
  std::optional<double> p_normal;
  /// Two-sided permutation p-value, (1 + #{|x~ - mu| >= |x - mu|}) / (N + 1).
  std::optional<double> p_permutation;
  std::uint64_t seed = 0;
};

inline constexpr double kSignificanceSigmas = 2.0;

/// Stars: * p<0.05, ** p<0.01, *** p<0.001, **** p<0.0001.
inline std::string significance_stars(std::optional<double> p) {
  if (!p) return "";
  if (*p < 1e-4) return "****";
  if (*p < 1e-3) return "***";
  if (*p < 1e-2) return "**";
  if (*p < 5e-2) return "*";
  return "";
}

/// Shuffles the labels n_shuffles times and reports the z-score of the
/// observed statistic against the shuffled population (population std).
inline PermutationReport permutation_test(const CommGraph& g, const StatusLabels& labels, const NamedStatistic& stat,
                                          std::size_t n_shuffles, std::uint64_t seed, std::size_t threads = 1) {
  if (n_shuffles < 2) throw Error(ErrorKind::Config, "permutation test needs at least 2 shuffles");
  if (!labels.fully_observed())
    throw Error(ErrorKind::PartialLabels, "permutation test needs every node labeled");
  if (labels.size() != g.size()) throw Error(ErrorKind::Shape, "labels do not cover the graph");

  PermutationReport r;
  r.statistic = stat.name;
  r.n_shuffles = n_shuffles;
  r.seed = seed;
  r.observed = stat.fn(g, labels);

  std::vector<double> null_values(n_shuffles);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto rng = shuffle_generator(seed, i);
      null_values[i] = stat.fn(g, permute_labels(labels, rng));
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, n_shuffles);
  if (threads == 1) {
    work(0, n_shuffles);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_shuffles + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(n_shuffles, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  // Reduction in shuffle-index order so the result is independent of threads.
  double sum = 0.0;
  std::size_t defined = 0;
  for (double x : null_values) {
    if (std::isnan(x)) continue;
    sum += x;
    ++defined;
  }
  r.undefined_shuffles = n_shuffles - defined;
  if (defined == 0 || std::isnan(r.observed)) {
    r.degenerate = true;
    r.null_mean = defined ? sum / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.null_mean = sum / static_cast<double>(defined);
  double ss = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double x : null_values) {
    if (std::isnan(x)) continue;
    ss += (x - r.null_mean) * (x - r.null_mean);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  r.null_std = lo == hi ? 0.0 : std::sqrt(ss / static_cast<double>(defined));

  const double dev = std::abs(r.observed - r.null_mean);
  std::size_t extreme = 0;
  for (double x : null_values)
    if (!std::isnan(x) && std::abs(x - r.null_mean) >= dev - 1e-12) ++extreme;
  r.p_permutation = static_cast<double>(1 + extreme) / static_cast<double>(defined + 1);

  if (!(r.null_std > 0.0)) {
    r.degenerate = true;
    return r;
  }
  r.z = (r.observed - r.null_mean) / r.null_std;
  r.p_normal = std::erfc(std::abs(*r.z) / std::sqrt(2.0));
  r.significant = std::abs(*r.z) > kSignificanceSigmas;
  return r;
}

// ---------------------------------------------------------------------------
// Statistic library
// ---------------------------------------------------------------------------

struct StatLibraryOptions {
  double rho = 0.21;
  StructuralHoleScorer scorer = burt_scorer();
};

namespace detail {

inline double nan_if_empty(const std::optional<double>& x) {
  return x.value_or(std::numeric_limits<double>::quiet_NaN());
}

// Node order by hole-spanning score (descending, undefined last, id ascending),
// computed once per graph; selecting from it is linear in n per evaluation.
class ShRanking {
 public:
  ShRanking(const CommGraph& g, const StructuralHoleScorer& scorer) : graph_(&g), size_(g.size()) {
    order_ = rank_labeled(scorer(g), StatusLabels(std::vector<std::optional<Status>>(g.size(), Status::Manager)));
  }

  bool matches(const CommGraph& g) const { return &g == graph_ && g.size() == size_; }

  // Fractions of managers and subordinates among the top ceil(rho * n_labeled).
  std::pair<double, double> fractions(const StatusLabels& labels, double rho) const {
    const std::size_t n_m = labels.count(Status::Manager);
    const std::size_t n_s = labels.count(Status::Subordinate);
    const std::size_t take = std::min(top_fraction_count(rho, n_m + n_s), n_m + n_s);
    std::size_t flagged_m = 0;
    std::size_t flagged_s = 0;
    for (NodeId v : order_) {
      if (flagged_m + flagged_s == take) break;
      if (labels.is(v, Status::Manager)) ++flagged_m;
      if (labels.is(v, Status::Subordinate)) ++flagged_s;
    }
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    return {n_m ? static_cast<double>(flagged_m) / static_cast<double>(n_m) : nan,
            n_s ? static_cast<double>(flagged_s) / static_cast<double>(n_s) : nan};
  }

 private:
  const CommGraph* graph_;
  std::size_t size_;
  std::vector<NodeId> order_;
};

// Sum of common-neighbor counts over unordered pairs of each tie type, via
// the identity sum_{u<v} |N(u) ∩ N(v)| [types] = sum_w (pairs of that type in N(w)).
inline double homophily_mean_all_pairs(const CommGraph& g, const StatusLabels& labels, TieType type) {
  double total = 0.0;
  for (NodeId w = 0; w < g.size(); ++w) {
    double m = 0.0;
    double s = 0.0;
    for (NodeId u : g.neighbors(w)) {
      if (labels.is(u, Status::Manager)) m += 1.0;
      if (labels.is(u, Status::Subordinate)) s += 1.0;
    }
    switch (type) {
      case TieType::MM: total += m * (m - 1.0) / 2.0; break;
      case TieType::SS: total += s * (s - 1.0) / 2.0; break;
      case TieType::MS: total += m * s; break;
    }
  }
  const auto n_m = static_cast<double>(labels.count(Status::Manager));
  const auto n_s = static_cast<double>(labels.count(Status::Subordinate));
  double pairs = 0.0;
  switch (type) {
    case TieType::MM: pairs = n_m * (n_m - 1.0) / 2.0; break;
    case TieType::SS: pairs = n_s * (n_s - 1.0) / 2.0; break;
    case TieType::MS: pairs = n_m * n_s; break;
  }
  return pairs > 0.0 ? total / pairs : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// The labeled-graph statistics tested against the shuffled null: structural
/// hole fractions, group-mean balance ratios, and mean common neighbors per
/// tie type. Structural-hole scores for `g` are computed once up front; other
/// graphs passed to the statistics are scored on demand.
inline std::vector<NamedStatistic> stat_library(const CommGraph& g, const StatLibraryOptions& options = {}) {
  auto ranking = std::make_shared<const detail::ShRanking>(g, options.scorer);
  const double rho = options.rho;
  const auto scorer = options.scorer;
  auto sh = [ranking, rho, scorer](const CommGraph& graph, const StatusLabels& labels) {
    if (ranking->matches(graph)) return ranking->fractions(labels, rho);
    return detail::ShRanking(graph, scorer).fractions(labels, rho);
  };

  std::vector<NamedStatistic> lib;
  lib.push_back({"p_manager_is_sh", [sh](const CommGraph& gr, const StatusLabels& l) { return sh(gr, l).first; }});
  lib.push_back({"p_subordinate_is_sh", [sh](const CommGraph& gr, const StatusLabels& l) { return sh(gr, l).second; }});

  for (Status group : {Status::Manager, Status::Subordinate}) {
    for (BalanceKind kind : {BalanceKind::ManagerFriends, BalanceKind::SubordinateFriends, BalanceKind::AllFriends}) {
      static constexpr const char* kKindNames[] = {"m_sb", "s_sb", "sb"};
      std::string name = std::string("balance_") + status_code(group) + "_" + kKindNames[static_cast<int>(kind)];
      lib.push_back({std::move(name), [group, kind](const CommGraph& gr, const StatusLabels& l) {
                       double sum = 0.0;
                       std::size_t count = 0;
                       for (NodeId v = 0; v < gr.size(); ++v) {
                         if (!l.is(v, group)) continue;
                         if (auto x = balance_value(balance_ratios(gr, l, v), kind)) {
                           sum += *x;
                           ++count;
                         }
                       }
                       return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
                     }});
    }
  }

  for (TieType t : kTieTypes) {
    lib.push_back({std::string("common_neighbors_") + to_string(t),
                   [t](const CommGraph& gr, const StatusLabels& l) { return detail::homophily_mean_all_pairs(gr, l, t); }});
  }
  return lib;
}

inline const NamedStatistic& find_statistic(const std::vector<NamedStatistic>& lib, const std::string& name) {
  for (const auto& s : lib)
    if (s.name == name) return s;
  throw Error(ErrorKind::Config, "unknown statistic " + name);
}

}  // namespace socstatus
