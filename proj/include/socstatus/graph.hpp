#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "socstatus/error.hpp"

namespace socstatus {

using NodeId = std::uint32_t;

enum class Status : std::uint8_t { Manager = 0, Subordinate = 1 };

inline char status_code(Status s) { return s == Status::Manager ? 'M' : 'S'; }

/// Per-node status assignment; nodes may be unknown.
class StatusLabels {
 public:
  StatusLabels() = default;
  explicit StatusLabels(std::size_t n) : labels_(n) {}
  explicit StatusLabels(std::vector<std::optional<Status>> labels) : labels_(std::move(labels)) {}

  std::size_t size() const { return labels_.size(); }
  const std::optional<Status>& operator[](std::size_t v) const { return labels_[v]; }
  std::optional<Status>& operator[](std::size_t v) { return labels_[v]; }

  bool is(std::size_t v, Status s) const { return labels_[v] && *labels_[v] == s; }
  bool known(std::size_t v) const { return labels_[v].has_value(); }

  std::size_t count(Status s) const {
    return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(),
                                                  [s](const auto& l) { return l && *l == s; }));
  }
  std::size_t count_known() const { return count(Status::Manager) + count(Status::Subordinate); }
  std::size_t count_unknown() const { return size() - count_known(); }
  bool fully_observed() const { return count_unknown() == 0; }

  const std::vector<std::optional<Status>>& values() const { return labels_; }

  friend bool operator==(const StatusLabels&, const StatusLabels&) = default;

 private:
  std::vector<std::optional<Status>> labels_;
};

/// Simple undirected communication graph with per-orientation event counts.
///
/// Neighbor lists are sorted, symmetric, and free of self-loops. Directed
/// event counts are only stored for pairs that are also undirected edges.
class CommGraph {
 public:
  using EventCounts = std::map<std::pair<NodeId, NodeId>, std::uint64_t>;

  CommGraph() = default;

  /// Builds a graph on nodes 0..n-1. Duplicate edges collapse; self-loops and
  /// out-of-range endpoints are rejected.
  static CommGraph from_edges(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges,
                              EventCounts directed_events = {}, std::vector<std::string> names = {}) {
    CommGraph g;
    g.adjacency_.assign(n, {});
    for (auto [u, v] : edges) {
      if (u >= n || v >= n) throw Error(ErrorKind::Config, "edge endpoint out of range");
      if (u == v) throw Error(ErrorKind::Config, "self-loop on node " + std::to_string(u));
      g.adjacency_[u].push_back(v);
      g.adjacency_[v].push_back(u);
    }
    for (auto& nb : g.adjacency_) {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    for (const auto& [key, count] : directed_events) {
      if (count == 0) continue;
      if (!g.has_edge(key.first, key.second))
        throw Error(ErrorKind::Config, "event count on a pair without an edge");
      g.events_.emplace(key, count);
    }
    if (!names.empty() && names.size() != n)
      throw Error(ErrorKind::Config, "node name count does not match node count");
    g.names_ = std::move(names);
    return g;
  }

  std::size_t size() const { return adjacency_.size(); }
  std::size_t degree(NodeId v) const { return adjacency_[v].size(); }
  std::span<const NodeId> neighbors(NodeId v) const { return adjacency_[v]; }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& nb : adjacency_) twice += nb.size();
    return twice / 2;
  }

  bool has_edge(NodeId u, NodeId v) const {
    if (u >= size() || v >= size()) return false;
    const auto& a = adjacency_[u].size() <= adjacency_[v].size() ? adjacency_[u] : adjacency_[v];
    const NodeId target = &a == &adjacency_[u] ? v : u;
    return std::binary_search(a.begin(), a.end(), target);
  }

  /// Edge list with u < v, sorted lexicographically.
  std::vector<std::pair<NodeId, NodeId>> edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId u = 0; u < size(); ++u)
      for (NodeId v : adjacency_[u])
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  std::uint64_t events(NodeId src, NodeId dst) const {
    auto it = events_.find({src, dst});
    return it == events_.end() ? 0 : it->second;
  }
  const EventCounts& directed_events() const { return events_; }

  const std::vector<std::string>& names() const { return names_; }
  std::string name(NodeId v) const { return names_.empty() ? std::to_string(v) : names_[v]; }

  friend bool operator==(const CommGraph&, const CommGraph&) = default;

 private:
  std::vector<std::vector<NodeId>> adjacency_;
  EventCounts events_;
  std::vector<std::string> names_;
};

/// Edges among the neighbors of v over the number of neighbor pairs; 0 below degree 2.
inline double local_clustering(const CommGraph& g, NodeId v) {
  const auto nb = g.neighbors(v);
  const std::size_t d = nb.size();
  if (d < 2) return 0.0;
  std::size_t closed = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (g.has_edge(nb[i], nb[j])) ++closed;
  return static_cast<double>(closed) / (static_cast<double>(d) * static_cast<double>(d - 1) / 2.0);
}

inline double avg_clustering(const CommGraph& g) {
  if (g.size() == 0) throw Error(ErrorKind::EmptyGraph, "average clustering of an empty graph");
  double sum = 0.0;
  for (NodeId v = 0; v < g.size(); ++v) sum += local_clustering(g, v);
  return sum / static_cast<double>(g.size());
}

/// Pearson correlation of endpoint degrees over both orientations of every
/// edge. std::nullopt when there are no edges or the degree variance is zero.
inline std::optional<double> degree_assortativity(const CommGraph& g) {
  double sum = 0.0;
  std::size_t count = 0;
  for (NodeId u = 0; u < g.size(); ++u) {
    sum += static_cast<double>(g.degree(u)) * static_cast<double>(g.degree(u));
    count += g.degree(u);
  }
  if (count == 0) return std::nullopt;
  const double mean = sum / static_cast<double>(count);
  double cov = 0.0;
  double var = 0.0;
  for (NodeId u = 0; u < g.size(); ++u) {
    const double du = static_cast<double>(g.degree(u)) - mean;
    for (NodeId v : g.neighbors(u)) {
      const double dv = static_cast<double>(g.degree(v)) - mean;
      cov += du * dv;
      var += du * du;
    }
  }
  if (var <= 0.0) return std::nullopt;
  return std::clamp(cov / var, -1.0, 1.0);
}

inline std::size_t connected_components(const CommGraph& g) {
  std::vector<bool> seen(g.size(), false);
  std::vector<NodeId> stack;
  std::size_t components = 0;
  for (NodeId s = 0; s < g.size(); ++s) {
    if (seen[s]) continue;
    ++components;
    seen[s] = true;
    stack.push_back(s);
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : g.neighbors(u)) {
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
  }
  return components;
}

struct TopologyStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double avg_clustering = 0.0;
  std::optional<double> assortativity;
  std::size_t components = 0;
};

inline TopologyStats topology_stats(const CommGraph& g) {
  TopologyStats s;
  s.nodes = g.size();
  s.edges = g.edge_count();
  s.avg_clustering = g.size() == 0 ? 0.0 : avg_clustering(g);
  s.assortativity = degree_assortativity(g);
  s.components = connected_components(g);
  return s;
}

struct Subgraph {
  CommGraph graph;
  std::vector<std::optional<NodeId>> old_to_new;
  std::vector<NodeId> new_to_old;
};

/// Subgraph induced by the nodes satisfying keep, reindexed in ascending
/// order of the original ids.
template <class Keep>
Subgraph induced_subgraph(const CommGraph& g, Keep&& keep) {
  Subgraph sub;
  sub.old_to_new.assign(g.size(), std::nullopt);
  for (NodeId v = 0; v < g.size(); ++v) {
    if (keep(v)) {
      sub.old_to_new[v] = static_cast<NodeId>(sub.new_to_old.size());
      sub.new_to_old.push_back(v);
    }
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (auto [u, v] : g.edges())
    if (sub.old_to_new[u] && sub.old_to_new[v]) edges.emplace_back(*sub.old_to_new[u], *sub.old_to_new[v]);
  CommGraph::EventCounts events;
  for (const auto& [key, count] : g.directed_events()) {
    const auto& a = sub.old_to_new[key.first];
    const auto& b = sub.old_to_new[key.second];
    if (a && b) events.emplace(std::make_pair(*a, *b), count);
  }
  std::vector<std::string> names;
  if (!g.names().empty())
    for (NodeId v : sub.new_to_old) names.push_back(g.names()[v]);
  sub.graph = CommGraph::from_edges(sub.new_to_old.size(), edges, std::move(events), std::move(names));
  return sub;
}

}  // namespace socstatus
