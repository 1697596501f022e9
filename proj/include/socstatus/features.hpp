#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "socstatus/error.hpp"
#include "socstatus/events.hpp"
#include "socstatus/graph.hpp"
#include "socstatus/socmetrics.hpp"

namespace socstatus {

/// Communication counts per time unit.
struct CommAttributes {
  double in_degree = 0.0;
  double out_degree = 0.0;
  double in_event = 0.0;
  double out_event = 0.0;

  friend bool operator==(const CommAttributes&, const CommAttributes&) = default;
};

/// Number of time units covered by a timestamp span: ceil(span / unit), at least 1.
inline std::int64_t time_unit_count(std::int64_t min_ts, std::int64_t max_ts, TimeUnit unit) {
  const std::int64_t span = std::max<std::int64_t>(0, max_ts - min_ts);
  const std::int64_t len = seconds_per(unit);
  return std::max<std::int64_t>(1, (span + len - 1) / len);
}

/// Per-node in/out degree and event counts divided by the number of time
/// units spanned by the events. Self-events and events touching keys outside
/// the index are ignored.
inline std::vector<CommAttributes> extract_attributes(std::span<const EventRecord> events,
                                                      const std::unordered_map<std::string, NodeId>& node_index,
                                                      std::size_t n, TimeUnit unit) {
  std::vector<CommAttributes> out(n);
  std::vector<std::set<NodeId>> receivers(n);
  std::vector<std::set<NodeId>> senders(n);
  std::optional<std::int64_t> lo;
  std::optional<std::int64_t> hi;
  for (const auto& e : events) {
    if (e.self_event()) continue;
    auto s = node_index.find(e.src);
    auto d = node_index.find(e.dst);
    if (s == node_index.end() || d == node_index.end()) continue;
    out[s->second].out_event += 1.0;
    out[d->second].in_event += 1.0;
    receivers[s->second].insert(d->second);
    senders[d->second].insert(s->second);
    lo = std::min(lo.value_or(e.timestamp), e.timestamp);
    hi = std::max(hi.value_or(e.timestamp), e.timestamp);
  }
  const double units = lo ? static_cast<double>(time_unit_count(*lo, *hi, unit)) : 1.0;
  for (std::size_t v = 0; v < n; ++v) {
    out[v].out_degree = static_cast<double>(receivers[v].size()) / units;
    out[v].in_degree = static_cast<double>(senders[v].size()) / units;
    out[v].out_event /= units;
    out[v].in_event /= units;
  }
  return out;
}

/// Same attributes from a graph's directed event counts, over `units` time units.
inline std::vector<CommAttributes> attributes_from_counts(const CommGraph& g, double units = 1.0) {
  std::vector<CommAttributes> out(g.size());
  for (const auto& [key, count] : g.directed_events()) {
    const auto c = static_cast<double>(count);
    out[key.first].out_event += c / units;
    out[key.first].out_degree += 1.0 / units;
    out[key.second].in_event += c / units;
    out[key.second].in_degree += 1.0 / units;
  }
  return out;
}

inline constexpr std::size_t kSocialFeatureCount = 5;

/// Social feature vector, in order: negated Burt constraint, local clustering,
/// all-friend balance ratio, degree, mean common neighbors with neighbors.
/// Undefined values are reported as 0.
inline std::array<double, kSocialFeatureCount> social_features(const CommGraph& g, NodeId v) {
  std::array<double, kSocialFeatureCount> f{};
  if (auto c = burt_constraint(g, v)) f[0] = -*c;
  f[1] = local_clustering(g, v);
  const std::vector<NodeId> friends(g.neighbors(v).begin(), g.neighbors(v).end());
  f[2] = detail::wedge_ratio(detail::count_wedges(g, friends)).value_or(0.0);
  f[3] = static_cast<double>(g.degree(v));
  if (g.degree(v) > 0) {
    double cn = 0.0;
    for (NodeId u : g.neighbors(v)) cn += static_cast<double>(common_neighbors(g, u, v));
    f[4] = cn / static_cast<double>(g.degree(v));
  }
  return f;
}

/// Bumped whenever the raw feature list or its order changes.
inline constexpr const char* kFeatureVersion = "comm4-social5-defined1.v1";

inline const std::vector<std::string>& raw_feature_names() {
  static const std::vector<std::string> names{
      "in_degree", "out_degree", "in_event",  "out_event",         "neg_constraint",
      "clustering", "balance",   "degree",    "mean_common_nbrs",  "balance_defined"};
  return names;
}

/// Dense row-major real matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Raw (continuous) per-node features: communication attributes, social
/// features, and the balance-defined indicator.
inline Matrix raw_feature_matrix(const CommGraph& g, std::span<const CommAttributes> attributes) {
  if (attributes.size() != g.size()) throw Error(ErrorKind::Shape, "attribute rows do not match node count");
  Matrix m(g.size(), raw_feature_names().size());
  for (NodeId v = 0; v < g.size(); ++v) {
    const auto& a = attributes[v];
    m(v, 0) = a.in_degree;
    m(v, 1) = a.out_degree;
    m(v, 2) = a.in_event;
    m(v, 3) = a.out_event;
    const auto s = social_features(g, v);
    for (std::size_t k = 0; k < s.size(); ++k) m(v, 4 + k) = s[k];
    m(v, 9) = g.degree(v) >= 2 ? 1.0 : 0.0;
  }
  return m;
}

/// Fitted cut points per raw column. A value x falls in bin
/// #{edges e : x > e}, so values outside the training range clamp.
struct Binning {
  std::vector<std::string> raw_names;
  std::vector<std::vector<double>> edges;

  std::size_t bins(std::size_t column) const { return edges[column].size() + 1; }
  std::size_t width() const {
    std::size_t w = 0;
    for (std::size_t c = 0; c < edges.size(); ++c) w += bins(c);
    return w;
  }
  std::size_t bin_of(std::size_t column, double x) const {
    const auto& e = edges[column];
    return static_cast<std::size_t>(std::lower_bound(e.begin(), e.end(), x) - e.begin());
  }

  friend bool operator==(const Binning&, const Binning&) = default;
};

struct FeatureMatrix {
  Matrix x;
  std::vector<std::string> feature_names;
  Binning binning;

  std::size_t rows() const { return x.rows; }
  std::size_t cols() const { return x.cols; }
};

namespace detail {

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Equal-frequency cut points fitted on `train_rows`. Duplicate cut points
/// merge and cut points at or above the training maximum are dropped, so a
/// constant column ends up with a single bin.
inline Binning fit_bins(const Matrix& raw, std::span<const std::size_t> train_rows, std::size_t n_bins,
                        std::vector<std::string> raw_names = {}) {
  if (n_bins < 2) throw Error(ErrorKind::Config, "n_bins must be at least 2");
  if (train_rows.empty()) throw Error(ErrorKind::Config, "binning needs training rows");
  if (raw_names.empty())
    for (std::size_t c = 0; c < raw.cols; ++c) raw_names.push_back("x" + std::to_string(c));
  if (raw_names.size() != raw.cols) throw Error(ErrorKind::Shape, "raw name count does not match columns");

  Binning b;
  b.raw_names = std::move(raw_names);
  b.edges.resize(raw.cols);
  std::vector<double> column(train_rows.size());
  for (std::size_t c = 0; c < raw.cols; ++c) {
    for (std::size_t i = 0; i < train_rows.size(); ++i) column[i] = raw(train_rows[i], c);
    std::sort(column.begin(), column.end());
    auto& e = b.edges[c];
    for (std::size_t j = 1; j < n_bins; ++j) {
      const double cut = detail::quantile_sorted(column, static_cast<double>(j) / static_cast<double>(n_bins));
      if (cut >= column.back()) continue;
      if (e.empty() || cut > e.back()) e.push_back(cut);
    }
  }
  return b;
}

/// One-hot encoding of every raw value under fitted bins.
inline FeatureMatrix apply_bins(const Matrix& raw, const Binning& b) {
  if (raw.cols != b.edges.size()) throw Error(ErrorKind::Shape, "raw columns do not match the fitted binning");
  FeatureMatrix fm;
  fm.binning = b;
  for (std::size_t c = 0; c < raw.cols; ++c) {
    if (b.bins(c) == 1) {
      fm.feature_names.push_back(b.raw_names[c] + "[const]");
      continue;
    }
    for (std::size_t k = 0; k < b.bins(c); ++k)
      fm.feature_names.push_back(b.raw_names[c] + "[" + std::to_string(k) + "]");
  }
  fm.x = Matrix(raw.rows, b.width());
  for (std::size_t r = 0; r < raw.rows; ++r) {
    std::size_t offset = 0;
    for (std::size_t c = 0; c < raw.cols; ++c) {
      fm.x(r, offset + b.bin_of(c, raw(r, c))) = 1.0;
      offset += b.bins(c);
    }
  }
  return fm;
}

inline FeatureMatrix discretize(const Matrix& raw, std::span<const std::size_t> train_rows, std::size_t n_bins,
                                std::vector<std::string> raw_names = {}) {
  return apply_bins(raw, fit_bins(raw, train_rows, n_bins, std::move(raw_names)));
}

inline nlohmann::json to_json(const Binning& b) {
  nlohmann::json j;
  j["raw_names"] = b.raw_names;
  j["edges"] = b.edges;
  return j;
}

inline Binning binning_from_json(const nlohmann::json& j) {
  Binning b;
  b.raw_names = j.at("raw_names").get<std::vector<std::string>>();
  b.edges = j.at("edges").get<std::vector<std::vector<double>>>();
  if (b.raw_names.size() != b.edges.size()) throw Error(ErrorKind::Format, "binning names and edges differ in length");
  for (const auto& e : b.edges)
    if (!std::is_sorted(e.begin(), e.end())) throw Error(ErrorKind::Format, "bin edges are not sorted");
  return b;
}

/// Sidecar metadata for a serialized feature matrix.
inline nlohmann::json feature_sidecar(const FeatureMatrix& fm) {
  nlohmann::json j;
  j["version"] = kFeatureVersion;
  j["rows"] = fm.rows();
  j["cols"] = fm.cols();
  j["feature_names"] = fm.feature_names;
  j["binning"] = to_json(fm.binning);
  return j;
}

/// Dense whitespace-separated rows, one node per line.
inline void write_dense(std::ostream& os, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c) os << ' ';
      os << m(r, c);
    }
    os << '\n';
  }
}

}  // namespace socstatus
