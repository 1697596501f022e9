#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "socstatus/error.hpp"
#include "socstatus/events.hpp"
#include "socstatus/features.hpp"
#include "socstatus/graph.hpp"

namespace socstatus {

struct ParseReport {
  std::size_t rows = 0;
  std::size_t parsed = 0;
  std::size_t malformed = 0;
  std::size_t self_events = 0;
  std::vector<std::size_t> malformed_lines;
  std::vector<std::string> messages;
};

struct ParsedEvents {
  std::vector<EventRecord> events;
  ParseReport report;
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class Number>
std::optional<Number> parse_number(std::string_view s) {
  s = trim(s);
  Number value{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  if constexpr (std::is_floating_point_v<Number>) {
    if (!std::isfinite(value)) return std::nullopt;
  }
  return value;
}

// Reads the next line that is neither blank nor a '#' comment.
inline bool next_content_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    return true;
  }
  return false;
}

inline void check_stream(const std::istream& in, const std::string& what) {
  if (in.bad()) throw Error(ErrorKind::Io, "failed reading " + what);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return in;
}

}  // namespace detail

/// Parses `src,dst,timestamp,channel[,duration]` rows after a mandatory
/// header. Malformed rows are skipped and reported by line number.
inline ParsedEvents parse_events(std::istream& in, const std::string& source = "events") {
  ParsedEvents out;
  std::string line;
  std::size_t line_no = 0;
  if (!detail::next_content_line(in, line, line_no)) {
    detail::check_stream(in, source);
    throw Error(ErrorKind::Format, source + ": missing header src,dst,timestamp,channel[,duration]");
  }
  const auto header = detail::split_csv(detail::trim(line));
  if (header.size() < 4 || header.size() > 5 || detail::trim(header[0]) != "src" ||
      detail::trim(header[1]) != "dst" || detail::trim(header[2]) != "timestamp" ||
      detail::trim(header[3]) != "channel" || (header.size() == 5 && detail::trim(header[4]) != "duration"))
    throw Error(ErrorKind::Format, source + ": line " + std::to_string(line_no) +
                                       ": expected header src,dst,timestamp,channel[,duration]");

  while (detail::next_content_line(in, line, line_no)) {
    ++out.report.rows;
    const auto fields = detail::split_csv(detail::trim(line));
    auto reject = [&](const std::string& why) {
      ++out.report.malformed;
      out.report.malformed_lines.push_back(line_no);
      out.report.messages.push_back(source + ": line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() < 4 || fields.size() > 5) {
      reject("expected 4 or 5 fields");
      continue;
    }
    EventRecord e;
    e.src = std::string(detail::trim(fields[0]));
    e.dst = std::string(detail::trim(fields[1]));
    if (e.src.empty() || e.dst.empty()) {
      reject("empty node key");
      continue;
    }
    const auto ts = detail::parse_number<std::int64_t>(fields[2]);
    if (!ts || *ts < 0) {
      reject("timestamp must be a non-negative integer");
      continue;
    }
    e.timestamp = *ts;
    const auto ch = parse_channel(detail::trim(fields[3]));
    if (!ch) {
      reject("unknown channel '" + std::string(detail::trim(fields[3])) + "'");
      continue;
    }
    e.channel = *ch;
    if (fields.size() == 5 && !detail::trim(fields[4]).empty()) {
      const auto d = detail::parse_number<double>(fields[4]);
      if (!d || *d < 0.0) {
        reject("duration must be a non-negative number");
        continue;
      }
      if (e.channel != Channel::Call) {
        reject("duration is only valid on CALL events");
        continue;
      }
      e.duration = *d;
    }
    if (e.self_event()) ++out.report.self_events;
    ++out.report.parsed;
    out.events.push_back(std::move(e));
  }
  detail::check_stream(in, source);
  return out;
}

inline ParsedEvents read_events_file(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_events(in, path);
}

inline void write_events(std::ostream& os, const std::vector<EventRecord>& events) {
  const bool any_duration = std::any_of(events.begin(), events.end(), [](const auto& e) { return e.duration; });
  os << (any_duration ? "src,dst,timestamp,channel,duration\n" : "src,dst,timestamp,channel\n");
  std::ostringstream num;
  num.precision(17);
  for (const auto& e : events) {
    os << e.src << ',' << e.dst << ',' << e.timestamp << ',' << to_string(e.channel);
    if (any_duration) {
      os << ',';
      if (e.duration) {
        num.str("");
        num << *e.duration;
        os << num.str();
      }
    }
    os << '\n';
  }
}

using LabelList = std::vector<std::pair<std::string, Status>>;

/// Parses `node,status` rows with status M or S. A leading `node,status`
/// header is optional.
inline LabelList parse_labels(std::istream& in, const std::string& source = "labels") {
  LabelList out;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  std::set<std::string> seen;
  while (detail::next_content_line(in, line, line_no)) {
    const auto fields = detail::split_csv(detail::trim(line));
    if (first) {
      first = false;
      if (fields.size() == 2 && detail::trim(fields[0]) == "node" && detail::trim(fields[1]) == "status") continue;
    }
    const std::string where = source + ": line " + std::to_string(line_no);
    if (fields.size() != 2) throw Error(ErrorKind::Format, where + ": expected node,status");
    const auto key = detail::trim(fields[0]);
    const auto token = detail::trim(fields[1]);
    if (key.empty()) throw Error(ErrorKind::Format, where + ": empty node key");
    Status s;
    if (token == "M") {
      s = Status::Manager;
    } else if (token == "S") {
      s = Status::Subordinate;
    } else {
      throw Error(ErrorKind::Format, where + ": unknown status token '" + std::string(token) + "'");
    }
    if (!seen.insert(std::string(key)).second)
      throw Error(ErrorKind::Format, where + ": duplicate node '" + std::string(key) + "'");
    out.emplace_back(std::string(key), s);
  }
  detail::check_stream(in, source);
  return out;
}

inline LabelList read_labels_file(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_labels(in, path);
}

inline void write_labels(std::ostream& os, const LabelList& labels) {
  os << "node,status\n";
  for (const auto& [key, s] : labels) os << key << ',' << status_code(s) << '\n';
}

struct Dataset {
  CommGraph graph;
  StatusLabels labels;
  std::vector<CommAttributes> attributes;
  Channel channel = Channel::Call;
  TimeUnit time_unit = TimeUnit::Month;
};

namespace detail {

inline StatusLabels labels_for(const std::vector<std::string>& names, const LabelList& labels) {
  std::unordered_map<std::string, Status> by_key(labels.begin(), labels.end());
  StatusLabels out(names.size());
  for (std::size_t v = 0; v < names.size(); ++v) {
    auto it = by_key.find(names[v]);
    if (it != by_key.end()) out[v] = it->second;
  }
  return out;
}

}  // namespace detail

/// Builds the undirected projection of the events on one channel. A pair is
/// linked once it has at least `min_events` events in either direction.
/// Labeled nodes without events are kept as isolated nodes.
inline Dataset build_dataset(const std::vector<EventRecord>& events, const LabelList& labels, Channel channel,
                             TimeUnit time_unit, std::uint64_t min_events = 1) {
  if (min_events < 1) throw Error(ErrorKind::Config, "min_events must be at least 1");
  std::vector<EventRecord> selected;
  for (const auto& e : events)
    if (e.channel == channel && !e.self_event()) selected.push_back(e);
  if (selected.empty())
    throw Error(ErrorKind::EmptyDataset, std::string("no events on channel ") + to_string(channel));

  std::set<std::string> keys;
  for (const auto& e : selected) {
    keys.insert(e.src);
    keys.insert(e.dst);
  }
  for (const auto& [key, s] : labels) keys.insert(key);
  std::vector<std::string> names(keys.begin(), keys.end());
  std::unordered_map<std::string, NodeId> index;
  for (std::size_t v = 0; v < names.size(); ++v) index.emplace(names[v], static_cast<NodeId>(v));

  CommGraph::EventCounts counts;
  for (const auto& e : selected) ++counts[{index.at(e.src), index.at(e.dst)}];
  std::vector<std::pair<NodeId, NodeId>> edges;
  CommGraph::EventCounts kept;
  for (const auto& [key, c] : counts) {
    if (key.first > key.second && counts.count({key.second, key.first})) continue;
    const auto reverse = counts.find({key.second, key.first});
    const std::uint64_t total = c + (reverse == counts.end() ? 0 : reverse->second);
    if (total < min_events) continue;
    edges.emplace_back(std::min(key.first, key.second), std::max(key.first, key.second));
    kept.emplace(key, c);
    if (reverse != counts.end()) kept.emplace(reverse->first, reverse->second);
  }

  const std::size_t n = names.size();
  Dataset d;
  d.labels = detail::labels_for(names, labels);
  d.attributes = extract_attributes(selected, index, n, time_unit);
  d.graph = CommGraph::from_edges(n, edges, std::move(kept), std::move(names));
  d.channel = channel;
  d.time_unit = time_unit;
  return d;
}

/// Loads a pre-extracted `src,dst,weight` edge list plus `node,status`
/// labels. The weight is split across orientations, the extra event of an
/// odd weight going to the lexicographically smaller source.
inline Dataset load_prepared_edgelist(std::istream& edges_in, std::istream& labels_in,
                                      const std::string& edges_source = "edges",
                                      const std::string& labels_source = "labels") {
  const LabelList labels = parse_labels(labels_in, labels_source);
  std::map<std::pair<std::string, std::string>, std::uint64_t> weights;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (detail::next_content_line(edges_in, line, line_no)) {
    const auto fields = detail::split_csv(detail::trim(line));
    if (first) {
      first = false;
      if (fields.size() == 3 && detail::trim(fields[0]) == "src" && detail::trim(fields[1]) == "dst" &&
          detail::trim(fields[2]) == "weight")
        continue;
    }
    const std::string where = edges_source + ": line " + std::to_string(line_no);
    if (fields.size() != 3) throw Error(ErrorKind::Format, where + ": expected src,dst,weight");
    std::string a(detail::trim(fields[0]));
    std::string b(detail::trim(fields[1]));
    const auto w = detail::parse_number<std::int64_t>(fields[2]);
    if (a.empty() || b.empty()) throw Error(ErrorKind::Format, where + ": empty node key");
    if (a == b) throw Error(ErrorKind::Format, where + ": self-loop");
    if (!w || *w < 1) throw Error(ErrorKind::Format, where + ": weight must be a positive integer");
    if (b < a) std::swap(a, b);
    weights[{a, b}] += static_cast<std::uint64_t>(*w);
  }
  detail::check_stream(edges_in, edges_source);
  if (weights.empty()) throw Error(ErrorKind::EmptyDataset, edges_source + ": no edges");

  std::set<std::string> keys;
  for (const auto& [pair, w] : weights) {
    keys.insert(pair.first);
    keys.insert(pair.second);
  }
  for (const auto& [key, s] : labels) keys.insert(key);
  std::vector<std::string> names(keys.begin(), keys.end());
  std::unordered_map<std::string, NodeId> index;
  for (std::size_t v = 0; v < names.size(); ++v) index.emplace(names[v], static_cast<NodeId>(v));

  std::vector<std::pair<NodeId, NodeId>> edges;
  CommGraph::EventCounts counts;
  for (const auto& [pair, w] : weights) {
    const NodeId a = index.at(pair.first);
    const NodeId b = index.at(pair.second);
    edges.emplace_back(a, b);
    counts[{a, b}] = (w + 1) / 2;
    if (w / 2 > 0) counts[{b, a}] = w / 2;
  }

  const std::size_t n = names.size();
  Dataset d;
  d.labels = detail::labels_for(names, labels);
  d.graph = CommGraph::from_edges(n, edges, std::move(counts), std::move(names));
  d.attributes = attributes_from_counts(d.graph);
  d.channel = Channel::Email;
  d.time_unit = TimeUnit::Year;
  return d;
}

inline Dataset load_prepared_edgelist(const std::string& edges_path, const std::string& labels_path) {
  auto e = detail::open_input(edges_path);
  auto l = detail::open_input(labels_path);
  return load_prepared_edgelist(e, l, edges_path, labels_path);
}

// ---------------------------------------------------------------------------
// Synthetic planted rich club
// ---------------------------------------------------------------------------

struct SyntheticConfig {
  std::size_t n = 200;
  double manager_fraction = 0.2;
  double p_mm = 0.4;
  double p_ms = 0.1;
  double p_ss = 0.05;
  double event_rate_manager = 6.0;
  double event_rate_subordinate = 2.0;
  std::int64_t horizon_seconds = 60LL * 86400LL;
  Channel channel = Channel::Call;
  std::uint64_t seed = 7;
};

inline void validate(const SyntheticConfig& cfg) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (cfg.n == 0) throw Error(ErrorKind::Config, "n must be positive");
  if (!(cfg.manager_fraction > 0.0 && cfg.manager_fraction < 1.0))
    throw Error(ErrorKind::Config, "manager_fraction must lie in (0, 1)");
  if (!prob(cfg.p_mm) || !prob(cfg.p_ms) || !prob(cfg.p_ss))
    throw Error(ErrorKind::Config, "edge probabilities must lie in [0, 1]");
  if (!(cfg.p_mm >= cfg.p_ms && cfg.p_ms >= cfg.p_ss))
    throw Error(ErrorKind::Config, "planted rich club needs p_mm >= p_ms >= p_ss");
  if (!(cfg.event_rate_manager >= 1.0) || !(cfg.event_rate_subordinate >= 1.0))
    throw Error(ErrorKind::Config, "event rates must be at least 1 per directed edge");
  if (cfg.horizon_seconds < 1) throw Error(ErrorKind::Config, "horizon must be positive");
}

struct SyntheticCorpus {
  std::vector<EventRecord> events;
  LabelList labels;
};

/// Event log and labels of a planted rich-club network. Managers are placed
/// at random node positions; each pair links with the probability of its
/// status pair; each orientation of a link carries 1 + Poisson(rate - 1)
/// events at the source's rate, uniformly spread over the horizon.
inline SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  const auto managers = static_cast<std::size_t>(std::floor(static_cast<double>(cfg.n) * cfg.manager_fraction));
  std::vector<Status> status(cfg.n, Status::Subordinate);
  std::fill(status.begin(), status.begin() + static_cast<std::ptrdiff_t>(managers), Status::Manager);
  std::shuffle(status.begin(), status.end(), rng);

  const std::size_t width = std::to_string(cfg.n - 1).size();
  auto key = [&](std::size_t v) {
    std::string s = std::to_string(v);
    return "n" + std::string(width - s.size(), '0') + s;
  };

  SyntheticCorpus corpus;
  for (std::size_t v = 0; v < cfg.n; ++v) corpus.labels.emplace_back(key(v), status[v]);

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> when(0, cfg.horizon_seconds - 1);
  auto rate_of = [&](std::size_t v) {
    return status[v] == Status::Manager ? cfg.event_rate_manager : cfg.event_rate_subordinate;
  };
  auto emit = [&](std::size_t src, std::size_t dst) {
    std::poisson_distribution<std::uint64_t> extra(rate_of(src) - 1.0);
    const std::uint64_t count = 1 + (rate_of(src) > 1.0 ? extra(rng) : 0);
    for (std::uint64_t i = 0; i < count; ++i)
      corpus.events.push_back({key(src), key(dst), when(rng), cfg.channel, std::nullopt});
  };
  for (std::size_t u = 0; u < cfg.n; ++u) {
    for (std::size_t v = u + 1; v < cfg.n; ++v) {
      const bool mu = status[u] == Status::Manager;
      const bool mv = status[v] == Status::Manager;
      const double p = mu && mv ? cfg.p_mm : (mu || mv ? cfg.p_ms : cfg.p_ss);
      if (coin(rng) >= p) continue;
      emit(u, v);
      emit(v, u);
    }
  }
  std::stable_sort(corpus.events.begin(), corpus.events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.timestamp, a.src, a.dst) < std::tie(b.timestamp, b.src, b.dst);
  });
  return corpus;
}

/// Dataset of a planted rich-club network. An edgeless draw still yields a
/// dataset of isolated labeled nodes.
inline Dataset generate_synthetic(const SyntheticConfig& cfg, TimeUnit time_unit = TimeUnit::Month) {
  auto corpus = generate_synthetic_corpus(cfg);
  if (corpus.events.empty()) {
    Dataset d;
    std::vector<std::string> names;
    for (const auto& [key, s] : corpus.labels) names.push_back(key);
    d.labels = detail::labels_for(names, corpus.labels);
    const std::size_t n = names.size();
    d.graph = CommGraph::from_edges(n, {}, {}, std::move(names));
    d.attributes.assign(cfg.n, CommAttributes{});
    d.channel = cfg.channel;
    d.time_unit = time_unit;
    return d;
  }
  return build_dataset(corpus.events, corpus.labels, cfg.channel, time_unit);
}

}  // namespace socstatus
