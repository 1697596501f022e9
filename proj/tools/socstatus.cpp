// Batch front end: analyze, nulltest, synth, train, predict, evaluate.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "socstatus/baselines.hpp"
#include "socstatus/error.hpp"
#include "socstatus/features.hpp"
#include "socstatus/fgm.hpp"
#include "socstatus/graph.hpp"
#include "socstatus/ingest.hpp"
#include "socstatus/model.hpp"
#include "socstatus/nullmodel.hpp"
#include "socstatus/pipeline.hpp"
#include "socstatus/report.hpp"
#include "socstatus/socmetrics.hpp"

namespace {

using namespace socstatus;
using nlohmann::json;

enum Exit { kOk = 0, kInternal = 1, kBadInput = 2, kBudget = 3, kModel = 4 };

struct RunConfig {
  std::string subcommand;
  std::string events;
  std::string labels;
  std::string edgelist;
  std::string model;
  std::string channel = "CALL";
  std::string time_unit = "month";
  std::uint64_t min_events = 1;
  double rho = 0.21;
  std::size_t shuffles = 10000;
  std::uint64_t seed = 1;
  std::size_t bins = 4;
  std::size_t folds = 5;
  fgm::TrainConfig fgm;
  SyntheticConfig synth;
  std::string format = "both";
  // Not echoed into outputs, which must not depend on them.
  std::string out;
  std::size_t threads = 1;

  bool want_json() const { return format != "tsv"; }
  bool want_tsv() const { return format != "json"; }
};

json to_json(const RunConfig& c) {
  json j;
  j["subcommand"] = c.subcommand;
  json inputs = json::object();
  if (!c.events.empty()) inputs["events"] = c.events;
  if (!c.labels.empty()) inputs["labels"] = c.labels;
  if (!c.edgelist.empty()) inputs["edgelist"] = c.edgelist;
  if (!c.model.empty()) inputs["model"] = c.model;
  j["inputs"] = inputs;
  j["channel"] = c.channel;
  j["time_unit"] = c.time_unit;
  j["min_events"] = c.min_events;
  j["rho"] = c.rho;
  j["shuffles"] = c.shuffles;
  j["seed"] = c.seed;
  j["bins"] = c.bins;
  j["folds"] = c.folds;
  j["fgm"] = {{"eta", c.fgm.eta},
              {"max_epochs", c.fgm.max_epochs},
              {"grad_tol", c.fgm.grad_tol},
              {"lambda", c.fgm.lambda},
              {"inference", fgm::to_string(c.fgm.inference.mode)},
              {"lbp_max_iters", c.fgm.inference.lbp.max_iters},
              {"lbp_damping", c.fgm.inference.lbp.damping},
              {"lbp_tol", c.fgm.inference.lbp.tol}};
  if (c.subcommand == "synth")
    j["synth"] = {{"n", c.synth.n},
                  {"manager_fraction", c.synth.manager_fraction},
                  {"p_mm", c.synth.p_mm},
                  {"p_ms", c.synth.p_ms},
                  {"p_ss", c.synth.p_ss},
                  {"event_rate_manager", c.synth.event_rate_manager},
                  {"event_rate_subordinate", c.synth.event_rate_subordinate}};
  j["format"] = c.format;
  return j;
}

// Stage seeds derived from the single --seed (splitmix64 over seed and tag).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) {
  Fnv1a h;
  h.update(stage);
  std::uint64_t z = seed ^ h.value();
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void validate(const RunConfig& c) {
  auto need = [&](const std::string& v, const char* flag) {
    if (v.empty()) throw Error(ErrorKind::Config, c.subcommand + " needs " + flag);
  };
  need(c.out, "--out");
  if (c.format != "json" && c.format != "tsv" && c.format != "both")
    throw Error(ErrorKind::Config, "--format must be json, tsv or both");
  if (!parse_channel(c.channel)) throw Error(ErrorKind::Config, "unknown channel " + c.channel);
  if (!parse_time_unit(c.time_unit)) throw Error(ErrorKind::Config, "unknown time unit " + c.time_unit);
  if (!(c.rho > 0.0 && c.rho < 1.0)) throw Error(ErrorKind::Config, "--rho must lie in (0, 1)");
  if (c.shuffles < 2) throw Error(ErrorKind::Config, "--shuffles must be at least 2");
  if (c.bins < 2) throw Error(ErrorKind::Config, "--bins must be at least 2");
  if (c.folds < 2) throw Error(ErrorKind::Config, "--folds must be at least 2");
  if (c.min_events < 1) throw Error(ErrorKind::Config, "--min-events must be at least 1");
  if (!(c.fgm.eta > 0.0)) throw Error(ErrorKind::Config, "--eta must be positive");
  if (!(c.fgm.lambda >= 0.0)) throw Error(ErrorKind::Config, "--lambda must be non-negative");
  if (c.subcommand == "synth") {
    validate(c.synth);
    return;
  }
  if (!c.events.empty() && !c.edgelist.empty()) throw Error(ErrorKind::Config, "give --events or --edgelist, not both");
  if (c.events.empty() && c.edgelist.empty()) throw Error(ErrorKind::Config, c.subcommand + " needs --events or --edgelist");
  if (!c.edgelist.empty()) need(c.labels, "--labels");
  if (c.subcommand == "analyze" || c.subcommand == "nulltest" || c.subcommand == "train" ||
      c.subcommand == "evaluate")
    need(c.labels, "--labels");
  if (c.subcommand == "predict") need(c.model, "--model");
}

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

struct Inputs {
  Dataset data;
  std::string hash;
};

// Prefixes library errors with the file they came from.
template <class F>
auto from_file(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    const std::string what = e.what();
    if (what.find(path) != std::string::npos) throw;
    throw Error(e.kind(), path + ": " + what);
  }
}

std::string input_hash(const RunConfig& c) {
  Fnv1a h;
  for (const auto* path : {&c.events, &c.labels, &c.edgelist, &c.model}) {
    if (path->empty()) continue;
    const auto bytes = read_file_bytes(*path);
    h.update(std::to_string(bytes.size()));
    h.update(":");
    h.update(bytes);
  }
  return h.hex();
}

Inputs load_inputs(const RunConfig& c) {
  Inputs in;
  in.hash = input_hash(c);
  if (!c.edgelist.empty()) {
    in.data = from_file(c.edgelist, [&] { return load_prepared_edgelist(c.edgelist, c.labels); });
    return in;
  }
  const auto events = from_file(c.events, [&] { return read_events_file(c.events); });
  if (events.report.malformed)
    std::cerr << c.events << ": skipped " << events.report.malformed << " malformed rows\n";
  LabelList labels;
  if (!c.labels.empty()) labels = from_file(c.labels, [&] { return read_labels_file(c.labels); });
  in.data = from_file(c.events, [&] {
    return build_dataset(events.events, labels, *parse_channel(c.channel), *parse_time_unit(c.time_unit),
                         c.min_events);
  });
  return in;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

struct Emitter {
  const RunConfig& cfg;
  std::string hash;
  OutputSet files;

  json envelope(const std::string& kind, json report) const {
    json j;
    j["report"] = kind;
    j["run_config"] = to_json(cfg);
    j["input_hash"] = "fnv1a64:" + hash;
    j["data"] = std::move(report);
    return j;
  }

  void emit(const std::string& stem, json report, const std::vector<Table>& tables) {
    if (cfg.want_json()) files.add(stem + ".json", envelope(stem, std::move(report)).dump(2) + "\n");
    if (cfg.want_tsv()) {
      std::string text = comment_header(to_json(cfg), hash);
      for (std::size_t i = 0; i < tables.size(); ++i) {
        if (i) text += "\n";
        text += tables[i].render();
      }
      files.add(stem + ".tsv", text);
    }
  }

  void raw(const std::string& name, const std::string& body) {
    files.add(name, comment_header(to_json(cfg), hash) + body);
  }
};

const char* group_name(std::size_t g) { return g == 0 ? "managers" : "subordinates"; }

json to_json(const TopologyStats& s) {
  return {{"nodes", s.nodes},
          {"edges", s.edges},
          {"avg_clustering", s.avg_clustering},
          {"assortativity", json_or_null(s.assortativity)},
          {"components", s.components}};
}

json to_json(const CliqueDistribution& d) {
  json hist = json::array();
  for (const auto& [size, count] : d.histogram) hist.push_back({{"size", size}, {"count", count}});
  return {{"histogram", hist}, {"max_size", d.max_size}, {"total", d.total}, {"isolated_nodes", d.isolated_nodes}};
}

Subgraph group_subgraph(const Dataset& d, Status s) {
  return induced_subgraph(d.graph, [&](NodeId v) { return d.labels.is(v, s); });
}

void run_analyze(const RunConfig& cfg, const Inputs& in, Emitter& out) {
  const auto& d = in.data;

  {
    json j;
    Table t{{"network", "nodes", "edges", "cc", "assortativity", "components"}, {}};
    auto row = [&](const std::string& name, const CommGraph& g) {
      const auto s = topology_stats(g);
      j[name] = to_json(s);
      t.add({name, std::to_string(s.nodes), std::to_string(s.edges), fixed(s.avg_clustering),
             fixed(s.assortativity), std::to_string(s.components)});
    };
    row("all", d.graph);
    row("managers", group_subgraph(d, Status::Manager).graph);
    row("subordinates", group_subgraph(d, Status::Subordinate).graph);
    j["channel"] = to_string(d.channel);
    out.emit("topology", j, {t});
  }

  {
    json j;
    Table t{{"pairs", "tie", "count", "mean_common_neighbors", "ci95"}, {}};
    for (bool edges_only : {false, true}) {
      const auto r = homophily_report(d.graph, d.labels, edges_only);
      const char* mode = edges_only ? "linked" : "all";
      for (TieType tie : kTieTypes) {
        const auto& s = r[tie];
        j[mode][to_string(tie)] = {
            {"pairs", s.pairs}, {"mean", json_or_null(s.mean)}, {"ci_halfwidth", json_or_null(s.ci_halfwidth)}};
        t.add({mode, to_string(tie), std::to_string(s.pairs), fixed(s.mean), fixed(s.ci_halfwidth)});
      }
    }
    out.emit("homophily", j, {t});
  }

  {
    const auto r = balance_report(d.graph, d.labels);
    static constexpr const char* kKinds[] = {"m_sb", "s_sb", "sb"};
    json j;
    Table t{{"group", "ratio", "mean", "defined", "undefined"}, {}};
    for (std::size_t g = 0; g < 2; ++g) {
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& m = r.group_means[g][k];
        j[group_name(g)][kKinds[k]] = {
            {"mean", json_or_null(m.mean)}, {"defined", m.defined}, {"undefined", m.undefined}};
        t.add({group_name(g), kKinds[k], fixed(m.mean), std::to_string(m.defined), std::to_string(m.undefined)});
      }
    }
    out.emit("balance", j, {t});
  }

  {
    const auto r = clique_report(d.graph, d.labels);
    json j;
    Table summary{{"network", "max_size", "cliques", "isolated_nodes"}, {}};
    Table hist{{"network", "size", "count"}, {}};
    auto add = [&](const char* name, const CliqueDistribution& dist) {
      j[name] = to_json(dist);
      summary.add({name, std::to_string(dist.max_size), std::to_string(dist.total), std::to_string(dist.isolated_nodes)});
      for (const auto& [size, count] : dist.histogram) hist.add({name, std::to_string(size), std::to_string(count)});
    };
    add("all", r.all);
    add("managers", r.managers);
    add("subordinates", r.subordinates);
    out.emit("cliques", j, {summary, hist});
  }

  {
    const auto r = select_structural_holes(d.graph, d.labels, cfg.rho);
    json j;
    j["scorer"] = "negated_burt_constraint";
    j["rho"] = cfg.rho;
    j["flagged_count"] = r.flagged_count;
    j["managers"] = r.managers;
    j["subordinates"] = r.subordinates;
    j["p_manager_is_sh"] = json_or_null(r.p_manager_is_sh);
    j["p_subordinate_is_sh"] = json_or_null(r.p_subordinate_is_sh);
    json nodes = json::array();
    Table summary{{"group", "labeled", "fraction_sh"}, {}};
    summary.add({"managers", std::to_string(r.managers), fixed(r.p_manager_is_sh)});
    summary.add({"subordinates", std::to_string(r.subordinates), fixed(r.p_subordinate_is_sh)});
    Table t{{"node", "status", "score", "flagged"}, {}};
    for (NodeId v = 0; v < d.graph.size(); ++v) {
      const auto& label = d.labels[v];
      const std::string status = label ? std::string(1, status_code(*label)) : "?";
      nodes.push_back({{"node", d.graph.name(v)},
                       {"status", label ? json(status) : json()},
                       {"score", json_or_null(r.scores[v])},
                       {"flagged", static_cast<bool>(r.flagged[v])}});
      t.add({d.graph.name(v), status, fixed(r.scores[v], 6), r.flagged[v] ? "1" : "0"});
    }
    j["nodes"] = nodes;
    out.emit("structural_holes", j, {summary, t});
  }
}

json to_json(const PermutationReport& r) {
  return {{"statistic", r.statistic},
          {"observed", std::isnan(r.observed) ? json() : json(r.observed)},
          {"null_mean", std::isnan(r.null_mean) ? json() : json(r.null_mean)},
          {"null_std", r.null_std},
          {"z", json_or_null(r.z)},
          {"n_shuffles", r.n_shuffles},
          {"undefined_shuffles", r.undefined_shuffles},
          {"significant", r.significant},
          {"degenerate", r.degenerate},
          {"p_normal", json_or_null(r.p_normal)},
          {"p_permutation", json_or_null(r.p_permutation)},
          {"stars", significance_stars(r.p_normal)},
          {"seed", r.seed}};
}

void run_nulltest(const RunConfig& cfg, const Inputs& in, Emitter& out) {
  const auto& d = in.data;
  StatLibraryOptions opts;
  opts.rho = cfg.rho;
  const auto lib = stat_library(d.graph, opts);
  const std::uint64_t seed = derive_seed(cfg.seed, "nulltest");
  Table summary{{"statistic", "observed", "null_mean", "null_std", "z", "p_normal", "p_permutation", "stars"}, {}};
  json all = json::array();
  for (const auto& stat : lib) {
    const auto r = permutation_test(d.graph, d.labels, stat, cfg.shuffles, seed, cfg.threads);
    std::vector<std::string> row{r.statistic,
                                 fixed(r.observed),
                                 fixed(r.null_mean),
                                 fixed(r.null_std),
                                 fixed(r.z, 3),
                                 r.p_normal ? fixed(*r.p_normal, 6) : "NA",
                                 r.p_permutation ? fixed(*r.p_permutation, 6) : "NA",
                                 significance_stars(r.p_normal)};
    Table t{summary.header, {row}};
    out.emit("null_" + r.statistic, to_json(r), {t});
    summary.add(row);
    all.push_back(to_json(r));
  }
  out.emit("nulltest", all, {summary});
}

void run_synth(const RunConfig& cfg, Emitter& out) {
  auto sc = cfg.synth;
  sc.seed = derive_seed(cfg.seed, "synth");
  sc.channel = *parse_channel(cfg.channel);
  const auto corpus = generate_synthetic_corpus(sc);
  std::ostringstream ev;
  write_events(ev, corpus.events);
  std::ostringstream lb;
  write_labels(lb, corpus.labels);
  out.raw("events.csv", ev.str());
  out.raw("labels.csv", lb.str());
}

void run_train(const RunConfig& cfg, const Inputs& in, Emitter& out) {
  const auto& d = in.data;
  const auto raw = raw_feature_matrix(d.graph, d.attributes);
  const auto model = fit_model(d.graph, raw, d.labels, cfg.bins, cfg.fgm);
  auto j = to_json(model);
  j["run_config"] = to_json(cfg);
  j["input_hash"] = "fnv1a64:" + out.hash;
  out.files.add("model.json", j.dump(2) + "\n");
}

void run_predict(const RunConfig& cfg, const Inputs& in, Emitter& out) {
  const auto& d = in.data;
  const auto model = read_model_file(cfg.model);
  const auto raw = raw_feature_matrix(d.graph, d.attributes);
  const StatusLabels clamps = cfg.labels.empty() ? StatusLabels(d.graph.size()) : d.labels;
  const auto p = apply_model(model, d.graph, raw, clamps);
  std::string body = "node,status,confidence\n";
  for (NodeId v = 0; v < d.graph.size(); ++v)
    body += d.graph.name(v) + "," + status_code(*p.labels[v]) + "," + fixed(p.confidence[v], 6) + "\n";
  if (!p.converged) std::cerr << "warning: belief propagation did not converge\n";
  out.raw("predictions.csv", body);
}

json to_json(const EvalReport& r) {
  return {{"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"accuracy", r.accuracy},
          {"confusion", {{r.confusion[0][0], r.confusion[0][1]}, {r.confusion[1][0], r.confusion[1][1]}}}};
}

void run_evaluate(const RunConfig& cfg, const Inputs& in, Emitter& out) {
  CrossValidationConfig cv;
  cv.k = cfg.folds;
  cv.seed = derive_seed(cfg.seed, "split");
  cv.bins = cfg.bins;
  cv.fgm = cfg.fgm;
  cv.threads = cfg.threads;
  const auto r = cross_validate(in.data, cv);
  json j;
  j["protocol"] = r.protocol;
  j["k"] = r.k;
  j["split_seed"] = r.seed;
  Table t{{"Method", "Precision", "Recall", "F1", "Accuracy"}, {}};
  for (const auto& m : r.methods) {
    json folds = json::array();
    for (const auto& f : m.folds) folds.push_back(to_json(f));
    j["methods"][m.method] = {{"mean", to_json(m.mean)}, {"folds", folds}};
    t.add({m.method, fixed(m.mean.precision), fixed(m.mean.recall), fixed(m.mean.f1), fixed(m.mean.accuracy)});
  }
  out.emit("eval", j, {t});
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::BudgetExceeded: return kBudget;
    case ErrorKind::ModelMismatch: return kModel;
    default: return kBadInput;
  }
}

void add_common(CLI::App* sub, RunConfig& c, bool dataset) {
  sub->add_option("--out", c.out, "Output directory")->required();
  sub->add_option("--format", c.format, "json, tsv or both");
  sub->add_option("--seed", c.seed, "Seed for every random stage");
  sub->add_option("--threads", c.threads, "Worker threads");
  sub->add_option("--channel", c.channel, "call, sms or email");
  if (!dataset) return;
  sub->add_option("--events", c.events, "Event log CSV");
  sub->add_option("--labels", c.labels, "node,status CSV");
  sub->add_option("--edgelist", c.edgelist, "Pre-extracted src,dst,weight CSV");
  sub->add_option("--time-unit", c.time_unit, "month or year");
  sub->add_option("--min-events", c.min_events, "Events needed for a tie");
  sub->add_option("--rho", c.rho, "Structural-hole top fraction");
  sub->add_option("--bins", c.bins, "Equal-frequency bins per attribute");
}

void add_fgm(CLI::App* sub, RunConfig& c) {
  sub->add_option("--eta", c.fgm.eta, "FGM learning rate");
  sub->add_option("--epochs", c.fgm.max_epochs, "FGM epochs");
  sub->add_option("--lambda", c.fgm.lambda, "FGM L2 penalty");
  sub->add_option("--grad-tol", c.fgm.grad_tol, "FGM stopping gradient");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Social status analysis of communication networks"};
  app.require_subcommand(1);

  auto* analyze = app.add_subcommand("analyze", "Topology, homophily, balance, cliques, structural holes");
  add_common(analyze, cfg, true);
  auto* nulltest = app.add_subcommand("nulltest", "Label-shuffle significance of every statistic");
  add_common(nulltest, cfg, true);
  nulltest->add_option("--shuffles", cfg.shuffles, "Label shuffles");
  auto* synth = app.add_subcommand("synth", "Planted rich-club event log and labels");
  add_common(synth, cfg, false);
  synth->add_option("--n", cfg.synth.n, "Nodes");
  synth->add_option("--manager-fraction", cfg.synth.manager_fraction, "Fraction of managers");
  synth->add_option("--p-mm", cfg.synth.p_mm, "Manager-manager tie probability");
  synth->add_option("--p-ms", cfg.synth.p_ms, "Manager-subordinate tie probability");
  synth->add_option("--p-ss", cfg.synth.p_ss, "Subordinate-subordinate tie probability");
  synth->add_option("--rate-manager", cfg.synth.event_rate_manager, "Mean events per manager tie orientation");
  synth->add_option("--rate-subordinate", cfg.synth.event_rate_subordinate, "Mean events otherwise");
  auto* train = app.add_subcommand("train", "Fit the factor graph model");
  add_common(train, cfg, true);
  add_fgm(train, cfg);
  auto* predict = app.add_subcommand("predict", "Label nodes with a trained model");
  add_common(predict, cfg, true);
  predict->add_option("--model", cfg.model, "model.json from train");
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validated NB, LRC and FGM");
  add_common(evaluate, cfg, true);
  add_fgm(evaluate, cfg);
  evaluate->add_option("--folds", cfg.folds, "Cross-validation folds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadInput;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  for (char& ch : cfg.channel) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));

  try {
    validate(cfg);
    Emitter out{cfg, "", {}};
    if (cfg.subcommand == "synth") {
      out.hash = Fnv1a().hex();
      run_synth(cfg, out);
    } else {
      const auto in = load_inputs(cfg);
      out.hash = in.hash;
      if (cfg.subcommand == "analyze") run_analyze(cfg, in, out);
      if (cfg.subcommand == "nulltest") run_nulltest(cfg, in, out);
      if (cfg.subcommand == "train") run_train(cfg, in, out);
      if (cfg.subcommand == "predict") run_predict(cfg, in, out);
      if (cfg.subcommand == "evaluate") run_evaluate(cfg, in, out);
    }
    out.files.commit(cfg.out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
