#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "socstatus/error.hpp"
#include "socstatus/features.hpp"
#include "socstatus/fgm.hpp"

namespace socstatus {

inline constexpr const char* kModelFormat = "socstatus-fgm";
inline constexpr int kModelFormatVersion = 1;

/// A trained factor-graph model together with the binning it was fitted
/// under.
struct FgmModel {
  std::string feature_version = kFeatureVersion;
  std::vector<std::string> feature_names;
  Binning binning;
  fgm::Theta theta;
  fgm::InferenceOptions inference;
  fgm::TrainConfig train;
  fgm::TrainTrace trace;

  friend bool operator==(const FgmModel& a, const FgmModel& b) {
    return a.feature_version == b.feature_version && a.feature_names == b.feature_names &&
           a.binning == b.binning && a.theta == b.theta;
  }
};

namespace detail {

inline fgm::InferenceMode parse_inference_mode(const std::string& s) {
  if (s == "auto") return fgm::InferenceMode::Auto;
  if (s == "exact") return fgm::InferenceMode::Exact;
  if (s == "loopy") return fgm::InferenceMode::Loopy;
  throw Error(ErrorKind::ModelMismatch, "unknown inference mode " + s);
}

inline nlohmann::json to_json(const fgm::InferenceOptions& o) {
  return {{"mode", fgm::to_string(o.mode)},
          {"lbp", {{"max_iters", o.lbp.max_iters}, {"damping", o.lbp.damping}, {"tol", o.lbp.tol}}}};
}

inline fgm::InferenceOptions inference_from_json(const nlohmann::json& j) {
  fgm::InferenceOptions o;
  o.mode = parse_inference_mode(j.at("mode").get<std::string>());
  o.lbp.max_iters = j.at("lbp").at("max_iters").get<std::size_t>();
  o.lbp.damping = j.at("lbp").at("damping").get<double>();
  o.lbp.tol = j.at("lbp").at("tol").get<double>();
  return o;
}

}  // namespace detail

inline nlohmann::json to_json(const FgmModel& m) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["format_version"] = kModelFormatVersion;
  j["feature_version"] = m.feature_version;
  j["feature_names"] = m.feature_names;
  j["binning"] = to_json(m.binning);
  j["theta"] = {{"node_weights", m.theta.node_weights},
                {"triangle_weights", m.theta.triangle_weights},
                {"l2_lambda", m.theta.l2_lambda}};
  j["inference"] = detail::to_json(m.inference);
  j["train"] = {{"eta", m.train.eta},
                {"max_epochs", m.train.max_epochs},
                {"grad_tol", m.train.grad_tol},
                {"lambda", m.train.lambda},
                {"max_halvings", m.train.max_halvings},
                {"inference", detail::to_json(m.train.inference)}};
  j["trace"] = {{"epochs", m.trace.epochs},
                {"converged", m.trace.converged},
                {"halvings", m.trace.halvings},
                {"nonconverged_inference", m.trace.nonconverged_inference},
                {"objective", m.trace.objective.empty() ? nlohmann::json() : nlohmann::json(m.trace.objective.back())}};
  return j;
}

/// Parses and validates a model document. Anything that does not describe a
/// model for the current feature set is a ModelMismatch.
inline FgmModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      throw Error(ErrorKind::ModelMismatch, "not a model file");
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw Error(ErrorKind::ModelMismatch, "model format version " + j.at("format_version").dump() + " unsupported");
    FgmModel m;
    m.feature_version = j.at("feature_version").get<std::string>();
    if (m.feature_version != kFeatureVersion)
      throw Error(ErrorKind::ModelMismatch, "model features " + m.feature_version + ", expected " + kFeatureVersion);
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.binning = binning_from_json(j.at("binning"));
    if (m.binning.raw_names != raw_feature_names())
      throw Error(ErrorKind::ModelMismatch, "model raw attributes differ from the current feature set");
    const auto& t = j.at("theta");
    m.theta.node_weights = t.at("node_weights").get<std::vector<double>>();
    const auto tri = t.at("triangle_weights").get<std::vector<double>>();
    if (tri.size() != fgm::kTriangleClasses) throw Error(ErrorKind::ModelMismatch, "model needs 4 triangle weights");
    std::copy(tri.begin(), tri.end(), m.theta.triangle_weights.begin());
    m.theta.l2_lambda = t.at("l2_lambda").get<double>();
    if (m.theta.node_weights.size() != m.binning.width() || m.feature_names.size() != m.binning.width())
      throw Error(ErrorKind::ModelMismatch, "model weights do not match its binning");
    if (!m.theta.finite()) throw Error(ErrorKind::ModelMismatch, "model weights are not finite");
    m.inference = detail::inference_from_json(j.at("inference"));
    const auto& tr = j.at("train");
    m.train.eta = tr.at("eta").get<double>();
    m.train.max_epochs = tr.at("max_epochs").get<std::size_t>();
    m.train.grad_tol = tr.at("grad_tol").get<double>();
    m.train.lambda = tr.at("lambda").get<double>();
    m.train.max_halvings = tr.at("max_halvings").get<std::size_t>();
    m.train.inference = detail::inference_from_json(tr.at("inference"));
    const auto& tc = j.at("trace");
    m.trace.epochs = tc.at("epochs").get<std::size_t>();
    m.trace.converged = tc.at("converged").get<bool>();
    m.trace.halvings = tc.at("halvings").get<std::size_t>();
    m.trace.nonconverged_inference = tc.at("nonconverged_inference").get<std::size_t>();
    if (!tc.at("objective").is_null()) m.trace.objective.push_back(tc.at("objective").get<double>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ModelMismatch, std::string("malformed model: ") + e.what());
  }
}

inline FgmModel parse_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ModelMismatch, std::string("model is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

inline FgmModel read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open model " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

/// Fits bins on the labeled nodes and trains the factor graph on the whole
/// graph with those labels clamped.
inline FgmModel fit_model(const CommGraph& g, const Matrix& raw, const StatusLabels& labels, std::size_t bins,
                          const fgm::TrainConfig& cfg) {
  std::vector<std::size_t> labeled;
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (labels[v]) labeled.push_back(v);
  if (labeled.empty()) throw Error(ErrorKind::DegenerateTraining, "no labeled nodes to train on");
  const auto features = discretize(raw, labeled, bins, raw_feature_names());
  const auto fg = fgm::build_factor_graph(g, features);
  auto result = fgm::train(fg, labels, cfg);
  FgmModel m;
  m.feature_names = features.feature_names;
  m.binning = features.binning;
  m.theta = std::move(result.theta);
  m.inference = cfg.inference;
  m.train = cfg;
  m.trace = std::move(result.trace);
  return m;
}

/// Applies the model's bins to `raw` and decodes every node, keeping any
/// known labels clamped.
inline fgm::Prediction apply_model(const FgmModel& m, const CommGraph& g, const Matrix& raw,
                                   const StatusLabels& clamps) {
  const auto features = apply_bins(raw, m.binning);
  if (features.feature_names != m.feature_names)
    throw Error(ErrorKind::ModelMismatch, "feature names differ from the model's");
  const auto fg = fgm::build_factor_graph(g, features);
  return fgm::predict(fg, m.theta, clamps, m.inference);
}

}  // namespace socstatus
