#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "socstatus/baselines.hpp"
#include "socstatus/features.hpp"
#include "socstatus/fgm.hpp"
#include "socstatus/ingest.hpp"

namespace socstatus {

struct CrossValidationConfig {
  std::size_t k = 5;
  std::uint64_t seed = 1;
  std::size_t bins = 4;
  fgm::TrainConfig fgm;
  LogisticConfig logistic;
  std::size_t threads = 1;
};

struct MethodScores {
  std::string method;
  std::vector<EvalReport> folds;
  /// Fold-averaged metrics; the confusion matrix is summed over folds.
  EvalReport mean;
};

struct CrossValidationReport {
  std::string protocol;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<MethodScores> methods;

  const MethodScores& method(const std::string& name) const {
    for (const auto& m : methods)
      if (m.method == name) return m;
    throw Error(ErrorKind::Config, "no method " + name);
  }
};

inline const std::vector<std::string>& cv_methods() {
  static const std::vector<std::string> names{"NB", "LRC", "FGM"};
  return names;
}

namespace detail {

inline Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
  return out;
}

inline std::vector<Status> select_labels(const StatusLabels& labels, const std::vector<std::size_t>& rows) {
  std::vector<Status> out;
  for (std::size_t r : rows) out.push_back(*labels[r]);
  return out;
}

inline EvalReport average(const std::vector<EvalReport>& folds) {
  EvalReport m;
  for (const auto& f : folds) {
    m.precision += f.precision;
    m.recall += f.recall;
    m.f1 += f.f1;
    m.accuracy += f.accuracy;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) m.confusion[a][b] += f.confusion[a][b];
  }
  const auto k = static_cast<double>(folds.size());
  m.precision /= k;
  m.recall /= k;
  m.f1 /= k;
  m.accuracy /= k;
  return m;
}

}  // namespace detail

/// Per-fold scores of one split: NB on raw attributes; LRC and FGM on the
/// binned features fitted to the training rows; FGM trained transductively
/// on the whole graph with the training labels clamped.
inline std::array<EvalReport, 3> evaluate_fold(const Dataset& d, const Matrix& raw, const SplitPlan& plan,
                                               std::size_t fold, const CrossValidationConfig& cfg) {
  const auto train = plan.train_rows(fold);
  const auto test = plan.test_rows(fold);
  const auto y_train = detail::select_labels(d.labels, train);
  const auto y_test = detail::select_labels(d.labels, test);

  std::array<EvalReport, 3> out;
  const auto nb = NaiveBayes::fit(detail::select_rows(raw, train), y_train);
  out[0] = evaluate(y_test, nb.predict(detail::select_rows(raw, test)).labels);

  const auto features = discretize(raw, train, cfg.bins, raw_feature_names());
  const auto lr = LogisticRegression::fit(detail::select_rows(features.x, train), y_train, cfg.logistic);
  out[1] = evaluate(y_test, lr.predict(detail::select_rows(features.x, test)).labels);

  const auto fg = fgm::build_factor_graph(d.graph, features);
  StatusLabels clamps(d.graph.size());
  for (std::size_t r : train) clamps[r] = d.labels[r];
  const auto model = fgm::train(fg, clamps, cfg.fgm);
  const auto pred = fgm::predict(fg, model.theta, clamps, cfg.fgm.inference);
  std::vector<Status> y_fgm;
  for (std::size_t r : test) y_fgm.push_back(*pred.labels[r]);
  out[2] = evaluate(y_test, y_fgm);
  return out;
}

/// Stratified k-fold comparison of NB, LRC and FGM through one evaluate path.
inline CrossValidationReport cross_validate(const Dataset& d, const CrossValidationConfig& cfg) {
  const auto plan = stratified_kfold(d.labels, cfg.k, cfg.seed);
  const auto raw = raw_feature_matrix(d.graph, d.attributes);
  std::vector<std::array<EvalReport, 3>> per_fold(cfg.k);
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t f = first; f < cfg.k; f += stride) per_fold[f] = evaluate_fold(d, raw, plan, f, cfg);
  };
  const std::size_t threads = std::clamp<std::size_t>(cfg.threads, 1, cfg.k);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }

  CrossValidationReport r;
  r.protocol = "stratified " + std::to_string(cfg.k) + "-fold cross-validation";
  r.k = cfg.k;
  r.seed = cfg.seed;
  for (std::size_t m = 0; m < 3; ++m) {
    MethodScores s;
    s.method = cv_methods()[m];
    for (const auto& f : per_fold) s.folds.push_back(f[m]);
    s.mean = detail::average(s.folds);
    r.methods.push_back(std::move(s));
  }
  return r;
}

}  // namespace socstatus
