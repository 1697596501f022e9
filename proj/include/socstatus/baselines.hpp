#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "socstatus/error.hpp"
#include "socstatus/features.hpp"
#include "socstatus/graph.hpp"

namespace socstatus {

/// Class scores: predicted label plus the model's P(Manager) per row.
struct ClassifierOutput {
  std::vector<Status> labels;
  std::vector<double> p_manager;
};

namespace detail {

inline void check_training(const Matrix& x, std::span<const Status> y) {
  if (x.rows != y.size()) throw Error(ErrorKind::Shape, "feature rows do not match label count");
  const auto managers = std::count(y.begin(), y.end(), Status::Manager);
  if (managers == 0 || managers == static_cast<std::ptrdiff_t>(y.size()))
    throw Error(ErrorKind::DegenerateTraining, "training data holds a single class");
}

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gaussian Naive Bayes
// ---------------------------------------------------------------------------

inline constexpr double kVarianceFloor = 1e-9;

struct NaiveBayes {
  std::array<double, 2> log_prior{};
  std::array<std::vector<double>, 2> mean;
  std::array<std::vector<double>, 2> variance;

  /// Per-class Gaussian on every raw column (ML variance, floored).
  static NaiveBayes fit(const Matrix& x, std::span<const Status> y) {
    detail::check_training(x, y);
    NaiveBayes nb;
    std::array<double, 2> count{};
    for (std::size_t c = 0; c < 2; ++c) {
      nb.mean[c].assign(x.cols, 0.0);
      nb.variance[c].assign(x.cols, 0.0);
    }
    for (std::size_t r = 0; r < x.rows; ++r) {
      const auto c = static_cast<std::size_t>(y[r]);
      count[c] += 1.0;
      for (std::size_t k = 0; k < x.cols; ++k) nb.mean[c][k] += x(r, k);
    }
    for (std::size_t c = 0; c < 2; ++c)
      for (double& m : nb.mean[c]) m /= count[c];
    for (std::size_t r = 0; r < x.rows; ++r) {
      const auto c = static_cast<std::size_t>(y[r]);
      for (std::size_t k = 0; k < x.cols; ++k) {
        const double d = x(r, k) - nb.mean[c][k];
        nb.variance[c][k] += d * d;
      }
    }
    for (std::size_t c = 0; c < 2; ++c) {
      for (double& v : nb.variance[c]) v = std::max(v / count[c], kVarianceFloor);
      nb.log_prior[c] = std::log(count[c] / static_cast<double>(x.rows));
    }
    return nb;
  }

  std::array<double, 2> log_joint(std::span<const double> row) const {
    std::array<double, 2> lj = log_prior;
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t k = 0; k < row.size(); ++k) {
        const double d = row[k] - mean[c][k];
        lj[c] += -0.5 * std::log(2.0 * std::numbers::pi * variance[c][k]) - d * d / (2.0 * variance[c][k]);
      }
    }
    return lj;
  }

  /// Argmax of log-prior plus log-densities; ties go to Subordinate.
  ClassifierOutput predict(const Matrix& x) const {
    ClassifierOutput out;
    for (std::size_t r = 0; r < x.rows; ++r) {
      const auto lj = log_joint(x.row(r));
      out.labels.push_back(lj[0] > lj[1] ? Status::Manager : Status::Subordinate);
      out.p_manager.push_back(detail::sigmoid(lj[0] - lj[1]));
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// L2-regularized logistic regression
// ---------------------------------------------------------------------------

struct LogisticConfig {
  double lambda = 0.01;
  double eta = 0.1;
  std::size_t max_epochs = 1000;
  double grad_tol = 1e-6;
};

struct LogisticRegression {
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t epochs = 0;

  /// Objective: mean log-likelihood of y = Manager minus lambda/2 |w|^2
  /// (bias unpenalized).
  static double objective(const Matrix& x, std::span<const Status> y, std::span<const double> w, double b,
                          double lambda) {
    double ll = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
      double z = b;
      for (std::size_t k = 0; k < x.cols; ++k) z += w[k] * x(r, k);
      const double t = y[r] == Status::Manager ? 1.0 : 0.0;
      // log sigmoid(z) * t + log(1 - sigmoid(z)) * (1 - t), stably.
      ll += t * z - (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
    }
    double sq = 0.0;
    for (double v : w) sq += v * v;
    return ll / static_cast<double>(x.rows) - 0.5 * lambda * sq;
  }

  /// Gradient of objective(), weights first, bias last.
  static std::vector<double> gradient(const Matrix& x, std::span<const Status> y, std::span<const double> w, double b,
                                      double lambda) {
    std::vector<double> g(x.cols + 1, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
      double z = b;
      for (std::size_t k = 0; k < x.cols; ++k) z += w[k] * x(r, k);
      const double err = (y[r] == Status::Manager ? 1.0 : 0.0) - detail::sigmoid(z);
      for (std::size_t k = 0; k < x.cols; ++k) g[k] += err * x(r, k);
      g[x.cols] += err;
    }
    for (double& v : g) v /= static_cast<double>(x.rows);
    for (std::size_t k = 0; k < x.cols; ++k) g[k] -= lambda * w[k];
    return g;
  }

  static LogisticRegression fit(const Matrix& x, std::span<const Status> y, const LogisticConfig& cfg = {}) {
    detail::check_training(x, y);
    LogisticRegression lr;
    lr.weights.assign(x.cols, 0.0);
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      const auto g = gradient(x, y, lr.weights, lr.bias, cfg.lambda);
      double norm = 0.0;
      for (double v : g) {
        if (!std::isfinite(v)) throw Error(ErrorKind::Numerical, "logistic gradient is not finite");
        norm = std::max(norm, std::abs(v));
      }
      lr.epochs = epoch;
      if (norm < cfg.grad_tol) break;
      for (std::size_t k = 0; k < x.cols; ++k) lr.weights[k] += cfg.eta * g[k];
      lr.bias += cfg.eta * g[x.cols];
      lr.epochs = epoch + 1;
    }
    if (!std::isfinite(objective(x, y, lr.weights, lr.bias, cfg.lambda)))
      throw Error(ErrorKind::Numerical, "logistic loss is not finite");
    return lr;
  }

  /// Threshold 0.5 on P(Manager); exactly 0.5 goes to Subordinate.
  ClassifierOutput predict(const Matrix& x) const {
    ClassifierOutput out;
    for (std::size_t r = 0; r < x.rows; ++r) {
      double z = bias;
      for (std::size_t k = 0; k < x.cols; ++k) z += weights[k] * x(r, k);
      const double p = detail::sigmoid(z);
      out.p_manager.push_back(p);
      out.labels.push_back(p > 0.5 ? Status::Manager : Status::Subordinate);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Splits and evaluation
// ---------------------------------------------------------------------------

struct SplitPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  /// Fold per node; -1 for unlabeled nodes.
  std::vector<int> fold;

  std::vector<std::size_t> test_rows(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < fold.size(); ++v)
      if (fold[v] == static_cast<int>(f)) out.push_back(v);
    return out;
  }
  std::vector<std::size_t> train_rows(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < fold.size(); ++v)
      if (fold[v] >= 0 && fold[v] != static_cast<int>(f)) out.push_back(v);
    return out;
  }
};

/// Stratified k-fold assignment: each class is shuffled with the seed and
/// dealt round-robin, the second class continuing where the first stopped.
/// Every class needs at least k members, except for leave-one-out
/// (k equal to the labeled count).
inline SplitPlan stratified_kfold(const StatusLabels& labels, std::size_t k, std::uint64_t seed) {
  const std::size_t n_m = labels.count(Status::Manager);
  const std::size_t n_s = labels.count(Status::Subordinate);
  const std::size_t n = n_m + n_s;
  if (k < 2) throw Error(ErrorKind::Config, "k-fold needs k >= 2");
  const bool leave_one_out = k == n;
  if (!leave_one_out && (n_m < k || n_s < k))
    throw Error(ErrorKind::Config, "a class has fewer than k = " + std::to_string(k) + " labeled nodes");
  if (k > n) throw Error(ErrorKind::Config, "k exceeds the labeled node count");

  SplitPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.fold.assign(labels.size(), -1);
  std::mt19937_64 rng(seed);
  std::size_t next = 0;
  for (Status s : {Status::Manager, Status::Subordinate}) {
    std::vector<std::size_t> members;
    for (std::size_t v = 0; v < labels.size(); ++v)
      if (labels.is(v, s)) members.push_back(v);
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t v : members) {
      plan.fold[v] = static_cast<int>(next % k);
      ++next;
    }
  }
  return plan;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  /// confusion[true][predicted], index 0 = Manager.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::array<ClassMetrics, 2> per_class{};
};

/// Support-weighted precision, recall and F1 plus accuracy. A class's
/// precision is 0 when it is never predicted; its F1 is 0 when P + R = 0.
inline EvalReport evaluate(std::span<const Status> truth, std::span<const Status> predicted) {
  if (truth.size() != predicted.size())
    throw Error(ErrorKind::Shape, "truth has " + std::to_string(truth.size()) + " labels, prediction " +
                                      std::to_string(predicted.size()));
  if (truth.empty()) throw Error(ErrorKind::Shape, "nothing to evaluate");
  EvalReport r;
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  const auto total = static_cast<double>(truth.size());
  for (std::size_t c = 0; c < 2; ++c) {
    const std::size_t o = 1 - c;
    const auto tp = static_cast<double>(r.confusion[c][c]);
    const auto fp = static_cast<double>(r.confusion[o][c]);
    const auto fn = static_cast<double>(r.confusion[c][o]);
    auto& m = r.per_class[c];
    m.support = r.confusion[c][0] + r.confusion[c][1];
    m.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    m.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    const double w = static_cast<double>(m.support) / total;
    r.precision += w * m.precision;
    r.recall += w * m.recall;
    r.f1 += w * m.f1;
  }
  r.accuracy = static_cast<double>(r.confusion[0][0] + r.confusion[1][1]) / total;
  return r;
}

}  // namespace socstatus
