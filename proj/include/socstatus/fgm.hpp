#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "socstatus/error.hpp"
#include "socstatus/features.hpp"
#include "socstatus/graph.hpp"

// Triangle-factor graphical model over binary status variables.
//
// State 0 is Manager, state 1 is Subordinate. The unary log-potential of node
// v is sum_k theta_k x_vk in the Manager state and 0 in the Subordinate
// state, so K weights fully parameterize a two-state log-linear unary factor.
// A triangle's log-potential is the weight of its label multiset, indexed by
// the number of Subordinates: 0 = MMM, 1 = MMS, 2 = MSS, 3 = SSS. The 3-bit
// configuration index of a triangle {a, b, c} is y_a | y_b << 1 | y_c << 2.
namespace socstatus::fgm {

inline constexpr std::size_t kTriangleClasses = 4;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Largest graph handled by explicit exact enumeration.
inline constexpr std::size_t kExactLimit = 20;
/// Largest graph for which automatic inference picks enumeration over LBP.
inline constexpr std::size_t kAutoExactLimit = 12;

using Triangle = std::array<NodeId, 3>;

inline std::size_t triangle_class(unsigned config) { return static_cast<std::size_t>(std::popcount(config & 7u)); }

/// Every closed triangle once, as u < v < w in lexicographic order.
inline std::vector<Triangle> closed_triangles(const CommGraph& g) {
  std::vector<Triangle> out;
  for (NodeId u = 0; u < g.size(); ++u) {
    const auto nu = g.neighbors(u);
    for (auto i = std::upper_bound(nu.begin(), nu.end(), u); i != nu.end(); ++i) {
      const NodeId v = *i;
      const auto nv = g.neighbors(v);
      auto a = std::upper_bound(nu.begin(), nu.end(), v);
      auto b = std::upper_bound(nv.begin(), nv.end(), v);
      while (a != nu.end() && b != nv.end()) {
        if (*a < *b) {
          ++a;
        } else if (*b < *a) {
          ++b;
        } else {
          out.push_back({u, v, *a});
          ++a;
          ++b;
        }
      }
    }
  }
  return out;
}

class FactorGraph {
 public:
  FactorGraph() = default;

  /// `features` holds one row per variable. Triangles need three distinct
  /// in-range variables; their order is kept as given.
  FactorGraph(Matrix features, std::vector<Triangle> triangles)
      : x_(std::move(features)), triangles_(std::move(triangles)), incident_(x_.rows) {
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const auto& tri = triangles_[t];
      for (NodeId v : tri)
        if (v >= x_.rows) throw Error(ErrorKind::Shape, "triangle references a missing variable");
      if (tri[0] == tri[1] || tri[0] == tri[2] || tri[1] == tri[2])
        throw Error(ErrorKind::Shape, "triangle variables must be distinct");
      for (std::size_t s = 0; s < 3; ++s) incident_[tri[s]].push_back(3 * t + s);
    }
  }

  std::size_t variables() const { return x_.rows; }
  std::size_t features() const { return x_.cols; }
  const Matrix& x() const { return x_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  /// Slots (3 * triangle + position) in which variable v takes part.
  std::span<const std::size_t> incident(NodeId v) const { return incident_[v]; }

  /// True when the variable-factor bipartite graph is a forest.
  bool acyclic() const {
    std::vector<std::size_t> parent(variables() + triangles_.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      for (NodeId v : triangles_[t]) {
        const std::size_t a = find(v);
        const std::size_t b = find(variables() + t);
        if (a == b) return false;
        parent[a] = b;
      }
    }
    return true;
  }

 private:
  Matrix x_;
  std::vector<Triangle> triangles_;
  std::vector<std::vector<std::size_t>> incident_;
};

inline FactorGraph build_factor_graph(const CommGraph& g, const FeatureMatrix& features) {
  if (features.rows() != g.size()) throw Error(ErrorKind::Shape, "feature rows do not match node count");
  return FactorGraph(features.x, closed_triangles(g));
}

struct Theta {
  std::vector<double> node_weights;
  std::array<double, kTriangleClasses> triangle_weights{};
  double l2_lambda = 0.01;

  static Theta zeros(std::size_t k, double l2_lambda = 0.01) {
    Theta t;
    t.node_weights.assign(k, 0.0);
    t.l2_lambda = l2_lambda;
    return t;
  }

  std::size_t dimension() const { return node_weights.size() + kTriangleClasses; }

  /// Node weights followed by the four triangle weights.
  std::vector<double> flat() const {
    std::vector<double> out(node_weights);
    out.insert(out.end(), triangle_weights.begin(), triangle_weights.end());
    return out;
  }

  void assign_flat(std::span<const double> values) {
    if (values.size() != dimension()) throw Error(ErrorKind::Shape, "parameter vector has the wrong length");
    std::copy(values.begin(), values.end() - kTriangleClasses, node_weights.begin());
    std::copy(values.end() - kTriangleClasses, values.end(), triangle_weights.begin());
  }

  double squared_norm() const {
    double s = 0.0;
    for (double w : node_weights) s += w * w;
    for (double w : triangle_weights) s += w * w;
    return s;
  }

  bool finite() const {
    auto ok = [](double w) { return std::isfinite(w); };
    return std::all_of(node_weights.begin(), node_weights.end(), ok) &&
           std::all_of(triangle_weights.begin(), triangle_weights.end(), ok) && std::isfinite(l2_lambda);
  }

  friend bool operator==(const Theta&, const Theta&) = default;
};

struct Marginals {
  std::vector<std::array<double, 2>> node_beliefs;
  std::vector<std::array<double, 8>> triangle_beliefs;
  bool converged = true;
  std::size_t iterations = 0;
  double max_residual = 0.0;
  /// log Z of the (clamped) model: exact under enumeration, Bethe under LBP.
  double log_partition = 0.0;
  bool exact = false;
};

enum class InferenceMode : std::uint8_t { Auto, Exact, Loopy };

inline const char* to_string(InferenceMode m) {
  switch (m) {
    case InferenceMode::Auto: return "auto";
    case InferenceMode::Exact: return "exact";
    case InferenceMode::Loopy: return "loopy";
  }
  return "?";
}

struct LbpConfig {
  std::size_t max_iters = 100;
  double damping = 0.5;
  double tol = 1e-6;
};

struct InferenceOptions {
  InferenceMode mode = InferenceMode::Auto;
  LbpConfig lbp;
};

namespace detail {

inline void check_inputs(const FactorGraph& fg, const Theta& theta, const StatusLabels& clamps) {
  if (theta.node_weights.size() != fg.features())
    throw Error(ErrorKind::Shape, "theta has " + std::to_string(theta.node_weights.size()) + " node weights, graph has " +
                                      std::to_string(fg.features()) + " features");
  if (clamps.size() != fg.variables()) throw Error(ErrorKind::Shape, "clamps do not cover every variable");
  if (!theta.finite()) throw Error(ErrorKind::Numerical, "theta contains non-finite values");
}

// Log-potential of the Manager state per node (Subordinate is 0).
inline std::vector<double> manager_scores(const FactorGraph& fg, const Theta& theta) {
  std::vector<double> out(fg.variables(), 0.0);
  for (std::size_t v = 0; v < fg.variables(); ++v) {
    const auto row = fg.x().row(v);
    double s = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) s += theta.node_weights[k] * row[k];
    out[v] = s;
  }
  return out;
}

inline std::array<double, 2> unary_log_potential(double manager_score, const std::optional<Status>& clamp) {
  std::array<double, 2> u{manager_score, 0.0};
  if (clamp) u[*clamp == Status::Manager ? 1 : 0] = kNegInf;
  return u;
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline std::array<double, 2> normalize_log(std::array<double, 2> m) {
  const double z = log_sum_exp(m);
  return {m[0] - z, m[1] - z};
}

// Shannon entropy with 0 log 0 = 0.
template <std::size_t N>
double entropy(const std::array<double, N>& p) {
  double h = 0.0;
  for (double q : p)
    if (q > 0.0) h -= q * std::log(q);
  return h;
}

// Expected log-potential with 0 * (-inf) = 0.
template <std::size_t N>
double expected(const std::array<double, N>& p, const std::array<double, N>& log_potential) {
  double e = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    if (p[i] > 0.0) e += p[i] * log_potential[i];
  return e;
}

// Enumerates all assignments of the unclamped variables in Gray-code order,
// calling visit(score, y) with the full log-potential of each configuration.
template <class Visit>
void enumerate_configurations(const FactorGraph& fg, const Theta& theta, const StatusLabels& clamps, Visit&& visit) {
  const std::size_t n = fg.variables();
  const auto mscore = manager_scores(fg, theta);
  std::vector<unsigned> y(n, 0);
  std::vector<NodeId> free;
  for (NodeId v = 0; v < n; ++v) {
    if (clamps[v])
      y[v] = *clamps[v] == Status::Manager ? 0u : 1u;
    else
      free.push_back(v);
  }
  const auto& tris = fg.triangles();
  std::vector<unsigned> subordinates(tris.size());
  double score = 0.0;
  for (NodeId v = 0; v < n; ++v)
    if (y[v] == 0) score += mscore[v];
  for (std::size_t t = 0; t < tris.size(); ++t) {
    subordinates[t] = y[tris[t][0]] + y[tris[t][1]] + y[tris[t][2]];
    score += theta.triangle_weights[subordinates[t]];
  }
  const std::uint64_t total = std::uint64_t{1} << free.size();
  visit(score, y);
  for (std::uint64_t i = 1; i < total; ++i) {
    const NodeId v = free[static_cast<std::size_t>(std::countr_zero(i))];
    const bool to_sub = y[v] == 0;
    y[v] ^= 1u;
    score += to_sub ? -mscore[v] : mscore[v];
    for (std::size_t slot : fg.incident(v)) {
      const std::size_t t = slot / 3;
      const unsigned before = subordinates[t];
      subordinates[t] = to_sub ? before + 1 : before - 1;
      score += theta.triangle_weights[subordinates[t]] - theta.triangle_weights[before];
    }
    visit(score, y);
  }
}

inline void check_exact_size(const FactorGraph& fg) {
  if (fg.variables() > kExactLimit)
    throw Error(ErrorKind::Config, "exact enumeration is limited to " + std::to_string(kExactLimit) + " variables");
}

}  // namespace detail

/// Exact log Z of the model with the given variables clamped.
inline double exact_log_partition(const FactorGraph& fg, const Theta& theta, const StatusLabels& clamps) {
  detail::check_inputs(fg, theta, clamps);
  detail::check_exact_size(fg);
  double max_score = kNegInf;
  detail::enumerate_configurations(fg, theta, clamps, [&](double s, const auto&) { max_score = std::max(max_score, s); });
  double sum = 0.0;
  detail::enumerate_configurations(fg, theta, clamps, [&](double s, const auto&) { sum += std::exp(s - max_score); });
  return max_score + std::log(sum);
}

/// Marginals by brute-force enumeration of every unclamped configuration.
inline Marginals exact_marginals(const FactorGraph& fg, const Theta& theta, const StatusLabels& clamps) {
  detail::check_inputs(fg, theta, clamps);
  detail::check_exact_size(fg);
  const auto& tris = fg.triangles();
  double max_score = kNegInf;
  detail::enumerate_configurations(fg, theta, clamps, [&](double s, const auto&) { max_score = std::max(max_score, s); });

  Marginals m;
  m.exact = true;
  m.iterations = 0;
  m.node_beliefs.assign(fg.variables(), {0.0, 0.0});
  m.triangle_beliefs.assign(tris.size(), {});
  double sum = 0.0;
  detail::enumerate_configurations(fg, theta, clamps, [&](double s, const std::vector<unsigned>& y) {
    const double w = std::exp(s - max_score);
    sum += w;
    for (std::size_t v = 0; v < y.size(); ++v) m.node_beliefs[v][y[v]] += w;
    for (std::size_t t = 0; t < tris.size(); ++t)
      m.triangle_beliefs[t][y[tris[t][0]] | (y[tris[t][1]] << 1) | (y[tris[t][2]] << 2)] += w;
  });
  for (auto& b : m.node_beliefs)
    for (double& p : b) p /= sum;
  for (auto& b : m.triangle_beliefs)
    for (double& p : b) p /= sum;
  m.log_partition = max_score + std::log(sum);
  return m;
}

/// Messages of a loopy BP run, reusable as a warm start for a later run on
/// the same factor graph.
struct LbpState {
  std::vector<std::array<double, 2>> factor_to_variable;
};

/// Sum-product loopy belief propagation with a synchronous schedule and
/// damped log-space messages. Clamped variables send delta messages.
/// Convergence means the largest undamped change of any factor-to-variable
/// message (in probability) fell below tol.
inline Marginals lbp_marginals(const FactorGraph& fg, const Theta& theta, const StatusLabels& clamps,
                               const LbpConfig& cfg = {}, LbpState* warm = nullptr) {
  detail::check_inputs(fg, theta, clamps);
  if (cfg.max_iters < 1) throw Error(ErrorKind::Config, "LBP needs max_iters >= 1");
  if (!(cfg.damping >= 0.0 && cfg.damping < 1.0)) throw Error(ErrorKind::Config, "LBP damping must lie in [0, 1)");
  if (!(cfg.tol > 0.0)) throw Error(ErrorKind::Config, "LBP tol must be positive");

  const std::size_t n = fg.variables();
  const auto& tris = fg.triangles();
  const std::size_t slots = 3 * tris.size();
  const auto mscore = detail::manager_scores(fg, theta);
  std::vector<std::array<double, 2>> unary(n);
  for (std::size_t v = 0; v < n; ++v) unary[v] = detail::unary_log_potential(mscore[v], clamps[v]);

  // Triangle potentials shifted by their maximum; the shift cancels on normalization.
  const double shift = *std::max_element(theta.triangle_weights.begin(), theta.triangle_weights.end());
  std::array<double, 8> log_psi{};
  std::array<double, 8> psi{};
  for (unsigned c = 0; c < 8; ++c) {
    log_psi[c] = theta.triangle_weights[triangle_class(c)];
    psi[c] = std::exp(log_psi[c] - shift);
  }

  const std::array<double, 2> uniform{std::log(0.5), std::log(0.5)};
  std::vector<std::array<double, 2>> f2v(slots, uniform);
  if (warm && warm->factor_to_variable.size() == slots) f2v = warm->factor_to_variable;
  std::vector<std::array<double, 2>> v2f(slots);
  std::vector<std::array<double, 2>> total(n);

  auto variable_pass = [&] {
    for (std::size_t v = 0; v < n; ++v) {
      total[v] = unary[v];
      for (std::size_t slot : fg.incident(static_cast<NodeId>(v))) {
        total[v][0] += f2v[slot][0];
        total[v][1] += f2v[slot][1];
      }
    }
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t slot : fg.incident(static_cast<NodeId>(v))) {
        if (clamps[v]) {
          v2f[slot] = detail::normalize_log(unary[v]);
        } else {
          v2f[slot] = detail::normalize_log({total[v][0] - f2v[slot][0], total[v][1] - f2v[slot][1]});
        }
      }
    }
  };

  Marginals m;
  m.converged = false;
  std::vector<std::array<double, 2>> next(slots);
  std::size_t iter = 0;
  while (iter < cfg.max_iters) {
    ++iter;
    variable_pass();
    double residual = 0.0;
    for (std::size_t t = 0; t < tris.size(); ++t) {
      std::array<std::array<double, 2>, 3> in;
      for (std::size_t s = 0; s < 3; ++s)
        in[s] = {std::exp(v2f[3 * t + s][0]), std::exp(v2f[3 * t + s][1])};
      for (std::size_t s = 0; s < 3; ++s) {
        const std::size_t o1 = (s + 1) % 3;
        const std::size_t o2 = (s + 2) % 3;
        std::array<double, 2> out{0.0, 0.0};
        for (unsigned c = 0; c < 8; ++c) {
          const unsigned ys = (c >> s) & 1u;
          out[ys] += psi[c] * in[o1][(c >> o1) & 1u] * in[o2][(c >> o2) & 1u];
        }
        const double z = out[0] + out[1];
        if (!(z > 0.0) || !std::isfinite(z))
          throw Error(ErrorKind::Numerical, "LBP message of triangle factor " + std::to_string(t) + " is not finite");
        const std::size_t slot = 3 * t + s;
        const double p_new = out[0] / z;
        const double p_old = std::exp(f2v[slot][0]);
        residual = std::max(residual, std::abs(p_new - p_old));
        const double p = (1.0 - cfg.damping) * p_new + cfg.damping * p_old;
        next[slot] = {std::log(p), std::log1p(-p)};
        if (std::isnan(next[slot][0]) || std::isnan(next[slot][1]))
          throw Error(ErrorKind::Numerical, "LBP message of triangle factor " + std::to_string(t) + " is NaN");
      }
    }
    f2v.swap(next);
    m.max_residual = residual;
    if (residual < cfg.tol) {
      m.converged = true;
      break;
    }
  }
  m.iterations = iter;
  variable_pass();

  // Beliefs and the Bethe estimate of log Z.
  m.node_beliefs.resize(n);
  double log_z = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const auto lb = detail::normalize_log(total[v]);
    m.node_beliefs[v] = {std::exp(lb[0]), std::exp(lb[1])};
    const double degree = static_cast<double>(fg.incident(static_cast<NodeId>(v)).size());
    log_z += detail::expected(m.node_beliefs[v], unary[v]) + (1.0 - degree) * detail::entropy(m.node_beliefs[v]);
  }
  m.triangle_beliefs.resize(tris.size());
  for (std::size_t t = 0; t < tris.size(); ++t) {
    std::array<double, 8> lb{};
    for (unsigned c = 0; c < 8; ++c)
      lb[c] = log_psi[c] + v2f[3 * t][c & 1u] + v2f[3 * t + 1][(c >> 1) & 1u] + v2f[3 * t + 2][(c >> 2) & 1u];
    const double z = detail::log_sum_exp(lb);
    auto& b = m.triangle_beliefs[t];
    for (unsigned c = 0; c < 8; ++c) b[c] = std::exp(lb[c] - z);
    log_z += detail::expected(b, log_psi) + detail::entropy(b);
  }
  m.log_partition = log_z;
  if (warm) warm->factor_to_variable = f2v;
  return m;
}

/// Exact enumeration for Exact mode, or Auto mode on small graphs; LBP otherwise.
inline Marginals infer(const FactorGraph& fg, const Theta& theta, const StatusLabels& clamps,
                       const InferenceOptions& options = {}, LbpState* warm = nullptr) {
  const bool exact = options.mode == InferenceMode::Exact ||
                     (options.mode == InferenceMode::Auto && fg.variables() <= kAutoExactLimit);
  return exact ? exact_marginals(fg, theta, clamps) : lbp_marginals(fg, theta, clamps, options.lbp, warm);
}

struct LogLikelihood {
  double value = 0.0;
  bool exact = true;
  bool converged = true;
};

/// log P(observed labels) - lambda/2 |theta|^2, where unobserved labels are
/// summed out. Exact by enumeration up to kExactLimit variables in Auto mode;
/// otherwise the difference of clamped and free Bethe estimates.
inline LogLikelihood log_likelihood(const FactorGraph& fg, const Theta& theta, const StatusLabels& labels,
                                    const InferenceOptions& options = {}) {
  detail::check_inputs(fg, theta, labels);
  LogLikelihood ll;
  const StatusLabels free(fg.variables());
  const bool exact = options.mode == InferenceMode::Exact ||
                     (options.mode == InferenceMode::Auto && fg.variables() <= kExactLimit);
  if (exact) {
    ll.value = exact_log_partition(fg, theta, labels) - exact_log_partition(fg, theta, free);
  } else {
    const auto clamped = lbp_marginals(fg, theta, labels, options.lbp);
    const auto model = lbp_marginals(fg, theta, free, options.lbp);
    ll.value = clamped.log_partition - model.log_partition;
    ll.exact = false;
    ll.converged = clamped.converged && model.converged;
  }
  ll.value -= 0.5 * theta.l2_lambda * theta.squared_norm();
  if (!std::isfinite(ll.value)) throw Error(ErrorKind::Numerical, "log-likelihood is not finite");
  return ll;
}

/// Feature expectations of a set of marginals, laid out like Theta::flat().
inline std::vector<double> expected_features(const FactorGraph& fg, const Marginals& m) {
  std::vector<double> e(fg.features() + kTriangleClasses, 0.0);
  for (std::size_t v = 0; v < fg.variables(); ++v) {
    const auto row = fg.x().row(v);
    for (std::size_t k = 0; k < row.size(); ++k) e[k] += row[k] * m.node_beliefs[v][0];
  }
  for (const auto& b : m.triangle_beliefs)
    for (unsigned c = 0; c < 8; ++c) e[fg.features() + triangle_class(c)] += b[c];
  return e;
}

struct GradientResult {
  std::vector<double> gradient;
  /// Objective at theta under the same inference (see log_likelihood).
  double objective = 0.0;
  bool exact = true;
  bool converged = true;
};

/// Reusable warm-start state for repeated gradient evaluations.
struct GradientWorkspace {
  LbpState clamped;
  LbpState model;
};

/// Gradient of log P(train labels) - lambda/2 |theta|^2: feature expectations
/// with the training labels clamped minus expectations under the model,
/// minus lambda * theta.
inline GradientResult gradient(const FactorGraph& fg, const Theta& theta, const StatusLabels& train_labels,
                               const InferenceOptions& options = {}, GradientWorkspace* workspace = nullptr) {
  detail::check_inputs(fg, theta, train_labels);
  if (train_labels.count_known() == 0) throw Error(ErrorKind::Config, "gradient needs at least one labeled node");
  const StatusLabels free(fg.variables());
  const auto data = infer(fg, theta, train_labels, options, workspace ? &workspace->clamped : nullptr);
  const auto model = infer(fg, theta, free, options, workspace ? &workspace->model : nullptr);
  const auto e_data = expected_features(fg, data);
  const auto e_model = expected_features(fg, model);
  const auto flat = theta.flat();

  GradientResult r;
  r.gradient.resize(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) r.gradient[i] = e_data[i] - e_model[i] - theta.l2_lambda * flat[i];
  r.objective = data.log_partition - model.log_partition - 0.5 * theta.l2_lambda * theta.squared_norm();
  r.exact = data.exact && model.exact;
  r.converged = data.converged && model.converged;
  return r;
}

struct TrainConfig {
  double eta = 0.05;
  std::size_t max_epochs = 500;
  double grad_tol = 1e-4;
  double lambda = 0.01;
  std::size_t max_halvings = 30;
  InferenceOptions inference;
};

inline constexpr double kObjectiveSlack = 1e-6;

struct TrainTrace {
  std::vector<double> objective;
  std::vector<double> grad_norm;
  std::size_t epochs = 0;
  bool converged = false;
  std::size_t nonconverged_inference = 0;
  std::size_t halvings = 0;
};

struct TrainResult {
  Theta theta;
  TrainTrace trace;
};

/// Per-parameter step scale: node weights by 1/n, triangle weights by
/// 1/|triangles|, i.e. each family's gradient is averaged over its factors.
inline std::vector<double> step_scales(const FactorGraph& fg) {
  std::vector<double> s(fg.features() + kTriangleClasses);
  const double nodes = static_cast<double>(std::max<std::size_t>(1, fg.variables()));
  const double tris = static_cast<double>(std::max<std::size_t>(1, fg.triangles().size()));
  std::fill(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(fg.features()), 1.0 / nodes);
  std::fill(s.begin() + static_cast<std::ptrdiff_t>(fg.features()), s.end(), 1.0 / tris);
  return s;
}

/// Gradient ascent with per-family averaging: theta += eta * scale * gradient
/// (see step_scales). Stops once the scaled gradient's infinity norm drops
/// below grad_tol.
/// The trace holds the objective at the start of every epoch.
inline TrainResult train(const FactorGraph& fg, const StatusLabels& train_labels, const TrainConfig& cfg,
                         std::optional<Theta> init = std::nullopt) {
  if (!(cfg.eta > 0.0)) throw Error(ErrorKind::Config, "learning rate must be positive");
  if (!(cfg.lambda >= 0.0)) throw Error(ErrorKind::Config, "lambda must be non-negative");
  TrainResult r;
  r.theta = init.value_or(Theta::zeros(fg.features(), cfg.lambda));
  r.theta.l2_lambda = cfg.lambda;
  const auto scale = step_scales(fg);
  GradientWorkspace workspace;
  auto flat = r.theta.flat();
  auto g = gradient(fg, r.theta, train_labels, cfg.inference, &workspace);
  double step = cfg.eta;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (!std::isfinite(g.objective))
      throw Error(ErrorKind::Numerical, "objective is not finite at epoch " + std::to_string(epoch));
    if (!g.converged) ++r.trace.nonconverged_inference;
    double norm = 0.0;
    for (std::size_t i = 0; i < flat.size(); ++i) norm = std::max(norm, std::abs(g.gradient[i]) * scale[i]);
    r.trace.objective.push_back(g.objective);
    r.trace.grad_norm.push_back(norm);
    r.trace.epochs = epoch + 1;
    if (norm < cfg.grad_tol) {
      r.trace.converged = true;
      break;
    }
    // Halve the step until the objective does not drop; keep the shorter
    // step afterwards.
    bool accepted = false;
    const GradientWorkspace saved = workspace;
    for (std::size_t attempt = 0; attempt <= cfg.max_halvings && !accepted; ++attempt) {
      auto trial = flat;
      for (std::size_t i = 0; i < flat.size(); ++i) trial[i] += step * scale[i] * g.gradient[i];
      Theta next = r.theta;
      next.assign_flat(trial);
      auto gn = gradient(fg, next, train_labels, cfg.inference, &workspace);
      if (std::isfinite(gn.objective) && gn.objective >= g.objective - kObjectiveSlack) {
        flat = std::move(trial);
        r.theta = std::move(next);
        g = std::move(gn);
        accepted = true;
      } else {
        workspace = saved;
        step *= 0.5;
        ++r.trace.halvings;
      }
    }
    if (!accepted) break;
  }
  return r;
}

struct Prediction {
  StatusLabels labels;
  std::vector<double> p_manager;
  std::vector<double> confidence;
  bool converged = true;
};

/// Labels every unclamped node with the argmax of its marginal; exact ties go
/// to Subordinate. Clamped nodes keep their label with confidence 1.
inline Prediction predict(const FactorGraph& fg, const Theta& theta, const StatusLabels& clamps,
                          const InferenceOptions& options = {}) {
  const auto m = infer(fg, theta, clamps, options);
  Prediction p;
  p.labels = clamps;
  p.p_manager.resize(fg.variables());
  p.confidence.resize(fg.variables());
  p.converged = m.converged;
  for (std::size_t v = 0; v < fg.variables(); ++v) {
    const double pm = m.node_beliefs[v][0];
    p.p_manager[v] = pm;
    if (clamps[v]) {
      p.confidence[v] = 1.0;
      continue;
    }
    const bool manager = pm - 0.5 > 1e-12;
    p.labels[v] = manager ? Status::Manager : Status::Subordinate;
    p.confidence[v] = manager ? pm : 1.0 - pm;
  }
  return p;
}

}  // namespace socstatus::fgm
