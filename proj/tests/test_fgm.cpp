#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "socstatus/fgm.hpp"

using namespace socstatus;
using namespace socstatus::fgm;

namespace {

InferenceOptions exact_mode() {
  InferenceOptions o;
  o.mode = InferenceMode::Exact;
  return o;
}

InferenceOptions loopy_mode() {
  InferenceOptions o;
  o.mode = InferenceMode::Loopy;
  o.lbp.max_iters = 1000;
  o.lbp.tol = 1e-12;
  return o;
}

Matrix ones(std::size_t n) {
  Matrix m(n, 1);
  std::fill(m.data.begin(), m.data.end(), 1.0);
  return m;
}

std::size_t naive_triangles(const oracle::Adjacency& a) {
  std::size_t t = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      for (std::size_t k = j + 1; k < a.size(); ++k) t += a[i][j] && a[j][k] && a[i][k];
  return t;
}

}  // namespace

TEST(Triangles, Fixtures) {
  EXPECT_TRUE(closed_triangles(oracle::graph_of(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}})).empty());
  EXPECT_EQ(closed_triangles(oracle::graph_of(3, {{0, 1}, {1, 2}, {0, 2}})).size(), 1u);
  EXPECT_EQ(closed_triangles(oracle::graph_of(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}})).size(), 4u);
}

TEST(Triangles, MatchTripleLoop) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> size(3, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = oracle::random_graph(size(rng), 0.3, rng);
    const auto tris = closed_triangles(r.graph);
    EXPECT_EQ(tris.size(), naive_triangles(r.adj));
    for (const auto& t : tris) {
      EXPECT_TRUE(r.adj[t[0]][t[1]] && r.adj[t[1]][t[2]] && r.adj[t[0]][t[2]]);
      EXPECT_LT(t[0], t[1]);
      EXPECT_LT(t[1], t[2]);
    }
  }
}

TEST(LogLikelihood, ZeroThetaIsUniform) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {1u, 4u, 9u}) {
    const auto fg = oracle::random_factor_graph(n, 3, n / 2, rng);
    const StatusLabels l(std::vector<std::optional<Status>>(n, Status::Subordinate));
    EXPECT_NEAR(log_likelihood(fg, Theta::zeros(3, 0.0), l).value, -static_cast<double>(n) * std::log(2.0), 1e-12);
  }
}

TEST(LogLikelihood, SingleNode) {
  const FactorGraph fg(ones(1), {});
  auto th = Theta::zeros(1, 0.0);
  th.node_weights[0] = 1.7;
  const StatusLabels l(std::vector<std::optional<Status>>{Status::Manager});
  EXPECT_NEAR(log_likelihood(fg, th, l).value, 1.7 - std::log(std::exp(1.7) + 1.0), 1e-12);
}

TEST(LogLikelihood, LoopyFixtureMatchesEnumeration) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto fg = oracle::random_factor_graph(5, 2, 4, rng);
    const auto th = oracle::random_theta(2, 1.0, rng, 0.1);
    const auto l = oracle::random_partial_labels(5, 0.6, rng);
    EXPECT_NEAR(log_likelihood(fg, th, l).value, oracle::log_likelihood(fg, th, l), 1e-9);
  }
}

TEST(Exact, MatchesOracleMarginals) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto fg = oracle::random_factor_graph(8, 3, 6, rng);
    const auto th = oracle::random_theta(3, 1.0, rng);
    const auto l = oracle::random_partial_labels(8, 0.3, rng);
    const auto m = exact_marginals(fg, th, l);
    const auto e = oracle::enumerate(fg, th, l);
    EXPECT_NEAR(m.log_partition, e.log_z, 1e-9);
    for (std::size_t v = 0; v < 8; ++v) EXPECT_NEAR(m.node_beliefs[v][0], e.node[v][0], 1e-12);
    for (std::size_t t = 0; t < e.triangle.size(); ++t)
      for (unsigned c = 0; c < 8; ++c) EXPECT_NEAR(m.triangle_beliefs[t][c], e.triangle[t][c], 1e-12);
  }
}

TEST(Lbp, UnaryOnlyIsExact) {
  std::mt19937_64 rng(2);
  const auto fg = oracle::random_factor_graph(6, 3, 0, rng);
  const auto th = oracle::random_theta(3, 2.0, rng);
  const auto m = lbp_marginals(fg, th, StatusLabels(6));
  for (std::size_t v = 0; v < 6; ++v) {
    double s = 0;
    for (std::size_t k = 0; k < 3; ++k) s += th.node_weights[k] * fg.x()(v, k);
    EXPECT_NEAR(m.node_beliefs[v][0], 1.0 / (1.0 + std::exp(-s)), 1e-12);
  }
}

TEST(Lbp, ExactOnTriangleForests) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto fg = oracle::random_acyclic_factor_graph(9, 2, rng);
    ASSERT_TRUE(fg.acyclic());
    const auto th = oracle::random_theta(2, 1.0, rng);
    const auto l = oracle::random_partial_labels(9, 0.3, rng);
    const auto m = lbp_marginals(fg, th, l, loopy_mode().lbp);
    const auto e = oracle::enumerate(fg, th, l);
    EXPECT_TRUE(m.converged);
    EXPECT_NEAR(m.log_partition, e.log_z, 1e-9);
    for (std::size_t v = 0; v < 9; ++v) EXPECT_NEAR(m.node_beliefs[v][0], e.node[v][0], 1e-9);
  }
}

TEST(Lbp, TrianglePotentialFavorsAllManagers) {
  const FactorGraph fg(Matrix(3, 0), {{0, 1, 2}});
  auto th = Theta::zeros(0, 0.0);
  th.triangle_weights = {3.0, 0.0, 0.0, 0.0};
  const auto m = lbp_marginals(fg, th, StatusLabels(3));
  for (std::size_t v = 0; v < 3; ++v) EXPECT_GT(m.node_beliefs[v][0], 0.5);
  EXPECT_GT(m.triangle_beliefs[0][0], 0.5);
}

TEST(Lbp, BeliefsNormalized) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto fg = oracle::random_factor_graph(15, 3, 20, rng);
    const auto th = oracle::random_theta(3, 1.0, rng);
    const auto m = lbp_marginals(fg, th, oracle::random_partial_labels(15, 0.3, rng));
    for (const auto& b : m.node_beliefs) {
      EXPECT_NEAR(b[0] + b[1], 1.0, 1e-12);
      EXPECT_GE(b[0], 0.0);
    }
    for (const auto& b : m.triangle_beliefs) EXPECT_NEAR(std::accumulate(b.begin(), b.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Lbp, TriangleShiftMovesOnlyLogZ) {
  std::mt19937_64 rng(6);
  const auto fg = oracle::random_factor_graph(10, 2, 8, rng);
  auto th = oracle::random_theta(2, 1.0, rng);
  const auto a = lbp_marginals(fg, th, StatusLabels(10), loopy_mode().lbp);
  for (double& w : th.triangle_weights) w += 2.5;
  const auto b = lbp_marginals(fg, th, StatusLabels(10), loopy_mode().lbp);
  for (std::size_t v = 0; v < 10; ++v) EXPECT_NEAR(a.node_beliefs[v][0], b.node_beliefs[v][0], 1e-9);
  EXPECT_NEAR(b.log_partition - a.log_partition, 2.5 * 8, 1e-8);
}

TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto fg = oracle::random_factor_graph(7, 3, 5, rng);
    const auto th = oracle::random_theta(3, 0.8, rng, 0.05);
    const auto l = oracle::random_partial_labels(7, 0.6, rng);
    if (l.count_known() == 0) continue;
    const auto g = gradient(fg, th, l, exact_mode());
    const auto flat = th.flat();
    const double h = 1e-5;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      auto up = flat, down = flat;
      up[i] += h;
      down[i] -= h;
      Theta tu = th, td = th;
      tu.assign_flat(up);
      td.assign_flat(down);
      const double fd = (oracle::log_likelihood(fg, tu, l) - oracle::log_likelihood(fg, td, l)) / (2 * h);
      EXPECT_NEAR(g.gradient[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
    EXPECT_NEAR(g.objective, oracle::log_likelihood(fg, th, l), 1e-9);
  }
}

TEST(Gradient, VanishesAtTrainedOptimum) {
  Matrix x(4, 2);
  x.data = {1, 0, 1, 1, 0, 1, 0, 0};
  const FactorGraph fg(x, {{0, 1, 2}, {1, 2, 3}});
  StatusLabels l(4);
  l[0] = Status::Manager;
  l[1] = Status::Subordinate;
  l[2] = Status::Subordinate;
  l[3] = Status::Manager;
  TrainConfig cfg;
  cfg.eta = 1.0;
  cfg.max_epochs = 20000;
  cfg.grad_tol = 1e-9;
  cfg.lambda = 0.5;
  cfg.inference = exact_mode();
  const auto r = train(fg, l, cfg);
  EXPECT_TRUE(r.trace.converged);
  for (double gi : gradient(fg, r.theta, l, exact_mode()).gradient) EXPECT_NEAR(gi, 0.0, 1e-7);
}

TEST(Gradient, MirroredTrianglesMirrorWeights) {
  // With no features the model is symmetric under M <-> S, so swapping every
  // label mirrors the triangle gradient.
  std::mt19937_64 rng(12);
  const auto fg = oracle::random_factor_graph(8, 0, 6, rng);
  const auto l = oracle::random_partial_labels(8, 0.7, rng);
  StatusLabels flipped(8);
  for (std::size_t v = 0; v < 8; ++v)
    if (l[v]) flipped[v] = *l[v] == Status::Manager ? Status::Subordinate : Status::Manager;
  const auto a = gradient(fg, Theta::zeros(0, 0.0), l, exact_mode()).gradient;
  const auto b = gradient(fg, Theta::zeros(0, 0.0), flipped, exact_mode()).gradient;
  for (std::size_t c = 0; c < kTriangleClasses; ++c) EXPECT_NEAR(a[c], b[kTriangleClasses - 1 - c], 1e-12);
}

TEST(Train, NoSignalKeepsNodeWeightsAtZero) {
  const FactorGraph fg(Matrix(4, 2), {});
  StatusLabels l(4);
  l[0] = Status::Manager;
  l[1] = Status::Subordinate;
  const auto r = train(fg, l, TrainConfig{});
  for (double w : r.theta.flat()) EXPECT_EQ(w, 0.0);
  EXPECT_TRUE(r.trace.converged);
}

TEST(Train, SingleManagerNode) {
  const FactorGraph fg(ones(1), {});
  const StatusLabels l(std::vector<std::optional<Status>>{Status::Manager});
  TrainConfig cfg;
  cfg.eta = 1.0;
  cfg.max_epochs = 5000;
  cfg.lambda = 0.01;
  const auto r = train(fg, l, cfg);
  EXPECT_GT(1.0 / (1.0 + std::exp(-r.theta.node_weights[0])), 0.95);
}

TEST(Train, PlantedSignalMonotoneAndRecovered) {
  std::mt19937_64 rng(30);
  const auto rg = oracle::random_graph(40, 0.12, rng);
  Matrix x(40, 2);
  StatusLabels truth(40);
  std::bernoulli_distribution coin(0.4);
  for (std::size_t v = 0; v < 40; ++v) {
    const bool m = coin(rng);
    truth[v] = m ? Status::Manager : Status::Subordinate;
    x(v, 0) = m ? 1.0 : 0.0;
    x(v, 1) = m ? 0.0 : 1.0;
  }
  const FactorGraph fg(x, closed_triangles(rg.graph));
  StatusLabels train_labels(40);
  for (std::size_t v = 0; v < 40; v += 2) train_labels[v] = truth[v];
  TrainConfig cfg;
  cfg.eta = 1.0;
  cfg.max_epochs = 2000;
  const auto r = train(fg, train_labels, cfg);
  for (std::size_t i = 1; i < r.trace.objective.size(); ++i)
    EXPECT_GE(r.trace.objective[i], r.trace.objective[i - 1] - kObjectiveSlack);
  EXPECT_GT(r.theta.node_weights[0], r.theta.node_weights[1]);
  EXPECT_TRUE(r.trace.converged);
  // Labels are independent of the graph, so triangle weights fit noise; only
  // triangle-free nodes are decided by the planted feature alone.
  const auto p = predict(fg, r.theta, train_labels);
  std::size_t checked = 0;
  for (std::size_t v = 1; v < 40; v += 2) {
    if (!fg.incident(static_cast<NodeId>(v)).empty()) continue;
    EXPECT_EQ(p.labels[v], truth[v]);
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

TEST(Train, RejectsBadConfig) {
  const FactorGraph fg(ones(2), {});
  StatusLabels l(2);
  l[0] = Status::Manager;
  TrainConfig cfg;
  cfg.eta = 0.0;
  EXPECT_THROW(train(fg, l, cfg), Error);
  cfg = {};
  cfg.lambda = -1.0;
  EXPECT_THROW(train(fg, l, cfg), Error);
  EXPECT_THROW(gradient(fg, Theta::zeros(1), StatusLabels(2)), Error);
  EXPECT_THROW(gradient(fg, Theta::zeros(3), l), Error);
}

TEST(Predict, StrongUnaryDecides) {
  Matrix x(2, 1);
  x.data = {1.0, -1.0};
  const FactorGraph fg(x, {});
  auto th = Theta::zeros(1);
  th.node_weights[0] = 10.0;
  const auto p = predict(fg, th, StatusLabels(2));
  EXPECT_TRUE(p.labels.is(0, Status::Manager));
  EXPECT_TRUE(p.labels.is(1, Status::Subordinate));
  EXPECT_GT(p.confidence[0], 0.99);
  EXPECT_GT(p.confidence[1], 0.99);
}

TEST(Predict, FullyClampedEchoesClamps) {
  std::mt19937_64 rng(15);
  const auto fg = oracle::random_factor_graph(20, 3, 15, rng);
  const auto l = oracle::random_labels(20, 0.4, rng);
  const auto p = predict(fg, oracle::random_theta(3, 2.0, rng), l);
  EXPECT_EQ(p.labels, l);
  for (double c : p.confidence) EXPECT_EQ(c, 1.0);
}

TEST(Predict, ArgmaxOfEnumeratedMarginals) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    const auto fg = oracle::random_factor_graph(9, 3, 7, rng);
    const auto th = oracle::random_theta(3, 1.5, rng);
    const auto l = oracle::random_partial_labels(9, 0.3, rng);
    const auto p = predict(fg, th, l, exact_mode());
    const auto e = oracle::enumerate(fg, th, l);
    for (std::size_t v = 0; v < 9; ++v) {
      if (l[v] || std::abs(e.node[v][0] - 0.5) < 1e-9) continue;
      EXPECT_EQ(p.labels.is(static_cast<NodeId>(v), Status::Manager), e.node[v][0] > 0.5);
    }
  }
}

TEST(Predict, ReindexingInvariant) {
  std::mt19937_64 rng(17);
  const auto fg = oracle::random_factor_graph(25, 3, 30, rng);
  const auto th = oracle::random_theta(3, 1.0, rng);
  std::vector<NodeId> pi(25);
  std::iota(pi.begin(), pi.end(), NodeId{0});
  std::shuffle(pi.begin(), pi.end(), rng);
  Matrix x(25, 3);
  for (std::size_t v = 0; v < 25; ++v)
    for (std::size_t k = 0; k < 3; ++k) x(pi[v], k) = fg.x()(v, k);
  std::vector<Triangle> tris;
  for (const auto& t : fg.triangles()) tris.push_back({pi[t[0]], pi[t[1]], pi[t[2]]});
  const FactorGraph moved(x, tris);
  const auto a = predict(fg, th, StatusLabels(25));
  const auto b = predict(moved, th, StatusLabels(25));
  for (std::size_t v = 0; v < 25; ++v) {
    EXPECT_NEAR(a.p_manager[v], b.p_manager[pi[v]], 1e-9);
    EXPECT_EQ(a.labels[v], b.labels[pi[v]]);
  }
}
