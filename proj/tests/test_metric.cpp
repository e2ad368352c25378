#include <gtest/gtest.h>

#include "lipflat/corpus.hpp"
#include "lipflat/metric.hpp"

using namespace lipflat;

namespace {

FiniteMetricSpace line(Index n) {
  Mat pts = Mat::Zero(n, 1);
  for (Index i = 0; i < n; ++i) pts(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
  return FiniteMetricSpace::from_points(pts);
}

}  // namespace

TEST(ValidateMetric, Examples) {
  Mat D(3, 3);
  D << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  EXPECT_TRUE(validate_metric(D).ok());

  Mat A = D;
  A(0, 1) = 1.5;
  EXPECT_EQ(validate_metric(A).kind, MetricDiagnostics::Kind::asymmetric);

  Mat T = D;
  T(0, 2) = T(2, 0) = 3;
  auto diag = validate_metric(T);
  EXPECT_EQ(diag.kind, MetricDiagnostics::Kind::triangle);
  EXPECT_EQ(diag.i, 0);
  EXPECT_EQ(diag.j, 1);
  EXPECT_EQ(diag.k, 2);

  Mat N = D;
  N(0, 1) = N(1, 0) = -1;
  EXPECT_EQ(validate_metric(N).kind, MetricDiagnostics::Kind::negative);
  Mat Z = D;
  Z(0, 1) = Z(1, 0) = 0;
  EXPECT_EQ(validate_metric(Z).kind, MetricDiagnostics::Kind::zero_distance);
  EXPECT_EQ(validate_metric(Mat::Zero(2, 3)).kind, MetricDiagnostics::Kind::not_square);
}

TEST(ValidateMetric, CorpusOutputsPass) {
  for (const auto& g : {four_corner(3), dust(1.5, 3), segment(50), circle(40), lipschitz_graph(50), crossing_segments(21)})
    EXPECT_TRUE(validate_metric(g.space().distances()).ok()) << g.kind;
}

TEST(FiniteMetricSpace, RejectsInvalidMatrix) {
  Mat D(2, 2);
  D << 0, 1, 2, 0;
  EXPECT_THROW(FiniteMetricSpace::from_matrix(D), PreconditionError);
}

TEST(NeighborhoodGraph, Modes) {
  auto sp = line(5);
  EXPECT_EQ(neighborhood_graph(sp, GraphMode::complete()).edge_count(), 10);
  auto path = neighborhood_graph(sp, GraphMode::knn(1));
  EXPECT_EQ(path.edge_count(), 4);
  for (Index i = 0; i + 1 < 5; ++i) EXPECT_TRUE(path.has_edge(i, i + 1));
  EXPECT_EQ(neighborhood_graph(sp, GraphMode::radius(0.2)).edge_count(), 0);
}

TEST(Fragments, BoundsHoldOnPaths) {
  auto sp = four_corner(2).space();
  auto g = neighborhood_graph(sp, GraphMode::knn(3));
  for (const auto& c : edge_fragments(sp, g)) EXPECT_TRUE(fragment_bounds_hold(sp, c));
  auto c = fragment_from_path(sp, {0, 1, 3, 2, 6});
  EXPECT_GT(c.lower, 0.0);
  EXPECT_TRUE(fragment_bounds_hold(sp, c));
  for (size_t j = 1; j < c.params.size(); ++j) EXPECT_GT(c.params[j], c.params[j - 1]);
}

TEST(EpsilonNet, Examples) {
  auto sp = line(101);
  EXPECT_EQ(max_epsilon_net(sp, 2.0), std::vector<Index>{0});
  EXPECT_EQ(max_epsilon_net(sp, 0.001).size(), 101u);
  auto net = max_epsilon_net(sp, 0.25);
  EXPECT_EQ(net, (std::vector<Index>{0, 25, 50, 75, 100}));
}

TEST(EpsilonNet, SeparatedAndMaximal) {
  auto sp = dust(1.5, 3).space();
  for (double eps : {0.05, 0.1, 0.3}) {
    auto net = max_epsilon_net(sp, eps);
    for (size_t a = 0; a < net.size(); ++a)
      for (size_t b = a + 1; b < net.size(); ++b) EXPECT_GE(sp.dist(net[a], net[b]), eps);
    Vec to = sp.distance_to(net);
    EXPECT_LT(to.maxCoeff(), eps);
  }
}

TEST(Kuratowski, TwoPoints) {
  Mat D(2, 2);
  D << 0, 1, 1, 0;
  auto sp = FiniteMetricSpace::from_matrix(D);
  auto F = kuratowski_embed(sp, {0, 1});
  EXPECT_TRUE(F.at(0).isApprox(Eigen::Vector2d(0, 1)));
  EXPECT_TRUE(F.at(1).isApprox(Eigen::Vector2d(1, 0)));
  EXPECT_DOUBLE_EQ(F.target.norm(F.at(0) - F.at(1)), 1.0);
  EXPECT_THROW(kuratowski_embed(sp, {}), PreconditionError);
}

TEST(Kuratowski, LipschitzOneAndContractionBound) {
  for (const auto& g : {segment(101), four_corner(3), circle(60)}) {
    auto sp = g.space();
    for (double eps : {0.1, 0.2}) {
      auto F = kuratowski_embed(sp, max_epsilon_net(sp, eps));
      EXPECT_LE(F.lip, 1.0 + 1e-12);
      EXPECT_NEAR(F.lip, measure_lip(sp, F.target, F.values), 1e-12);
      EXPECT_GE(min_pair_slack(sp, F), -2 * eps - 1e-12) << g.kind;
    }
  }
  auto sp = line(101);
  EXPECT_GE(min_pair_slack(sp, kuratowski_embed(sp, max_epsilon_net(sp, 0.1))), -0.2);
}
