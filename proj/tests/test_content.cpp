#include <cmath>

#include <gtest/gtest.h>

#include "lipflat/content.hpp"
#include "lipflat/corpus.hpp"
#include "oracle.hpp"

using namespace lipflat;

TEST(GreedyContent, SinglePointAndEmpty) {
  auto X = NormedSpace::euclidean(2);
  for (double s : {0.5, 1.0, 2.0}) {
    auto est = greedy_content(Mat::Constant(1, 2, 0.3), X, s, 0.1);
    EXPECT_EQ(est.value, 0.0);
    EXPECT_EQ(est.cover.size(), 1u);
  }
  auto none = greedy_content(Mat(0, 2), X, 1.0, 0.1);
  EXPECT_EQ(none.value, 0.0);
  EXPECT_TRUE(none.cover.empty());
  EXPECT_THROW(greedy_content(Mat(0, 2), X, 1.0, 0.0), PreconditionError);
}

TEST(GreedyContent, SegmentAgainstIntervalOracle) {
  auto g = segment(101);
  auto est = greedy_content(g.points, NormedSpace::euclidean(2), 1.0, 0.05, g.cell);
  EXPECT_GE(est.value, 0.9);
  EXPECT_LE(est.value, 1.1);
  std::vector<double> xs(g.points.col(0).data(), g.points.col(0).data() + g.points.rows());
  double best = oracle::interval_cover(xs, 1.0, 0.05, g.cell);
  EXPECT_GE(est.value, best - 1e-9);
  EXPECT_LE(est.value, 1.1 * best);
  EXPECT_LE(est.lower_bound, est.value);
}

TEST(GreedyContent, FourCornerCanonicalCover) {
  auto g = four_corner(4);
  auto est = greedy_content(g.points, NormedSpace::euclidean(2), 1.0, std::sqrt(2.0) * std::pow(4.0, -4), g.cell);
  EXPECT_LE(est.value, std::sqrt(2.0) + 1e-9);
}

TEST(GreedyContent, CoverInvariants) {
  auto g = dust(1.5, 4);
  auto X = NormedSpace::euclidean(2);
  auto est = greedy_content(g.points, X, 1.5, 0.05, g.cell);
  double sum = 0.0;
  std::vector<int> seen(static_cast<size_t>(g.points.rows()), 0);
  for (const auto& el : est.cover) {
    EXPECT_LE(el.diameter, 0.05 + 1e-9);
    sum += std::pow(el.diameter, 1.5);
    for (Index i : el.members) ++seen[static_cast<size_t>(i)];
  }
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_NEAR(sum, est.value, 1e-12);
  EXPECT_TRUE(cover_contains(est, g.points, X));
}

TEST(GreedyContent, MonotoneAlongDoublingScales) {
  auto X = NormedSpace::euclidean(2);
  for (const auto& g : {segment(101), four_corner(3), lipschitz_graph(80), circle(80), crossing_segments(31)}) {
    double prev = kInf;
    for (double delta : {0.05, 0.1, 0.2, 0.4, 0.8}) {
      double v = greedy_content(g.points, X, 1.0, delta, g.cell).value;
      EXPECT_LE(v, prev + 1e-9) << g.kind << " " << delta;
      prev = v;
    }
  }
}

TEST(GreedyContent, LipschitzPushforward) {
  auto g = four_corner(3);
  auto X = NormedSpace::euclidean(2);
  auto est = greedy_content(g.points, X, 1.0, 0.05, g.cell);
  for (double L : {0.3, 1.0, 2.5}) {
    Mat A(2, 2);
    A << L, 0, 0, L * 0.5;
    Mat img = g.points * A.transpose();
    EXPECT_LE(pushforward_value(est, img, X, L), std::pow(L, est.s) * est.value + 1e-9);
  }
}

TEST(GreedyContent, CoverStability) {
  auto g = segment(101);
  auto X = NormedSpace::euclidean(2);
  auto est = greedy_content(g.points, X, 1.0, 0.05);
  double rho = cover_slack(est, g.points, X);
  ASSERT_GT(rho, 0.0);
  for (std::uint64_t k = 0; k < 20; ++k) {
    auto rng = stream(k, 0);
    Mat moved = g.points;
    for (Index i = 0; i < moved.rows(); ++i) {
      Vec v = gaussian(rng, 2);
      moved.row(i) += (0.99 * rho * uniform(rng) / v.norm() * v).transpose();
    }
    EXPECT_TRUE(cover_contains(est, moved, X));
  }
}

TEST(GridContent, Examples) {
  EXPECT_EQ(grid_content(Mat(0, 2), 1.0, 0.1).value, 0.0);
  auto g = segment(101);
  Mat line = g.points.leftCols(1);
  auto est = grid_content(line, 1.0, 0.01);
  EXPECT_GE(est.value, 0.9);
  EXPECT_LE(est.value, 1.5);

  Mat sq(10000, 2);
  for (Index i = 0; i < 100; ++i)
    for (Index j = 0; j < 100; ++j) sq.row(100 * i + j) << (i + 0.5) / 100.0, (j + 0.5) / 100.0;
  auto area = grid_content(sq, 2.0, 0.02);
  double expected = 2500 * std::pow(0.02 * std::sqrt(2.0), 2);
  EXPECT_NEAR(area.value, expected, 1e-9);
  EXPECT_GE(area.value / (std::pow(0.02 * std::sqrt(2.0), 2) * 2500), 0.8);
}
