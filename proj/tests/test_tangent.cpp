#include <cmath>

#include <gtest/gtest.h>

#include "lipflat/corpus.hpp"
#include "lipflat/tangent.hpp"

using namespace lipflat;

namespace {

Vec v2(double a, double b) { return Eigen::Vector2d(a, b); }

std::vector<Index> all(Index n) {
  std::vector<Index> S(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) S[static_cast<size_t>(i)] = i;
  return S;
}

}  // namespace

TEST(Cone, Examples) {
  Vec e1 = v2(1, 0);
  for (double t : {0.1, 0.5, 0.9}) EXPECT_TRUE(cone_membership(e1, e1, t));
  EXPECT_FALSE(cone_membership(v2(0, 1), e1, 0.5));
  EXPECT_TRUE(cone_membership(v2(1, 1) / std::sqrt(2.0), e1, 0.3));
  EXPECT_THROW(cone_membership(e1, v2(2, 0), 0.5), PreconditionError);
}

TEST(Cone, ScaleInvariant) {
  Vec w = v2(0.6, 0.8);
  for (std::uint64_t k = 0; k < 50; ++k) {
    auto rng = stream(k, 0);
    Vec v = gaussian(rng, 2);
    for (double c : {0.01, 3.0, 1e4}) EXPECT_EQ(cone_membership(c * v, w, 0.4), cone_membership(v, w, 0.4));
  }
}

TEST(Complement, Examples) {
  Mat none(2, 0);
  Mat W = v2(1, 0);
  EXPECT_TRUE(complement_membership(v2(0.3, -2), none, 0.1));
  EXPECT_FALSE(complement_membership(v2(2, 0), W, 0.9));
  EXPECT_FALSE(complement_membership(v2(1, 1) / std::sqrt(2.0), W, 0.2));
  for (std::uint64_t k = 0; k < 20; ++k) {
    auto rng = stream(k, 1);
    Vec v = gaussian(rng, 2);
    EXPECT_TRUE(complement_membership(v, none, 0.5));
    if (std::abs(v(1)) > 1e-6) {
      EXPECT_TRUE(complement_membership(v, W, 1 - 1e-9));
    }
  }
}

TEST(Profile, Examples) {
  auto g = segment(11);
  auto sp = g.space();
  auto id = identity_map(sp, NormedSpace::euclidean(2));
  auto mono = fragment_from_path(sp, all(11));
  EXPECT_DOUBLE_EQ(fragment_profile(mono, id, DirectionSet::cone(v2(1, 0), 0.5)).fraction_in, 1.0);

  auto flat = make_map(sp, NormedSpace::euclidean(2), Mat::Zero(11, 2));
  EXPECT_EQ(fragment_profile(mono, flat, DirectionSet::cone(v2(1, 0), 0.5)).fraction_in, 0.0);

  Mat stairs(7, 2);
  for (Index i = 0; i < 7; ++i) stairs.row(i) << static_cast<double>((i + 1) / 2), static_cast<double>(i / 2);
  auto ssp = FiniteMetricSpace::from_points(stairs);
  auto sid = identity_map(ssp, NormedSpace::euclidean(2));
  auto p = fragment_profile(fragment_from_path(ssp, all(7)), sid, DirectionSet::cone(v2(1, 0), 0.1));
  EXPECT_DOUBLE_EQ(p.fraction_in, 0.5);
}

TEST(TangentField, SegmentIsFlat) {
  auto g = segment(41);
  auto sp = g.space();
  auto id = identity_map(sp, NormedSpace::euclidean(2));
  auto frags = edge_fragments(sp, neighborhood_graph(sp, GraphMode::knn(2)));
  auto tf = fit_tangent_field(all(41), id, frags, 1, 0.5);
  for (const auto& W : tf.frames) EXPECT_NEAR(std::abs(W(0, 0)), 1.0, 1e-12);
  EXPECT_EQ(tf.total_violation, 0.0);
}

TEST(TangentField, CantorZeroDimensional) {
  for (Index depth : {1, 2, 3}) {
    auto g = four_corner(depth);
    auto sp = g.space();
    auto id = identity_map(sp, NormedSpace::euclidean(2));
    auto frags = edge_fragments(sp, neighborhood_graph(sp, GraphMode::knn(4)));
    auto tf = fit_tangent_field(all(sp.size()), id, frags, 0, 0.9);
    double incident = 0.0;
    for (const auto& c : frags)
      for (Index j = 0; j + 1 < c.size(); ++j) incident += 2 * (c.params[static_cast<size_t>(j + 1)] - c.params[static_cast<size_t>(j)]);
    EXPECT_NEAR(tf.total_violation, incident, 1e-9);
    for (const auto& W : tf.frames) EXPECT_EQ(W.cols(), 0);
  }
}

TEST(TangentField, CrossingBranches) {
  auto g = crossing_segments(21);
  auto sp = g.space();
  auto id = identity_map(sp, NormedSpace::euclidean(2));
  auto frags = edge_fragments(sp, neighborhood_graph(sp, GraphMode::knn(2)));
  auto tf = fit_tangent_field(all(sp.size()), id, frags, 1, 0.5);
  Vec diag = v2(1, 1).normalized(), anti = v2(1, -1).normalized();
  double near = 0.0, far = 0.0;
  for (Index i = 0; i < sp.size(); ++i) {
    Vec x = g.points.row(i).transpose() - v2(0.5, 0.5);
    bool on_diag = std::abs(x(0) - x(1)) < 1e-12;
    Vec expect = on_diag ? diag : anti;
    double r = x.norm();
    if (r > 0.15) {
      EXPECT_NEAR(std::abs(tf.frames[static_cast<size_t>(i)].col(0).dot(expect)), 1.0, 1e-9) << i;
    }
    (r > 0.15 ? far : near) += tf.violation[static_cast<size_t>(i)];
  }
  EXPECT_EQ(far, 0.0);
}

TEST(Partition, ConstantFieldIsOnePiece) {
  auto g = segment(21);
  auto sp = g.space();
  auto id = identity_map(sp, NormedSpace::euclidean(2));
  auto tf = fit_tangent_field(all(21), id, edge_fragments(sp, neighborhood_graph(sp, GraphMode::knn(2))), 1, 0.5);
  auto part = partition_by_field(tf, 0.5, 3);
  ASSERT_EQ(part.pieces.size(), 1u);
  EXPECT_EQ(part.pieces[0].indices.size(), 21u);
  EXPECT_TRUE(part.unassigned.empty());
}

TEST(Partition, CrossingSplitsIntoBranches) {
  auto g = crossing_segments(21);
  auto sp = g.space();
  auto id = identity_map(sp, NormedSpace::euclidean(2));
  auto tf = fit_tangent_field(all(sp.size()), id, edge_fragments(sp, neighborhood_graph(sp, GraphMode::knn(2))), 1, 0.5);
  auto part = partition_by_field(tf, 0.5, 2);
  ASSERT_EQ(part.pieces.size(), 2u);
  std::vector<int> seen(static_cast<size_t>(sp.size()), 0);
  for (const auto& piece : part.pieces) {
    Vec dir = piece.frame.col(0);
    for (Index i : piece.indices) {
      ++seen[static_cast<size_t>(i)];
      Vec x = g.points.row(i).transpose() - v2(0.5, 0.5);
      if (x.norm() < 0.15) continue;
      bool on_diag = std::abs(x(0) - x(1)) < 1e-12;
      Vec expect = on_diag ? v2(1, 1).normalized() : v2(1, -1).normalized();
      EXPECT_NEAR(std::abs(dir.dot(expect)), 1.0, 1e-2);
    }
  }
  for (Index i : part.unassigned) ++seen[static_cast<size_t>(i)];
  for (int c : seen) EXPECT_EQ(c, 1);
}

TEST(Grassmann, PrincipalAngles) {
  Mat A = v2(1, 0), B = v2(0, 1), C = v2(1, 1).normalized();
  EXPECT_NEAR(principal_cosines(A, B)(0), 0.0, 1e-12);
  EXPECT_NEAR(principal_cosines(A, C)(0), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(grassmann_distance(A, A), 0.0, 1e-12);
  EXPECT_GT(grassmann_distance(A, B), grassmann_distance(A, C));
}
