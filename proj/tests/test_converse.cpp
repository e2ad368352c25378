#include <cmath>

#include <gtest/gtest.h>

#include "lipflat/converse.hpp"
#include "oracle.hpp"

using namespace lipflat;

namespace {

Mat disc_sample(double h, double radius = 1.0) {
  std::vector<Eigen::Vector2d> pts;
  long k = static_cast<long>(std::floor(radius / h));
  for (long i = -k; i <= k; ++i)
    for (long j = -k; j <= k; ++j) {
      Eigen::Vector2d p(static_cast<double>(i) * h, static_cast<double>(j) * h);
      if (p.norm() <= radius) pts.push_back(p);
    }
  Mat E(static_cast<Index>(pts.size()), 2);
  for (size_t i = 0; i < pts.size(); ++i) E.row(static_cast<Index>(i)) = pts[i].transpose();
  return E;
}

Mat square_sample(Index n) {
  Mat A(n * n, 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) A.row(n * i + j) << (static_cast<double>(i) + 0.5) / static_cast<double>(n),
                                      (static_cast<double>(j) + 0.5) / static_cast<double>(n);
  return A;
}

}  // namespace

TEST(Winding, AgreesWithAngleSum) {
  Index L = 40;
  Mat loop(L, 2);
  for (Index k = 0; k < L; ++k) {
    double a = 2 * M_PI * static_cast<double>(k) / static_cast<double>(L);
    double r = 1 + 0.3 * std::cos(3 * a);
    loop.row(k) << r * std::cos(a), r * std::sin(a);
  }
  for (std::uint64_t i = 0; i < 200; ++i) {
    auto rng = stream(i, 3);
    Eigen::Vector2d q(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5));
    bool on = false;
    int w = winding_number(loop, q, &on);
    if (!on) {
      EXPECT_EQ(w, oracle::winding_by_angles(loop, q(0), q(1)));
    }
  }
}

TEST(DegreeCoverage, IdentityAtSeveralResolutions) {
  for (Index res : {16, 32, 64}) {
    auto gm = GridMap::sample(res, [](const Vec& x) { return x; });
    auto c = degree_coverage(gm, 0.1);
    EXPECT_TRUE(c.covered) << res;
    EXPECT_GT(c.targets, 0);
  }
  auto gm = GridMap::sample(64, [](const Vec& x) { return x; });
  EXPECT_TRUE(degree_coverage(gm, 0.1, 0.9).covered);
}

TEST(DegreeCoverage, Translation) {
  auto gm = GridMap::sample(64, [](const Vec& x) { return Vec(x + Eigen::Vector2d(0.05, 0)); });
  EXPECT_NEAR(gm.boundary_disp, 0.05, 1e-12);
  EXPECT_TRUE(degree_coverage(gm, 0.06).covered);
}

TEST(DegreeCoverage, ConstantMapIsRejected) {
  auto gm = GridMap::sample(16, [](const Vec&) { return Vec(Vec::Zero(2)); });
  EXPECT_THROW(degree_coverage(gm, 0.1), PreconditionError);
}

TEST(DegreeCoverage, SmoothPerturbations) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto gm = GridMap::sample(32, smooth_perturbation(seed, 0.03));
    EXPECT_LE(gm.boundary_disp, 0.03 + 1e-9);
    EXPECT_TRUE(degree_coverage(gm, 0.05).covered) << seed;
  }
}

TEST(RectBound, IdentityOnBall) {
  Mat E = disc_sample(0.05);
  auto sp = FiniteMetricSpace::from_points(E);
  auto f = identity_map(sp, NormedSpace::euclidean(2));
  auto rb = rect_lower_bound(E, f, 1.0, 0.0);
  EXPECT_NEAR(rb.threshold, 0.5 / (4 * std::sqrt(2.0)), 1e-12);
  EXPECT_TRUE(rb.passes);
  EXPECT_GE(rb.content.lower_bound, 0.088);
}

TEST(RectBound, ThresholdDecreasesInK) {
  double prev = kInf;
  for (double K : {1.0, 1.5, 2.0, 4.0, 10.0}) {
    double t = rect_threshold(K, 2);
    EXPECT_LT(t, prev);
    prev = t;
  }
}

TEST(RectBound, ConstantMapFailsPairCondition) {
  Mat E = disc_sample(0.2);
  auto sp = FiniteMetricSpace::from_points(E);
  auto f = make_map(sp, NormedSpace::euclidean(2), Mat::Zero(E.rows(), 2));
  EXPECT_THROW(rect_lower_bound(E, f, 1.0, 0.01), PreconditionError);
}

TEST(RectBound, PuncturedSampleStillPasses) {
  Mat full = disc_sample(0.05);
  std::vector<Index> keep;
  for (Index i = 0; i < full.rows(); ++i)
    if (!(full(i, 0) > 0.55 && full(i, 1) > 0.0 && full(i, 1) < 0.45)) keep.push_back(i);
  double removed = 1.0 - static_cast<double>(keep.size()) / static_cast<double>(full.rows());
  EXPECT_GT(removed, 0.02);
  EXPECT_LT(removed, 0.08);
  Mat E(static_cast<Index>(keep.size()), 2);
  for (size_t k = 0; k < keep.size(); ++k) E.row(static_cast<Index>(k)) = full.row(keep[k]);
  auto sp = FiniteMetricSpace::from_points(E);
  auto rb = rect_lower_bound(E, identity_map(sp, NormedSpace::euclidean(2)), 1.0, 0.0);
  EXPECT_TRUE(rb.passes);
}

TEST(PositiveImage, ZeroMap) {
  Mat A = square_sample(20);
  auto sp = FiniteMetricSpace::from_points(A);
  auto f = make_map(sp, NormedSpace::euclidean(2), Mat::Zero(A.rows(), 2));
  double eps = 0.1;
  auto p = positive_image_perturb(A, f, eps);
  EXPECT_GT(p.content.value, 0.0);
  EXPECT_LT(p.sup_T, eps);
  EXPECT_LT(p.lip_T, eps);
  Vec x0 = A.row(p.density_point).transpose();
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = i + 1; j < A.rows(); ++j) {
      if ((A.row(i).transpose() - x0).norm() > 1 || (A.row(j).transpose() - x0).norm() > 1) continue;
      double dx = (A.row(i) - A.row(j)).norm();
      double dy = (p.f_star.at(i) - p.f_star.at(j)).norm();
      ASSERT_GE(dy, eps / 4 * dx * (1 - 1e-9));
      ASSERT_LE(dy, eps / 4 * dx * (1 + 1e-9));
    }
}

TEST(PositiveImage, IdentityNeedsNoCorrection) {
  Mat A = square_sample(15);
  auto sp = FiniteMetricSpace::from_points(A);
  auto f = identity_map(sp, NormedSpace::euclidean(2));
  auto p = positive_image_perturb(A, f, 0.1);
  EXPECT_LT(p.correction_norm, 0.1);
  EXPECT_LE((p.f_star.values - f.values).cwiseAbs().maxCoeff(), 1e-9);
  auto before = greedy_content(A, NormedSpace::euclidean(2), 2.0, p.content.delta, p.content.grain);
  EXPECT_NEAR(p.content.value, before.value, 1e-9);
}

TEST(PositiveImage, Preconditions) {
  Mat A = square_sample(4);
  auto sp = FiniteMetricSpace::from_points(A);
  auto f = identity_map(sp, NormedSpace::linf(2));
  EXPECT_THROW(positive_image_perturb(A, f, 0.1), PreconditionError);
  EXPECT_THROW(positive_image_perturb(A, identity_map(sp, NormedSpace::euclidean(2)), 0.0), PreconditionError);
}
