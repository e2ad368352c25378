#include <cmath>

#include <gtest/gtest.h>

#include "lipflat/normgeom.hpp"
#include "oracle.hpp"

using namespace lipflat;

namespace {

Mat random_frame(std::uint64_t seed, Index m, Index d) {
  auto rng = stream(seed, 0);
  Mat G(m, d);
  for (Index c = 0; c < d; ++c) G.col(c) = gaussian(rng, m);
  Eigen::HouseholderQR<Mat> qr(G);
  return Mat(qr.householderQ()).leftCols(d);
}

}  // namespace

TEST(Norm, Examples) {
  EXPECT_DOUBLE_EQ(NormedSpace::euclidean(2).norm(Eigen::Vector2d(3, 4)), 5.0);
  EXPECT_DOUBLE_EQ(NormedSpace::linf(3).norm(Eigen::Vector3d(1, -2, 3)), 3.0);
  for (double p : {1.0, 1.5, 2.0, 3.0, kInf}) EXPECT_EQ(NormedSpace::lp(4, p).norm(Vec::Zero(4)), 0.0);
}

TEST(Norm, RejectsBadParameters) {
  EXPECT_THROW(NormedSpace::lp(0, 2.0), PreconditionError);
  EXPECT_THROW(NormedSpace::lp(2, 0.5), PreconditionError);
  Mat flat(2, 2);
  flat << 1, 2, 0, 0;
  EXPECT_THROW(NormedSpace::polytope(flat), PreconditionError);
}

TEST(Norm, PolytopeMatchesLinfAndL1) {
  Mat square = Mat::Identity(2, 2) * 1.0;
  Mat corners(2, 2);
  corners << 1, 1, 1, -1;
  auto l1 = NormedSpace::polytope(square);
  auto linf = NormedSpace::polytope(corners);
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto rng = stream(7, i);
    Vec v = gaussian(rng, 2);
    EXPECT_NEAR(l1.norm(v), v.cwiseAbs().sum(), 1e-12);
    EXPECT_NEAR(linf.norm(v), v.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(l1.dual_norm(v), v.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Norm, NormingFunctionalAttainsNorm) {
  for (double p : {1.0, 1.5, 2.0, 4.0, kInf}) {
    auto X = NormedSpace::lp(3, p);
    Vec w(3);
    w << 0.3, -1.2, 0.7;
    Vec phi = X.norming_functional(w);
    EXPECT_NEAR(X.dual_norm(phi), 1.0, 1e-9) << p;
    EXPECT_NEAR(phi.dot(w), X.norm(w), 1e-9) << p;
  }
}

TEST(OperatorNorm, Examples) {
  auto l2 = NormedSpace::euclidean(3);
  EXPECT_NEAR(operator_norm(Mat::Identity(3, 3), l2, l2), 1.0, 1e-12);
  Mat t(1, 3);
  t << 1, -2, 2;
  EXPECT_NEAR(operator_norm(t, l2, NormedSpace::reals()), 3.0, 1e-12);
  Mat proj(1, 2);
  proj << 1, 0;
  EXPECT_NEAR(operator_norm(proj, NormedSpace::linf(2), NormedSpace::reals()), 1.0, 1e-12);
  EXPECT_THROW(operator_norm(Mat(2, 0), NormedSpace::euclidean(1), l2), PreconditionError);
}

TEST(OperatorNorm, ExactOnPolyhedralDomains) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = stream(seed, 1);
    Mat T(3, 3);
    for (Index i = 0; i < 9; ++i) T(i) = uniform(rng, -1, 1);
    EXPECT_NEAR(operator_norm(T, NormedSpace::lp(3, 1.0), NormedSpace::lp(3, 1.0)), oracle::l1_operator(T), 1e-12);
    EXPECT_NEAR(operator_norm(T, NormedSpace::linf(3), NormedSpace::linf(3)), oracle::linf_operator(T), 1e-12);
  }
}

TEST(OperatorNorm, MonotoneInSamples) {
  auto rng = stream(3, 0);
  Mat T(3, 3);
  for (Index i = 0; i < 9; ++i) T(i) = uniform(rng, -1, 1);
  auto dom = NormedSpace::lp(3, 3.0), cod = NormedSpace::lp(3, 1.5);
  double prev = 0.0;
  for (Index n : {10, 100, 1000}) {
    double v = operator_norm(T, dom, cod, n, 5);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Unconditional, StandardAndOrthonormalBases) {
  EXPECT_NEAR(unconditional_constant(Mat::Identity(4, 4), NormedSpace::linf(4)), 1.0, 1e-12);
  Mat Q = random_frame(11, 4, 4);
  EXPECT_NEAR(unconditional_constant(Q, NormedSpace::euclidean(4)), 1.0, 1e-9);
}

TEST(Unconditional, SkewedBasisMatchesSignPatternOracle) {
  Mat B(2, 2);
  B << 1, 1 / std::sqrt(2.0), 0, 1 / std::sqrt(2.0);
  double exact = 1.0;
  for (const Vec& l : sign_vertices(2)) {
    Mat M = B * l.asDiagonal() * B.inverse();
    exact = std::max(exact, Eigen::JacobiSVD<Mat>(M).singularValues()(0));
  }
  double est = unconditional_constant(B, NormedSpace::euclidean(2), 4000);
  EXPECT_GE(est, 1.0);
  EXPECT_LE(est, exact + 1e-9);
  EXPECT_GE(est, exact * (1 - 1e-3));
}

TEST(Unconditional, RejectsSingularBasis) {
  Mat B(2, 2);
  B << 1, 2, 1, 2;
  EXPECT_THROW(unconditional_constant(B, NormedSpace::euclidean(2)), PreconditionError);
}

TEST(AdaptedBasis, EuclideanLine) {
  auto X = NormedSpace::euclidean(3);
  Mat W = Vec::Unit(3, 0);
  auto ab = adapted_basis(X, W);
  EXPECT_EQ(ab.d, 1);
  EXPECT_TRUE((ab.basis.transpose() * ab.basis).isApprox(Mat::Identity(3, 3), 1e-12));
  EXPECT_TRUE((ab.P * ab.P).isApprox(ab.P, 1e-12));
  EXPECT_TRUE(ab.P.isApprox(ab.P.transpose(), 1e-12));
  EXPECT_NEAR(ab.K_d, 1.0, 1e-12);
  EXPECT_NEAR(ab.tildeK, 1.0, 1e-9);
}

TEST(AdaptedBasis, ZeroDimensionalInLinf) {
  auto X = NormedSpace::linf(5);
  auto ab = adapted_basis(X, Mat(5, 0));
  EXPECT_TRUE(ab.P.isZero(0.0));
  EXPECT_TRUE(ab.Q.isApprox(Mat::Identity(5, 5)));
  EXPECT_TRUE(ab.basis.isApprox(Mat::Identity(5, 5)));
  EXPECT_NEAR(tilde_k_witness(ab, X), 1.0, 1e-9);
}

TEST(AdaptedBasis, LinfDiagonalHasNormOneProjection) {
  auto X = NormedSpace::linf(2);
  Mat W = Eigen::Vector2d(1, 1).normalized();
  auto ab = adapted_basis(X, W);
  EXPECT_LE(ab.K_p, 1.0 + 1e-6);
  EXPECT_LE(oracle::linf_operator(ab.P), 1.0 + 1e-6);
  EXPECT_TRUE((ab.P * W).isApprox(W, 1e-9));
}

TEST(AdaptedBasis, RejectsTooLargeSubspace) {
  EXPECT_THROW(adapted_basis(NormedSpace::euclidean(2), Mat::Identity(2, 3)), PreconditionError);
}

TEST(AdaptedBasis, ReconstructionIdentity) {
  struct Case {
    NormedSpace X;
    Index d;
  };
  std::vector<Case> cases = {{NormedSpace::euclidean(4), 2}, {NormedSpace::linf(3), 1}, {NormedSpace::lp(3, 1.0), 2},
                             {NormedSpace::lp(4, 3.0), 1}};
  std::uint64_t seed = 0;
  for (const auto& c : cases) {
    auto ab = adapted_basis(c.X, random_frame(++seed, c.X.dim(), c.d));
    Mat recon = ab.P + ab.basis * ab.functionals * ab.Q;
    for (std::uint64_t i = 0; i < 10000; ++i) {
      auto rng = stream(seed, i);
      Vec x = gaussian(rng, c.X.dim());
      ASSERT_LE((recon * x - x).norm(), 1e-9 * x.norm());
    }
  }
}

TEST(AdaptedBasis, EuclideanWitnessIsOne) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    auto rng = stream(99, k);
    Index m = 1 + static_cast<Index>(rng() % 8);
    Index d = static_cast<Index>(rng() % static_cast<std::uint64_t>(m + 1));
    auto X = NormedSpace::euclidean(m);
    auto ab = adapted_basis(X, random_frame(k, m, d));
    ASSERT_LE(tilde_k_witness(ab, X, 200, k), 1.0 + 1e-9) << "m=" << m << " d=" << d;
  }
}

TEST(AdaptedBasis, WitnessWithinUnconditionalBound) {
  for (double p : {1.0, 1.5, 3.0, kInf})
    for (Index d = 1; d <= 3; ++d) {
      auto X = NormedSpace::lp(4, p);
      auto ab = adapted_basis(X, random_frame(static_cast<std::uint64_t>(10 * d + 1), 4, d));
      double w = tilde_k_witness(ab, X);
      double ku = unconditional_constant(ab.basis, X);
      EXPECT_LE(w, ku * (std::sqrt(static_cast<double>(d)) + 2) + 1e-6) << p << " " << d;
      EXPECT_LE(w, std::sqrt(static_cast<double>(d)) + 2 + 1e-6) << p << " " << d;
    }
}
