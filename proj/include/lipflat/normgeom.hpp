#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "util.hpp"

namespace lipflat {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// p-norm of v; p may be kInf.
inline double p_norm(const Vec& v, double p) {
  require(p >= 1.0, "p_norm: exponent p must be >= 1");
  if (v.size() == 0) return 0.0;
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  if (p == 1.0) return v.cwiseAbs().sum();
  if (p == 2.0) return v.norm();
  double top = v.cwiseAbs().maxCoeff();
  if (top == 0.0) return 0.0;
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) acc += std::pow(std::abs(v(i)) / top, p);
  return top * std::pow(acc, 1.0 / p);
}

/// R^m with an l_p norm or a symmetric polytope norm given by unit-ball vertices.
class NormedSpace {
 public:
  enum class Kind { lp, polytope };

  NormedSpace() = default;

  static NormedSpace lp(Index m, double p) {
    require(m >= 1, "NormedSpace: dimension must be positive");
    require(p >= 1.0, "NormedSpace: exponent p must be >= 1");
    NormedSpace s;
    s.dim_ = m;
    s.kind_ = Kind::lp;
    s.p_ = p;
    return s;
  }
  static NormedSpace euclidean(Index m) { return lp(m, 2.0); }
  static NormedSpace linf(Index m) { return lp(m, kInf); }
  static NormedSpace reals() { return lp(1, 2.0); }

  /// Unit ball = conv(±columns of `vertices`). Facets are enumerated once.
  static NormedSpace polytope(const Mat& vertices) {
    Index m = vertices.rows();
    require(m >= 1 && vertices.cols() >= m, "NormedSpace: polytope needs at least m vertices in R^m");
    require(Eigen::FullPivLU<Mat>(vertices).rank() == m, "NormedSpace: polytope vertices must span R^m");
    NormedSpace s;
    s.dim_ = m;
    s.kind_ = Kind::polytope;
    s.p_ = 0.0;
    s.vertices_ = vertices;
    s.facets_ = enumerate_facets(vertices);
    return s;
  }

  Index dim() const { return dim_; }
  Kind kind() const { return kind_; }
  double p() const { return p_; }
  bool is_lp() const { return kind_ == Kind::lp; }
  bool is_euclidean() const { return kind_ == Kind::lp && p_ == 2.0; }
  const Mat& vertices() const { return vertices_; }
  const Mat& facets() const { return facets_; }

  double norm(const Vec& v) const {
    if (kind_ == Kind::lp) return p_norm(v, p_);
    return (facets_.transpose() * v).cwiseAbs().maxCoeff();
  }

  /// Norm of the functional x -> t.x.
  double dual_norm(const Vec& t) const {
    if (kind_ == Kind::lp) return p_norm(t, conjugate(p_));
    return (vertices_.transpose() * t).cwiseAbs().maxCoeff();
  }

  /// A functional of dual norm 1 attaining phi(w) = ||w||.
  Vec norming_functional(const Vec& w) const {
    Vec phi = Vec::Zero(dim_);
    double nw = norm(w);
    if (nw == 0.0) return phi;
    if (kind_ == Kind::polytope) {
      Vec s = facets_.transpose() * w;
      Index k = 0;
      for (Index j = 1; j < s.size(); ++j)
        if (std::abs(s(j)) > std::abs(s(k))) k = j;
      return facets_.col(k) * (s(k) >= 0 ? 1.0 : -1.0);
    }
    if (std::isinf(p_)) {
      Index k = 0;
      for (Index i = 1; i < dim_; ++i)
        if (std::abs(w(i)) > std::abs(w(k))) k = i;
      phi(k) = w(k) >= 0 ? 1.0 : -1.0;
      return phi;
    }
    if (p_ == 1.0) {
      for (Index i = 0; i < dim_; ++i) phi(i) = w(i) > 0 ? 1.0 : (w(i) < 0 ? -1.0 : 0.0);
      return phi;
    }
    for (Index i = 0; i < dim_; ++i) {
      double a = std::abs(w(i)) / nw;
      phi(i) = (w(i) >= 0 ? 1.0 : -1.0) * std::pow(a, p_ - 1.0);
    }
    return phi;
  }

  /// C with ||v||_2 / C <= ||v|| <= C ||v||_2.
  double equivalence() const {
    if (kind_ == Kind::lp) {
      double e = std::isinf(p_) ? 0.5 : std::abs(1.0 / p_ - 0.5);
      return std::pow(static_cast<double>(dim_), e);
    }
    double a = facets_.colwise().norm().maxCoeff();
    double b = vertices_.colwise().norm().maxCoeff();
    return std::max({1.0, a, b});
  }

  /// Extreme points of the unit ball when there are at most `limit` of them.
  bool has_extreme_points(Index limit = Index{1} << 16) const {
    return extreme_point_count() <= limit;
  }

  Index extreme_point_count() const {
    if (kind_ == Kind::polytope) return 2 * vertices_.cols();
    if (p_ == 1.0) return 2 * dim_;
    if (std::isinf(p_)) return dim_ >= 62 ? std::numeric_limits<Index>::max() : Index{1} << dim_;
    return std::numeric_limits<Index>::max();
  }

  std::vector<Vec> extreme_points() const {
    std::vector<Vec> out;
    if (kind_ == Kind::polytope) {
      for (Index j = 0; j < vertices_.cols(); ++j) {
        out.push_back(vertices_.col(j));
        out.push_back(-vertices_.col(j));
      }
    } else if (p_ == 1.0) {
      for (Index i = 0; i < dim_; ++i) {
        out.push_back(Vec::Unit(dim_, i));
        out.push_back(-Vec::Unit(dim_, i));
      }
    } else if (std::isinf(p_)) {
      out = sign_vertices(dim_);
    }
    return out;
  }

  static double conjugate(double p) {
    if (std::isinf(p)) return 1.0;
    if (p == 1.0) return kInf;
    return p / (p - 1.0);
  }

 private:
  static Mat enumerate_facets(const Mat& U) {
    Index m = U.rows(), k = U.cols();
    Mat pts(m, 2 * k);
    pts << U, -U;
    Index total = pts.cols();
    double budget = 1.0;
    for (Index i = 0; i < m; ++i) budget *= static_cast<double>(total - i) / static_cast<double>(i + 1);
    require(budget <= 4e6, "NormedSpace: polytope too large for facet enumeration");
    std::vector<Index> pick(static_cast<size_t>(m));
    std::map<std::vector<long long>, Vec> found;
    auto visit = [&](auto&& self, Index start, Index depth) -> void {
      if (depth == m) {
        Mat A(m, m);
        for (Index r = 0; r < m; ++r) A.row(r) = pts.col(pick[static_cast<size_t>(r)]).transpose();
        Eigen::FullPivLU<Mat> lu(A);
        if (lu.rank() < m) return;
        Vec a = lu.solve(Vec::Ones(m));
        if ((pts.transpose() * a).maxCoeff() > 1.0 + 1e-9) return;
        std::vector<long long> key(static_cast<size_t>(m));
        for (Index r = 0; r < m; ++r) key[static_cast<size_t>(r)] = std::llround(a(r) * 1e9);
        found.emplace(key, a);
        return;
      }
      for (Index j = start; j < total; ++j) {
        pick[static_cast<size_t>(depth)] = j;
        self(self, j + 1, depth + 1);
      }
    };
    visit(visit, 0, 0);
    require(!found.empty(), "NormedSpace: no facets found; vertices must surround the origin");
    Mat F(m, static_cast<Index>(found.size()));
    Index c = 0;
    for (auto& kv : found) F.col(c++) = kv.second;
    return F;
  }

  Index dim_ = 1;
  Kind kind_ = Kind::lp;
  double p_ = 2.0;
  Mat vertices_;
  Mat facets_;
};

/// Lower-bound estimate of ||T||: dom -> cod; exact for functionals, l2->l2 and polyhedral domains.
inline double operator_norm(const Mat& T, const NormedSpace& dom, const NormedSpace& cod,
                            Index samples = 2000, std::uint64_t seed = 0) {
  require(dom.dim() > 0, "operator_norm: zero-dimensional domain");
  require(T.cols() == dom.dim() && T.rows() == cod.dim(), "operator_norm: dimension mismatch");
  if (T.isZero(0.0)) return 0.0;
  if (cod.dim() == 1) return dom.dual_norm(T.row(0).transpose());
  if (dom.is_lp() && cod.is_lp() && dom.p() == cod.p() && T.rows() == T.cols() && Mat(T.diagonal().asDiagonal()) == T)
    return T.diagonal().cwiseAbs().maxCoeff();
  if (dom.is_euclidean() && cod.is_euclidean()) {
    Eigen::JacobiSVD<Mat> svd(T);
    return svd.singularValues()(0);
  }
  if (dom.has_extreme_points()) {
    auto ext = dom.extreme_points();
    return parallel_max(static_cast<Index>(ext.size()), [&](Index i) {
      const Vec& x = ext[static_cast<size_t>(i)];
      return cod.norm(T * x) / dom.norm(x);
    }, 0.0);
  }
  Index m = dom.dim();
  auto ratio = [&](const Vec& x) { return cod.norm(T * x) / dom.norm(x); };
  double best = 0.0;
  for (Index i = 0; i < m; ++i) best = std::max(best, ratio(Vec::Unit(m, i)));
  double sampled = parallel_max(samples, [&](Index i) {
    auto rng = stream(seed, static_cast<std::uint64_t>(i));
    Vec x = gaussian(rng, m);
    if (x.isZero(0.0)) x(0) = 1.0;
    double v = ratio(x);
    double h = 0.5;
    for (int it = 0; it < 24; ++it, h *= 0.75) {
      Vec y = x / dom.norm(x) + h * gaussian(rng, m) / std::sqrt(static_cast<double>(m));
      if (y.isZero(0.0)) continue;
      double vy = ratio(y);
      if (vy > v) {
        v = vy;
        x = y;
      }
    }
    return v;
  }, 0.0);
  return std::max(best, sampled);
}

namespace detail {

/// max over x in `xs` and sign vectors l of ||A x + B diag(l) C x|| / ||x||.
inline double signed_ratio_max(const Mat& A, const Mat& B, const Mat& C, const NormedSpace& space,
                               Index samples, std::uint64_t seed) {
  Index m = space.dim();
  auto diagonal = [](const Mat& M) { return Mat(M.diagonal().asDiagonal()) == M; };
  // lp norms are lattice norms: diagonal maps act coordinatewise
  if (space.is_lp() && A.isZero(0.0) && diagonal(B) && diagonal(C))
    return B.diagonal().cwiseProduct(C.diagonal()).cwiseAbs().maxCoeff();
  std::vector<Vec> xs;
  if (space.has_extreme_points(4096)) {
    xs = space.extreme_points();
  } else {
    for (Index i = 0; i < m; ++i) xs.push_back(Vec::Unit(m, i));
    for (Index i = 0; i < samples; ++i) {
      auto rng = stream(seed, static_cast<std::uint64_t>(i));
      Vec x = gaussian(rng, m);
      if (!x.isZero(0.0)) xs.push_back(x);
    }
  }
  bool exhaust = m <= 10;
  std::vector<Vec> ls = exhaust ? sign_vertices(m) : std::vector<Vec>{};
  return parallel_max(static_cast<Index>(xs.size()), [&](Index i) {
    const Vec& x = xs[static_cast<size_t>(i)];
    double nx = space.norm(x);
    Vec base = A * x, coords = C * x;
    double best = 0.0;
    auto eval = [&](const Vec& l) {
      best = std::max(best, space.norm(base + B * l.cwiseProduct(coords)) / nx);
    };
    if (exhaust) {
      for (const auto& l : ls) eval(l);
    } else {
      eval(Vec::Ones(m));
      auto rng = stream(seed ^ 0xA5A5A5A5ULL, static_cast<std::uint64_t>(i));
      for (Index k = 0; k < std::max<Index>(64, samples / 8); ++k) {
        Vec l(m);
        for (Index j = 0; j < m; ++j) l(j) = (rng() & 1) ? 1.0 : -1.0;
        eval(l);
      }
    }
    return best;
  }, 0.0);
}

}  // namespace detail

/// Lower-bound estimate of the least K_u with ||sum l_i b_i*(x) b_i|| <= K_u ||l||_inf ||x||.
inline double unconditional_constant(const Mat& basis, const NormedSpace& space, Index samples = 2000,
                                     std::uint64_t seed = 0) {
  Index m = space.dim();
  require(basis.rows() == m && basis.cols() == m, "unconditional_constant: basis must be m x m");
  Eigen::FullPivLU<Mat> lu(basis);
  require(lu.rank() == m, "unconditional_constant: basis is rank-deficient");
  Mat inv = lu.inverse();
  double v = detail::signed_ratio_max(Mat::Zero(m, m), basis, inv, space, samples, seed);
  return std::max(1.0, v);
}

/// Unit basis, coordinate functionals, projections and measured constants for one subspace W.
struct AdaptedBasis {
  Index d = 0;
  Mat frame;        // m x d, orthonormal, spans W
  Mat basis;        // columns b_i, unit norm
  Mat functionals;  // rows b_i*
  Mat P, Q;
  double K_p = 1.0, K_d = 1.0, K_u = 1.0, tildeK = 1.0;
};

/// Witness for the adapted-basis inequality: max ||P x + sum l_i b_i*(Q x) b_i|| / ||x||.
inline double tilde_k_witness(const AdaptedBasis& ab, const NormedSpace& space, Index samples = 2000,
                              std::uint64_t seed = 0) {
  Mat C = ab.functionals * ab.Q;
  double v = detail::signed_ratio_max(ab.P, ab.basis, C, space, samples, seed);
  return std::max(1.0, v);
}

inline Mat distinguished_basis(const NormedSpace& space) {
  Index m = space.dim();
  Mat B = Mat::Identity(m, m);
  for (Index i = 0; i < m; ++i) B.col(i) /= space.norm(B.col(i));
  return B;
}

struct AdaptedBasisOptions {
  Index samples = 2000;
  std::uint64_t seed = 0;
  Index max_evaluations = 3000;
};

namespace detail {

/// Adapted-basis witness for projection P; closed form for l_inf and l_1 with the standard basis.
inline double witness_for(const Mat& P, const Mat& B, const Mat& Binv, const NormedSpace& space,
                          Index samples, std::uint64_t seed) {
  Index m = space.dim();
  Mat I = Mat::Identity(m, m);
  if (space.is_lp() && std::isinf(space.p()))
    return std::max(1.0, (2.0 * P - I).cwiseAbs().rowwise().sum().maxCoeff());
  if (space.is_lp() && space.p() == 1.0) {
    double best = 1.0;
    for (Index j = 0; j < m; ++j) {
      double col = std::max(1.0, std::abs(2.0 * P(j, j) - 1.0));
      for (Index i = 0; i < m; ++i)
        if (i != j) col += 2.0 * std::abs(P(i, j));
      best = std::max(best, col);
    }
    return best;
  }
  return std::max(1.0, signed_ratio_max(P, B, Binv * (I - P), space, samples, seed));
}

inline Mat projection_from(const Mat& W, const Mat& U, const Mat& Z) {
  return W * (W + U * Z).transpose();
}

inline Mat minimize_projection(const NormedSpace& space, const Mat& W, const Mat& U,
                               const AdaptedBasisOptions& opt) {
  Index m = space.dim(), d = W.cols();
  Index cheap = std::min<Index>(opt.samples, 256);
  Mat B = distinguished_basis(space), Binv = B.inverse();
  auto cost = [&](const Mat& Z) {
    Mat P = projection_from(W, U, Z);
    return witness_for(P, B, Binv, space, cheap, opt.seed);
  };
  std::vector<Mat> starts;
  starts.push_back(Mat::Zero(m - d, d));
  if (d == 1) {
    Vec phi = space.norming_functional(W.col(0));
    double at = phi.dot(W.col(0));
    if (std::abs(at) > 1e-12) starts.push_back(U.transpose() * (phi / at));
  }
  {
    // coordinate projection onto the best-conditioned d rows of W
    std::vector<Index> pick(static_cast<size_t>(d)), best_pick;
    double best_det = -1.0;
    auto visit = [&](auto&& self, Index start, Index depth) -> void {
      if (depth == d) {
        Mat WJ(d, d);
        for (Index r = 0; r < d; ++r) WJ.row(r) = W.row(pick[static_cast<size_t>(r)]);
        double det = std::abs(WJ.determinant());
        if (det > best_det * (1.0 + 1e-12)) {
          best_det = det;
          best_pick = pick;
        }
        return;
      }
      for (Index j = start; j < m; ++j) {
        pick[static_cast<size_t>(depth)] = j;
        self(self, j + 1, depth + 1);
      }
    };
    double combos = 1.0;
    for (Index i = 0; i < d; ++i) combos *= static_cast<double>(m - i) / static_cast<double>(i + 1);
    if (combos <= 5000) visit(visit, 0, 0);
    if (best_det > 1e-12) {
      Mat WJ(d, d);
      for (Index r = 0; r < d; ++r) WJ.row(r) = W.row(best_pick[static_cast<size_t>(r)]);
      Mat inv = WJ.inverse().transpose();
      Mat M = Mat::Zero(m, d);
      for (Index r = 0; r < d; ++r) M.row(best_pick[static_cast<size_t>(r)]) = inv.row(r);
      starts.push_back(U.transpose() * M);
    }
  }
  Mat Z = starts.front();
  double best = cost(Z);
  for (size_t i = 1; i < starts.size(); ++i) {
    double c = cost(starts[i]);
    if (c < best - 1e-12) {
      best = c;
      Z = starts[i];
    }
  }
  Index evals = static_cast<Index>(starts.size());
  for (double step = 0.25; step >= 1e-4 && evals < opt.max_evaluations; step *= 0.5) {
    bool improved = true;
    while (improved && evals < opt.max_evaluations) {
      improved = false;
      for (Index r = 0; r < Z.rows(); ++r)
        for (Index c = 0; c < Z.cols(); ++c)
          for (double sgn : {1.0, -1.0}) {
            Mat Y = Z;
            Y(r, c) += sgn * step;
            double v = cost(Y);
            ++evals;
            if (v < best - 1e-12) {
              best = v;
              Z = Y;
              improved = true;
            }
          }
    }
  }
  return projection_from(W, U, Z);
}

}  // namespace detail

/// Adapted basis for subspace span(W) of `space`, with all constants measured.
inline AdaptedBasis adapted_basis(const NormedSpace& space, const Mat& W, const AdaptedBasisOptions& opt = {}) {
  Index m = space.dim(), d = W.cols();
  require(W.rows() == m || d == 0, "adapted_basis: frame has wrong ambient dimension");
  require(d <= m, "adapted_basis: d > m");
  AdaptedBasis ab;
  ab.d = d;
  Mat full = Mat::Identity(m, m);
  if (d > 0) {
    require(Eigen::FullPivLU<Mat>(W).rank() == d, "adapted_basis: frame is rank-deficient");
    Eigen::HouseholderQR<Mat> qr(W);
    full = qr.householderQ() * Mat::Identity(m, m);
  }
  ab.frame = full.leftCols(d);
  Mat U = full.rightCols(m - d);
  if (d == 0) {
    ab.basis = distinguished_basis(space);
    ab.P = Mat::Zero(m, m);
  } else if (space.is_euclidean()) {
    ab.basis = full;
    ab.P = ab.frame * ab.frame.transpose();
  } else if (d == m) {
    ab.basis = distinguished_basis(space);
    ab.P = Mat::Identity(m, m);
  } else {
    ab.basis = distinguished_basis(space);
    ab.P = detail::minimize_projection(space, ab.frame, U, opt);
  }
  ab.Q = Mat::Identity(m, m) - ab.P;
  ab.functionals = ab.basis.inverse();
  double kp = 0.0;
  for (Index i = 0; i < m; ++i) kp = std::max(kp, space.dual_norm(ab.functionals.row(i).transpose()));
  ab.K_p = kp;
  ab.K_d = std::max(operator_norm(ab.P, space, space, opt.samples, opt.seed),
                    operator_norm(ab.Q, space, space, opt.samples, opt.seed));
  ab.K_u = unconditional_constant(ab.basis, space, opt.samples, opt.seed);
  ab.tildeK = tilde_k_witness(ab, space, opt.samples, opt.seed);
  return ab;
}

}  // namespace lipflat
