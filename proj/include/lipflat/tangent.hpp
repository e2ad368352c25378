#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "metric.hpp"
#include "util.hpp"

namespace lipflat {

/// v.w >= (1 - theta) ||v||_2 with w a Euclidean unit vector.
inline bool cone_membership(const Vec& v, const Vec& w, double theta) {
  require(std::abs(w.norm() - 1.0) <= 1e-10, "cone_membership: w must be a unit vector");
  return v.dot(w) >= (1.0 - theta) * v.norm();
}

/// ||pi(v)|| >= (1 - theta) ||v|| with pi the orthogonal projection onto W-perp.
inline bool complement_membership(const Vec& v, const Mat& W, double theta) {
  Vec perp = W.cols() == 0 ? v : Vec(v - W * (W.transpose() * v));
  return perp.norm() >= (1.0 - theta) * v.norm();
}

/// ||proj_W v|| >= (1 - theta) ||v||: v lies in the theta-cone around span(W).
inline bool subspace_cone_membership(const Vec& v, const Mat& W, double theta) {
  double along = W.cols() == 0 ? 0.0 : (W.transpose() * v).norm();
  return along >= (1.0 - theta) * v.norm();
}

struct DirectionSet {
  enum class Kind { cone, complement };
  Kind kind = Kind::cone;
  Vec w;
  Mat W;
  double theta = 0.5;

  static DirectionSet cone(Vec w, double theta) { return {Kind::cone, std::move(w), Mat(), theta}; }
  static DirectionSet complement(Mat W, double theta) { return {Kind::complement, Vec(), std::move(W), theta}; }

  bool contains(const Vec& v) const {
    return kind == Kind::cone ? cone_membership(v, w, theta) : complement_membership(v, W, theta);
  }
};

struct DirectionProfile {
  Index fragment_id = 0;
  std::vector<Vec> increments;
  std::vector<double> lengths;
  std::vector<char> inside;  // nonzero increment lying in the set
  double fraction_in = 0.0;
  bool in_direction = false;
};

inline DirectionProfile fragment_profile(const CurveFragment& gamma, const LipschitzMap& F, const DirectionSet& set,
                                         Index id = 0) {
  require(gamma.size() >= 2, "fragment_profile: fragment needs at least 2 points");
  DirectionProfile p;
  p.fragment_id = id;
  double total = 0.0, in = 0.0;
  for (Index j = 0; j + 1 < gamma.size(); ++j) {
    Index a = gamma.indices[static_cast<size_t>(j)], b = gamma.indices[static_cast<size_t>(j + 1)];
    require(a >= 0 && a < F.size() && b >= 0 && b < F.size(), "fragment_profile: index outside the map's domain");
    Vec v = F.at(b) - F.at(a);
    double len = gamma.params[static_cast<size_t>(j + 1)] - gamma.params[static_cast<size_t>(j)];
    bool hit = v.norm() > 0 && set.contains(v);
    p.increments.push_back(v);
    p.lengths.push_back(len);
    p.inside.push_back(hit ? 1 : 0);
    total += len;
    if (hit) in += len;
  }
  p.fraction_in = total > 0 ? in / total : 0.0;
  p.in_direction = p.fraction_in == 1.0;
  return p;
}

struct TangentField {
  Index d = 0;
  double theta = 0.9;
  std::vector<Index> points;      // the set S
  std::vector<Mat> frames;        // m x d orthonormal, one per point of S
  std::vector<double> violation;  // per point
  double total_violation = 0.0;
};

namespace detail {

inline void normalize_signs(Mat& W) {
  for (Index c = 0; c < W.cols(); ++c)
    for (Index r = 0; r < W.rows(); ++r)
      if (std::abs(W(r, c)) > 1e-12) {
        if (W(r, c) < 0) W.col(c) *= -1.0;
        break;
      }
}

struct Incidence {
  Vec v;
  double len;
};

}  // namespace detail

/// Per point of S: top-d right singular directions of its length-weighted incident increments.
inline TangentField fit_tangent_field(const std::vector<Index>& S, const LipschitzMap& F,
                                      const std::vector<CurveFragment>& fragments, Index d, double theta) {
  Index m = F.target.dim();
  require(d >= 0 && d <= m, "fit_tangent_field: d must lie in [0, m]");
  require(theta > 0 && theta < 1, "fit_tangent_field: theta must lie in (0, 1)");
  TangentField tf;
  tf.d = d;
  tf.theta = theta;
  tf.points = S;
  std::vector<Index> pos(static_cast<size_t>(F.size()), -1);
  for (size_t i = 0; i < S.size(); ++i) pos[static_cast<size_t>(S[i])] = static_cast<Index>(i);
  std::vector<std::vector<detail::Incidence>> inc(S.size());
  for (const auto& g : fragments)
    for (Index j = 0; j + 1 < g.size(); ++j) {
      Index a = g.indices[static_cast<size_t>(j)], b = g.indices[static_cast<size_t>(j + 1)];
      double len = g.params[static_cast<size_t>(j + 1)] - g.params[static_cast<size_t>(j)];
      Vec v = F.at(b) - F.at(a);
      if (pos[static_cast<size_t>(a)] >= 0) inc[static_cast<size_t>(pos[static_cast<size_t>(a)])].push_back({v, len});
      if (pos[static_cast<size_t>(b)] >= 0) inc[static_cast<size_t>(pos[static_cast<size_t>(b)])].push_back({v, len});
    }
  tf.frames.assign(S.size(), Mat(m, d));
  tf.violation.assign(S.size(), 0.0);
  parallel_for(static_cast<Index>(S.size()), [&](Index i) {
    const auto& list = inc[static_cast<size_t>(i)];
    Mat frame = Mat::Identity(m, m).leftCols(d);
    if (d > 0) {
      std::vector<Vec> rows;
      for (const auto& e : list)
        if (e.v.norm() > 0) rows.push_back(std::sqrt(e.len) * e.v / e.v.norm());
      if (!rows.empty()) {
        Mat A(static_cast<Index>(rows.size()), m);
        for (size_t r = 0; r < rows.size(); ++r) A.row(static_cast<Index>(r)) = rows[r].transpose();
        Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
        frame = svd.matrixV().leftCols(d);
      }
      detail::normalize_signs(frame);
    }
    double bad = 0.0;
    for (const auto& e : list)
      if (e.v.norm() > 0 && !subspace_cone_membership(e.v, frame, theta)) bad += e.len;
    tf.frames[static_cast<size_t>(i)] = frame;
    tf.violation[static_cast<size_t>(i)] = bad;
  });
  for (double v : tf.violation) tf.total_violation += v;
  return tf;
}

/// Cosines of the principal angles between span(A) and span(B), descending.
inline Vec principal_cosines(const Mat& A, const Mat& B) {
  if (A.cols() == 0 || B.cols() == 0) return Vec();
  Eigen::JacobiSVD<Mat> svd(A.transpose() * B);
  return svd.singularValues().cwiseMin(1.0);
}

/// Geodesic distance on the Grassmannian: sqrt of the summed squared principal angles.
inline double grassmann_distance(const Mat& A, const Mat& B) {
  Vec c = principal_cosines(A, B);
  double acc = 0.0;
  for (Index i = 0; i < c.size(); ++i) {
    double a = std::acos(std::clamp(c(i), -1.0, 1.0));
    acc += a * a;
  }
  return std::sqrt(acc);
}

/// Top-d eigenvectors of the summed projections: the chordal mean of a family of frames.
inline Mat chordal_mean(const std::vector<const Mat*>& frames, Index m, Index d) {
  Mat acc = Mat::Zero(m, m);
  for (const Mat* f : frames) acc += (*f) * f->transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(acc);
  Mat W = es.eigenvectors().rightCols(d).rowwise().reverse();
  detail::normalize_signs(W);
  return W;
}

struct Piece {
  std::vector<Index> indices;
  Mat frame;
  double violation = 0.0;
};

struct Partition {
  std::vector<Piece> pieces;
  std::vector<Index> unassigned;
};

/// Grassmannian k-means of the field, then assignment of each point to a piece whose
/// theta-cone contains its frame (nearest by principal angles, ties by index).
inline Partition partition_by_field(const TangentField& tf, double theta, Index M, std::uint64_t seed = 0,
                                    Index restarts = 10) {
  require(M >= 1, "partition_by_field: piece budget M must be >= 1");
  require(theta > 0 && theta < 1, "partition_by_field: theta must lie in (0, 1)");
  Partition out;
  Index n = static_cast<Index>(tf.points.size());
  if (n == 0) return out;
  Index d = tf.d, m = tf.frames.front().rows();
  if (d == 0) {
    Piece p;
    p.indices = tf.points;
    p.frame = Mat(m, 0);
    p.violation = tf.total_violation;
    out.pieces.push_back(std::move(p));
    return out;
  }
  const auto& F = tf.frames;
  std::vector<Mat> best_centres;
  double best_cost = kInf;
  for (Index r = 0; r < restarts; ++r) {
    auto rng = stream(seed, static_cast<std::uint64_t>(r));
    std::vector<Mat> centres;
    std::vector<double> d2(static_cast<size_t>(n), kInf);
    Index first = std::uniform_int_distribution<Index>(0, n - 1)(rng);
    centres.push_back(F[static_cast<size_t>(first)]);
    while (static_cast<Index>(centres.size()) < M) {
      double total = 0.0;
      for (Index i = 0; i < n; ++i) {
        double g = grassmann_distance(F[static_cast<size_t>(i)], centres.back());
        d2[static_cast<size_t>(i)] = std::min(d2[static_cast<size_t>(i)], g * g);
        total += d2[static_cast<size_t>(i)];
      }
      if (total <= 1e-18) break;
      double u = uniform(rng, 0.0, total), acc = 0.0;
      Index pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2[static_cast<size_t>(i)];
        if (acc >= u && d2[static_cast<size_t>(i)] > 0) {
          pick = i;
          break;
        }
      }
      centres.push_back(F[static_cast<size_t>(pick)]);
    }
    std::vector<Index> label(static_cast<size_t>(n), -1);
    double cost = 0.0;
    for (int it = 0; it < 100; ++it) {
      bool changed = false;
      cost = 0.0;
      for (Index i = 0; i < n; ++i) {
        Index arg = 0;
        double bd = kInf;
        for (size_t c = 0; c < centres.size(); ++c) {
          double g = grassmann_distance(F[static_cast<size_t>(i)], centres[c]);
          if (g < bd - 1e-12) {
            bd = g;
            arg = static_cast<Index>(c);
          }
        }
        cost += bd * bd;
        if (label[static_cast<size_t>(i)] != arg) changed = true;
        label[static_cast<size_t>(i)] = arg;
      }
      if (!changed) break;
      for (size_t c = 0; c < centres.size(); ++c) {
        std::vector<const Mat*> mem;
        for (Index i = 0; i < n; ++i)
          if (label[static_cast<size_t>(i)] == static_cast<Index>(c)) mem.push_back(&F[static_cast<size_t>(i)]);
        if (!mem.empty()) centres[c] = chordal_mean(mem, m, d);
      }
    }
    if (cost < best_cost - 1e-12) {
      best_cost = cost;
      best_centres = centres;
    }
  }
  std::vector<Piece> pieces(best_centres.size());
  for (size_t c = 0; c < best_centres.size(); ++c) pieces[c].frame = best_centres[c];
  for (Index i = 0; i < n; ++i) {
    Index arg = -1;
    double bd = kInf;
    for (size_t c = 0; c < best_centres.size(); ++c) {
      Vec cos = principal_cosines(best_centres[c], F[static_cast<size_t>(i)]);
      if (cos.minCoeff() < 1.0 - theta) continue;
      double g = grassmann_distance(F[static_cast<size_t>(i)], best_centres[c]);
      if (g < bd - 1e-12) {
        bd = g;
        arg = static_cast<Index>(c);
      }
    }
    if (arg < 0) {
      out.unassigned.push_back(tf.points[static_cast<size_t>(i)]);
    } else {
      pieces[static_cast<size_t>(arg)].indices.push_back(tf.points[static_cast<size_t>(i)]);
      pieces[static_cast<size_t>(arg)].violation += tf.violation[static_cast<size_t>(i)];
    }
  }
  for (auto& p : pieces)
    if (!p.indices.empty()) out.pieces.push_back(std::move(p));
  return out;
}

}  // namespace lipflat
