#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "content.hpp"
#include "metric.hpp"
#include "normgeom.hpp"
#include "util.hpp"

namespace lipflat {

/// Samples of a planar map on the closed unit disc: grid nodes plus an ordered boundary loop.
struct GridMap {
  Index n = 2;
  double resolution = 0.0;
  Mat nodes;                   // N x 2
  Mat values;                  // N x 2
  std::vector<Index> boundary; // loop order, counter-clockwise
  double boundary_disp = 0.0;

  /// res x res grid on [-1, 1]^2 restricted to the disc, plus 4 res boundary nodes.
  static GridMap sample(Index res, const std::function<Vec(const Vec&)>& f) {
    require(res >= 2, "GridMap: resolution must be >= 2");
    GridMap g;
    g.resolution = 2.0 / static_cast<double>(res - 1);
    std::vector<Vec> pts;
    for (Index i = 0; i < res; ++i)
      for (Index j = 0; j < res; ++j) {
        Vec p(2);
        p << -1 + g.resolution * static_cast<double>(i), -1 + g.resolution * static_cast<double>(j);
        if (p.norm() <= 1 - 1e-12) pts.push_back(p);
      }
    Index loop = 4 * res;
    for (Index k = 0; k < loop; ++k) {
      double a = 2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(loop);
      Vec p(2);
      p << std::cos(a), std::sin(a);
      g.boundary.push_back(static_cast<Index>(pts.size()));
      pts.push_back(p);
    }
    Index N = static_cast<Index>(pts.size());
    g.nodes = Mat(N, 2);
    g.values = Mat(N, 2);
    for (Index i = 0; i < N; ++i) {
      g.nodes.row(i) = pts[static_cast<size_t>(i)].transpose();
      Vec v = f(pts[static_cast<size_t>(i)]);
      require(v.size() == 2 && v.allFinite(), "GridMap: map values must be finite points of R^2");
      g.values.row(i) = v.transpose();
    }
    g.update_disp();
    return g;
  }

  /// Builds from explicit nodes and values; nodes with |x| within 1e-9 of 1 form the boundary loop.
  static GridMap from_samples(const Mat& nodes, const Mat& values) {
    require(nodes.cols() == 2 && values.cols() == 2 && nodes.rows() == values.rows(),
            "GridMap: nodes and values must be N x 2");
    require(values.allFinite(), "GridMap: values must be finite");
    GridMap g;
    g.nodes = nodes;
    g.values = values;
    std::vector<std::pair<double, Index>> ring;
    double step = kInf;
    for (Index i = 0; i < nodes.rows(); ++i) {
      double r = nodes.row(i).norm();
      require(r <= 1 + 1e-9, "GridMap: node " + std::to_string(i) + " lies outside the unit disc");
      if (std::abs(r - 1) <= 1e-9) ring.emplace_back(std::atan2(nodes(i, 1), nodes(i, 0)), i);
      if (i > 0) step = std::min(step, std::abs(nodes(i, 0) - nodes(i - 1, 0)) + std::abs(nodes(i, 1) - nodes(i - 1, 1)));
    }
    require(ring.size() >= 3, "GridMap: need at least 3 boundary nodes");
    std::sort(ring.begin(), ring.end());
    for (auto& [a, i] : ring) g.boundary.push_back(i);
    double gap = 0.0;
    for (size_t k = 0; k < ring.size(); ++k)
      gap = std::max(gap, (nodes.row(ring[k].second) - nodes.row(ring[(k + 1) % ring.size()].second)).norm());
    g.resolution = std::isfinite(step) && step > 0 ? std::max(step, gap) : gap;
    g.update_disp();
    return g;
  }

  void update_disp() {
    boundary_disp = 0.0;
    for (Index b : boundary) boundary_disp = std::max(boundary_disp, (values.row(b) - nodes.row(b)).norm());
  }
};

/// Winding number of the closed polyline through `loop` around q; 0 when q lies on the loop.
inline int winding_number(const Mat& loop, const Vec& q, bool* on_loop = nullptr) {
  int w = 0;
  Index L = loop.rows();
  if (on_loop) *on_loop = false;
  for (Index k = 0; k < L; ++k) {
    double ax = loop(k, 0) - q(0), ay = loop(k, 1) - q(1);
    double bx = loop((k + 1) % L, 0) - q(0), by = loop((k + 1) % L, 1) - q(1);
    double cross = ax * by - ay * bx;
    if (cross == 0 && ax * bx <= 0 && ay * by <= 0) {
      if (on_loop) *on_loop = true;
      return 0;
    }
    if (ay <= 0) {
      if (by > 0 && cross > 0) ++w;
    } else {
      if (by <= 0 && cross < 0) --w;
    }
  }
  return w;
}

struct Coverage {
  bool covered = false;
  double covered_fraction = 0.0;
  double target_radius = 0.0;
  Index targets = 0;
  Index uncovered = 0;
  double near_radius = 0.0;
};

/// Checks that every grid node in B(0, target_radius) has nonzero winding of the boundary image
/// or lies within one image-cell diameter of an image point. Default radius 1 - eps - 2 resolution.
inline Coverage degree_coverage(const GridMap& map, double eps, double target_radius = -1.0) {
  require(map.n == 2, "degree_coverage: only n = 2 is supported");
  require(eps > 0 && eps < 0.5, "degree_coverage: eps must lie in (0, 1/2)");
  require(map.boundary_disp < eps, "degree_coverage: boundary displacement " + std::to_string(map.boundary_disp) +
                                       " >= eps; the coverage argument does not apply");
  Coverage c;
  c.target_radius = target_radius >= 0 ? target_radius : 1 - eps - 2 * map.resolution;
  Mat loop(static_cast<Index>(map.boundary.size()), 2);
  for (size_t k = 0; k < map.boundary.size(); ++k) loop.row(static_cast<Index>(k)) = map.values.row(map.boundary[k]);
  Index N = map.nodes.rows();
  std::vector<Index> targets;
  for (Index i = 0; i < N; ++i)
    if (map.nodes.row(i).norm() < c.target_radius) targets.push_back(i);
  c.targets = static_cast<Index>(targets.size());
  std::vector<char> ok(targets.size(), 0);
  parallel_for(c.targets, [&](Index t) {
    Vec q = map.nodes.row(targets[static_cast<size_t>(t)]).transpose();
    bool on = false;
    if (winding_number(loop, q, &on) != 0 || on) ok[static_cast<size_t>(t)] = 1;
  });
  if (std::find(ok.begin(), ok.end(), 0) == ok.end()) {
    c.covered = true;
    c.covered_fraction = 1.0;
    return c;
  }
  // largest image distance between nodes at most one grid diagonal apart
  double reach = map.resolution * std::sqrt(2.0) * (1 + 1e-9);
  c.near_radius = parallel_max(N, [&](Index i) {
    double r = 0.0;
    for (Index j = 0; j < N; ++j)
      if ((map.nodes.row(i) - map.nodes.row(j)).norm() <= reach)
        r = std::max(r, (map.values.row(i) - map.values.row(j)).norm());
    return r;
  }, 0.0);
  parallel_for(c.targets, [&](Index t) {
    if (ok[static_cast<size_t>(t)]) return;
    Vec q = map.nodes.row(targets[static_cast<size_t>(t)]).transpose();
    for (Index j = 0; j < N; ++j)
      if ((map.values.row(j).transpose() - q).norm() <= c.near_radius) {
        ok[static_cast<size_t>(t)] = 1;
        return;
      }
  });
  for (char o : ok)
    if (!o) ++c.uncovered;
  c.covered = c.uncovered == 0;
  c.covered_fraction = c.targets ? 1.0 - static_cast<double>(c.uncovered) / static_cast<double>(c.targets) : 1.0;
  return c;
}

/// Smooth displacement x -> x + sum a_k sin(w_k . x + phi_k), scaled to boundary displacement `amplitude`.
inline std::function<Vec(const Vec&)> smooth_perturbation(std::uint64_t seed, double amplitude, Index modes = 4) {
  require(amplitude >= 0, "smooth_perturbation: amplitude must be >= 0");
  auto rng = stream(seed, 0);
  Mat freq(modes, 2), coef(modes, 2);
  Vec phase(modes);
  for (Index k = 0; k < modes; ++k) {
    freq.row(k) = (gaussian(rng, 2) * 2.0).transpose();
    coef.row(k) = gaussian(rng, 2).transpose();
    phase(k) = uniform(rng, 0, 2 * std::numbers::pi);
  }
  auto raw = [=](const Vec& x) {
    Vec v = Vec::Zero(2);
    for (Index k = 0; k < modes; ++k) v += coef.row(k).transpose() * std::sin(freq.row(k).dot(x) + phase(k));
    return v;
  };
  double peak = 0.0;
  for (Index k = 0; k < 1024; ++k) {
    double a = 2 * std::numbers::pi * static_cast<double>(k) / 1024.0;
    Vec p(2);
    p << std::cos(a), std::sin(a);
    peak = std::max(peak, raw(p).norm());
  }
  double scale = peak > 0 ? amplitude / peak : 0.0;
  return [=](const Vec& x) -> Vec { return x + scale * raw(x); };
}

struct RectOptions {
  Vec centre;                 // ball centre; empty selects the origin
  double radius = 1.0;        // ball radius
  double delta = 0.0;         // content scale; 0 selects twice the sample spacing
  double slack_factor = 0.5;
  double min_density = 0.9;   // occupied fraction of grid cells inside the ball
  double cell = 0.0;          // density grid step; 0 selects the sample spacing
};

struct RectBound {
  ContentEstimate content;
  double threshold = 0.0;  // radius^n / (4 K sqrt n) times (1 - slack_factor)
  double density = 0.0;
  double slack_factor = 0.5;
  bool passes = false;
};

/// Threshold of the pass rule, decreasing in K.
inline double rect_threshold(double K, Index n, double radius = 1.0, double slack_factor = 0.5) {
  require(K >= 1, "rect_threshold: K must be >= 1");
  return std::pow(radius, static_cast<double>(n)) / (4 * K * std::sqrt(static_cast<double>(n))) * (1 - slack_factor);
}

/// Fraction of lattice cells of side `cell` centred in the ball that contain a sample point (n <= 3).
inline double ball_density(const Mat& E, const Vec& centre, double radius, double cell) {
  Index n = E.cols();
  require(n >= 1 && n <= 3, "ball_density: dimension must lie in [1, 3]");
  std::map<std::vector<long long>, int> occupied;
  for (Index i = 0; i < E.rows(); ++i) {
    std::vector<long long> key(static_cast<size_t>(n));
    for (Index c = 0; c < n; ++c) key[static_cast<size_t>(c)] = std::llround((E(i, c) - centre(c)) / cell);
    occupied[key] = 1;
  }
  long long span = static_cast<long long>(std::floor(radius / cell));
  Index total = 0, hit = 0;
  std::vector<long long> key(static_cast<size_t>(n), -span);
  while (true) {
    double r2 = 0.0;
    for (auto k : key) r2 += std::pow(static_cast<double>(k) * cell, 2);
    if (r2 <= radius * radius) {
      ++total;
      if (occupied.count(key)) ++hit;
    }
    size_t c = 0;
    while (c < key.size() && ++key[c] > span) key[c++] = -span;
    if (c == key.size()) break;
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

/// Lower bound on the content of f(E) for a sample E of a ball, given the pair condition
/// |f(x) - f(y)| >= |x - y| / K - eps.
inline RectBound rect_lower_bound(const Mat& E, const LipschitzMap& f, double K, double eps, const RectOptions& opt = {}) {
  require(E.rows() == f.size(), "rect_lower_bound: sample and map sizes differ");
  require(E.rows() >= 2, "rect_lower_bound: need at least two sample points");
  require(K >= 1, "rect_lower_bound: K must be >= 1");
  require(eps >= 0, "rect_lower_bound: eps must be >= 0");
  Index N = E.rows(), n = E.cols();
  for (Index i = 0; i < N; ++i)
    for (Index j = i + 1; j < N; ++j) {
      double dx = (E.row(i) - E.row(j)).norm();
      double dy = f.target.norm(f.at(i) - f.at(j));
      require(dy >= dx / K - eps, "rect_lower_bound: pair (" + std::to_string(i) + ", " + std::to_string(j) +
                                      ") violates the lower biLipschitz condition");
    }
  double h = kInf;
  for (Index i = 0; i < N; ++i)
    for (Index j = i + 1; j < N; ++j) h = std::min(h, (E.row(i) - E.row(j)).norm());
  Vec centre = opt.centre.size() ? opt.centre : Vec(Vec::Zero(n));
  double cell = opt.cell > 0 ? opt.cell : h;
  RectBound rb;
  rb.slack_factor = opt.slack_factor;
  rb.density = n <= 3 ? ball_density(E, centre, opt.radius, cell) : 1.0;
  require(rb.density >= opt.min_density, "rect_lower_bound: sample density " + std::to_string(rb.density) +
                                             " below " + std::to_string(opt.min_density));
  double delta = opt.delta > 0 ? opt.delta : 2 * h;
  rb.content = greedy_content(f.values, f.target, static_cast<double>(n), delta);
  rb.threshold = rect_threshold(K, n, opt.radius, opt.slack_factor);
  rb.passes = rb.content.lower_bound >= rb.threshold;
  return rb;
}

struct PositiveImage {
  LipschitzMap f_star;
  ContentEstimate content;
  Index density_point = -1;
  Mat derivative;  // m x n least-squares estimate
  Mat correction;  // T = S - Df
  double correction_norm = 0.0;  // operator norm of T
  double lip_T = 0.0;            // measured over sample pairs
  double sup_T = 0.0;
  double min_singular = 0.0;     // of S
};

/// f* = f + T*, T*(x) = T(x - x0) capped radially outside the unit ball about the density point.
inline PositiveImage positive_image_perturb(const Mat& A, const LipschitzMap& f, double eps, double window = 0.25,
                                           double delta = 0.0) {
  require(A.rows() > 0, "positive_image_perturb: empty sample");
  require(eps > 0, "positive_image_perturb: eps must be positive");
  require(window > 0, "positive_image_perturb: window must be positive");
  require(f.size() == A.rows(), "positive_image_perturb: sample and map sizes differ");
  require(f.target.is_euclidean(), "positive_image_perturb: target must be Euclidean");
  Index N = A.rows(), n = A.cols(), m = f.target.dim();
  require(m >= n, "positive_image_perturb: target dimension must be >= sample dimension");
  PositiveImage out;
  Index best = 0, best_count = -1;
  for (Index i = 0; i < N; ++i) {
    Index c = 0;
    for (Index j = 0; j < N; ++j)
      if ((A.row(i) - A.row(j)).norm() <= window) ++c;
    if (c > best_count) {
      best = i;
      best_count = c;
    }
  }
  out.density_point = best;
  Vec x0 = A.row(best).transpose();
  std::vector<Index> nb;
  for (Index j = 0; j < N; ++j)
    if ((A.row(j).transpose() - x0).norm() <= window) nb.push_back(j);
  Mat X(static_cast<Index>(nb.size()), n + 1), Y(static_cast<Index>(nb.size()), m);
  for (size_t k = 0; k < nb.size(); ++k) {
    X(static_cast<Index>(k), 0) = 1.0;
    X.row(static_cast<Index>(k)).tail(n) = A.row(nb[k]) - x0.transpose();
    Y.row(static_cast<Index>(k)) = f.values.row(nb[k]);
  }
  Mat D = Mat::Zero(m, n);
  if (static_cast<Index>(nb.size()) > n) {
    Mat coef = X.completeOrthogonalDecomposition().solve(Y);  // (n+1) x m
    D = coef.bottomRows(n).transpose();
  }
  out.derivative = D;
  Eigen::JacobiSVD<Mat> svd(D, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec sv = svd.singularValues();
  Mat Sig = Mat::Zero(m, n);
  for (Index i = 0; i < n; ++i) Sig(i, i) = std::max(sv(i), eps / 4);
  Mat S = svd.matrixU() * Sig * svd.matrixV().transpose();
  out.correction = S - D;
  out.min_singular = Sig.diagonal().minCoeff();
  out.correction_norm = out.correction.size() ? Eigen::JacobiSVD<Mat>(out.correction).singularValues()(0) : 0.0;
  Mat T(N, m);
  for (Index i = 0; i < N; ++i) {
    Vec v = A.row(i).transpose() - x0;
    double r = v.norm();
    if (r > 1) v /= r;
    T.row(i) = (out.correction * v).transpose();
  }
  for (Index i = 0; i < N; ++i) {
    out.sup_T = std::max(out.sup_T, T.row(i).norm());
    for (Index j = i + 1; j < N; ++j) {
      double dx = (A.row(i) - A.row(j)).norm();
      if (dx > 0) out.lip_T = std::max(out.lip_T, (T.row(i) - T.row(j)).norm() / dx);
    }
  }
  auto space = FiniteMetricSpace::from_points(A);
  out.f_star = make_map(space, f.target, f.values + T);
  double h = space.min_separation();
  double dl = delta > 0 ? delta : (std::isfinite(h) && h > 0 ? 2 * h * std::min(1.0, out.min_singular) : 1.0);
  out.content = greedy_content(out.f_star.values, f.target, static_cast<double>(n), dl);
  return out;
}

}  // namespace lipflat
