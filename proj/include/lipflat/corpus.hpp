#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "metric.hpp"
#include "util.hpp"

namespace lipflat {

/// Deterministic fixture point set in R^2.
struct GeneratedSet {
  std::string kind;
  std::map<std::string, double> params;
  Mat points;          // n x 2
  double spacing = 0;  // minimal inter-point distance
  double cell = 0;     // diameter of the region each sample point stands for

  FiniteMetricSpace space() const { return FiniteMetricSpace::from_points(points); }
};

namespace detail {

inline double min_pair_distance(const Mat& pts) {
  double best = kInf;
  for (Index i = 0; i < pts.rows(); ++i)
    for (Index j = i + 1; j < pts.rows(); ++j) best = std::min(best, (pts.row(i) - pts.row(j)).norm());
  return best;
}

/// Centres of the 4^depth squares of the corner construction with contraction r.
inline Mat corner_centres(double r, Index depth) {
  Index n = 1;
  for (Index i = 0; i < depth; ++i) n *= 4;
  Mat pts(n, 2);
  for (Index code = 0; code < n; ++code) {
    double x = 0, y = 0, side = 1.0;
    // most significant digit first keeps siblings adjacent in index order
    for (Index level = depth - 1; level >= 0; --level) {
      Index digit = (code >> (2 * level)) & 3;
      double child = side * r;
      if (digit & 1) x += side - child;
      if (digit & 2) y += side - child;
      side = child;
    }
    pts(code, 0) = x + side / 2;
    pts(code, 1) = y + side / 2;
  }
  return pts;
}

}  // namespace detail

/// Sibling-centre distance at the finest level, which is the minimal spacing for r < 1/2.
inline double corner_spacing(double r, Index depth) {
  if (depth == 0) return kInf;
  return std::pow(r, static_cast<double>(depth - 1)) * (1 - r);
}

inline GeneratedSet four_corner(Index depth) {
  require(depth >= 0, "four_corner: depth must be >= 0");
  require(depth <= 8, "four_corner: depth must be <= 8");
  GeneratedSet g;
  g.kind = "four_corner";
  g.params = {{"depth", static_cast<double>(depth)}};
  g.points = detail::corner_centres(0.25, depth);
  g.spacing = depth == 0 ? kInf : detail::min_pair_distance(g.points);
  g.cell = std::sqrt(2.0) * std::pow(0.25, static_cast<double>(depth));
  return g;
}

/// Corner construction with contraction 4^(-1/s), similarity dimension s.
inline GeneratedSet dust(double s, Index depth) {
  require(s > 0 && s < 2, "dust: s must lie in (0, 2)");
  require(s != 1.0, "dust: s = 1 is the four_corner set");
  require(depth >= 0 && depth <= 8, "dust: depth must lie in [0, 8]");
  double r = std::pow(4.0, -1.0 / s);
  GeneratedSet g;
  g.kind = "dust";
  g.params = {{"s", s}, {"depth", static_cast<double>(depth)}, {"r", r}};
  g.points = detail::corner_centres(r, depth);
  g.spacing = depth == 0 ? kInf : detail::min_pair_distance(g.points);
  g.cell = std::sqrt(2.0) * std::pow(r, static_cast<double>(depth));
  return g;
}

inline GeneratedSet segment(Index n) {
  require(n >= 2, "segment: n must be >= 2");
  GeneratedSet g;
  g.kind = "segment";
  g.params = {{"n", static_cast<double>(n)}};
  g.points = Mat::Zero(n, 2);
  for (Index i = 0; i < n; ++i) g.points(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
  g.spacing = detail::min_pair_distance(g.points);
  g.cell = 1.0 / static_cast<double>(n - 1);
  return g;
}

/// n equispaced points on the circle of diameter 1 centred at (1/2, 1/2).
inline GeneratedSet circle(Index n) {
  require(n >= 2, "circle: n must be >= 2");
  GeneratedSet g;
  g.kind = "circle";
  g.params = {{"n", static_cast<double>(n)}};
  g.points = Mat(n, 2);
  for (Index i = 0; i < n; ++i) {
    double a = 2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    g.points(i, 0) = 0.5 + 0.5 * std::cos(a);
    g.points(i, 1) = 0.5 + 0.5 * std::sin(a);
  }
  g.spacing = detail::min_pair_distance(g.points);
  g.cell = std::sin(std::numbers::pi / static_cast<double>(n));
  return g;
}

/// Graph of t -> amp sin(2 pi freq t) over [0, 1].
inline GeneratedSet lipschitz_graph(Index n, double amp = 0.1, double freq = 1.0) {
  require(n >= 2, "lipschitz_graph: n must be >= 2");
  require(std::isfinite(amp) && std::isfinite(freq), "lipschitz_graph: amp and freq must be finite");
  GeneratedSet g;
  g.kind = "lipschitz_graph";
  g.params = {{"n", static_cast<double>(n)}, {"amp", amp}, {"freq", freq}};
  g.points = Mat(n, 2);
  for (Index i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(n - 1);
    g.points(i, 0) = t;
    g.points(i, 1) = amp * std::sin(2 * std::numbers::pi * freq * t);
  }
  g.spacing = detail::min_pair_distance(g.points);
  double h = 1.0 / static_cast<double>(n - 1);
  g.cell = h * std::sqrt(1 + std::pow(2 * std::numbers::pi * freq * amp, 2));
  return g;
}

/// Diagonal and anti-diagonal of the unit square, n points each; a shared centre is kept once.
inline GeneratedSet crossing_segments(Index n) {
  require(n >= 2, "crossing_segments: n must be >= 2");
  GeneratedSet g;
  g.kind = "crossing_segments";
  g.params = {{"n", static_cast<double>(n)}};
  Index total = 2 * n - (n % 2);
  g.points = Mat(total, 2);
  Index row = 0;
  for (Index i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(n - 1);
    g.points(row, 0) = t;
    g.points(row++, 1) = t;
  }
  for (Index i = 0; i < n; ++i) {
    if (n % 2 == 1 && 2 * i == n - 1) continue;
    double t = static_cast<double>(i) / static_cast<double>(n - 1);
    g.points(row, 0) = t;
    g.points(row++, 1) = 1 - t;
  }
  g.spacing = detail::min_pair_distance(g.points);
  g.cell = std::sqrt(2.0) / static_cast<double>(n - 1);
  return g;
}

/// Closed-form point count for a generator.
inline Index expected_count(const std::string& kind, const std::map<std::string, double>& p) {
  if (kind == "four_corner" || kind == "dust") {
    Index n = 1;
    for (Index i = 0; i < static_cast<Index>(p.at("depth")); ++i) n *= 4;
    return n;
  }
  Index n = static_cast<Index>(p.at("n"));
  if (kind == "crossing_segments") return 2 * n - (n % 2);
  return n;
}

/// Generator dispatch by name; missing parameters take documented defaults.
inline GeneratedSet generate(const std::string& kind, const std::map<std::string, double>& p) {
  auto get = [&](const std::string& k, double dflt) {
    auto it = p.find(k);
    return it == p.end() ? dflt : it->second;
  };
  auto as_index = [&](const std::string& k, double dflt) {
    double v = get(k, dflt);
    require(std::isfinite(v) && v == std::floor(v), kind + ": " + k + " must be an integer");
    return static_cast<Index>(v);
  };
  if (kind == "four_corner") return four_corner(as_index("depth", 3));
  if (kind == "dust") return dust(get("s", 1.5), as_index("depth", 3));
  if (kind == "segment") return segment(as_index("n", 101));
  if (kind == "circle") return circle(as_index("n", 100));
  if (kind == "lipschitz_graph") return lipschitz_graph(as_index("n", 101), get("amp", 0.1), get("freq", 1.0));
  if (kind == "crossing_segments") return crossing_segments(as_index("n", 50));
  throw PreconditionError("generate: unknown kind '" + kind + "'");
}

struct DistortionReport {
  double max = 0.0;
  double bin_width = 0.0;
  std::vector<Index> histogram;
};

/// max and 20-bin histogram of |D(x,y) - ||s(x) - s(y)|| over pairs.
inline DistortionReport distort_check(const LipschitzMap& sigma, const FiniteMetricSpace& space, Index bins = 20) {
  require(sigma.size() == space.size(), "distort_check: map and space sizes differ");
  Index n = space.size();
  std::vector<double> gaps;
  gaps.reserve(static_cast<size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      gaps.push_back(std::abs(space.dist(i, j) - sigma.target.norm((sigma.values.row(i) - sigma.values.row(j)).transpose())));
  DistortionReport r;
  r.histogram.assign(static_cast<size_t>(bins), 0);
  for (double g : gaps) r.max = std::max(r.max, g);
  r.bin_width = r.max > 0 ? r.max / static_cast<double>(bins) : 0.0;
  for (double g : gaps) {
    Index b = r.bin_width > 0 ? std::min<Index>(bins - 1, static_cast<Index>(g / r.bin_width)) : 0;
    ++r.histogram[static_cast<size_t>(b)];
  }
  return r;
}

}  // namespace lipflat
