#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "normgeom.hpp"
#include "util.hpp"

namespace lipflat {

struct CoverElement {
  Index center_index = -1;
  Vec center;
  double radius = 0.0;    // open-ball radius containing the element
  double diameter = 0.0;  // diameter of claimed points plus grain
  std::vector<Index> members;
};

/// Upper-bound estimate of H^s_delta with its cover; `lower_bound` is a packing estimate clipped to the cover value.
struct ContentEstimate {
  double s = 1.0;
  double delta = 0.0;
  double grain = 0.0;
  double value = 0.0;
  double lower_bound = 0.0;
  Index packing_count = 0;
  std::string method = "greedy";
  std::vector<CoverElement> cover;
};

namespace detail {

inline double set_diameter(const Mat& pts, const NormedSpace& norm, const std::vector<Index>& idx) {
  double d = 0.0;
  for (size_t a = 0; a < idx.size(); ++a)
    for (size_t b = a + 1; b < idx.size(); ++b)
      d = std::max(d, norm.norm((pts.row(idx[a]) - pts.row(idx[b])).transpose()));
  return d;
}

inline double rel_up(double r) { return r * (1.0 + 1e-9); }

/// One greedy pass at a single scale; returns the cover and its value.
inline std::pair<std::vector<CoverElement>, double> greedy_cover(const Mat& pts, const NormedSpace& norm, double s,
                                                                 double delta, double grain) {
  std::vector<CoverElement> cover;
  double value = 0.0;
  Index n = pts.rows();
  double reach = detail::rel_up((delta - grain) / 2.0);
  std::vector<std::vector<int>> ball(static_cast<size_t>(n));
  parallel_for(n, [&](Index i) {
    auto& b = ball[static_cast<size_t>(i)];
    for (Index j = 0; j < n; ++j)
      if (norm.norm((pts.row(i) - pts.row(j)).transpose()) <= reach) b.push_back(static_cast<int>(j));
  });
  std::vector<Index> count(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) count[static_cast<size_t>(i)] = static_cast<Index>(ball[static_cast<size_t>(i)].size());
  std::vector<char> covered(static_cast<size_t>(n), 0);
  Index left = n;
  while (left > 0) {
    Index best = -1;
    for (Index i = 0; i < n; ++i)
      if (best < 0 || count[static_cast<size_t>(i)] > count[static_cast<size_t>(best)]) best = i;
    CoverElement el;
    el.center_index = best;
    el.center = pts.row(best).transpose();
    el.radius = delta / 2.0;
    for (int j : ball[static_cast<size_t>(best)]) {
      if (covered[static_cast<size_t>(j)]) continue;
      covered[static_cast<size_t>(j)] = 1;
      --left;
      el.members.push_back(j);
      for (int c : ball[static_cast<size_t>(j)]) --count[static_cast<size_t>(c)];
    }
    el.diameter = set_diameter(pts, norm, el.members) + grain;
    value += std::pow(el.diameter, s);
    cover.push_back(std::move(el));
  }
  return {std::move(cover), value};
}

}  // namespace detail

/// Greedy ball cover at scale delta. Each sample point stands for a cell of diameter `grain`;
/// an element claims the uncovered points within (delta - grain)/2 of a centre point and is
/// charged diam(claimed) + grain. With grain > 0, covers found at delta/2, delta/4, ... down to
/// the grain are also delta-covers, and the cheapest one is kept.
inline ContentEstimate greedy_content(const Mat& pts, const NormedSpace& norm, double s, double delta,
                                      double grain = 0.0) {
  require(delta > 0, "greedy_content: delta must be positive");
  require(s > 0, "greedy_content: s must be positive");
  require(grain >= 0 && grain <= delta, "greedy_content: grain must lie in [0, delta]");
  ContentEstimate est;
  est.s = s;
  est.delta = delta;
  est.grain = grain;
  est.method = "greedy";
  Index n = pts.rows();
  if (n == 0) return est;
  require(pts.cols() == norm.dim(), "greedy_content: point dimension does not match the norm");
  est.value = kInf;
  double scale = delta;
  for (int level = 0; level < 64 && scale >= grain && (level == 0 || grain > 0); ++level, scale /= 2) {
    auto [cover, value] = detail::greedy_cover(pts, norm, s, scale, grain);
    bool singletons = cover.size() == static_cast<size_t>(n);
    if (value < est.value) {
      est.value = value;
      est.cover = std::move(cover);
    }
    if (singletons) break;
  }
  std::vector<Index> packed;
  double sep = delta / 2.0;
  for (Index i = 0; i < n; ++i) {
    bool ok = true;
    for (Index j : packed)
      if (norm.norm((pts.row(i) - pts.row(j)).transpose()) < sep) {
        ok = false;
        break;
      }
    if (ok) packed.push_back(i);
  }
  est.packing_count = static_cast<Index>(packed.size());
  est.lower_bound = std::min(est.value, static_cast<double>(packed.size()) * std::pow(delta / 2.0, s));
  return est;
}

/// Box count on the axis grid of side r anchored at the origin: cells * (r sqrt(k))^s.
inline ContentEstimate grid_content(const Mat& pts, double s, double r) {
  require(r > 0, "grid_content: r must be positive");
  require(s > 0, "grid_content: s must be positive");
  ContentEstimate est;
  est.s = s;
  est.method = "grid";
  Index k = pts.cols();
  double cell = r * std::sqrt(static_cast<double>(std::max<Index>(k, 1)));
  est.delta = cell;
  std::map<std::vector<long long>, std::vector<Index>> cells;
  for (Index i = 0; i < pts.rows(); ++i) {
    std::vector<long long> key(static_cast<size_t>(k));
    for (Index c = 0; c < k; ++c) key[static_cast<size_t>(c)] = static_cast<long long>(std::floor(pts(i, c) / r));
    cells[key].push_back(i);
  }
  for (auto& [key, members] : cells) {
    CoverElement el;
    el.center = Vec(k);
    for (Index c = 0; c < k; ++c) el.center(c) = (static_cast<double>(key[static_cast<size_t>(c)]) + 0.5) * r;
    el.radius = cell / 2.0;
    el.diameter = cell;
    el.members = members;
    est.cover.push_back(std::move(el));
  }
  est.value = static_cast<double>(cells.size()) * std::pow(cell, s);
  est.packing_count = static_cast<Index>(cells.size());
  return est;
}

/// Value of the image cover {g(E)}: sum of (diam g(E) + L grain)^s.
inline double pushforward_value(const ContentEstimate& est, const Mat& images, const NormedSpace& norm, double L) {
  double v = 0.0;
  for (const auto& el : est.cover)
    v += std::pow(detail::set_diameter(images, norm, el.members) + L * est.grain, est.s);
  return v;
}

/// Largest rho such that every point lies at depth > rho inside some cover ball.
inline double cover_slack(const ContentEstimate& est, const Mat& pts, const NormedSpace& norm) {
  if (est.cover.empty()) return pts.rows() == 0 ? kInf : -kInf;
  double worst = kInf;
  for (Index p = 0; p < pts.rows(); ++p) {
    double depth = -kInf;
    for (const auto& el : est.cover)
      depth = std::max(depth, el.radius - norm.norm(pts.row(p).transpose() - el.center));
    worst = std::min(worst, depth);
  }
  return worst;
}

/// True when every point lies in some open cover ball.
inline bool cover_contains(const ContentEstimate& est, const Mat& pts, const NormedSpace& norm) {
  return cover_slack(est, pts, norm) > 0.0;
}

}  // namespace lipflat
