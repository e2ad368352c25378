#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "normgeom.hpp"
#include "util.hpp"

namespace lipflat {

/// Outcome of a metric-axiom audit. `kind` names the first failure found.
struct MetricDiagnostics {
  enum class Kind { ok, not_square, non_finite, negative, nonzero_diagonal, asymmetric, zero_distance, triangle };
  Kind kind = Kind::ok;
  Index i = -1, j = -1, k = -1;
  double excess = 0.0;
  bool exhaustive = true;

  bool ok() const { return kind == Kind::ok; }

  std::string message() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::ok: os << "ok"; break;
      case Kind::not_square: os << "matrix is not square"; break;
      case Kind::non_finite: os << "non-finite entry at (" << i << "," << j << ")"; break;
      case Kind::negative: os << "negative entry at (" << i << "," << j << ")"; break;
      case Kind::nonzero_diagonal: os << "nonzero diagonal at " << i; break;
      case Kind::asymmetric: os << "asymmetry at (" << i << "," << j << "), difference " << excess; break;
      case Kind::zero_distance: os << "distinct points at distance zero: (" << i << "," << j << ")"; break;
      case Kind::triangle:
        os << "triangle inequality fails at (" << i << "," << j << "," << k << "), excess " << excess;
        break;
    }
    return os.str();
  }
};

/// Checks the metric axioms; triangles are exhaustive up to `exhaustive_limit` points, sampled above.
inline MetricDiagnostics validate_metric(const Mat& D, Index exhaustive_limit = 500, Index triangle_samples = 2000000,
                                         std::uint64_t seed = 0) {
  MetricDiagnostics out;
  using K = MetricDiagnostics::Kind;
  if (D.rows() != D.cols()) {
    out.kind = K::not_square;
    return out;
  }
  Index n = D.rows();
  double scale = n > 0 ? D.cwiseAbs().maxCoeff() : 0.0;
  double tol = 1e-12 * std::max(1.0, scale);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      double v = D(i, j);
      auto fail = [&](K kind) {
        out.kind = kind;
        out.i = i;
        out.j = j;
        return out;
      };
      if (!std::isfinite(v)) return fail(K::non_finite);
      if (v < 0) return fail(K::negative);
      if (i == j && v != 0) return fail(K::nonzero_diagonal);
      if (std::abs(v - D(j, i)) > tol) {
        out.excess = std::abs(v - D(j, i));
        return fail(K::asymmetric);
      }
      if (i != j && v == 0) return fail(K::zero_distance);
    }
  auto check = [&](Index i, Index j, Index k) {
    double ex = D(i, k) - D(i, j) - D(j, k);
    if (ex > tol) {
      out.kind = K::triangle;
      out.i = i;
      out.j = j;
      out.k = k;
      out.excess = ex;
      return false;
    }
    return true;
  };
  if (n <= exhaustive_limit) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        for (Index k = 0; k < n; ++k)
          if (!check(i, j, k)) return out;
  } else {
    out.exhaustive = false;
    std::uniform_int_distribution<Index> pick(0, n - 1);
    auto rng = stream(seed, 0);
    for (Index t = 0; t < triangle_samples; ++t) {
      Index i = pick(rng), j = pick(rng), k = pick(rng);
      if (!check(i, j, k)) return out;
    }
  }
  return out;
}

/// Points with a validated distance matrix; optionally backed by coordinates.
class FiniteMetricSpace {
 public:
  FiniteMetricSpace() = default;

  static FiniteMetricSpace from_matrix(Mat D, std::vector<std::string> labels = {}) {
    auto diag = validate_metric(D);
    require(diag.ok(), "FiniteMetricSpace: " + diag.message());
    require(labels.empty() || static_cast<Index>(labels.size()) == D.rows(), "FiniteMetricSpace: label count mismatch");
    FiniteMetricSpace s;
    s.D_ = std::move(D);
    s.labels_ = std::move(labels);
    return s;
  }

  /// Rows of `coords` are points; distances in `norm` (Euclidean when omitted).
  static FiniteMetricSpace from_points(const Mat& coords, const std::optional<NormedSpace>& norm = std::nullopt) {
    Index n = coords.rows();
    NormedSpace nm = norm ? *norm : NormedSpace::euclidean(std::max<Index>(1, coords.cols()));
    require(nm.dim() == coords.cols() || n == 0, "FiniteMetricSpace: norm dimension mismatch");
    Mat D = Mat::Zero(n, n);
    parallel_for(n, [&](Index i) {
      for (Index j = 0; j < n; ++j)
        if (j != i) D(i, j) = nm.norm((coords.row(i) - coords.row(j)).transpose());
    });
    // exact symmetry regardless of evaluation order
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) D(j, i) = D(i, j);
    FiniteMetricSpace s = from_matrix(std::move(D));
    s.coords_ = coords;
    s.norm_ = nm;
    return s;
  }

  Index size() const { return D_.rows(); }
  double dist(Index i, Index j) const { return D_(i, j); }
  const Mat& distances() const { return D_; }
  bool has_coords() const { return coords_.has_value(); }
  const Mat& coords() const { return *coords_; }
  const NormedSpace& coord_norm() const { return *norm_; }
  const std::vector<std::string>& labels() const { return labels_; }

  double diameter() const { return size() ? D_.maxCoeff() : 0.0; }

  /// Smallest off-diagonal distance; infinity for fewer than two points.
  double min_separation() const {
    double best = kInf;
    for (Index i = 0; i < size(); ++i)
      for (Index j = i + 1; j < size(); ++j) best = std::min(best, D_(i, j));
    return best;
  }

  /// D(x, S) for every x.
  Vec distance_to(const std::vector<Index>& S) const {
    Vec out = Vec::Constant(size(), kInf);
    for (Index x = 0; x < size(); ++x)
      for (Index s : S) out(x) = std::min(out(x), D_(x, s));
    return out;
  }

 private:
  Mat D_;
  std::optional<Mat> coords_;
  std::optional<NormedSpace> norm_;
  std::vector<std::string> labels_;
};

/// Simple undirected graph with edges weighted by the metric.
struct WeightedGraph {
  struct Arc {
    Index to;
    double len;
  };
  std::vector<std::vector<Arc>> adj;

  Index size() const { return static_cast<Index>(adj.size()); }

  Index edge_count() const {
    Index e = 0;
    for (const auto& a : adj) e += static_cast<Index>(a.size());
    return e / 2;
  }

  bool has_edge(Index a, Index b) const {
    for (const auto& arc : adj[static_cast<size_t>(a)])
      if (arc.to == b) return true;
    return false;
  }

  /// Endpoint pairs (a < b) in lexicographic order.
  std::vector<std::pair<Index, Index>> edges() const {
    std::vector<std::pair<Index, Index>> out;
    for (Index a = 0; a < size(); ++a)
      for (const auto& arc : adj[static_cast<size_t>(a)])
        if (a < arc.to) out.emplace_back(a, arc.to);
    std::sort(out.begin(), out.end());
    return out;
  }
};

struct GraphMode {
  enum class Kind { complete, knn, radius, automatic };
  Kind kind = Kind::automatic;
  Index k = 16;
  double r = 0.0;

  static GraphMode complete() { return {Kind::complete, 0, 0.0}; }
  static GraphMode knn(Index k) { return {Kind::knn, k, 0.0}; }
  static GraphMode radius(double r) { return {Kind::radius, 0, r}; }
  /// complete up to 2000 points, knn(16) above.
  static GraphMode automatic() { return {Kind::automatic, 16, 0.0}; }
};

inline WeightedGraph neighborhood_graph(const FiniteMetricSpace& space, GraphMode mode = GraphMode::automatic()) {
  Index n = space.size();
  if (mode.kind == GraphMode::Kind::automatic)
    mode = n <= 2000 ? GraphMode::complete() : GraphMode::knn(mode.k > 0 ? mode.k : 16);
  require(mode.kind != GraphMode::Kind::knn || mode.k >= 1, "neighborhood_graph: k must be >= 1");
  require(mode.kind != GraphMode::Kind::radius || mode.r > 0, "neighborhood_graph: r must be > 0");
  WeightedGraph g;
  g.adj.resize(static_cast<size_t>(n));
  std::vector<std::vector<Index>> nbr(static_cast<size_t>(n));
  if (mode.kind == GraphMode::Kind::complete) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j) nbr[static_cast<size_t>(i)].push_back(j);
  } else if (mode.kind == GraphMode::Kind::radius) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j && space.dist(i, j) <= mode.r) nbr[static_cast<size_t>(i)].push_back(j);
  } else {
    // k nearest with near-ties (relative 1e-9) broken by smaller index, then symmetrized
    std::vector<std::vector<Index>> pick(static_cast<size_t>(n));
    parallel_for(n, [&](Index i) {
      std::vector<Index> order;
      for (Index j = 0; j < n; ++j)
        if (j != i) order.push_back(j);
      double scale = 1e-9 * std::max(1e-300, space.diameter());
      std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        double da = space.dist(i, a), db = space.dist(i, b);
        if (std::abs(da - db) > scale) return da < db;
        return a < b;
      });
      order.resize(static_cast<size_t>(std::min<Index>(mode.k, static_cast<Index>(order.size()))));
      pick[static_cast<size_t>(i)] = std::move(order);
    });
    for (Index i = 0; i < n; ++i)
      for (Index j : pick[static_cast<size_t>(i)]) {
        nbr[static_cast<size_t>(i)].push_back(j);
        nbr[static_cast<size_t>(j)].push_back(i);
      }
  }
  for (Index i = 0; i < n; ++i) {
    auto& v = nbr[static_cast<size_t>(i)];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (Index j : v) g.adj[static_cast<size_t>(i)].push_back({j, space.dist(i, j)});
  }
  return g;
}

/// Ordered point sequence with cumulative-length parameters and verified biLipschitz bounds.
struct CurveFragment {
  std::vector<double> params;
  std::vector<Index> indices;
  double lower = 0.0, upper = 0.0;

  Index size() const { return static_cast<Index>(indices.size()); }
};

/// Builds a fragment from a vertex path; params are cumulative path length.
inline CurveFragment fragment_from_path(const FiniteMetricSpace& space, const std::vector<Index>& path) {
  require(path.size() >= 1, "fragment_from_path: empty path");
  CurveFragment c;
  c.indices = path;
  c.params.push_back(0.0);
  for (size_t j = 1; j < path.size(); ++j) {
    double step = space.dist(path[j - 1], path[j]);
    require(step > 0, "fragment_from_path: repeated point in path");
    c.params.push_back(c.params.back() + step);
  }
  c.lower = kInf;
  c.upper = 0.0;
  for (size_t a = 0; a < path.size(); ++a)
    for (size_t b = a + 1; b < path.size(); ++b) {
      double r = space.dist(path[a], path[b]) / (c.params[b] - c.params[a]);
      c.lower = std::min(c.lower, r);
      c.upper = std::max(c.upper, r);
    }
  if (path.size() == 1) c.lower = c.upper = 1.0;
  require(c.lower > 0, "fragment_from_path: path is not biLipschitz");
  return c;
}

/// True when the recorded bounds hold over every pair.
inline bool fragment_bounds_hold(const FiniteMetricSpace& space, const CurveFragment& c, double tol = 1e-12) {
  for (Index a = 0; a < c.size(); ++a) {
    if (a + 1 < c.size() && !(c.params[static_cast<size_t>(a + 1)] > c.params[static_cast<size_t>(a)])) return false;
    for (Index b = a + 1; b < c.size(); ++b) {
      double dt = c.params[static_cast<size_t>(b)] - c.params[static_cast<size_t>(a)];
      double dd = space.dist(c.indices[static_cast<size_t>(a)], c.indices[static_cast<size_t>(b)]);
      if (dd < c.lower * dt * (1 - tol) || dd > c.upper * dt * (1 + tol)) return false;
    }
  }
  return c.lower > 0;
}

/// One two-point fragment per graph edge, in edge order.
inline std::vector<CurveFragment> edge_fragments(const FiniteMetricSpace& space, const WeightedGraph& g) {
  std::vector<CurveFragment> out;
  for (auto [a, b] : g.edges()) out.push_back(fragment_from_path(space, {a, b}));
  return out;
}

/// Per-point images in a normed R^m with the measured Lipschitz constant.
struct LipschitzMap {
  NormedSpace target;
  Mat values;  // n x m, row i = F(x_i)
  double lip = 0.0;

  Index size() const { return values.rows(); }
  Vec at(Index i) const { return values.row(i).transpose(); }
};

inline double measure_lip(const FiniteMetricSpace& space, const NormedSpace& target, const Mat& values) {
  Index n = values.rows();
  require(n == space.size(), "measure_lip: value count does not match the space");
  return parallel_max(n, [&](Index i) {
    double best = 0.0;
    for (Index j = i + 1; j < n; ++j)
      best = std::max(best, target.norm((values.row(i) - values.row(j)).transpose()) / space.dist(i, j));
    return best;
  }, 0.0);
}

inline LipschitzMap make_map(const FiniteMetricSpace& space, const NormedSpace& target, Mat values) {
  require(values.cols() == target.dim(), "make_map: value dimension does not match the target");
  require(values.allFinite(), "make_map: non-finite values");
  LipschitzMap f;
  f.target = target;
  f.lip = measure_lip(space, target, values);
  f.values = std::move(values);
  return f;
}

/// Identity map of a point cloud into its coordinate space under `target`.
inline LipschitzMap identity_map(const FiniteMetricSpace& space, const NormedSpace& target) {
  require(space.has_coords(), "identity_map: space has no coordinates");
  return make_map(space, target, space.coords());
}

/// Greedy maximal eps-net scanning indices in ascending order.
inline std::vector<Index> max_epsilon_net(const FiniteMetricSpace& space, double eps) {
  require(eps > 0, "max_epsilon_net: eps must be positive");
  std::vector<Index> net;
  for (Index i = 0; i < space.size(); ++i) {
    bool far = true;
    for (Index j : net)
      if (space.dist(i, j) < eps) {
        far = false;
        break;
      }
    if (far) net.push_back(i);
  }
  return net;
}

/// x -> (d(x, net_1), ..., d(x, net_m)) into l_inf^m.
inline LipschitzMap kuratowski_embed(const FiniteMetricSpace& space, const std::vector<Index>& net) {
  require(!net.empty(), "kuratowski_embed: empty net");
  Index n = space.size(), m = static_cast<Index>(net.size());
  Mat v(n, m);
  for (Index x = 0; x < n; ++x)
    for (Index i = 0; i < m; ++i) v(x, i) = space.dist(x, net[static_cast<size_t>(i)]);
  return make_map(space, NormedSpace::linf(m), std::move(v));
}

/// min over pairs of ||F(x)-F(y)|| - D(x,y).
inline double min_pair_slack(const FiniteMetricSpace& space, const LipschitzMap& F) {
  Index n = space.size();
  double lo = -parallel_max(n, [&](Index i) {
    double worst = -kInf;
    for (Index j = i + 1; j < n; ++j)
      worst = std::max(worst, space.dist(i, j) - F.target.norm((F.values.row(i) - F.values.row(j)).transpose()));
    return worst;
  });
  return n < 2 ? 0.0 : lo;
}

}  // namespace lipflat
