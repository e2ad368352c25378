#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "content.hpp"
#include "corpus.hpp"
#include "metric.hpp"
#include "normgeom.hpp"
#include "tangent.hpp"
#include "util.hpp"

namespace lipflat {

/// {x : D(x, S) < margin}; distances within a relative 1e-9 of the margin count as outside.
inline std::vector<Index> neighborhood_V(const FiniteMetricSpace& space, const std::vector<Index>& S, double margin) {
  require(margin > 0, "neighborhood_V: margin must be positive");
  Vec dist = space.distance_to(S);
  std::vector<Index> out;
  for (Index x = 0; x < space.size(); ++x)
    if (dist(x) < margin * (1 - 1e-9) || dist(x) == 0) out.push_back(x);
  return out;
}

/// Edge-wise audit of the scalar perturbation bounds.
struct ScalarAudit {
  Index edges = 0;
  Index flat_edges = 0;
  Index global_violations = 0;
  Index flat_violations = 0;
  Index pointwise_violations = 0;
  double worst_global_ratio = 0.0;  // max |df| / (|dT| + 3 delta ||T|| len)
  double worst_flat_ratio = 0.0;    // max |df| / (3 delta ||T|| len) over flat edges

  void merge(const ScalarAudit& o) {
    edges += o.edges;
    flat_edges += o.flat_edges;
    global_violations += o.global_violations;
    flat_violations += o.flat_violations;
    pointwise_violations += o.pointwise_violations;
    worst_global_ratio = std::max(worst_global_ratio, o.worst_global_ratio);
    worst_flat_ratio = std::max(worst_flat_ratio, o.worst_flat_ratio);
  }
  Index violations() const { return global_violations + flat_violations + pointwise_violations; }
};

struct ScalarPerturbation {
  Vec f;  // perturbed values
  Vec t;  // T(F(x))
  double tnorm = 0.0;
  double delta = 0.0;
  double edge_cap = kInf;
  ScalarAudit audit;
};

/// Weight of the arc y -> z. Ascending arcs cost delta||T|| len on flat edges and dT + delta||T|| len
/// elsewhere; descending arcs cost twice the slack term and, off flat edges, the drop |dT|.
inline double scalar_arc_weight(double ty, double tz, double len, bool flat, double delta, double tnorm) {
  double slack = delta * tnorm * len;
  if (tz >= ty) return flat ? slack : (tz - ty) + slack;
  return flat ? 2 * slack : (ty - tz) + 2 * slack;
}

/// An edge is flat when both endpoints lie in V and it is shorter than `edge_cap`.
inline bool flat_edge(const std::vector<char>& inV, Index a, Index b, double len, double edge_cap) {
  return inV[static_cast<size_t>(a)] && inV[static_cast<size_t>(b)] && len < edge_cap;
}

inline ScalarAudit audit_scalar(const WeightedGraph& g, const Vec& f, const Vec& t, const std::vector<char>& inV,
                                double delta, double tnorm, double edge_cap) {
  ScalarAudit a;
  for (Index x = 0; x < g.size(); ++x) {
    if (f(x) > t(x)) ++a.pointwise_violations;
    for (const auto& arc : g.adj[static_cast<size_t>(x)]) {
      if (arc.to < x) continue;
      ++a.edges;
      double df = std::abs(f(x) - f(arc.to));
      double dt = std::abs(t(x) - t(arc.to));
      double slack3 = 3 * delta * tnorm * arc.len;
      if (df > dt + slack3) ++a.global_violations;
      a.worst_global_ratio = std::max(a.worst_global_ratio, df / (dt + slack3));
      if (flat_edge(inV, x, arc.to, arc.len, edge_cap)) {
        ++a.flat_edges;
        if (df > slack3) ++a.flat_violations;
        a.worst_flat_ratio = std::max(a.worst_flat_ratio, df / slack3);
      }
    }
  }
  return a;
}

/// f(x) = min(T(F(x)), min over admissible paths ending at x of T(F(start)) + path weight).
inline ScalarPerturbation scalar_perturb_values(const WeightedGraph& g, const Vec& t, double tnorm,
                                                const std::vector<char>& inV, double delta, double edge_cap = kInf) {
  require(delta > 0 && delta < 1, "scalar_perturb: delta must lie in (0, 1)");
  require(tnorm > 0, "scalar_perturb: T must be nonzero");
  Index n = g.size();
  require(t.size() == n && static_cast<Index>(inV.size()) == n, "scalar_perturb: size mismatch");
  ScalarPerturbation out;
  out.t = t;
  out.tnorm = tnorm;
  out.delta = delta;
  out.edge_cap = edge_cap;
  Vec dist = t;
  std::vector<char> done(static_cast<size_t>(n), 0);
  Index arcs = 2 * g.edge_count();
  if (arcs * 8 > n * n) {
    for (Index round = 0; round < n; ++round) {
      Index u = -1;
      for (Index x = 0; x < n; ++x)
        if (!done[static_cast<size_t>(x)] && (u < 0 || dist(x) < dist(u))) u = x;
      done[static_cast<size_t>(u)] = 1;
      for (const auto& arc : g.adj[static_cast<size_t>(u)]) {
        if (done[static_cast<size_t>(arc.to)]) continue;
        double w = scalar_arc_weight(t(u), t(arc.to), arc.len, flat_edge(inV, u, arc.to, arc.len, edge_cap), delta, tnorm);
        if (dist(u) + w < dist(arc.to)) dist(arc.to) = dist(u) + w;
      }
    }
  } else {
    using Item = std::pair<double, Index>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    for (Index x = 0; x < n; ++x) heap.emplace(dist(x), x);
    while (!heap.empty()) {
      auto [du, u] = heap.top();
      heap.pop();
      if (done[static_cast<size_t>(u)] || du > dist(u)) continue;
      done[static_cast<size_t>(u)] = 1;
      for (const auto& arc : g.adj[static_cast<size_t>(u)]) {
        if (done[static_cast<size_t>(arc.to)]) continue;
        double w = scalar_arc_weight(t(u), t(arc.to), arc.len, flat_edge(inV, u, arc.to, arc.len, edge_cap), delta, tnorm);
        if (dist(u) + w < dist(arc.to)) {
          dist(arc.to) = dist(u) + w;
          heap.emplace(dist(arc.to), arc.to);
        }
      }
    }
  }
  out.f = dist;
  out.audit = audit_scalar(g, out.f, t, inV, delta, tnorm, edge_cap);
  return out;
}

/// Same sweep over the complete graph with lengths D, reading one column per settled node.
inline ScalarPerturbation scalar_perturb_dense(const Mat& D, const Vec& t, double tnorm, const std::vector<char>& inV,
                                               double delta, double edge_cap = kInf) {
  require(delta > 0 && delta < 1, "scalar_perturb: delta must lie in (0, 1)");
  require(tnorm > 0, "scalar_perturb: T must be nonzero");
  Index n = D.rows();
  require(D.cols() == n && t.size() == n && static_cast<Index>(inV.size()) == n, "scalar_perturb: size mismatch");
  ScalarPerturbation out;
  out.t = t;
  out.tnorm = tnorm;
  out.delta = delta;
  out.edge_cap = edge_cap;
  std::vector<double> dist(t.data(), t.data() + n);
  std::vector<char> done(static_cast<size_t>(n), 0);
  const double rate = delta * tnorm;
  Index u = 0;
  for (Index x = 1; x < n; ++x)
    if (dist[static_cast<size_t>(x)] < dist[static_cast<size_t>(u)]) u = x;
  for (Index round = 0; round < n; ++round) {
    done[static_cast<size_t>(u)] = 1;
    const double* col = D.col(u).data();
    const double du = dist[static_cast<size_t>(u)], tu = t(u);
    const bool vu = inV[static_cast<size_t>(u)];
    Index next = -1;
    double best = kInf;
    for (Index j = 0; j < n; ++j) {
      if (done[static_cast<size_t>(j)]) continue;
      double len = col[j], tj = t(j);
      bool flat = vu && inV[static_cast<size_t>(j)] && len < edge_cap;
      double slack = rate * len;
      double w = tj >= tu ? (flat ? slack : (tj - tu) + slack) : (flat ? 2 * slack : (tu - tj) + 2 * slack);
      double& dj = dist[static_cast<size_t>(j)];
      if (du + w < dj) dj = du + w;
      if (dj < best) {
        best = dj;
        next = j;
      }
    }
    if (next < 0) break;
    u = next;
  }
  out.f = Eigen::Map<Vec>(dist.data(), n);
  ScalarAudit& a = out.audit;
  for (Index x = 0; x < n; ++x) {
    if (out.f(x) > t(x)) ++a.pointwise_violations;
    const double* col = D.col(x).data();
    for (Index y = x + 1; y < n; ++y) {
      ++a.edges;
      double df = std::abs(out.f(x) - out.f(y));
      double dt = std::abs(t(x) - t(y));
      double slack3 = 3 * rate * col[y];
      if (df > dt + slack3) ++a.global_violations;
      a.worst_global_ratio = std::max(a.worst_global_ratio, df / (dt + slack3));
      if (flat_edge(inV, x, y, col[y], edge_cap)) {
        ++a.flat_edges;
        if (df > slack3) ++a.flat_violations;
        a.worst_flat_ratio = std::max(a.worst_flat_ratio, df / slack3);
      }
    }
  }
  return out;
}

inline bool is_complete(const WeightedGraph& g) {
  Index n = g.size();
  return g.edge_count() == n * (n - 1) / 2;
}

inline std::vector<char> membership(Index n, const std::vector<Index>& V) {
  std::vector<char> in(static_cast<size_t>(n), 0);
  for (Index v : V) in[static_cast<size_t>(v)] = 1;
  return in;
}

/// Scalar perturbation of T o F; `edge_cap` bounds the length of flat edges (default: none).
inline ScalarPerturbation scalar_perturb(const WeightedGraph& g, const LipschitzMap& F, const Vec& T,
                                         const std::vector<Index>& V, double delta, double edge_cap = kInf) {
  require(T.size() == F.target.dim(), "scalar_perturb: covector dimension mismatch");
  require(g.size() == F.size(), "scalar_perturb: graph and map sizes differ");
  double tnorm = F.target.dual_norm(T);
  return scalar_perturb_values(g, F.values * T, tnorm, membership(g.size(), V), delta, edge_cap);
}

struct VectorOptions {
  double margin = 0.0;    // V = {x : D(x, S_i) < margin}; 0 selects twice the spacing of S_i
  double edge_cap = 0.0;  // flat-edge length cap; 0 selects the margin
  bool centre = true;     // add half the largest drop to each f_i
  AdaptedBasisOptions basis;
};

struct VectorPerturbation {
  LipschitzMap sigma;
  AdaptedBasis basis;
  std::vector<Index> V;
  std::vector<ScalarPerturbation> scalars;  // one per non-zero functional
  Vec shifts;
  double delta = 0.0;
  double margin = 0.0;
  double sup_move = 0.0;
  double flat_slack = 0.0;   // max over S_i pairs within margin of (||ds|| - ||P dF||)_+ / d
  double C_V = 0.0;          // flat_slack / ((1 - theta) Lip F)
  double flat_radius = kInf; // first pair distance where the slack exceeds 3 delta sum ||T_i||
  ScalarAudit audit;
};

namespace detail {

inline double spacing_of(const FiniteMetricSpace& space, const std::vector<Index>& S) {
  double h = kInf;
  for (size_t a = 0; a < S.size(); ++a)
    for (size_t b = a + 1; b < S.size(); ++b) h = std::min(h, space.dist(S[a], S[b]));
  return h;
}

/// Max and radius bookkeeping of the flatness inequality on S.
inline void flatness_report(const FiniteMetricSpace& space, const std::vector<Index>& S, const LipschitzMap& F,
                            const Mat& sigma, const Mat& P, const NormedSpace& target, double scale_cap,
                            double predicted, double& slack_out, double& radius_out) {
  struct PairSlack {
    double d, slack;
  };
  std::vector<PairSlack> pairs;
  Mat PF = F.values * P.transpose();
  for (size_t a = 0; a < S.size(); ++a)
    for (size_t b = a + 1; b < S.size(); ++b) {
      Index y = S[a], z = S[b];
      double d = space.dist(y, z);
      Vec ds = (sigma.row(y) - sigma.row(z)).transpose();
      Vec dp = (PF.row(y) - PF.row(z)).transpose();
      double sl = std::max(0.0, target.norm(ds) - target.norm(dp)) / d;
      pairs.push_back({d, sl});
    }
  std::sort(pairs.begin(), pairs.end(), [](const PairSlack& u, const PairSlack& v) {
    return u.d < v.d || (u.d == v.d && u.slack < v.slack);
  });
  slack_out = 0.0;
  radius_out = kInf;
  for (const auto& p : pairs) {
    if (p.d < scale_cap) slack_out = std::max(slack_out, p.slack);
    if (radius_out == kInf && p.slack > predicted) radius_out = p.d;
  }
}

}  // namespace detail

/// sigma_i = P F + sum f_i b_i with f_i the scalar perturbation of T_i = b_i* o Q against V.
inline VectorPerturbation vector_perturb(const FiniteMetricSpace& space, const WeightedGraph& g, const LipschitzMap& F,
                                         const Piece& piece, double theta, double eps, const VectorOptions& opt = {}) {
  require(theta > 0 && theta < 1, "vector_perturb: theta must lie in (0, 1)");
  require(eps > 0, "vector_perturb: eps must be positive");
  require(!piece.indices.empty(), "vector_perturb: empty piece");
  VectorPerturbation vp;
  Index n = space.size(), m = F.target.dim();
  vp.delta = 1 - theta;
  double h = detail::spacing_of(space, piece.indices);
  vp.margin = opt.margin > 0 ? opt.margin : (std::isfinite(h) ? 2 * h : eps);
  double cap = opt.edge_cap > 0 ? opt.edge_cap : vp.margin;
  vp.basis = adapted_basis(F.target, piece.frame, opt.basis);
  vp.V = neighborhood_V(space, piece.indices, vp.margin);
  auto inV = membership(n, vp.V);
  Mat T = vp.basis.functionals * vp.basis.Q;  // row i is T_i
  Mat coeff = F.values * T.transpose();        // n x m, column i = T_i(F(x))
  vp.shifts = Vec::Zero(m);
  std::vector<Index> active;
  std::vector<double> tnorms(static_cast<size_t>(m), 0.0);
  for (Index i = 0; i < m; ++i) {
    tnorms[static_cast<size_t>(i)] = F.target.dual_norm(T.row(i).transpose());
    if (tnorms[static_cast<size_t>(i)] > 1e-13) active.push_back(i);
  }
  std::vector<ScalarPerturbation> res(active.size());
  bool dense = is_complete(g) && g.size() > 1;
  parallel_for(static_cast<Index>(active.size()), [&](Index k) {
    Index i = active[static_cast<size_t>(k)];
    res[static_cast<size_t>(k)] =
        dense ? scalar_perturb_dense(space.distances(), coeff.col(i), tnorms[static_cast<size_t>(i)], inV, vp.delta, cap)
              : scalar_perturb_values(g, coeff.col(i), tnorms[static_cast<size_t>(i)], inV, vp.delta, cap);
  });
  double predicted = 0.0;
  for (size_t k = 0; k < active.size(); ++k) {
    Index i = active[k];
    Vec fi = res[k].f;
    if (opt.centre) {
      double drop = (coeff.col(i) - fi).maxCoeff();
      vp.shifts(i) = drop / 2;
      fi.array() += vp.shifts(i);
    }
    coeff.col(i) = fi;
    predicted += 3 * vp.delta * tnorms[static_cast<size_t>(i)];
    vp.audit.merge(res[k].audit);
  }
  vp.scalars = std::move(res);
  Mat sigma = F.values * vp.basis.P.transpose() + coeff * vp.basis.basis.transpose();
  vp.sup_move = 0.0;
  for (Index x = 0; x < n; ++x)
    vp.sup_move = std::max(vp.sup_move, F.target.norm((sigma.row(x) - F.values.row(x)).transpose()));
  detail::flatness_report(space, piece.indices, F, sigma, vp.basis.P, F.target, vp.margin, predicted, vp.flat_slack,
                          vp.flat_radius);
  vp.C_V = F.lip > 0 ? vp.flat_slack / ((1 - theta) * F.lip) : 0.0;
  vp.sigma = make_map(space, F.target, std::move(sigma));
  return vp;
}

struct GluePiece {
  std::vector<Index> S;
  Mat sigma;  // n x m values, used on B(S, rho0)
};

struct GlueResult {
  LipschitzMap sigma;
  double L = 0.0;
  double eps = 0.0;
  double rho0 = 0.0;
  double bound = 0.0;  // L + 2 eps / rho0
  bool within_bound = true;
};

/// sigma = F + sum chi_i (sigma_i - F), chi_i = max(rho0/2 - d(x, S_i), 0) / (rho0/2).
inline GlueResult glue(const FiniteMetricSpace& space, const LipschitzMap& F, const std::vector<GluePiece>& pieces,
                       double rho0, double eps) {
  require(rho0 > 0, "glue: rho0 must be positive");
  require(eps > 0, "glue: eps must be positive");
  Index n = space.size();
  GlueResult out;
  out.rho0 = rho0;
  out.eps = eps;
  out.L = F.lip;
  std::vector<Vec> dist;
  for (const auto& p : pieces) dist.push_back(space.distance_to(p.S));
  for (Index x = 0; x < n; ++x) {
    Index near = 0;
    for (const auto& d : dist)
      if (d(x) < rho0) ++near;
    require(near <= 1, "glue: inflated pieces overlap at point " + std::to_string(x));
  }
  Mat values = F.values;
  for (size_t i = 0; i < pieces.size(); ++i) {
    const auto& p = pieces[i];
    require(p.sigma.rows() == n && p.sigma.cols() == F.target.dim(), "glue: piece map has the wrong shape");
    std::vector<Index> ball;
    for (Index x = 0; x < n; ++x)
      if (dist[i](x) < rho0) ball.push_back(x);
    for (Index x : ball) {
      double dev = F.target.norm((p.sigma.row(x) - F.values.row(x)).transpose());
      require(dev < eps, "glue: piece " + std::to_string(i) + " deviates from F by " + std::to_string(dev) + " >= eps");
    }
    double li = 0.0;
    for (size_t a = 0; a < ball.size(); ++a)
      for (size_t b = a + 1; b < ball.size(); ++b)
        li = std::max(li, F.target.norm((p.sigma.row(ball[a]) - p.sigma.row(ball[b])).transpose()) /
                              space.dist(ball[a], ball[b]));
    out.L = std::max(out.L, li);
    for (Index x : ball) {
      double chi = std::max(rho0 / 2 - dist[i](x), 0.0) / (rho0 / 2);
      if (chi > 0) values.row(x) = F.values.row(x) + chi * (p.sigma.row(x) - F.values.row(x));
    }
  }
  out.bound = out.L + 2 * eps / rho0;
  out.sigma = make_map(space, F.target, std::move(values));
  out.within_bound = out.sigma.lip <= out.bound + 1e-9;
  return out;
}

struct ShrinkResult {
  LipschitzMap g;
  double delta = 0.0;
  double sup_norm = 0.0;
  double sup_move = 0.0;
};

/// g = c + (L - delta)(f - c)/L with delta = eps / (2 L ||f - c||).
inline ShrinkResult shrink_to_budget(const FiniteMetricSpace& space, const LipschitzMap& f, double L, double eps,
                                     const Vec& centre) {
  require(L > 0, "shrink_to_budget: L must be positive");
  require(eps > 0, "shrink_to_budget: eps must be positive");
  require(f.lip <= L * (1 + 1e-12), "shrink_to_budget: Lip f exceeds L");
  require(centre.size() == f.target.dim(), "shrink_to_budget: centre dimension mismatch");
  ShrinkResult r;
  for (Index x = 0; x < f.size(); ++x)
    r.sup_norm = std::max(r.sup_norm, f.target.norm(f.at(x) - centre));
  if (r.sup_norm == 0) {
    r.g = f;
    return r;
  }
  r.delta = eps / (2 * L * r.sup_norm);
  double k = (L - r.delta) / L;
  Mat v = (f.values.rowwise() - centre.transpose()) * k;
  v.rowwise() += centre.transpose();
  r.g = make_map(space, f.target, std::move(v));
  for (Index x = 0; x < f.size(); ++x) r.sup_move = std::max(r.sup_move, f.target.norm(r.g.at(x) - f.at(x)));
  return r;
}

inline ShrinkResult shrink_to_budget(const FiniteMetricSpace& space, const LipschitzMap& f, double L, double eps) {
  return shrink_to_budget(space, f, L, eps, Vec::Zero(f.target.dim()));
}

/// Midpoint of the coordinate bounding box of the values.
inline Vec box_centre(const Mat& values) {
  if (values.rows() == 0) return Vec::Zero(values.cols());
  return ((values.colwise().maxCoeff() + values.colwise().minCoeff()) / 2).transpose();
}

struct FlattenOptions {
  double s = 0.0;             // content dimension; 0 selects d + 1
  double delta = 0.0;         // content scale; 0 selects twice the spacing of S
  double grain = 0.0;         // cell diameter per sample point
  double margin = 0.0;        // base V margin; 0 selects twice the spacing of S
  std::vector<double> margin_ladder = {1.0, 0.625};  // multiples of the base margin
  Index theta_steps = 4;      // theta, then halving 1 - theta
  Index max_pieces = 4;
  Index fragment_k = 4;
  GraphMode graph = GraphMode::automatic();
  double collapse_threshold = 0.8;
  double rho_floor = 0.0;     // lower bound on rho0; points of later pieces within 2 rho0 are dropped
  AdaptedBasisOptions basis;
  std::uint64_t seed = 0;
};

struct Attempt {
  double theta = 0.0;
  double margin = 0.0;
  double sup_move = 0.0;
  double lip = 0.0;
  double glued_lip = 0.0;  // before the budget shrink
  double glued_move = 0.0;
  bool admissible = false;
};

struct PerturbationReport {
  std::string status;  // collapsed | failure | degenerate
  std::string reason;
  Index d = 0;
  double theta = 0.0, delta = 0.0, eps = 0.0, margin = 0.0, s = 0.0;
  double lip_F = 0.0, lip_sigma = 0.0, budget = 0.0, tildeK = 1.0, K_d = 1.0;
  double sup_move = 0.0;
  ContentEstimate content_before, content_after;
  double content_ratio = 1.0;
  double flat_radius = kInf;
  double flat_slack = 0.0;
  double C_V = 0.0;
  double eps_hat = 0.0, C_hat = 0.0, C_cap = 0.0;
  bool measure_reduction_ok = true;
  DistortionReport distortion;
  ScalarAudit scalar_audit;
  Index glue_calls = 0;
  Index glue_violations = 0;
  double worst_glue_excess = -kInf;  // max of measured Lip - bound over glue calls
  Index pieces = 0;
  Index unassigned = 0;
  Index discarded = 0;
  bool partition_failure = false;
  double rho0 = 0.0;
  double tangent_violation = 0.0;
  bool identity_fallback = false;
  std::vector<Attempt> attempts;
};

struct FlattenResult {
  LipschitzMap sigma;
  PerturbationReport report;
};

namespace detail {

inline ContentEstimate image_content(const Mat& values, const std::vector<Index>& S, const NormedSpace& norm,
                                     double s, double delta, double grain) {
  Mat pts(static_cast<Index>(S.size()), values.cols());
  for (size_t i = 0; i < S.size(); ++i) pts.row(static_cast<Index>(i)) = values.row(S[i]);
  return greedy_content(pts, norm, s, delta, grain);
}

/// Separate pieces so that inflations by rho0 are disjoint, dropping points too close to earlier pieces.
inline Index disjointify(const FiniteMetricSpace& space, std::vector<Piece>& pieces, double rho0) {
  Index dropped = 0;
  for (size_t i = 1; i < pieces.size(); ++i) {
    std::vector<Index> keep;
    for (Index x : pieces[i].indices) {
      bool clash = false;
      for (size_t j = 0; j < i && !clash; ++j)
        for (Index y : pieces[j].indices)
          if (space.dist(x, y) < 2 * rho0) {
            clash = true;
            break;
          }
      if (clash)
        ++dropped;
      else
        keep.push_back(x);
    }
    pieces[i].indices = std::move(keep);
  }
  pieces.erase(std::remove_if(pieces.begin(), pieces.end(), [](const Piece& p) { return p.indices.empty(); }),
               pieces.end());
  return dropped;
}

}  // namespace detail

/// Full flattening pipeline: tangent field, partition, per-piece perturbation, glue, budget shrink.
/// Attempts run over a theta ladder within a margin ladder; the first attempt that moves F by
/// less than eps is kept, otherwise sigma = F.
inline FlattenResult flatten(const FiniteMetricSpace& space, const std::vector<Index>& S, const LipschitzMap& F,
                             Index d, double eps, double theta, const std::vector<CurveFragment>& fragments,
                             const FlattenOptions& opt = {}) {
  require(eps > 0, "flatten: eps must be positive");
  require(theta > 0 && theta < 1, "flatten: theta must lie in (0, 1)");
  require(d >= 0, "flatten: d must be >= 0");
  require(F.size() == space.size(), "flatten: map and space sizes differ");
  for (Index x : S) require(x >= 0 && x < space.size(), "flatten: S index out of range");
  FlattenResult out;
  auto& rep = out.report;
  Index m = F.target.dim();
  rep.d = d;
  rep.theta = theta;
  rep.eps = eps;
  rep.lip_F = F.lip;
  rep.s = opt.s > 0 ? opt.s : static_cast<double>(d + 1);
  double h = detail::spacing_of(space, S);
  double base_margin = opt.margin > 0 ? opt.margin : (std::isfinite(h) ? 2 * h : eps);
  double cdelta = opt.delta > 0 ? opt.delta : (std::isfinite(h) ? 2 * h : eps);
  rep.margin = base_margin;
  rep.content_before = detail::image_content(F.values, S, F.target, rep.s, cdelta, opt.grain);

  auto finish = [&](LipschitzMap sigma) {
    rep.lip_sigma = sigma.lip;
    rep.sup_move = 0.0;
    for (Index x = 0; x < space.size(); ++x)
      rep.sup_move = std::max(rep.sup_move, F.target.norm(sigma.at(x) - F.at(x)));
    rep.content_after = detail::image_content(sigma.values, S, F.target, rep.s, cdelta, opt.grain);
    rep.content_ratio = rep.content_before.value > 0 ? rep.content_after.value / rep.content_before.value : 1.0;
    rep.distortion = distort_check(sigma, space);
    out.sigma = std::move(sigma);
  };

  if (S.empty() || m <= d) {
    rep.status = "degenerate";
    rep.reason = S.empty() ? "empty set" : "target dimension does not exceed d";
    rep.identity_fallback = true;
    rep.budget = F.lip;
    finish(F);
    return out;
  }

  auto field = fit_tangent_field(S, F, fragments, d, theta);
  rep.tangent_violation = field.total_violation;
  auto part = partition_by_field(field, theta, opt.max_pieces, opt.seed);
  rep.unassigned = static_cast<Index>(part.unassigned.size());
  double dmin = kInf;
  for (size_t i = 0; i < part.pieces.size(); ++i)
    for (size_t j = i + 1; j < part.pieces.size(); ++j)
      for (Index x : part.pieces[i].indices)
        for (Index y : part.pieces[j].indices) dmin = std::min(dmin, space.dist(x, y));
  double rho0 = std::min(eps, std::max(dmin / 2, opt.rho_floor));
  if (dmin / 2 < rho0) rep.discarded = detail::disjointify(space, part.pieces, rho0);
  rep.rho0 = rho0;
  rep.pieces = static_cast<Index>(part.pieces.size());
  Index kept = 0;
  for (const auto& p : part.pieces) kept += static_cast<Index>(p.indices.size());
  rep.partition_failure = part.pieces.empty() || 2 * kept < static_cast<Index>(S.size());

  auto graph = neighborhood_graph(space, opt.graph);
  bool unit_witness = true;
  double tildeK = 1.0, Kd = 0.0;
  bool have_basis = false;

  std::optional<LipschitzMap> chosen;
  std::vector<VectorPerturbation> chosen_parts;
  if (!rep.partition_failure) {
    for (double mf : opt.margin_ladder) {
      double margin = base_margin * mf;
      double th = theta;
      for (Index step = 0; step < std::max<Index>(1, opt.theta_steps); ++step, th = 1 - (1 - th) / 2) {
        std::vector<VectorPerturbation> parts;
        std::vector<GluePiece> gp;
        double dev = 0.0;
        VectorOptions vo;
        vo.margin = margin;
        vo.basis = opt.basis;
        for (const auto& p : part.pieces) {
          parts.push_back(vector_perturb(space, graph, F, p, th, eps, vo));
          rep.scalar_audit.merge(parts.back().audit);
          gp.push_back({p.indices, parts.back().sigma.values});
          Vec dist = space.distance_to(p.indices);
          for (Index x = 0; x < space.size(); ++x)
            if (dist(x) < rho0) dev = std::max(dev, F.target.norm(parts.back().sigma.at(x) - F.at(x)));
        }
        if (!have_basis) {
          for (const auto& vp : parts) {
            tildeK = std::max(tildeK, vp.basis.tildeK);
            Kd = std::max(Kd, vp.basis.K_d);
            if (vp.basis.tildeK > 1 + 1e-9) unit_witness = false;
          }
          have_basis = true;
        }
        double geps = dev * (1 + 1e-9) + 1e-300;
        auto gr = glue(space, F, gp, rho0, geps);
        ++rep.glue_calls;
        rep.worst_glue_excess = std::max(rep.worst_glue_excess, gr.sigma.lip - gr.bound);
        if (!gr.within_bound) ++rep.glue_violations;
        double budget = unit_witness ? F.lip : tildeK * F.lip + eps;
        LipschitzMap sigma = gr.sigma;
        if (sigma.lip > budget && budget > 0) {
          Vec c = box_centre(sigma.values);
          double target = budget * (1 - 1e-12);
          double radius = 0.0;
          for (Index x = 0; x < sigma.size(); ++x) radius = std::max(radius, F.target.norm(sigma.at(x) - c));
          double shrink_eps = 2 * sigma.lip * radius * (sigma.lip - target);
          sigma = shrink_to_budget(space, sigma, sigma.lip, shrink_eps, c).g;
        }
        Attempt at;
        at.glued_lip = gr.sigma.lip;
        for (Index x = 0; x < space.size(); ++x)
          at.glued_move = std::max(at.glued_move, F.target.norm(gr.sigma.at(x) - F.at(x)));
        at.theta = th;
        at.margin = margin;
        at.lip = sigma.lip;
        for (Index x = 0; x < space.size(); ++x) at.sup_move = std::max(at.sup_move, F.target.norm(sigma.at(x) - F.at(x)));
        at.admissible = at.sup_move < eps && sigma.lip <= budget;
        rep.attempts.push_back(at);
        rep.budget = budget;
        if (at.admissible) {
          chosen = std::move(sigma);
          chosen_parts = std::move(parts);
          rep.theta = th;
          rep.margin = margin;
          break;
        }
      }
      if (chosen) break;
    }
  }
  rep.tildeK = tildeK;
  rep.K_d = have_basis ? Kd : 1.0;
  if (!have_basis) rep.budget = F.lip;
  rep.delta = 1 - rep.theta;
  if (chosen) {
    double slack = 0.0, radius = kInf, cv = 0.0;
    for (const auto& vp : chosen_parts) {
      slack = std::max(slack, vp.flat_slack);
      radius = std::min(radius, vp.flat_radius);
      cv = std::max(cv, vp.C_V);
    }
    rep.flat_slack = slack;
    rep.flat_radius = radius;
    rep.C_V = cv;
    finish(std::move(*chosen));
  } else {
    rep.identity_fallback = true;
    finish(F);
  }

  // measure-reduction bookkeeping at the base margin on the final sigma
  double eh = 0.0;
  for (const auto& p : part.pieces) {
    Mat Pp = d == 0 ? Mat::Zero(m, m) : Mat(p.frame * p.frame.transpose());
    if (!chosen_parts.empty()) {
      for (const auto& vp : chosen_parts)
        if (vp.basis.frame.cols() == p.frame.cols() && (vp.basis.frame - p.frame).norm() < 1e-9) Pp = vp.basis.P;
    }
    double sl = 0.0, rad = 0.0;
    detail::flatness_report(space, p.indices, F, out.sigma.values, Pp, F.target, base_margin, kInf, sl, rad);
    eh = std::max(eh, sl);
  }
  rep.eps_hat = eh;
  double scale = std::pow(eh, rep.s - static_cast<double>(d));
  if (rep.content_before.value <= 0)
    rep.C_hat = 0.0;
  else if (scale > 0)
    rep.C_hat = rep.content_after.value / (scale * rep.content_before.value);
  else
    rep.C_hat = rep.content_after.value > 0 ? kInf : 0.0;
  rep.C_cap = 64 * std::pow(rep.K_d * F.lip + 1, rep.s);
  rep.measure_reduction_ok = rep.s > 2 || rep.C_hat <= rep.C_cap;

  if (rep.partition_failure) {
    rep.status = "failure";
    rep.reason = "pieces could not be made disjoint";
  } else if (rep.identity_fallback) {
    rep.status = "failure";
    rep.reason = "no attempt moved F by less than eps; sigma = F";
  } else if (rep.content_after.value >= opt.collapse_threshold * rep.content_before.value) {
    rep.status = "failure";
    rep.reason = "content did not collapse";
  } else {
    rep.status = "collapsed";
  }
  return out;
}

/// Default fragment family: the edges of the knn graph as two-point fragments.
inline std::vector<CurveFragment> default_fragments(const FiniteMetricSpace& space, Index k = 4) {
  return edge_fragments(space, neighborhood_graph(space, GraphMode::knn(k)));
}

}  // namespace lipflat
