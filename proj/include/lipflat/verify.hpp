#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "content.hpp"
#include "converse.hpp"
#include "corpus.hpp"
#include "io.hpp"
#include "metric.hpp"
#include "normgeom.hpp"
#include "perturb.hpp"
#include "util.hpp"

namespace lipflat::verify {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  Json data;  // deterministic payload, compared across runs
  double seconds = 0.0;
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

template <class Fn>
CriterionResult timed(int id, std::string name, Fn&& fn) {
  auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = fn();
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.id = id;
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------- flatten runs shared by several criteria

struct FlattenCase {
  std::string name;
  double seconds = 0.0;
  PerturbationReport report;
  LipschitzMap sigma;
  LipschitzMap F;
  FiniteMetricSpace space;
  GeneratedSet set;
};

inline std::vector<Index> all_indices(Index n) {
  std::vector<Index> S(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) S[static_cast<size_t>(i)] = i;
  return S;
}

inline FlattenCase run_flatten_case(const std::string& name, const GeneratedSet& set, const LipschitzMap& F,
                                    const FiniteMetricSpace& space, Index d, double eps, const FlattenOptions& opt) {
  FlattenCase c;
  c.name = name;
  c.set = set;
  c.space = space;
  c.F = F;
  auto t0 = std::chrono::steady_clock::now();
  auto res = flatten(space, all_indices(space.size()), F, d, eps, 0.9, default_fragments(space), opt);
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.report = std::move(res.report);
  c.sigma = std::move(res.sigma);
  return c;
}

/// Content settings coupled to the sample: delta = 2 x spacing unless given, grain = cell clipped to delta.
inline FlattenOptions coupled_options(const GeneratedSet& set, double s, double delta = 0.0) {
  FlattenOptions o;
  o.s = s;
  o.delta = delta > 0 ? delta : 2 * set.spacing;
  o.grain = std::min(set.cell, o.delta);
  return o;
}

struct FlattenSuite {
  std::map<std::string, FlattenCase> cases;
  const FlattenCase& at(const std::string& k) const { return cases.at(k); }
};

inline FlattenSuite run_flatten_suite() {
  FlattenSuite s;
  auto add = [&](FlattenCase c) { s.cases.emplace(c.name, std::move(c)); };
  {
    auto g = four_corner(5);
    auto sp = g.space();
    add(run_flatten_case("four_corner_l2", g, identity_map(sp, NormedSpace::euclidean(2)), sp, 0, 0.05,
                         coupled_options(g, 1.0, 2 * std::pow(0.25, 5))));
    auto F = kuratowski_embed(sp, max_epsilon_net(sp, 0.02));
    add(run_flatten_case("four_corner_kuratowski", g, F, sp, 0, 0.05, coupled_options(g, 1.0, 2 * std::pow(0.25, 5))));
  }
  {
    auto g = segment(201);
    auto sp = g.space();
    add(run_flatten_case("segment", g, identity_map(sp, NormedSpace::euclidean(2)), sp, 0, 0.01, coupled_options(g, 1.0)));
  }
  {
    auto g = dust(1.5, 4);
    auto sp = g.space();
    add(run_flatten_case("dust", g, identity_map(sp, NormedSpace::euclidean(2)), sp, 1, 0.05, coupled_options(g, 1.5)));
  }
  {
    auto g = circle(64);
    auto sp = g.space();
    add(run_flatten_case("circle", g, identity_map(sp, NormedSpace::euclidean(2)), sp, 1, 0.05, coupled_options(g, 1.0)));
  }
  {
    auto g = crossing_segments(21);
    auto sp = g.space();
    add(run_flatten_case("crossing", g, identity_map(sp, NormedSpace::euclidean(2)), sp, 1, 0.05, coupled_options(g, 1.0)));
  }
  return s;
}

inline Json suite_json(const FlattenSuite& s) {
  Json j;
  for (const auto& [k, c] : s.cases) j[k] = to_json(c.report);
  return j;
}

// ---------------------------------------------------------------- criteria

inline CriterionResult scalar_inequalities(const FlattenSuite& s) {
  CriterionResult r;
  ScalarAudit total;
  for (const auto& [k, c] : s.cases) total.merge(c.report.scalar_audit);
  r.pass = total.violations() == 0 && total.edges > 0;
  r.detail = std::to_string(total.edges) + " edges, " + std::to_string(total.flat_edges) + " flat, " +
             std::to_string(total.violations()) + " violations over " + std::to_string(s.cases.size()) + " runs";
  r.data = to_json(total);
  return r;
}

inline Mat random_frame(std::mt19937_64& rng, Index m, Index d) {
  Mat G(m, d);
  for (Index c = 0; c < d; ++c) G.col(c) = gaussian(rng, m);
  if (d == 0) return Mat(m, 0);
  Eigen::HouseholderQR<Mat> qr(G);
  return qr.householderQ() * Mat::Identity(m, d);
}

inline CriterionResult adapted_witnesses(Index draws = 100) {
  CriterionResult r;
  double worst_e = 0.0, worst_ratio = 0.0;
  Index bad = 0;
  Json e = Json::array(), l = Json::array();
  for (Index k = 0; k < draws; ++k) {
    auto rng = stream(301, static_cast<std::uint64_t>(k));
    Index m = 1 + static_cast<Index>(rng() % 8);
    Index d = static_cast<Index>(rng() % static_cast<std::uint64_t>(m + 1));
    auto sp = NormedSpace::euclidean(m);
    auto ab = adapted_basis(sp, random_frame(rng, m, d));
    double w = tilde_k_witness(ab, sp);
    worst_e = std::max(worst_e, w);
    if (w > 1 + 1e-9) ++bad;
    e.push_back(num(w));
  }
  for (Index k = 0; k < draws; ++k) {
    auto rng = stream(302, static_cast<std::uint64_t>(k));
    double p = k % 2 ? 1.0 : kInf;
    Index d = 1 + static_cast<Index>((k / 2) % 2);
    Index m = d + 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(8 - d));
    auto sp = NormedSpace::lp(m, p);
    auto ab = adapted_basis(sp, random_frame(rng, m, d));
    double w = tilde_k_witness(ab, sp);
    double bound = std::sqrt(static_cast<double>(d)) + 2;
    worst_ratio = std::max(worst_ratio, w / bound);
    if (w > bound) ++bad;
    l.push_back(num(w));
  }
  r.pass = bad == 0;
  r.detail = "euclidean max " + fmt(worst_e) + ", lp max witness/bound " + fmt(worst_ratio) + ", " +
             std::to_string(bad) + " failures";
  r.data = {{"euclidean", e}, {"lp", l}};
  return r;
}

inline std::vector<GeneratedSet> corpus_spaces() {
  std::vector<GeneratedSet> v;
  for (Index k = 1; k <= 4; ++k) v.push_back(four_corner(k));
  for (double s : {0.5, 1.5})
    for (Index k = 2; k <= 4; ++k) v.push_back(dust(s, k));
  for (Index n : {11, 51, 101}) v.push_back(segment(n));
  for (Index n : {16, 64, 128}) v.push_back(circle(n));
  for (Index n : {51, 101}) v.push_back(lipschitz_graph(n, 0.1, 1.0));
  for (Index n : {11, 31}) v.push_back(crossing_segments(n));
  return v;
}

inline CriterionResult kuratowski(const std::vector<GeneratedSet>& sets) {
  CriterionResult r;
  Index bad = 0, runs = 0;
  double worst_lip = 0.0, worst_slack = kInf;
  Json rows = Json::array();
  for (const auto& g : sets) {
    auto sp = g.space();
    for (double eps : {0.05, 0.1}) {
      auto F = kuratowski_embed(sp, max_epsilon_net(sp, eps));
      double slack = min_pair_slack(sp, F);
      ++runs;
      worst_lip = std::max(worst_lip, F.lip);
      worst_slack = std::min(worst_slack, slack / eps);
      if (F.lip > 1 + 1e-12 || slack < -2 * eps) ++bad;
      rows.push_back({{"kind", g.kind}, {"n", sp.size()}, {"eps", eps}, {"m", F.target.dim()}, {"lip", num(F.lip)},
                      {"slack", num(slack)}});
    }
  }
  r.pass = bad == 0 && sets.size() >= 20;
  r.detail = std::to_string(runs) + " embeddings, max Lip " + fmt(worst_lip) + ", min slack/eps " + fmt(worst_slack);
  r.data = rows;
  return r;
}

inline CriterionResult glue_bound(const FlattenSuite& s) {
  CriterionResult r;
  Index calls = 0, bad = 0;
  double worst = -kInf;
  for (const auto& [k, c] : s.cases) {
    calls += c.report.glue_calls;
    bad += c.report.glue_violations;
    worst = std::max(worst, c.report.worst_glue_excess);
  }
  r.pass = calls > 0 && bad == 0 && worst <= 1e-9;
  r.detail = std::to_string(calls) + " glue calls, max (Lip - bound) " + fmt(worst);
  r.data = {{"calls", calls}, {"violations", bad}, {"worst_excess", num(worst)}};
  return r;
}

inline CriterionResult flatten_l2(const FlattenSuite& s) {
  CriterionResult r;
  const auto& c = s.at("four_corner_l2");
  const auto& rep = c.report;
  r.pass = rep.lip_sigma <= 1.0 && rep.sup_move < 0.05 && rep.content_ratio <= 0.5 && c.seconds < 60;
  r.detail = "Lip " + fmt(rep.lip_sigma) + ", sup_move " + fmt(rep.sup_move) + ", ratio " + fmt(rep.content_ratio) +
             ", theta " + fmt(rep.theta) + ", " + fmt(c.seconds) + " s";
  r.data = to_json(rep);
  return r;
}

inline CriterionResult flatten_kuratowski(const FlattenSuite& s) {
  CriterionResult r;
  const auto& rep = s.at("four_corner_kuratowski").report;
  r.pass = rep.distortion.max < 0.1 && rep.lip_sigma <= 1.05 && rep.content_ratio <= 0.5;
  r.detail = "distortion " + fmt(rep.distortion.max) + ", Lip " + fmt(rep.lip_sigma) + ", ratio " +
             fmt(rep.content_ratio) + ", status " + rep.status;
  r.data = to_json(rep);
  return r;
}

/// Seeded near-identity planar maps of the segment: smooth bump, then rescale to Lip 1 about the box centre.
inline LipschitzMap segment_candidate(const FiniteMetricSpace& sp, const Mat& pts, std::uint64_t seed) {
  auto rng = stream(801, seed);
  Index n = pts.rows();
  double a = uniform(rng, 0.0005, 0.002), b = uniform(rng, 0.0005, 0.002);
  double f1 = uniform(rng, 0.1, 0.6), f2 = uniform(rng, 0.1, 0.6);
  double p1 = uniform(rng, 0, 6.283185307179586), p2 = uniform(rng, 0, 6.283185307179586);
  Mat v = pts;
  for (Index i = 0; i < n; ++i) {
    double t = pts(i, 0);
    v(i, 0) += a * std::sin(6.283185307179586 * f1 * t + p1);
    v(i, 1) += b * std::sin(6.283185307179586 * f2 * t + p2);
  }
  auto target = NormedSpace::euclidean(2);
  auto g = make_map(sp, target, v);
  if (g.lip > 1) {
    Vec c = box_centre(g.values);
    Mat w = (g.values.rowwise() - c.transpose()) * ((1 - 1e-12) / g.lip);
    w.rowwise() += c.transpose();
    g = make_map(sp, target, w);
  }
  return g;
}

inline CriterionResult rectifiable_converse(const FlattenSuite& s, Index candidates = 50) {
  CriterionResult r;
  const auto& fc = s.at("segment");
  const auto& sp = fc.space;
  const Mat& pts = fc.set.points;
  double delta = 2 * fc.set.spacing;
  double grain = fc.set.cell;
  std::vector<LipschitzMap> maps;
  for (Index k = 0; k < candidates - 1; ++k) maps.push_back(segment_candidate(sp, pts, static_cast<std::uint64_t>(k)));
  maps.push_back(fc.sigma);
  Index bad = 0, invalid = 0;
  double worst = kInf, worst_lb = kInf;
  Json rows = Json::array();
  Mat E = pts.leftCols(1);
  RectOptions ro;
  ro.centre = Vec::Constant(1, 0.5);
  ro.radius = 0.5;
  for (const auto& m : maps) {
    double move = 0.0;
    for (Index i = 0; i < m.size(); ++i) move = std::max(move, (m.at(i) - fc.F.at(i)).norm());
    if (!(move < 0.01 && m.lip <= 1.0)) ++invalid;
    auto est = greedy_content(m.values, m.target, 1.0, delta, grain);
    auto rb = rect_lower_bound(E, m, 1.0, 2 * move, ro);
    worst = std::min(worst, est.value);
    worst_lb = std::min(worst_lb, est.lower_bound);
    if (est.value < 0.2 || est.lower_bound < 0.2 || !rb.passes) ++bad;
    rows.push_back({{"sup_move", num(move)}, {"lip", num(m.lip)}, {"content", num(est.value)},
                    {"lower_bound", num(est.lower_bound)}, {"rect_threshold", num(rb.threshold)}});
  }
  bool flatten_failed = fc.report.status == "failure";
  r.pass = bad == 0 && invalid == 0 && flatten_failed;
  r.detail = std::to_string(maps.size()) + " maps, min content " + fmt(worst) + ", min packing bound " + fmt(worst_lb) +
             ", flatten status " + fc.report.status;
  r.data = {{"maps", rows}, {"flatten", to_json(fc.report)}};
  return r;
}

inline CriterionResult degree_suite(Index perturbations = 100) {
  CriterionResult r;
  Index bad = 0;
  Json rows = Json::array();
  auto run = [&](const GridMap& g) {
    auto c = degree_coverage(g, 0.1, 0.85);
    if (!c.covered || g.boundary_disp >= 0.1) ++bad;
    rows.push_back({{"disp", num(g.boundary_disp)}, {"fraction", num(c.covered_fraction)}});
  };
  run(GridMap::sample(64, [](const Vec& x) { return x; }));
  for (Index k = 0; k < perturbations; ++k) {
    auto rng = stream(901, static_cast<std::uint64_t>(k));
    double amp = uniform(rng, 0.02, 0.095);
    run(GridMap::sample(64, smooth_perturbation(static_cast<std::uint64_t>(k), amp)));
  }
  bool rejected = false;
  try {
    degree_coverage(GridMap::sample(64, [](const Vec&) { return Vec(Vec::Zero(2)); }), 0.1);
  } catch (const PreconditionError&) {
    rejected = true;
  }
  r.pass = bad == 0 && rejected;
  r.detail = std::to_string(perturbations + 1) + " maps, " + std::to_string(bad) + " uncovered, constant map " +
             (rejected ? "rejected" : "accepted");
  r.data = {{"maps", rows}, {"constant_rejected", rejected}};
  return r;
}

inline CriterionResult measure_reduction(const FlattenSuite& s) {
  CriterionResult r;
  Index bad = 0;
  Json rows;
  for (const auto& [k, c] : s.cases) {
    const auto& rep = c.report;
    double scale = std::pow(rep.eps_hat, rep.s - static_cast<double>(rep.d)) * rep.C_hat;
    bool holds = rep.content_after.value <= scale * rep.content_before.value * (1 + 1e-12) + 1e-300;
    bool capped = rep.s > 2 || rep.C_hat <= rep.C_cap;
    if (!holds || !capped || !rep.measure_reduction_ok) ++bad;
    rows[k] = {{"eps_hat", num(rep.eps_hat)}, {"C_hat", num(rep.C_hat)}, {"cap", num(rep.C_cap)}, {"scale", num(scale)}};
  }
  r.pass = bad == 0;
  std::string worst;
  for (const auto& [k, c] : s.cases) worst += k + " " + fmt(c.report.C_hat) + "/" + fmt(c.report.C_cap) + "; ";
  r.detail = worst.empty() ? "no runs" : worst.substr(0, worst.size() - 2);
  r.data = rows;
  return r;
}

inline CriterionResult fractional(const FlattenSuite& s) {
  CriterionResult r;
  const auto& rep = s.at("dust").report;
  r.pass = rep.content_ratio <= 0.7;
  r.detail = "ratio " + fmt(rep.content_ratio) + ", status " + rep.status + (rep.reason.empty() ? "" : " (" + rep.reason + ")");
  r.data = to_json(rep);
  return r;
}

/// Criteria 2 to 11 in order.
inline std::vector<CriterionResult> run_library_criteria() {
  std::vector<CriterionResult> out;
  FlattenSuite suite;
  auto t0 = std::chrono::steady_clock::now();
  std::string suite_error;
  try {
    suite = run_flatten_suite();
  } catch (const std::exception& e) {
    suite_error = e.what();
  }
  double suite_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto needs_suite = [&](int id, std::string name, std::function<CriterionResult(const FlattenSuite&)> fn) {
    if (!suite_error.empty()) {
      CriterionResult r;
      r.id = id;
      r.name = std::move(name);
      r.detail = "flatten suite failed: " + suite_error;
      return r;
    }
    auto r = timed(id, std::move(name), [&] { return fn(suite); });
    return r;
  };
  out.push_back(needs_suite(2, "scalar perturbation inequalities", scalar_inequalities));
  out.push_back(timed(3, "adapted basis witnesses", [] { return adapted_witnesses(); }));
  out.push_back(timed(4, "Kuratowski embedding", [] { return kuratowski(corpus_spaces()); }));
  out.push_back(needs_suite(5, "gluing bound", glue_bound));
  out.push_back(needs_suite(6, "flattening into l2", flatten_l2));
  out.push_back(needs_suite(7, "metric distortion variant", flatten_kuratowski));
  out.push_back(needs_suite(8, "rectifiable converse", [](const FlattenSuite& s) { return rectifiable_converse(s); }));
  out.push_back(timed(9, "degree coverage", [] { return degree_suite(); }));
  out.push_back(needs_suite(10, "measure reduction bookkeeping", measure_reduction));
  out.push_back(needs_suite(11, "fractional dimension run", fractional));
  out.front().seconds += suite_seconds;
  return out;
}

inline Json results_json(const std::vector<CriterionResult>& rs) {
  Json j = Json::array();
  for (const auto& r : rs) j.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"data", r.data}});
  return j;
}

/// Runs `once` twice and compares the serialised payloads.
inline CriterionResult determinism(const std::vector<CriterionResult>& first,
                                   const std::function<std::vector<CriterionResult>()>& once) {
  CriterionResult r;
  auto second = once();
  std::string a = results_json(first).dump(), b = results_json(second).dump();
  r.pass = a == b;
  std::vector<int> differ;
  for (size_t i = 0; i < std::min(first.size(), second.size()); ++i)
    if (results_json({first[i]}).dump() != results_json({second[i]}).dump()) differ.push_back(first[i].id);
  r.detail = r.pass ? std::to_string(a.size()) + " bytes identical" : "differs in " + std::to_string(differ.size()) + " criteria";
  for (int d : differ) r.detail += " " + std::to_string(d);
  r.data = {{"bytes", a.size()}};
  return r;
}

inline std::string line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.pass ? "PASS" : "FAIL") << " " << r.id << " " << r.name << ": " << r.detail;
  return os.str();
}

}  // namespace lipflat::verify
