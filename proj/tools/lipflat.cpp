// lipflat command-line runner: gen, embed, content, tangent, flatten, converse, verify.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lipflat/lipflat.hpp"
#include "lipflat/verify.hpp"

using namespace lipflat;
namespace fs = std::filesystem;

namespace {

struct LoadedSet {
  FiniteMetricSpace space;
  Json meta;  // sidecar metadata, null when absent
  std::string path;
};

LoadedSet load_set(const std::string& path) {
  require(fs::exists(path), "set: file '" + path + "' does not exist");
  LoadedSet s;
  s.path = path;
  s.space = read_space_csv(path);
  if (fs::exists(path + ".json")) s.meta = read_json(path + ".json");
  return s;
}

double meta_value(const Json& meta, const std::string& key, double fallback) {
  if (meta.is_object() && meta.contains(key)) return num_from(meta[key]);
  return fallback;
}

/// F from a CSV of image rows (y1..ym) or the coordinate identity.
LipschitzMap load_map(const LoadedSet& set, const std::string& map_path, const std::string& target) {
  if (map_path.empty()) {
    require(set.space.has_coords(), "map: a distance-matrix set needs an explicit --map");
    return make_map(set.space, parse_norm(target, set.space.coords().cols()), set.space.coords());
  }
  require(fs::exists(map_path), "map: file '" + map_path + "' does not exist");
  auto t = read_csv(map_path);
  require(t.data.rows() == set.space.size(), "map: row count differs from the set size");
  return make_map(set.space, parse_norm(target, t.data.cols()), t.data);
}

/// all | range:a:b | ball:x1,...,xk,r
std::vector<Index> parse_subset(const std::string& text, const FiniteMetricSpace& space) {
  std::vector<Index> S;
  if (text == "all") {
    for (Index i = 0; i < space.size(); ++i) S.push_back(i);
    return S;
  }
  if (text.rfind("range:", 0) == 0) {
    auto rest = text.substr(6);
    auto colon = rest.find(':');
    require(colon != std::string::npos, "subset: expected range:a:b");
    Index a = std::stol(rest.substr(0, colon)), b = std::stol(rest.substr(colon + 1));
    require(0 <= a && a <= b && b <= space.size(), "subset: range out of bounds");
    for (Index i = a; i < b; ++i) S.push_back(i);
    return S;
  }
  if (text.rfind("ball:", 0) == 0) {
    require(space.has_coords(), "subset: ball selector needs a point cloud");
    auto cells = split_csv_line(text.substr(5));
    Index k = space.coords().cols();
    require(static_cast<Index>(cells.size()) == k + 1, "subset: ball needs k coordinates and a radius");
    Vec c(k);
    for (Index i = 0; i < k; ++i) c(i) = std::stod(cells[static_cast<size_t>(i)]);
    double r = std::stod(cells.back());
    for (Index i = 0; i < space.size(); ++i)
      if (space.coord_norm().norm(space.coords().row(i).transpose() - c) <= r) S.push_back(i);
    return S;
  }
  throw PreconditionError("subset: unknown selector '" + text + "'");
}

double default_delta(const LoadedSet& set) {
  double h = meta_value(set.meta, "spacing", set.space.min_separation());
  require(std::isfinite(h) && h > 0, "delta: cannot derive a default from a single point; pass --delta");
  return 2 * h;
}

void emit(const Json& report, const std::string& path) {
  if (path.empty() || path == "-")
    std::cout << report.dump(2) << "\n";
  else
    write_json(path, report);
}

// ---------------------------------------------------------------- subcommands

struct GenArgs {
  std::string kind;
  double depth = 3, s = 1.5, n = 0, amp = 0.1, freq = 1.0;
  std::string out;
};

int run_gen(const GenArgs& a, CLI::App& cmd) {
  std::map<std::string, double> p;
  if (cmd.count("--depth")) p["depth"] = a.depth;
  if (cmd.count("--s")) p["s"] = a.s;
  if (cmd.count("--n")) p["n"] = a.n;
  if (cmd.count("--amp")) p["amp"] = a.amp;
  if (cmd.count("--freq")) p["freq"] = a.freq;
  auto g = generate(a.kind, p);
  ensure(g.points.rows() == expected_count(g.kind, g.params), "gen: point count disagrees with the closed form");
  write_points_csv(a.out, g.points);
  Json meta = {{"version", kVersion}, {"kind", g.kind},           {"count", g.points.rows()},
               {"spacing", num(g.spacing)}, {"cell", num(g.cell)}};
  for (const auto& [k, v] : g.params) meta["params"][k] = v;
  write_json(a.out + ".json", meta);
  std::cerr << g.points.rows() << " points written to " << a.out << "\n";
  return 0;
}

struct EmbedArgs {
  std::string set, out, report;
  double eps = 0.05;
};

int run_embed(const EmbedArgs& a) {
  require(a.eps > 0, "eps: must be positive");
  auto s = load_set(a.set);
  auto net = max_epsilon_net(s.space, a.eps);
  auto F = kuratowski_embed(s.space, net);
  double slack = min_pair_slack(s.space, F);
  ensure(F.lip <= 1 + 1e-12, "embed: Lipschitz constant exceeds 1");
  ensure(slack >= -2 * a.eps, "embed: additive distortion exceeds 2 eps");
  if (!a.out.empty()) write_points_csv(a.out, F.values, "y");
  Json config = {{"set", a.set}, {"eps", a.eps}, {"out", a.out}};
  emit(make_report("embed", config, {{"net", net}, {"m", F.target.dim()}, {"lip", num(F.lip)}, {"min_pair_slack", num(slack)}}),
       a.report);
  return 0;
}

struct ContentArgs {
  std::string set, norm = "l2", method = "greedy", report;
  double s = 1.0, delta = 0.0, grain = -1.0;
};

int run_content(const ContentArgs& a) {
  auto st = load_set(a.set);
  require(st.space.has_coords(), "set: content needs a point cloud");
  const Mat& pts = st.space.coords();
  double delta = a.delta > 0 ? a.delta : default_delta(st);
  ContentEstimate est;
  double grain = a.grain >= 0 ? a.grain : std::min(meta_value(st.meta, "cell", 0.0), delta);
  if (a.method == "grid") {
    grain = 0.0;
    est = grid_content(pts, a.s, delta / std::sqrt(static_cast<double>(pts.cols())));
  } else {
    require(a.method == "greedy", "method: expected greedy or grid");
    est = greedy_content(pts, parse_norm(a.norm, pts.cols()), a.s, delta, grain);
  }
  Json config = {{"set", a.set}, {"norm", a.norm}, {"method", a.method}, {"s", a.s}, {"delta", delta}, {"grain", grain}};
  emit(make_report("content", config, to_json(est)), a.report);
  return 0;
}

struct TangentArgs {
  std::string set, map, target = "l2", report, subset = "all";
  Index d = 1, pieces = 4, knn = 4;
  double theta = 0.9;
  std::uint64_t seed = 0;
};

int run_tangent(const TangentArgs& a) {
  require(a.theta > 0 && a.theta < 1, "theta: must lie in (0, 1)");
  auto st = load_set(a.set);
  auto F = load_map(st, a.map, a.target);
  auto S = parse_subset(a.subset, st.space);
  auto frags = default_fragments(st.space, a.knn);
  auto tf = fit_tangent_field(S, F, frags, a.d, a.theta);
  auto part = partition_by_field(tf, a.theta, a.pieces, a.seed);
  Json config = {{"set", a.set}, {"map", a.map}, {"target", a.target}, {"subset", a.subset}, {"d", a.d},
                 {"theta", a.theta}, {"pieces", a.pieces}, {"knn", a.knn}, {"seed", a.seed}};
  emit(make_report("tangent", config, {{"field", to_json(tf)}, {"partition", to_json(part)}}), a.report);
  return 0;
}

struct FlattenArgs {
  std::string config, set, map, target = "l2", subset = "all", out, report;
  Index d = 0, pieces = 4;
  double eps = 0.05, theta = 0.9, s = 0.0, delta = 0.0, grain = -1.0, margin = 0.0;
  std::uint64_t seed = 0;
};

/// Keys of the run-config file mirror the long flag names; flags given on the command line win.
void apply_config(FlattenArgs& a, CLI::App& cmd) {
  if (a.config.empty()) return;
  auto j = read_json(a.config);
  require(j.is_object(), "config: top level must be an object");
  auto take = [&](const char* key, auto& field) {
    if (!j.contains(key) || cmd.count(std::string("--") + key)) return;
    try {
      using T = std::decay_t<decltype(field)>;
      if constexpr (std::is_same_v<T, double>)
        field = num_from(j[key]);
      else
        field = j[key].get<T>();
    } catch (const std::exception&) {
      throw PreconditionError(std::string("config: field '") + key + "' has the wrong type");
    }
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::vector<std::string> known = {"set", "map", "target", "subset", "out", "report", "d", "pieces",
                                                   "eps", "theta", "s", "delta", "grain", "margin", "seed"};
    require(std::find(known.begin(), known.end(), it.key()) != known.end(),
            "config: unknown field '" + it.key() + "'");
  }
  take("set", a.set);
  take("map", a.map);
  take("target", a.target);
  take("subset", a.subset);
  take("out", a.out);
  take("report", a.report);
  take("d", a.d);
  take("pieces", a.pieces);
  take("eps", a.eps);
  take("theta", a.theta);
  take("s", a.s);
  take("delta", a.delta);
  take("grain", a.grain);
  take("margin", a.margin);
  take("seed", a.seed);
}

int run_flatten(FlattenArgs a, CLI::App& cmd) {
  apply_config(a, cmd);
  require(!a.set.empty(), "set: required");
  require(a.eps > 0, "eps: must be positive");
  require(a.theta > 0 && a.theta < 1, "theta: must lie in (0, 1)");
  require(a.d >= 0, "d: must be >= 0");
  auto st = load_set(a.set);
  auto F = load_map(st, a.map, a.target);
  auto S = parse_subset(a.subset, st.space);
  FlattenOptions o;
  o.s = a.s;
  o.delta = a.delta > 0 ? a.delta : default_delta(st);
  o.grain = a.grain >= 0 ? a.grain : std::min(meta_value(st.meta, "cell", 0.0), o.delta);
  o.margin = a.margin;
  o.max_pieces = a.pieces;
  o.seed = a.seed;
  auto res = flatten(st.space, S, F, a.d, a.eps, a.theta, default_fragments(st.space), o);
  if (!a.out.empty()) write_points_csv(a.out, res.sigma.values, "y");
  Json config = {{"set", a.set},       {"map", a.map},     {"target", a.target}, {"subset", a.subset},
                 {"d", a.d},           {"eps", a.eps},     {"theta", a.theta},   {"s", o.s},
                 {"delta", o.delta},   {"grain", o.grain}, {"margin", a.margin}, {"pieces", a.pieces},
                 {"seed", a.seed},     {"out", a.out}};
  emit(make_report("flatten", config, to_json(res.report)), a.report);
  const auto& r = res.report;
  bool sound = r.scalar_audit.violations() == 0 && r.glue_violations == 0 && r.measure_reduction_ok;
  return sound ? 0 : 2;
}

struct ConverseArgs {
  std::string which;
  Index n = 201, grid = 64, candidates = 50;
  double eps = 0.01, amplitude = 0.05, radius = -1.0, window = 0.25;
  std::uint64_t seed = 0;
  std::string map, set, report;
};

int run_converse(const ConverseArgs& a) {
  if (a.which == "segment") {
    require(a.eps > 0, "eps: must be positive");
    require(a.candidates >= 1, "candidates: must be >= 1");
    auto g = segment(a.n);
    auto sp = g.space();
    auto F = identity_map(sp, NormedSpace::euclidean(2));
    auto opt = verify::coupled_options(g, 1.0);
    auto res = flatten(sp, verify::all_indices(sp.size()), F, 0, a.eps, 0.9, default_fragments(sp), opt);
    std::vector<LipschitzMap> maps;
    for (Index k = 0; k + 1 < a.candidates; ++k)
      maps.push_back(verify::segment_candidate(sp, g.points, a.seed + static_cast<std::uint64_t>(k)));
    maps.push_back(res.sigma);
    Json rows = Json::array();
    bool pass = res.report.status == "failure";
    for (const auto& m : maps) {
      double move = 0.0;
      for (Index i = 0; i < m.size(); ++i) move = std::max(move, (m.at(i) - F.at(i)).norm());
      auto est = greedy_content(m.values, m.target, 1.0, opt.delta, g.cell);
      bool ok = est.value >= 0.2 && est.lower_bound >= 0.2;
      if (move < a.eps && m.lip <= 1.0) pass = pass && ok;
      rows.push_back({{"sup_move", num(move)}, {"lip", num(m.lip)}, {"content", num(est.value)},
                      {"lower_bound", num(est.lower_bound)}, {"pass", ok}});
    }
    Json config = {{"which", a.which}, {"n", a.n}, {"eps", a.eps}, {"candidates", a.candidates}, {"seed", a.seed}};
    emit(make_report("converse", config,
                     {{"pass", pass}, {"floor", 0.2}, {"maps", rows}, {"flatten", to_json(res.report)}}),
         a.report);
    std::cerr << (pass ? "PASS" : "FAIL") << " content floor 0.2 over " << maps.size() << " maps\n";
    return pass ? 0 : 2;
  }
  if (a.which == "degree") {
    GridMap gm;
    if (!a.map.empty()) {
      require(fs::exists(a.map), "map: file '" + a.map + "' does not exist");
      auto t = read_csv(a.map);
      require(t.data.cols() == 4, "map: grid CSV needs columns x1,x2,y1,y2");
      gm = GridMap::from_samples(t.data.leftCols(2), t.data.rightCols(2));
    } else {
      gm = GridMap::sample(a.grid, smooth_perturbation(a.seed, a.amplitude));
    }
    auto c = degree_coverage(gm, a.eps, a.radius);
    Json config = {{"which", a.which}, {"grid", a.grid}, {"eps", a.eps}, {"amplitude", a.amplitude},
                   {"seed", a.seed},   {"map", a.map},   {"radius", a.radius}};
    emit(make_report("converse", config, {{"boundary_disp", num(gm.boundary_disp)}, {"coverage", to_json(c)}}), a.report);
    return c.covered ? 0 : 2;
  }
  if (a.which == "positive") {
    require(!a.set.empty(), "set: required for the positive-image run");
    auto st = load_set(a.set);
    require(st.space.has_coords(), "set: needs a point cloud");
    const Mat& A = st.space.coords();
    LipschitzMap f = a.map.empty() ? make_map(st.space, NormedSpace::euclidean(A.cols()), Mat::Zero(A.rows(), A.cols()))
                                   : load_map(st, a.map, "l2");
    auto p = positive_image_perturb(A, f, a.eps, a.window);
    Json config = {{"which", a.which}, {"set", a.set}, {"map", a.map}, {"eps", a.eps}, {"window", a.window}};
    emit(make_report("converse", config, to_json(p)), a.report);
    return p.content.value > 0 && p.lip_T < a.eps && p.sup_T < a.eps ? 0 : 2;
  }
  throw PreconditionError("converse: expected segment, degree or positive");
}

int run_verify(const std::string& report) {
  auto first = verify::run_library_criteria();
  auto det = verify::timed(12, "determinism", [&] { return verify::determinism(first, verify::run_library_criteria); });
  auto all = first;
  all.push_back(det);
  bool ok = true;
  for (const auto& r : all) {
    std::cout << verify::line(r) << "\n";
    ok = ok && r.pass;
  }
  if (!report.empty()) write_json(report, make_report("verify", Json::object(), verify::results_json(all)));
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lipschitz flattening toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  int threads_flag = 0;
  app.add_option("--threads", threads_flag, "worker cap (default: LIPFLAT_THREADS or hardware)")->check(CLI::NonNegativeNumber);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a fixture point set");
  g->add_option("kind", gen.kind, "four_corner | dust | segment | circle | lipschitz_graph | crossing_segments")->required();
  g->add_option("--depth", gen.depth);
  g->add_option("--s", gen.s);
  g->add_option("--n", gen.n);
  g->add_option("--amp", gen.amp);
  g->add_option("--freq", gen.freq);
  g->add_option("-o,--out", gen.out)->required();

  EmbedArgs emb;
  auto* e = app.add_subcommand("embed", "Kuratowski embedding over a maximal eps-net");
  e->add_option("--set", emb.set)->required();
  e->add_option("--eps", emb.eps);
  e->add_option("-o,--out", emb.out);
  e->add_option("--report", emb.report);

  ContentArgs con;
  auto* c = app.add_subcommand("content", "cover-based content estimate");
  c->add_option("--set", con.set)->required();
  c->add_option("--norm", con.norm);
  c->add_option("--method", con.method);
  c->add_option("--s", con.s);
  c->add_option("--delta", con.delta);
  c->add_option("--grain", con.grain);
  c->add_option("--report", con.report);

  TangentArgs tan;
  auto* t = app.add_subcommand("tangent", "tangent field fitting and partition");
  t->add_option("--set", tan.set)->required();
  t->add_option("--map", tan.map);
  t->add_option("--target", tan.target);
  t->add_option("--subset", tan.subset);
  t->add_option("--d", tan.d);
  t->add_option("--theta", tan.theta);
  t->add_option("--pieces", tan.pieces);
  t->add_option("--knn", tan.knn);
  t->add_option("--seed", tan.seed);
  t->add_option("--report", tan.report);

  FlattenArgs fl;
  auto* f = app.add_subcommand("flatten", "flattening perturbation of a Lipschitz map");
  f->add_option("--config", fl.config, "JSON run-config; flags override its fields");
  f->add_option("--set", fl.set);
  f->add_option("--map", fl.map);
  f->add_option("--target", fl.target);
  f->add_option("--subset", fl.subset);
  f->add_option("--d", fl.d);
  f->add_option("--eps", fl.eps);
  f->add_option("--theta", fl.theta);
  f->add_option("--s", fl.s);
  f->add_option("--delta", fl.delta);
  f->add_option("--grain", fl.grain);
  f->add_option("--margin", fl.margin);
  f->add_option("--pieces", fl.pieces);
  f->add_option("--seed", fl.seed);
  f->add_option("-o,--out", fl.out);
  f->add_option("--report", fl.report);

  ConverseArgs cv;
  auto* v = app.add_subcommand("converse", "coverage and content lower bounds");
  v->add_option("which", cv.which, "segment | degree | positive")->required();
  v->add_option("--n", cv.n);
  v->add_option("--eps", cv.eps);
  v->add_option("--candidates", cv.candidates);
  v->add_option("--grid", cv.grid);
  v->add_option("--amplitude", cv.amplitude);
  v->add_option("--radius", cv.radius);
  v->add_option("--window", cv.window);
  v->add_option("--seed", cv.seed);
  v->add_option("--map", cv.map);
  v->add_option("--set", cv.set);
  v->add_option("--report", cv.report);

  std::string verify_report;
  auto* vr = app.add_subcommand("verify", "run the invariant suite");
  vr->add_option("--report", verify_report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }
  if (app.count("--threads")) set_threads(threads_flag);
  try {
    if (*g) return run_gen(gen, *g);
    if (*e) return run_embed(emb);
    if (*c) return run_content(con);
    if (*t) return run_tangent(tan);
    if (*f) return run_flatten(fl, *f);
    if (*v) return run_converse(cv);
    if (*vr) return run_verify(verify_report);
  } catch (const PreconditionError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const AssertionFailure& err) {
    std::cerr << "assertion failed: " << err.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: malformed number (" << err.what() << ")\n";
    return 1;
  } catch (const std::out_of_range& err) {
    std::cerr << "error: value out of range (" << err.what() << ")\n";
    return 1;
  }
  return 1;
}
