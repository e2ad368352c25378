#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "content.hpp"
#include "converse.hpp"
#include "corpus.hpp"
#include "metric.hpp"
#include "normgeom.hpp"
#include "perturb.hpp"
#include "tangent.hpp"
#include "util.hpp"

namespace lipflat {

using Json = nlohmann::json;

inline constexpr int kReportSchema = 1;

// ---------------------------------------------------------------- CSV

struct CsvTable {
  std::vector<std::string> header;
  Mat data;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Numeric CSV with a header row; blank lines and lines starting with '#' are skipped.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  CsvTable t;
  std::vector<std::vector<double>> rows;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    require(cells.size() == t.header.size(),
            path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) + " columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      double v = std::strtod(c.c_str(), &end);
      require(!c.empty() && end && *end == '\0', path + ":" + std::to_string(lineno) + ": non-numeric cell '" + c + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  require(!t.header.empty(), path + ": missing header row");
  t.data = Mat(static_cast<Index>(rows.size()), static_cast<Index>(t.header.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) t.data(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return t;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header, const Mat& data) {
  require(static_cast<Index>(header.size()) == data.cols(), "write_csv: header and column count differ");
  std::ofstream out(path);
  require(out.good(), "cannot write '" + path + "'");
  for (size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << "\n";
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) out << (j ? "," : "") << format_double(data(i, j));
    out << "\n";
  }
}

inline std::vector<std::string> coordinate_header(Index k, const std::string& prefix = "x") {
  std::vector<std::string> h;
  for (Index i = 1; i <= k; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

inline void write_points_csv(const std::string& path, const Mat& pts, const std::string& prefix = "x") {
  write_csv(path, coordinate_header(pts.cols(), prefix), pts);
}

/// Point cloud when every header cell is x1..xk, otherwise a square distance matrix.
inline FiniteMetricSpace read_space_csv(const std::string& path, const std::string& kind = "auto",
                                        const std::optional<NormedSpace>& norm = std::nullopt) {
  auto t = read_csv(path);
  bool cloud = kind == "cloud";
  if (kind == "auto") cloud = t.header == coordinate_header(static_cast<Index>(t.header.size()));
  if (cloud) {
    require(t.header == coordinate_header(static_cast<Index>(t.header.size())),
            path + ": point cloud header must be x1..xk");
    return FiniteMetricSpace::from_points(t.data, norm);
  }
  require(kind == "auto" || kind == "matrix", "unknown space kind '" + kind + "'");
  require(t.data.rows() == t.data.cols(), path + ": distance matrix must be square");
  return FiniteMetricSpace::from_matrix(t.data, t.header);
}

// ---------------------------------------------------------------- JSON

inline Json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double num_from(const Json& j) {
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::nan("");
    throw PreconditionError("expected a number, got '" + s + "'");
  }
  require(j.is_number(), "expected a number");
  return j.get<double>();
}

inline Json to_json(const Mat& M) {
  Json rows = Json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    Json r = Json::array();
    for (Index j = 0; j < M.cols(); ++j) r.push_back(num(M(i, j)));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

inline Mat mat_from_json(const Json& j) {
  require(j.is_array(), "expected a matrix as an array of rows");
  Index r = static_cast<Index>(j.size());
  Index c = r ? static_cast<Index>(j[0].size()) : 0;
  Mat M(r, c);
  for (Index i = 0; i < r; ++i) {
    require(j[static_cast<size_t>(i)].is_array() && static_cast<Index>(j[static_cast<size_t>(i)].size()) == c,
            "matrix rows must have equal length");
    for (Index k = 0; k < c; ++k) M(i, k) = num_from(j[static_cast<size_t>(i)][static_cast<size_t>(k)]);
  }
  return M;
}

/// {"p": number | "inf"} or {"general": vertex matrix}; "dim" is carried alongside.
inline Json to_json(const NormedSpace& s) {
  Json j;
  j["dim"] = s.dim();
  if (s.is_lp())
    j["p"] = num(s.p());
  else
    j["general"] = to_json(Mat(s.vertices().transpose()));  // one vertex per row
  return j;
}

inline NormedSpace norm_from_json(const Json& j, Index dim = 0) {
  require(j.is_object(), "norm descriptor must be an object");
  if (j.contains("general")) {
    Mat V = mat_from_json(j["general"]);
    // rows of the JSON matrix are vertices
    return NormedSpace::polytope(V.transpose());
  }
  require(j.contains("p"), "norm descriptor needs 'p' or 'general'");
  Index m = j.contains("dim") ? j["dim"].get<Index>() : dim;
  require(m >= 1, "norm descriptor needs a dimension");
  return NormedSpace::lp(m, num_from(j["p"]));
}

/// l1 | l2 | linf | lp:<p>
inline NormedSpace parse_norm(const std::string& name, Index dim) {
  if (name == "l1") return NormedSpace::lp(dim, 1.0);
  if (name == "l2") return NormedSpace::euclidean(dim);
  if (name == "linf") return NormedSpace::linf(dim);
  if (name.rfind("lp:", 0) == 0) return NormedSpace::lp(dim, std::stod(name.substr(3)));
  throw PreconditionError("unknown norm '" + name + "' (expected l1, l2, linf or lp:<p>)");
}

inline Json to_json(const AdaptedBasis& ab) {
  return {{"d", ab.d},
          {"frame", to_json(ab.frame)},
          {"basis", to_json(ab.basis)},
          {"functionals", to_json(ab.functionals)},
          {"P", to_json(ab.P)},
          {"Q", to_json(ab.Q)},
          {"constants", {{"K_p", num(ab.K_p)}, {"K_d", num(ab.K_d)}, {"K_u", num(ab.K_u)}, {"tildeK", num(ab.tildeK)}}}};
}

inline Json to_json(const FiniteMetricSpace& s) {
  Json j;
  j["size"] = s.size();
  if (s.has_coords()) {
    j["kind"] = "cloud";
    j["points"] = to_json(s.coords());
    j["norm"] = to_json(s.coord_norm());
  } else {
    j["kind"] = "matrix";
    j["distances"] = to_json(s.distances());
    j["labels"] = s.labels();
  }
  return j;
}

inline Json to_json(const ContentEstimate& e, bool with_cover = true) {
  Json j = {{"s", num(e.s)},         {"delta", num(e.delta)},   {"grain", num(e.grain)},
            {"value", num(e.value)}, {"lower_bound", num(e.lower_bound)}, {"packing_count", e.packing_count},
            {"method", e.method},    {"elements", e.cover.size()}};
  if (with_cover) {
    Json cover = Json::array();
    for (const auto& el : e.cover)
      cover.push_back({{"center_index", el.center_index},
                       {"center", vec_json(el.center)},
                       {"radius", num(el.radius)},
                       {"diameter", num(el.diameter)},
                       {"members", el.members}});
    j["cover"] = std::move(cover);
  }
  return j;
}

inline Json to_json(const TangentField& tf) {
  Json frames = Json::array();
  for (const auto& W : tf.frames) frames.push_back(to_json(W));
  Json viol = Json::array();
  for (double v : tf.violation) viol.push_back(num(v));
  return {{"d", tf.d},          {"theta", num(tf.theta)}, {"points", tf.points},
          {"frames", frames},   {"violation", viol},      {"total_violation", num(tf.total_violation)}};
}

inline Json to_json(const Partition& p) {
  Json pieces = Json::array();
  for (const auto& pc : p.pieces)
    pieces.push_back({{"indices", pc.indices}, {"frame", to_json(pc.frame)}, {"violation", num(pc.violation)}});
  return {{"pieces", pieces}, {"unassigned", p.unassigned}};
}

inline Json to_json(const ScalarAudit& a) {
  return {{"edges", a.edges},
          {"flat_edges", a.flat_edges},
          {"global_violations", a.global_violations},
          {"flat_violations", a.flat_violations},
          {"pointwise_violations", a.pointwise_violations},
          {"worst_global_ratio", num(a.worst_global_ratio)},
          {"worst_flat_ratio", num(a.worst_flat_ratio)}};
}

inline Json to_json(const DistortionReport& d) {
  return {{"max", num(d.max)}, {"bin_width", num(d.bin_width)}, {"histogram", d.histogram}};
}

inline Json to_json(const PerturbationReport& r) {
  Json attempts = Json::array();
  for (const auto& a : r.attempts)
    attempts.push_back({{"theta", num(a.theta)},
                        {"margin", num(a.margin)},
                        {"sup_move", num(a.sup_move)},
                        {"lip", num(a.lip)},
                        {"glued_lip", num(a.glued_lip)},
                        {"glued_move", num(a.glued_move)},
                        {"admissible", a.admissible}});
  return {{"status", r.status},
          {"reason", r.reason},
          {"d", r.d},
          {"theta", num(r.theta)},
          {"delta", num(r.delta)},
          {"eps", num(r.eps)},
          {"margin", num(r.margin)},
          {"s", num(r.s)},
          {"lip_F", num(r.lip_F)},
          {"lip_sigma", num(r.lip_sigma)},
          {"budget", num(r.budget)},
          {"tildeK", num(r.tildeK)},
          {"K_d", num(r.K_d)},
          {"sup_move", num(r.sup_move)},
          {"content_before", to_json(r.content_before, false)},
          {"content_after", to_json(r.content_after, false)},
          {"content_ratio", num(r.content_ratio)},
          {"flat_radius", num(r.flat_radius)},
          {"flat_slack", num(r.flat_slack)},
          {"C_V", num(r.C_V)},
          {"measure_reduction",
           {{"eps_hat", num(r.eps_hat)},
            {"C_hat", num(r.C_hat)},
            {"C_cap", num(r.C_cap)},
            {"scale", num(std::pow(r.eps_hat, r.s - static_cast<double>(r.d)) * r.C_hat)},
            {"ok", r.measure_reduction_ok}}},
          {"distortion", to_json(r.distortion)},
          {"scalar_audit", to_json(r.scalar_audit)},
          {"glue", {{"calls", r.glue_calls}, {"violations", r.glue_violations}, {"worst_excess", num(r.worst_glue_excess)}}},
          {"partition",
           {{"pieces", r.pieces},
            {"unassigned", r.unassigned},
            {"discarded", r.discarded},
            {"failure", r.partition_failure},
            {"rho0", num(r.rho0)},
            {"tangent_violation", num(r.tangent_violation)}}},
          {"identity_fallback", r.identity_fallback},
          {"attempts", attempts}};
}

inline Json to_json(const Coverage& c) {
  return {{"covered", c.covered},       {"covered_fraction", num(c.covered_fraction)},
          {"target_radius", num(c.target_radius)}, {"targets", c.targets},
          {"uncovered", c.uncovered},   {"near_radius", num(c.near_radius)}};
}

inline Json to_json(const RectBound& r) {
  return {{"content", to_json(r.content, false)}, {"threshold", num(r.threshold)}, {"density", num(r.density)},
          {"slack_factor", num(r.slack_factor)}, {"passes", r.passes}};
}

inline Json to_json(const PositiveImage& p) {
  return {{"density_point", p.density_point},        {"derivative", to_json(p.derivative)},
          {"correction", to_json(p.correction)},     {"correction_norm", num(p.correction_norm)},
          {"lip_T", num(p.lip_T)},                   {"sup_T", num(p.sup_T)},
          {"min_singular", num(p.min_singular)},     {"content", to_json(p.content, false)}};
}

/// Wraps a payload with the version string, schema number, command and config.
inline Json make_report(const std::string& command, const Json& config, Json result) {
  return {{"version", kVersion}, {"schema", kReportSchema}, {"command", command}, {"config", config},
          {"result", std::move(result)}};
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  require(out.good(), "cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw PreconditionError(path + ": " + e.what());
  }
}

}  // namespace lipflat
