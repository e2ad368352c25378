#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "lipflat/corpus.hpp"
#include "lipflat/io.hpp"

using namespace lipflat;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "lipflat_io_test";
  fs::create_directories(dir);
  return (dir / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

}  // namespace

TEST(Csv, PointRoundTrip) {
  auto g = dust(1.5, 3);
  auto path = scratch("pts.csv");
  write_points_csv(path, g.points);
  auto t = read_csv(path);
  EXPECT_EQ(t.header, coordinate_header(2));
  EXPECT_EQ(t.data, g.points);
  auto sp = read_space_csv(path);
  EXPECT_TRUE(sp.has_coords());
  EXPECT_EQ(sp.size(), 64);
}

TEST(Csv, MatrixSpace) {
  auto path = scratch("dist.csv");
  write_text(path, "a,b,c\n0,1,2\n1,0,1\n2,1,0\n");
  auto sp = read_space_csv(path);
  EXPECT_FALSE(sp.has_coords());
  EXPECT_EQ(sp.labels(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_DOUBLE_EQ(sp.dist(0, 2), 2.0);
  EXPECT_EQ(to_json(sp)["kind"], "matrix");
}

TEST(Csv, ErrorsNameTheLine) {
  auto path = scratch("bad.csv");
  write_text(path, "x1,x2\n0,1\n0,oops\n");
  try {
    read_csv(path);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.csv:3"), std::string::npos) << e.what();
  }
  write_text(path, "x1,x2\n0,1,2\n");
  EXPECT_THROW(read_csv(path), PreconditionError);
  EXPECT_THROW(read_csv(scratch("absent.csv")), PreconditionError);
  write_text(path, "a,b\n0,1\n1,0\n2,2\n");
  EXPECT_THROW(read_space_csv(path, "matrix"), PreconditionError);
}

TEST(Json, NormDescriptors) {
  for (double p : {1.0, 2.0, 3.5, kInf}) {
    auto X = NormedSpace::lp(3, p);
    auto Y = norm_from_json(to_json(X));
    EXPECT_EQ(Y.dim(), 3);
    EXPECT_EQ(Y.p(), p);
  }
  Mat V(2, 3);
  V << 1, 0, 1, 0, 1, 1;
  auto P = NormedSpace::polytope(V);
  auto Q = norm_from_json(to_json(P));
  Eigen::Vector2d v(0.3, -0.7);
  EXPECT_NEAR(P.norm(v), Q.norm(v), 1e-15);
  EXPECT_EQ(parse_norm("linf", 2).p(), kInf);
  EXPECT_EQ(parse_norm("lp:3", 2).p(), 3.0);
  EXPECT_THROW(parse_norm("l7", 2), PreconditionError);
  EXPECT_THROW(norm_from_json(Json::object()), PreconditionError);
}

TEST(Json, NumbersAndMatrices) {
  EXPECT_EQ(num(kInf), "inf");
  EXPECT_EQ(num_from(num(-kInf)), -kInf);
  EXPECT_THROW(num_from(Json("x")), PreconditionError);
  Mat M(2, 2);
  M << 1, 2.5, -3, kInf;
  EXPECT_EQ(mat_from_json(to_json(M)), M);
}

TEST(Json, ReportEnvelope) {
  auto rep = make_report("gen", {{"kind", "segment"}}, {{"count", 3}});
  EXPECT_EQ(rep["command"], "gen");
  EXPECT_TRUE(rep.contains("version"));
  EXPECT_EQ(rep["schema"], kReportSchema);
  auto path = scratch("r.json");
  write_json(path, rep);
  EXPECT_EQ(read_json(path), rep);
}
