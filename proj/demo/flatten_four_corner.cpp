// Flatten the identity on a depth-5 four-corner set and print the content collapse.

#include <cmath>
#include <cstdio>

#include "lipflat/lipflat.hpp"

int main() {
  using namespace lipflat;
  auto set = four_corner(5);
  auto space = set.space();
  auto F = identity_map(space, NormedSpace::euclidean(2));

  std::vector<Index> S;
  for (Index i = 0; i < space.size(); ++i) S.push_back(i);

  FlattenOptions opt;
  opt.s = 1.0;
  opt.delta = 2 * std::pow(0.25, 5);
  opt.grain = set.cell;
  auto res = flatten(space, S, F, 0, 0.05, 0.9, default_fragments(space), opt);
  const auto& r = res.report;

  std::printf("points          %ld\n", static_cast<long>(space.size()));
  std::printf("status          %s\n", r.status.c_str());
  std::printf("theta used      %.4f\n", r.theta);
  std::printf("Lip sigma       %.6f\n", r.lip_sigma);
  std::printf("sup move        %.6f\n", r.sup_move);
  std::printf("content before  %.6f\n", r.content_before.value);
  std::printf("content after   %.6f\n", r.content_after.value);
  std::printf("ratio           %.4f\n", r.content_ratio);
  return 0;
}
