// Projects a point onto the convex hull of a few simplex points under KL
// and prints the Pythagorean inequality at work.

#include <cstdio>

#include "wts/projection.hpp"
#include "wts/sampling.hpp"

using namespace wts;

int main() {
  auto gen = Generator::neg_entropy_multiclass(3);
  RngStream rng = RngStream::derive(11, "demo");

  Eigen::MatrixXd pts(3, 2);
  for (int i = 0; i < 3; ++i)
    pts.row(i) = random_simplex_point(3, rng, 1e-3).p.head(2).transpose();
  ConvexHullSet hull = ConvexHullSet::of_points(pts);
  Vec z = random_simplex_point(3, rng, 1e-3).p.head(2);

  ProjectionResult pr = forward_projection(gen, hull, z);
  std::printf("projection of z=(%.4f, %.4f, %.4f):\n", z[0], z[1],
              1.0 - z.sum());
  std::printf("  point      (%.4f, %.4f, %.4f)\n", pr.point[0], pr.point[1],
              1.0 - pr.point.sum());
  std::printf("  weights    (%.4f, %.4f, %.4f)\n", pr.weights[0],
              pr.weights[1], pr.weights[2]);
  std::printf("  objective  %.6f  (converged=%d, iters=%d)\n", pr.objective,
              pr.converged ? 1 : 0, pr.iterations);

  for (int t = 0; t < 5; ++t) {
    Vec xw = random_simplex_point(3, rng).p;
    double slack = pythagorean_slack(gen, hull, z, xw);
    std::printf("  pythagorean slack for random hull point: %.3e\n", slack);
  }
  return 0;
}
