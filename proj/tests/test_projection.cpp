#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"
#include "wts/projection.hpp"

using namespace wts;
using wts::testutil::random_simplex_point;

namespace {

Vec v1(double a) {
  Vec v(1);
  v[0] = a;
  return v;
}

// Independent oracle: exhaustive sweep of the weight simplex.  For m = 3 a
// coarse full sweep is refined locally, which is sound because the objective
// is convex in the weights.
double grid_oracle_objective(const Generator& gen, const ConvexHullSet& hull,
                             const Vec& z, double resolution = 1e-4) {
  const int m = hull.size();
  REQUIRE(m <= 3);
  auto eval = [&](const Vec& w) {
    Vec y = hull.points.transpose() * w;
    if (!gen.in_open_domain(y)) return kInf;
    return gen.divergence(y, z);
  };
  if (m == 1) return eval(Vec::Ones(1));
  if (m == 2) {
    double best = kInf;
    long steps = std::lround(1.0 / resolution);
    for (long i = 0; i <= steps; ++i) {
      Vec w(2);
      w << i * resolution, 1.0 - i * resolution;
      best = std::min(best, eval(w));
    }
    return best;
  }
  // m == 3: coarse sweep then local fine sweep around the coarse argmin
  double coarse = 1.0 / 200;
  double best = kInf;
  Vec best_w(3);
  for (long i = 0; i <= 200; ++i) {
    for (long j = 0; i + j <= 200; ++j) {
      Vec w(3);
      w << i * coarse, j * coarse, 1.0 - (i + j) * coarse;
      double v = eval(w);
      if (v < best) {
        best = v;
        best_w = w;
      }
    }
  }
  long rad = std::lround(2.0 * coarse / resolution);
  long ci = std::lround(best_w[0] / resolution);
  long cj = std::lround(best_w[1] / resolution);
  long total = std::lround(1.0 / resolution);
  for (long i = std::max(0L, ci - rad); i <= std::min(total, ci + rad); ++i) {
    for (long j = std::max(0L, cj - rad);
         j <= std::min(total - i, cj + rad); ++j) {
      Vec w(3);
      w << i * resolution, j * resolution, 1.0 - (i + j) * resolution;
      best = std::min(best, eval(w));
    }
  }
  return best;
}

ConvexHullSet random_hull_in_simplex(int m, int c, RngStream& rng) {
  Eigen::MatrixXd pts(m, c - 1);
  for (int i = 0; i < m; ++i)
    pts.row(i) = random_simplex_point(c, rng, 1e-3).truncated().transpose();
  return ConvexHullSet::of_points(std::move(pts));
}

Vec random_weights(int m, RngStream& rng) {
  Vec w(m);
  for (int i = 0; i < m; ++i) w[i] = -std::log(rng.next_uniform());
  return w / w.sum();
}

}  // namespace

TEST_CASE("projection of a point inside the hull is the point itself") {
  RngStream rng = RngStream::derive(31, "inside");
  auto gen = Generator::neg_entropy_multiclass(3);
  ConvexHullSet hull = random_hull_in_simplex(4, 3, rng);
  Vec w = random_weights(4, rng);
  Vec z = hull.points.transpose() * w;
  ProjectionResult res = forward_projection(gen, hull, z);
  CHECK(res.objective <= 1e-8);
  CHECK((res.point - z).norm() <= 1e-4);
}

TEST_CASE("singleton hull returns its generator") {
  auto gen = Generator::l2(2);
  Eigen::MatrixXd pts(1, 2);
  pts << 0.3, -0.7;
  ConvexHullSet hull = ConvexHullSet::of_points(pts);
  Vec z(2);
  z << 5.0, 5.0;
  ProjectionResult res = forward_projection(gen, hull, z);
  CHECK((res.point - pts.row(0).transpose()).norm() == 0.0);
  CHECK(res.weights[0] == 1.0);
}

TEST_CASE("worked KL projection onto a segment") {
  auto gen = Generator::neg_entropy_multiclass(2);
  Eigen::MatrixXd pts(2, 1);
  pts << 0.1, 0.5;  // truncated points of (0.1,0.9) and (0.5,0.5)
  ConvexHullSet hull = ConvexHullSet::of_points(pts);
  Vec z = v1(0.9);
  ProjectionResult res = forward_projection(gen, hull, z);
  CHECK(res.point[0] == Catch::Approx(0.5).margin(1e-4));
  CHECK(res.objective == Catch::Approx(0.5108).margin(1e-4));
  double oracle = grid_oracle_objective(gen, hull, z, 1e-5);
  CHECK(std::abs(res.objective - oracle) <= 1e-6);
}

TEST_CASE("projection matches the grid oracle for small hulls") {
  RngStream rng = RngStream::derive(32, "grid");
  for (int trial = 0; trial < 6; ++trial) {
    int m = 2 + (trial % 2);
    SECTION("kl hull " + std::to_string(trial)) {
      auto gen = Generator::neg_entropy_multiclass(3);
      ConvexHullSet hull = random_hull_in_simplex(m, 3, rng);
      Vec z = random_simplex_point(3, rng, 1e-3).truncated();
      ProjectionResult res = forward_projection(gen, hull, z);
      double oracle = grid_oracle_objective(gen, hull, z);
      CHECK(res.objective <= oracle + 1e-6);
      CHECK(res.objective >= oracle - 1e-6);
    }
  }
  for (int trial = 0; trial < 4; ++trial) {
    int m = 2 + (trial % 2);
    SECTION("l2 hull " + std::to_string(trial)) {
      auto gen = Generator::l2(2);
      Eigen::MatrixXd pts(m, 2);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < 2; ++j) pts(i, j) = rng.next_uniform(-2.0, 2.0);
      ConvexHullSet hull = ConvexHullSet::of_points(pts);
      Vec z(2);
      z << rng.next_uniform(-2.0, 2.0), rng.next_uniform(-2.0, 2.0);
      ProjectionResult res = forward_projection(gen, hull, z);
      double oracle = grid_oracle_objective(gen, hull, z);
      CHECK(std::abs(res.objective - oracle) <= 1e-6);
    }
  }
}

TEST_CASE("pythagorean slack is nonnegative up to tolerance") {
  RngStream rng = RngStream::derive(33, "pyth");
  auto kl_gen = Generator::neg_entropy_multiclass(3);
  auto l2_gen = Generator::l2(2);
  for (int t = 0; t < 200; ++t) {
    int m = 2 + static_cast<int>(rng.next_index(4));
    ConvexHullSet hull = random_hull_in_simplex(m, 3, rng);
    Vec z = random_simplex_point(3, rng, 1e-3).truncated();
    Vec xw = random_weights(m, rng);
    REQUIRE(pythagorean_slack(kl_gen, hull, z, xw) >= -1e-6);

    Eigen::MatrixXd pts(m, 2);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < 2; ++j) pts(i, j) = rng.next_uniform(-2.0, 2.0);
    ConvexHullSet l2hull = ConvexHullSet::of_points(pts);
    Vec z2(2);
    z2 << rng.next_uniform(-2.0, 2.0), rng.next_uniform(-2.0, 2.0);
    REQUIRE(pythagorean_slack(l2_gen, l2hull, z2, random_weights(m, rng)) >=
            -1e-6);
  }
  // x = P(z) gives zero slack; z inside the hull likewise
  ConvexHullSet hull = random_hull_in_simplex(3, 3, rng);
  Vec w_in = random_weights(3, rng);
  Vec z_in = hull.points.transpose() * w_in;
  CHECK(std::abs(pythagorean_slack(kl_gen, hull, z_in, w_in)) <= 1e-6);
  Vec z_out = random_simplex_point(3, rng, 1e-3).truncated();
  ProjectionResult pr = forward_projection(kl_gen, hull, z_out);
  CHECK(std::abs(pythagorean_slack(kl_gen, hull, z_out, pr.weights)) <= 1e-6);
}

TEST_CASE("functional hull projection equals block-point projection") {
  RngStream rng = RngStream::derive(34, "functional");
  auto gen = Generator::neg_entropy_multiclass(3);
  const int m = 3, blocks = 4;
  Eigen::MatrixXd tables(m, blocks * 2);
  for (int i = 0; i < m; ++i)
    for (int b = 0; b < blocks; ++b)
      tables.block(i, 2 * b, 1, 2) =
          random_simplex_point(3, rng, 1e-3).truncated().transpose();
  Vec px = random_weights(blocks, rng);
  ConvexHullSet fhull = ConvexHullSet::of_functions(tables, px);
  Vec z(blocks * 2);
  for (int b = 0; b < blocks; ++b)
    z.segment(2 * b, 2) = random_simplex_point(3, rng, 1e-3).truncated();

  ProjectionResult fres = forward_projection(gen, fhull, z);

  // the oracle side: concatenated block point under the weighted separable
  // divergence, evaluated directly over the weight simplex at 1e-4
  auto weighted_obj = [&](const Vec& w) {
    Vec y = tables.transpose() * w;
    double s = 0.0;
    for (int b = 0; b < blocks; ++b)
      s += px[b] * gen.divergence(y.segment(2 * b, 2), z.segment(2 * b, 2));
    return s;
  };
  double best = kInf;
  for (long i = 0; i <= 200; ++i)
    for (long j = 0; i + j <= 200; ++j) {
      Vec w(3);
      w << i / 200.0, j / 200.0, 1.0 - (i + j) / 200.0;
      best = std::min(best, weighted_obj(w));
    }
  best = std::min(best, weighted_obj(fres.weights));
  CHECK(fres.objective <= best + 1e-8);
  CHECK(std::abs(weighted_obj(fres.weights) - fres.objective) <= 1e-12);
}

TEST_CASE("jensen gap estimate") {
  auto gen = Generator::neg_entropy_multiclass(3);
  RngStream rng = RngStream::derive(35, "jensen");

  SECTION("point mass has zero gap") {
    Eigen::MatrixXd atoms(1, 2);
    atoms << 0.3, 0.4;
    JensenGapReport rep = jensen_gap_estimate(gen, atoms, Vec::Ones(1), 5, 100,
                                              RngStream::derive(35, "pm"));
    CHECK(rep.estimate == 0.0);
    CHECK(rep.stderr_est == 0.0);
  }

  SECTION("estimate shrinks with k and stays below the bound") {
    Eigen::MatrixXd atoms(2, 2);
    atoms << 0.1, 0.1, 0.7, 0.2;
    Vec probs(2);
    probs << 0.5, 0.5;
    JensenGapReport r1 = jensen_gap_estimate(gen, atoms, probs, 1, 20000,
                                             RngStream::derive(35, "k1"));
    JensenGapReport r400 = jensen_gap_estimate(gen, atoms, probs, 400, 20000,
                                               RngStream::derive(35, "k400"));
    CHECK(r1.estimate >= -3.0 * r1.stderr_est);
    CHECK(r400.estimate >= -3.0 * r400.stderr_est);
    CHECK(r400.estimate <=
          r1.estimate + 3.0 * (r1.stderr_est + r400.stderr_est));

    // a-vector: coordinate suprema of 1/p over the atoms (with implicit class)
    Vec a(3);
    a << 1.0 / 0.1, 1.0 / 0.1, 1.0 / 0.1;  // implicit: 0.8 and 0.1 -> 1/0.1
    auto bound5 = jensen_gap_entropy_bound(a, 5);
    JensenGapReport r5 = jensen_gap_estimate(gen, atoms, probs, 5, 100000,
                                             RngStream::derive(35, "k5"));
    CHECK(r5.estimate <= bound5.tighter + 3.0 * r5.stderr_est);
  }
}

TEST_CASE("entropy gap bound formula") {
  // uniform-only set: a = (c,...,c) makes the tighter bound vanish
  CHECK(jensen_gap_entropy_bound(Vec::Constant(3, 3.0), 7).tighter ==
        Catch::Approx(0.0).margin(1e-15));
  auto b = jensen_gap_entropy_bound(Vec::Constant(2, 10.0), 1);
  CHECK(b.looser == Catch::Approx(2.5));
  CHECK(b.tighter == Catch::Approx(1.6));
  auto b10 = jensen_gap_entropy_bound(Vec::Constant(2, 10.0), 10);
  CHECK(b10.tighter == Catch::Approx(b.tighter / 10.0));
  CHECK_THROWS_AS(jensen_gap_entropy_bound(Vec::Constant(4, 2.0), 1),
                  std::invalid_argument);
}

TEST_CASE("co^k approximation witness") {
  auto gen = Generator::neg_entropy_multiclass(3);
  RngStream rng = RngStream::derive(36, "cok");
  ConvexHullSet hull = random_hull_in_simplex(4, 3, rng);
  Vec yw = random_weights(4, rng);
  Vec z = random_simplex_point(3, rng, 1e-3).truncated();

  SECTION("k >= m recovers y exactly") {
    CokWitness wit = cok_approximation_witness(
        gen, hull, z, yw, 5, 100, RngStream::derive(36, "exact"));
    CHECK(wit.excess <= 1e-10);
  }
  SECTION("k = 1 picks the best single atom") {
    CokWitness wit = cok_approximation_witness(
        gen, hull, z, yw, 1, 50, RngStream::derive(36, "k1"));
    double best_atom = kInf;
    for (int i = 0; i < 4; ++i)
      best_atom = std::min(
          best_atom, gen.divergence(hull.points.row(i).transpose(), z));
    double ref =
        gen.divergence(hull.points.transpose() * yw, z);
    CHECK(wit.excess == Catch::Approx(best_atom - ref).epsilon(1e-12));
  }
  SECTION("excess within the entropy gap bound") {
    ConvexHullSet big = random_hull_in_simplex(6, 3, rng);
    Vec byw = random_weights(6, rng);
    CokWitness wit = cok_approximation_witness(
        gen, big, z, byw, 3, 10000, RngStream::derive(36, "bound"));
    CHECK(wit.within_bound);
  }
}
