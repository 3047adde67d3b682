#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wts/bregman.hpp"
#include "wts/rng.hpp"

namespace wts {

// Finite set of hull generators.  Plain case: rows of `points` are m points
// in U_psi.  Functional case: each row is a function over a finite support,
// stored block-by-block (|X| blocks of the generator dimension), and
// `support_weights` carries P_X; the mixture weights are shared across the
// support.
struct ConvexHullSet {
  Eigen::MatrixXd points;  // m x n  (n = block_dim * num_blocks)
  Eigen::VectorXd support_weights;  // empty for the plain case

  static ConvexHullSet of_points(Eigen::MatrixXd pts) {
    ConvexHullSet h;
    h.points = std::move(pts);
    if (h.points.rows() < 1) throw std::invalid_argument("empty hull");
    return h;
  }

  static ConvexHullSet of_functions(Eigen::MatrixXd tables,
                                    Eigen::VectorXd px) {
    ConvexHullSet h;
    h.points = std::move(tables);
    h.support_weights = std::move(px);
    if (h.points.rows() < 1) throw std::invalid_argument("empty hull");
    if (h.support_weights.size() < 1 ||
        !(h.support_weights.array() > 0.0).all() ||
        std::abs(h.support_weights.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("support weights must form a distribution");
    if (h.points.cols() % h.support_weights.size() != 0)
      throw std::invalid_argument("table width not divisible by support size");
    return h;
  }

  int size() const { return static_cast<int>(points.rows()); }
  bool functional() const { return support_weights.size() > 0; }
  int num_blocks() const {
    return functional() ? static_cast<int>(support_weights.size()) : 1;
  }
};

struct ProjectionOptions {
  double step = 0.1;
  int max_iters = 50000;
  // stop when the entropy-mirror gradient mapping norm drops below this
  double tol = 1e-9;
};

struct ProjectionResult {
  Vec point;           // projected point (or function table)
  Vec weights;         // mixture weights on the hull generators
  double objective;    // D_psi(point, z), P_X-weighted in the functional case
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// D_psi and its first-argument gradient, summed over support blocks with the
// P_X weights.  This is the weighted separable generator applied by
// composition; the plain case is the single-block special case.
inline double hull_divergence(const Generator& gen, const ConvexHullSet& hull,
                              const Vec& y, const Vec& z, Vec* grad = nullptr) {
  int blocks = hull.num_blocks();
  int bd = static_cast<int>(y.size()) / blocks;
  if (bd != gen.dim()) throw std::invalid_argument("block dimension mismatch");
  double total = 0.0;
  if (grad) grad->setZero(y.size());
  for (int b = 0; b < blocks; ++b) {
    double w = hull.functional() ? hull.support_weights[b] : 1.0;
    Vec yb = y.segment(b * bd, bd);
    Vec zb = z.segment(b * bd, bd);
    total += w * gen.divergence(yb, zb);
    if (grad)
      grad->segment(b * bd, bd) = w * (gen.dual_map(yb) - gen.dual_map(zb));
  }
  return total;
}

}  // namespace detail

// argmin over w in the simplex of D_psi(sum_i w_i v_i, z), by exponentiated
// gradient steps on w.  The objective is convex in w, and entropy mirror
// steps keep the iterate strictly interior.
inline ProjectionResult forward_projection(const Generator& gen,
                                           const ConvexHullSet& hull,
                                           const Vec& z,
                                           const ProjectionOptions& opts = {}) {
  const int m = hull.size();
  Vec w = Vec::Constant(m, 1.0 / m);
  ProjectionResult res;
  Vec dy;
  Vec y = hull.points.transpose() * w;
  double obj = detail::hull_divergence(gen, hull, y, z, &dy);
  res.weights = w;
  res.point = y;
  res.objective = obj;
  // adaptive step: grow on accepted decrease, backtrack on overshoot; the
  // problem scale varies by orders of magnitude between generators
  double step = opts.step;
  for (int it = 0; it < opts.max_iters; ++it) {
    Vec g = hull.points * dy;  // d obj / d w
    // mirror-descent gradient mapping under the entropy geometry
    double gbar = w.dot(g);
    double mapnorm = std::sqrt((w.array() * (g.array() - gbar).square()).sum());
    res.iterations = it;
    if (mapnorm < opts.tol) {
      res.converged = true;
      break;
    }
    bool moved = false;
    while (step > 1e-18) {
      Vec lw = (w.array().log() - step * (g.array() - gbar)).matrix();
      double mx = lw.maxCoeff();
      Vec wt = (lw.array() - mx).exp().matrix();
      wt /= wt.sum();
      Vec yt = hull.points.transpose() * wt;
      Vec dyt;
      double ot = detail::hull_divergence(gen, hull, yt, z, &dyt);
      if (ot <= obj) {
        w = std::move(wt);
        y = std::move(yt);
        obj = ot;
        dy = std::move(dyt);
        step = std::min(step * 1.5, 1e12);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (obj <= res.objective) {
      res.objective = obj;
      res.weights = w;
      res.point = y;
    }
    if (!moved) {
      // no descent direction representable at machine precision
      res.converged = true;
      break;
    }
  }
  return res;
}

// D(x,z) - D(x,P(z)) - D(P(z),z); nonnegative up to the projection tolerance
// when x lies in the hull.  x is given by its mixture weights.
inline double pythagorean_slack(const Generator& gen, const ConvexHullSet& hull,
                                const Vec& z, const Vec& x_weights,
                                const ProjectionOptions& opts = {}) {
  if (x_weights.size() != hull.size())
    throw std::invalid_argument("weight count mismatch");
  Vec x = hull.points.transpose() * x_weights;
  ProjectionResult pr = forward_projection(gen, hull, z, opts);
  return detail::hull_divergence(gen, hull, x, z) -
         detail::hull_divergence(gen, hull, x, pr.point) - pr.objective;
}

struct JensenGapReport {
  double estimate = 0.0;
  double stderr_est = 0.0;
  double bound = kInf;  // analytic bound when available
  int k = 0;
  int c = 0;
};

// Monte-Carlo estimate of E[psi(Zbar^(k))] - psi(E Z) for the distribution
// placing `probs` on the rows of `atoms`.  A lower-bound witness for the
// worst-case Jensen gap.
inline JensenGapReport jensen_gap_estimate(const Generator& gen,
                                           const Eigen::MatrixXd& atoms,
                                           const Vec& probs, int k, int trials,
                                           RngStream rng) {
  if (atoms.rows() != probs.size() || !(probs.array() > 0.0).all())
    throw std::invalid_argument("atoms and probabilities must match");
  if (k < 1 || trials < 1) throw std::invalid_argument("k, trials >= 1");
  const int n = static_cast<int>(atoms.rows());
  Vec cdf(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) cdf[i] = (acc += probs[i]);
  if (std::abs(acc - 1.0) > 1e-12)
    throw std::invalid_argument("probabilities must sum to 1");

  Vec mean = atoms.transpose() * probs;
  double psi_mean = gen.value(mean);

  double s1 = 0.0, s2 = 0.0;
  Vec zbar(atoms.cols());
  for (int t = 0; t < trials; ++t) {
    zbar.setZero();
    for (int j = 0; j < k; ++j) {
      double u = rng.next_uniform();
      int idx = static_cast<int>(
          std::lower_bound(cdf.data(), cdf.data() + n, u) - cdf.data());
      if (idx >= n) idx = n - 1;
      zbar += atoms.row(idx);
    }
    zbar /= static_cast<double>(k);
    double v = gen.value(zbar) - psi_mean;
    s1 += v;
    s2 += v * v;
  }
  JensenGapReport rep;
  rep.k = k;
  rep.c = gen.dim() + 1;
  rep.estimate = s1 / trials;
  double var = std::max(0.0, s2 / trials - rep.estimate * rep.estimate);
  rep.stderr_est = std::sqrt(var / trials);
  return rep;
}

// Bounds on the Jensen gap of the negative entropy restricted to a set with
// coordinate suprema a_i = sup 1/p_i:
//   tighter = (1/8k) sum_i a_i (1 - sum_j 1/a_j)^2,  looser = (1/8k) sum_i a_i
struct EntropyGapBound {
  double tighter;
  double looser;
};

inline EntropyGapBound jensen_gap_entropy_bound(const Vec& a, int k) {
  if (k < 1) throw std::invalid_argument("k >= 1");
  if (!(a.array() > 0.0).all())
    throw std::invalid_argument("a must be positive");
  double inv_sum = a.array().inverse().sum();
  if (inv_sum > 1.0 + 1e-12)
    throw std::invalid_argument("infeasible a: sum 1/a_i > 1");
  double asum = a.sum();
  double d = 1.0 - inv_sum;
  return {asum * d * d / (8.0 * k), asum / (8.0 * k)};
}

struct CokWitness {
  Vec best;          // best k-mixture point found
  Vec best_weights;  // weights over the hull atoms used by `best`
  double excess;     // D(best, z) - D(y, z)
  double gap_bound;  // entropy gap bound for the hull, when computable
  bool within_bound;
};

// Probabilistic-method search: draw k atoms i.i.d. by the mixture weights of
// y and keep the best empirical mixture.  When k >= m, y itself is exactly
// representable and is included as a candidate; for k = 1 all single atoms
// are scanned.
inline CokWitness cok_approximation_witness(const Generator& gen,
                                            const ConvexHullSet& hull,
                                            const Vec& z, const Vec& y_weights,
                                            int k, int trials, RngStream rng) {
  const int m = hull.size();
  if (y_weights.size() != m)
    throw std::invalid_argument("weight count mismatch");
  Vec y = hull.points.transpose() * y_weights;
  double ref = detail::hull_divergence(gen, hull, y, z);

  CokWitness wit;
  wit.excess = kInf;
  auto consider = [&](const Vec& cand, const Vec& wts) {
    double d = detail::hull_divergence(gen, hull, cand, z) - ref;
    if (d < wit.excess) {
      wit.excess = d;
      wit.best = cand;
      wit.best_weights = wts;
    }
  };

  if (k >= m) consider(y, y_weights);
  if (k == 1) {
    for (int i = 0; i < m; ++i) {
      Vec wts = Vec::Zero(m);
      wts[i] = 1.0;
      consider(hull.points.row(i).transpose(), wts);
    }
  }

  Vec cdf(m);
  double acc = 0.0;
  for (int i = 0; i < m; ++i) cdf[i] = (acc += y_weights[i]);
  Vec cand(hull.points.cols());
  Vec counts(m);
  for (int t = 0; t < trials; ++t) {
    cand.setZero();
    counts.setZero();
    for (int j = 0; j < k; ++j) {
      double u = rng.next_uniform();
      int idx = static_cast<int>(
          std::lower_bound(cdf.data(), cdf.data() + m, u) - cdf.data());
      if (idx >= m) idx = m - 1;
      cand += hull.points.row(idx).transpose();
      counts[idx] += 1.0;
    }
    cand /= static_cast<double>(k);
    consider(cand, counts / static_cast<double>(k));
  }

  // entropy gap bound from the hull's coordinate suprema, when the hull
  // consists of truncated simplex points
  wit.gap_bound = kInf;
  if (gen.kind() == GeneratorKind::NegEntropyBinary ||
      gen.kind() == GeneratorKind::NegEntropyMulticlass) {
    int blocks = hull.num_blocks();
    int bd = static_cast<int>(hull.points.cols()) / blocks;
    int c = bd + 1;
    double worst = 0.0;  // max over blocks, weighted like the divergence
    for (int b = 0; b < blocks; ++b) {
      Vec a(c);
      for (int i = 0; i < bd; ++i)
        a[i] = 1.0 / hull.points.col(b * bd + i).minCoeff();
      double last_min = kInf;
      for (int r = 0; r < hull.points.rows(); ++r)
        last_min = std::min(last_min,
                            1.0 - hull.points.row(r).segment(b * bd, bd).sum());
      a[c - 1] = 1.0 / last_min;
      worst = std::max(worst, jensen_gap_entropy_bound(a, k).tighter);
    }
    wit.gap_bound = worst;
  }
  wit.within_bound = wit.excess <= wit.gap_bound + 1e-12;
  return wit;
}

}  // namespace wts
