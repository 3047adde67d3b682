// Acceptance gate: one line per criterion, exit 0 iff all hard criteria pass.
// Tolerances are pinned here and nowhere else.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "wts/experiment.hpp"
#include "wts/projection.hpp"

using namespace wts;
using wts::testutil::all_generators;
using wts::testutil::random_interior;
using wts::testutil::random_simplex_point;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now_s() {
  using clock = std::chrono::steady_clock;
  static const auto t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

// ---- criterion 1: geometric identities -----------------------------------

Outcome criterion_geometry() {
  double worst_cos = 0.0, worst_dual = 0.0;
  for (const auto& gen : all_generators()) {
    RngStream rng = RngStream::derive(1001, to_string(gen.kind()));
    for (int t = 0; t < 1000; ++t) {
      Vec x = random_interior(gen, rng);
      Vec y = random_interior(gen, rng);
      Vec z = random_interior(gen, rng);
      worst_cos = std::max(worst_cos,
                           std::abs(gen.law_of_cosines_residual(x, y, z)));
      worst_dual = std::max(worst_dual, gen.duality_residual(x, y));
    }
  }
  Outcome o;
  o.pass = worst_cos <= 1e-9 && worst_dual <= 1e-9;
  o.detail = "worst law-of-cosines residual " + std::to_string(worst_cos) +
             ", worst duality residual " + std::to_string(worst_dual);
  return o;
}

// ---- criterion 2: Pythagorean inequality + grid oracle -------------------

// exhaustive mixture-weight sweep; valid oracle because the objective is
// convex in the weights
double grid_oracle(const Generator& gen, const ConvexHullSet& hull,
                   const Vec& z) {
  const int m = hull.size();
  auto obj = [&](const Vec& w) {
    return detail::hull_divergence(gen, hull, hull.points.transpose() * w, z);
  };
  if (m == 1) return obj(Vec::Ones(1));
  double best = kInf;
  if (m == 2) {
    for (int i = 0; i <= 100000; ++i) {
      Vec w(2);
      w << i * 1e-5, 1.0 - i * 1e-5;
      best = std::min(best, obj(w));
    }
    return best;
  }
  // m == 3: coarse sweep then a local fine pass around the coarse optimum
  const int K = 200;
  double bi = 0, bj = 0;
  for (int i = 0; i <= K; ++i)
    for (int j = 0; j <= K - i; ++j) {
      Vec w(3);
      w << double(i) / K, double(j) / K, double(K - i - j) / K;
      double v = obj(w);
      if (v < best) {
        best = v;
        bi = w[0];
        bj = w[1];
      }
    }
  for (int i = -800; i <= 800; ++i)
    for (int j = -800; j <= 800; ++j) {
      double wi = bi + i * 1e-5, wj = bj + j * 1e-5;
      if (wi < 0 || wj < 0 || wi + wj > 1.0) continue;
      Vec w(3);
      w << wi, wj, 1.0 - wi - wj;
      best = std::min(best, obj(w));
    }
  return best;
}

Outcome criterion_pythagorean() {
  Generator klgen = Generator::neg_entropy_multiclass(3);
  Generator l2gen = Generator::l2(2);
  ProjectionOptions popts;
  double worst_slack = kInf, worst_oracle_gap = 0.0;
  for (int which = 0; which < 2; ++which) {
    const Generator& gen = which == 0 ? klgen : l2gen;
    RngStream rng = RngStream::derive(1002, which == 0 ? "kl" : "l2");
    for (int t = 0; t < 1000; ++t) {
      int m = 2 + static_cast<int>(rng.next_index(4));  // 2..5 generators
      Mat pts(m, 2);
      for (int i = 0; i < m; ++i)
        pts.row(i) = random_simplex_point(3, rng, 1e-3).p.head(2).transpose();
      ConvexHullSet hull = ConvexHullSet::of_points(pts);
      Vec z = random_simplex_point(3, rng, 1e-3).p.head(2);
      Vec xw = random_simplex_point(m, rng, 1e-6).p;
      worst_slack =
          std::min(worst_slack, pythagorean_slack(gen, hull, z, xw, popts));
      if (m <= 3 && t < 50) {
        ProjectionResult pr = forward_projection(gen, hull, z, popts);
        worst_oracle_gap = std::max(
            worst_oracle_gap, std::abs(pr.objective - grid_oracle(gen, hull, z)));
      }
    }
  }
  Outcome o;
  o.pass = worst_slack >= -1e-6 && worst_oracle_gap <= 1e-6;
  o.detail = "min slack " + std::to_string(worst_slack) +
             ", max |objective - grid oracle| " +
             std::to_string(worst_oracle_gap);
  return o;
}

// ---- criterion 3: appendix bounds ----------------------------------------

Outcome criterion_bounds() {
  bool ok = true;
  std::string worst;
  double worst_margin = kInf;
  for (int c : {2, 3, 5}) {
    Generator gen = Generator::neg_entropy_multiclass(c);
    RngStream arng = RngStream::derive(1003, "atoms", c);
    int m = 4;
    Mat atoms(m, c - 1);
    Vec amax = Vec::Zero(c);
    double last_min = kInf;
    for (int i = 0; i < m; ++i) {
      ProbVector p = random_simplex_point(c, arng, 0.02);
      atoms.row(i) = p.p.head(c - 1).transpose();
      last_min = std::min(last_min, p.p[c - 1]);
    }
    Vec a(c);
    for (int i = 0; i < c - 1; ++i) a[i] = 1.0 / atoms.col(i).minCoeff();
    a[c - 1] = 1.0 / last_min;
    Vec probs = Vec::Constant(m, 1.0 / m);
    for (int k : {1, 2, 5, 25}) {
      JensenGapReport rep = jensen_gap_estimate(
          gen, atoms, probs, k, 100000,
          RngStream::derive(1003, "mc", c, k));
      double bound = jensen_gap_entropy_bound(a, k).tighter;
      double margin = bound + 3.0 * rep.stderr_est - rep.estimate;
      if (margin < worst_margin) {
        worst_margin = margin;
        worst = "c=" + std::to_string(c) + " k=" + std::to_string(k);
      }
      if (margin < 0.0) ok = false;
    }
  }
  RngStream prng = RngStream::derive(1003, "pairs");
  double min_pinsker = kInf, min_loginf = kInf;
  for (int t = 0; t < 100000; ++t) {
    int c = 2 + static_cast<int>(prng.next_index(4));
    ProbVector p = random_simplex_point(c, prng);
    ProbVector q = random_simplex_point(c, prng);
    min_pinsker = std::min(min_pinsker, pinsker_slack(p, q));
    min_loginf = std::min(min_loginf, kl_loginf_bound_slack(p, q));
  }
  if (min_pinsker < -1e-12 || min_loginf < -1e-12) ok = false;
  Outcome o;
  o.pass = ok;
  o.detail = "tightest Jensen margin " + std::to_string(worst_margin) +
             " at " + worst + "; min Pinsker slack " +
             std::to_string(min_pinsker) + ", min log-inf slack " +
             std::to_string(min_loginf);
  return o;
}

// ---- criterion 4: gradients vs finite differences ------------------------

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& p) {
  const double h = 1e-5;
  Vec g(p.size());
  Vec q = p;
  for (int i = 0; i < p.size(); ++i) {
    q[i] = p[i] + h;
    double up = f(q);
    q[i] = p[i] - h;
    double dn = f(q);
    q[i] = p[i];
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

double rel_err(const Vec& a, const Vec& b) {
  return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm()));
}

Outcome criterion_gradients() {
  double worst = 0.0;
  RngStream rng = RngStream::derive(1004, "fd");
  auto randmat = [&](int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = rng.next_normal();
    return m;
  };

  for (int t = 0; t < 20; ++t) {  // forward XE head
    int c = 3, d = 4, N = 6;
    SoftmaxHead h = SoftmaxHead::random(c, d, 0.4, rng);
    Mat R = randmat(N, d);
    Mat Y(N, c);
    for (int j = 0; j < N; ++j)
      Y.row(j) = random_simplex_point(c, rng, 0.05).p.transpose();
    HeadGrad g = grad_forward_xe(h, R, Y);
    auto f = [&](const Vec& p) {
      SoftmaxHead hh;
      hh.W = Eigen::Map<const Mat>(p.data(), c - 1, d);
      return grad_forward_xe(hh, R, Y).objective;
    };
    worst = std::max(
        worst, rel_err(Eigen::Map<const Vec>(g.dW.data(), g.dW.size()),
                       fd_gradient(f, Eigen::Map<const Vec>(h.W.data(),
                                                            h.W.size()))));
  }

  for (int t = 0; t < 20; ++t) {  // reverse KL ensemble incl. mix + l2 term
    int c = 3, k = 3, d = 4, N = 6, hs = (c - 1) * d;
    HeadEnsemble e = HeadEnsemble::random(k, c, d, 0.3, rng);
    for (int a = 0; a < k; ++a) e.mix_logits[a] = 0.3 * rng.next_normal();
    Mat R = randmat(N, d);
    Mat Y(N, c);
    for (int j = 0; j < N; ++j)
      Y.row(j) = random_simplex_point(c, rng, 0.05).p.transpose();
    EnsembleGrad g = grad_reverse_kl(e, R, Y, 0.1);
    Vec p0(k * hs + k), analytic(k * hs + k);
    for (int a = 0; a < k; ++a) {
      p0.segment(a * hs, hs) = Eigen::Map<const Vec>(e.heads[a].W.data(), hs);
      analytic.segment(a * hs, hs) =
          Eigen::Map<const Vec>(g.dW[a].data(), hs);
    }
    p0.tail(k) = e.mix_logits;
    analytic.tail(k) = g.dmix;
    auto f = [&](const Vec& p) {
      HeadEnsemble ee = e;
      for (int a = 0; a < k; ++a)
        ee.heads[a].W = Eigen::Map<const Mat>(p.data() + a * hs, c - 1, d);
      ee.mix_logits = p.tail(k);
      return grad_reverse_kl(ee, R, Y, 0.1).objective;
    };
    worst = std::max(worst, rel_err(analytic, fd_gradient(f, p0)));
  }

  // the rectifier is non-smooth; only sample points clear of every kink
  auto near_kink = [](const MlpParams& m, const Mat& X) {
    Mat A = X;
    for (int l = 0; l + 1 < m.layers(); ++l) {
      A = ((A * m.W[l].transpose()).rowwise() + m.b[l].transpose()).eval();
      if (A.cwiseAbs().minCoeff() < 1e-3) return true;
      A = A.cwiseMax(0.0);
    }
    return false;
  };
  for (int t = 0; t < 20; ++t) {  // MLP Jacobian via a random contraction
    MlpParams m = MlpParams::random(3, 6, 2, 2, rng);
    Mat X = randmat(4, 3);
    while (near_kink(m, X)) {
      m = MlpParams::random(3, 6, 2, 2, rng);
      X = randmat(4, 3);
    }
    Mat dOut = randmat(4, 2);
    MlpGrad g = mlp_backward(m, X, dOut);
    std::vector<int> shape;
    int sz = 0;
    for (size_t l = 0; l < m.W.size(); ++l)
      sz += static_cast<int>(m.W[l].size() + m.b[l].size());
    auto pack = [&](const std::vector<Mat>& W, const std::vector<Vec>& b) {
      Vec p(sz);
      int off = 0;
      for (size_t l = 0; l < W.size(); ++l) {
        p.segment(off, W[l].size()) =
            Eigen::Map<const Vec>(W[l].data(), W[l].size());
        off += static_cast<int>(W[l].size());
        p.segment(off, b[l].size()) = b[l];
        off += static_cast<int>(b[l].size());
      }
      return p;
    };
    auto f = [&](const Vec& p) {
      MlpParams mm = m;
      int off = 0;
      for (size_t l = 0; l < mm.W.size(); ++l) {
        mm.W[l] = Eigen::Map<const Mat>(p.data() + off, mm.W[l].rows(),
                                        mm.W[l].cols());
        off += static_cast<int>(mm.W[l].size());
        mm.b[l] = p.segment(off, mm.b[l].size());
        off += static_cast<int>(mm.b[l].size());
      }
      return (dOut.array() * mlp_forward_batch(mm, X).array()).sum();
    };
    worst = std::max(worst, rel_err(pack(g.dW, g.db),
                                    fd_gradient(f, pack(m.W, m.b))));
  }

  Outcome o;
  o.pass = worst < 1e-4;
  o.detail = "worst relative error " + std::to_string(worst);
  return o;
}

// ---- criteria 5-9: synthetic pipeline ------------------------------------

Outcome criterion_desk_c2(nlohmann::json* out_summary) {
  SyntheticConfig cfg = SyntheticConfig::desk();
  PipelineOutput out = run_pipeline(cfg);
  *out_summary = out.summary;
  double r = out.summary["pearson_gain_misfit"].get<double>();
  double frac = out.summary["frac_slack_ge_neg_tol"].get<double>();
  Outcome o;
  o.pass = out.records.size() == 20 && r >= 0.9 && frac >= 0.9;
  o.detail = "pearson(gain, misfit) " + std::to_string(r) +
             ", frac slack >= -0.05: " + std::to_string(frac) + ", tasks " +
             std::to_string(out.records.size());
  return o;
}

Outcome criterion_c10_c50() {
  SyntheticConfig cfg = SyntheticConfig::desk();
  cfg.c = 10;
  PipelineOutput out = run_pipeline(cfg);
  double r10 = out.summary["pearson_gain_misfit"].get<double>();

  // c = 50 is report-only; run a reduced slice so it stays cheap
  SyntheticConfig big = SyntheticConfig::desk();
  big.c = 50;
  big.M = 5;
  big.strong_opt.restarts = 1;
  big.strong_opt.max_iters = 1000;
  PipelineOutput out50 = run_pipeline(big);
  double r50 = out50.summary["pearson_gain_misfit"].get<double>();

  Outcome o;
  o.pass = r10 >= 0.8;
  o.detail = "c=10 pearson " + std::to_string(r10) +
             "; c=50 pearson (report only) " + std::to_string(r50);
  return o;
}

Outcome criterion_sweep() {
  SyntheticConfig cfg = SyntheticConfig::desk();
  std::vector<int> ks = {1, 10, 50, 100};
  std::vector<SweepEntry> entries = sweep_k(cfg, ks);
  bool monotone = true;
  for (size_t i = 0; i + 1 < entries.size(); ++i)
    if (entries[i + 1].median_diff > entries[i].median_diff + 0.02)
      monotone = false;
  bool strict = entries.back().median_diff < entries.front().median_diff;
  Outcome o;
  o.pass = monotone && strict;
  o.detail = "median(misfit - gain) by k:";
  for (const auto& e : entries)
    o.detail += " k=" + std::to_string(e.k) + ":" +
                std::to_string(e.median_diff);
  return o;
}

Outcome criterion_realizable() {
  SyntheticConfig cfg = SyntheticConfig::desk();
  cfg.realizable_weak = true;
  cfg.k = 5;
  cfg.strong_opt.max_iters = 8000;
  PipelineOutput out = run_pipeline(cfg);
  double worst_misfit = 0.0, worst_gain = 0.0;
  for (const auto& r : out.records) {
    worst_misfit = std::max(worst_misfit, r.misfit_kl);
    worst_gain = std::max(worst_gain, std::abs(r.gain));
  }
  Outcome o;
  o.pass = out.records.size() == static_cast<size_t>(cfg.M) &&
           worst_misfit < 1e-3 && worst_gain < 5e-3;
  o.detail = "max misfit " + std::to_string(worst_misfit) + ", max |gain| " +
             std::to_string(worst_gain);
  return o;
}

Outcome criterion_determinism() {
  SyntheticConfig cfg = SyntheticConfig::desk();
  cfg.M = 8;
  cfg.pretrain_opt.max_iters = 500;
  cfg.weak_opt.max_iters = 500;
  cfg.strong_opt.max_iters = 500;
  cfg.k = 10;
  PipelineOutput a = run_pipeline(cfg, 1);
  PipelineOutput b = run_pipeline(cfg, 8);
  std::string csva = records_to_csv(a.records, config_to_json(cfg));
  std::string csvb = records_to_csv(b.records, config_to_json(cfg));
  Outcome o;
  o.pass = csva == csvb && !a.records.empty();
  o.detail = o.pass ? "byte-identical CSV for 1 and 8 threads"
                    : "CSV outputs differ between thread counts";
  return o;
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  nlohmann::json desk_summary;
  criteria.emplace_back("1 geometric identities", criterion_geometry);
  criteria.emplace_back("2 pythagorean inequality", criterion_pythagorean);
  criteria.emplace_back("3 jensen/pinsker/log-inf bounds", criterion_bounds);
  criteria.emplace_back("4 gradient checks", criterion_gradients);
  criteria.emplace_back("5 desk c=2 misfit-gain tracking",
                        [&] { return criterion_desk_c2(&desk_summary); });
  criteria.emplace_back("6 degradation with c", criterion_c10_c50);
  criteria.emplace_back("7 varying-k trend", criterion_sweep);
  criteria.emplace_back("8 realizable-weak sanity", criterion_realizable);
  criteria.emplace_back("9 determinism across threads", criterion_determinism);

  int failures = 0;
  for (auto& [name, fn] : criteria) {
    double t0 = now_s();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    double dt = now_s() - t0;
    std::printf("%s criterion %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL",
                name.c_str(), dt, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures ? 1 : 0;
}
