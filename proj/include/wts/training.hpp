#pragma once

#include <deque>
#include <functional>
#include <stdexcept>
#include <vector>

#include "wts/models.hpp"
#include "wts/rng.hpp"

namespace wts {

struct OptimizerConfig {
  double step = 1e-2;
  int max_iters = 2000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // converged when the relative objective change over `window` iterations
  // falls below rel_tol
  double rel_tol = 1e-8;
  int window = 20;
  int restarts = 1;
  std::uint64_t seed = 0;

  void check() const {
    if (!(step > 0.0) || max_iters < 0 || rel_tol < 0.0 || restarts < 1)
      throw std::invalid_argument("bad optimizer config");
  }
};

struct TrainReport {
  double final_objective = 0.0;
  std::vector<double> trace;  // subsampled objective values
  int iterations = 0;
  int restart_index = 0;
  bool converged = false;
};

// objective(params, grad_out) -> value
using Objective = std::function<double(const Vec&, Vec&)>;

struct AdamResult {
  Vec params;
  double objective = 0.0;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

inline AdamResult adam_minimize(const Objective& f, Vec params,
                                const OptimizerConfig& cfg) {
  AdamResult res;
  Vec g(params.size());
  Vec m = Vec::Zero(params.size());
  Vec v = Vec::Zero(params.size());
  std::deque<double> window;
  double obj = f(params, g);
  res.trace.push_back(obj);
  if (!std::isfinite(obj)) {
    res.diverged = true;
    res.params = std::move(params);
    res.objective = obj;
    return res;
  }
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    double bc1 = 1.0 - std::pow(cfg.beta1, it + 1);
    double bc2 = 1.0 - std::pow(cfg.beta2, it + 1);
    params -= (cfg.step / bc1) *
              (m.array() / ((v.array() / bc2).sqrt() + cfg.eps)).matrix();
    obj = f(params, g);
    if (!std::isfinite(obj)) {
      res.diverged = true;
      break;
    }
    if ((it + 1) % 10 == 0) res.trace.push_back(obj);
    window.push_back(obj);
    if (static_cast<int>(window.size()) > cfg.window) {
      double past = window.front();
      window.pop_front();
      double rel = std::abs(past - obj) / std::max(1.0, std::abs(obj));
      if (rel < cfg.rel_tol) {
        res.converged = true;
        ++it;
        break;
      }
    }
  }
  res.params = std::move(params);
  res.objective = obj;
  res.iterations = it;
  return res;
}

namespace detail {

inline Vec flatten_head(const Mat& W) {
  return Eigen::Map<const Vec>(W.data(), W.size());
}

inline Mat unflatten_head(const Vec& p, int rows, int cols) {
  return Eigen::Map<const Mat>(p.data(), rows, cols);
}

}  // namespace detail

// Fit a single softmax head by forward cross-entropy on frozen
// representations R (rows) against soft labels Y (rows).
inline std::pair<SoftmaxHead, TrainReport> train_weak_head(
    const Mat& R, const Mat& Y, const OptimizerConfig& cfg,
    double init_sd = 0.01) {
  cfg.check();
  if (R.rows() < 1 || R.rows() != Y.rows())
    throw std::invalid_argument("empty or mismatched data");
  const int c = static_cast<int>(Y.cols());
  const int d = static_cast<int>(R.cols());

  Objective obj = [&](const Vec& p, Vec& g) {
    SoftmaxHead h;
    h.W = detail::unflatten_head(p, c - 1, d);
    HeadGrad hg = grad_forward_xe(h, R, Y);
    g = detail::flatten_head(hg.dW);
    return hg.objective;
  };

  AdamResult best;
  int best_restart = -1;
  for (int r = 0; r < cfg.restarts; ++r) {
    RngStream rng = RngStream::derive(cfg.seed, "weak_head_init", r);
    SoftmaxHead h0 = SoftmaxHead::random(c, d, init_sd, rng);
    AdamResult res = adam_minimize(obj, detail::flatten_head(h0.W), cfg);
    if (res.diverged) {
      if (r + 1 == cfg.restarts && best_restart < 0)
        throw std::runtime_error("weak head training diverged");
      continue;
    }
    if (best_restart < 0 || res.objective < best.objective) {
      best = std::move(res);
      best_restart = r;
    }
  }
  if (best_restart < 0)
    throw std::runtime_error("all weak head restarts diverged");

  SoftmaxHead h;
  h.W = detail::unflatten_head(best.params, c - 1, d);
  TrainReport rep;
  rep.final_objective = best.objective;
  rep.trace = std::move(best.trace);
  rep.iterations = best.iterations;
  rep.restart_index = best_restart;
  rep.converged = best.converged;
  return {std::move(h), std::move(rep)};
}

// Fit a k-head ensemble by reverse KL to weak labels on frozen
// representations, plus an l2 penalty on the head weights.
inline std::pair<HeadEnsemble, TrainReport> train_strong_ensemble(
    const Mat& R, const Mat& Yweak, int k, const OptimizerConfig& cfg,
    double reg_coef, double init_sd = 0.01) {
  cfg.check();
  if (k < 1) throw std::invalid_argument("k >= 1");
  if (R.rows() < 1 || R.rows() != Yweak.rows())
    throw std::invalid_argument("empty or mismatched data");
  const int c = static_cast<int>(Yweak.cols());
  const int d = static_cast<int>(R.cols());
  const int head_sz = (c - 1) * d;

  auto unpack = [&](const Vec& p) {
    HeadEnsemble e;
    e.heads.resize(k);
    for (int a = 0; a < k; ++a)
      e.heads[a].W =
          detail::unflatten_head(p.segment(a * head_sz, head_sz), c - 1, d);
    e.mix_logits = p.tail(k);
    return e;
  };

  Objective obj = [&](const Vec& p, Vec& g) {
    HeadEnsemble e = unpack(p);
    EnsembleGrad eg = grad_reverse_kl(e, R, Yweak, reg_coef);
    g.resize(p.size());
    for (int a = 0; a < k; ++a)
      g.segment(a * head_sz, head_sz) = detail::flatten_head(eg.dW[a]);
    g.tail(k) = eg.dmix;
    return eg.objective;
  };

  AdamResult best;
  int best_restart = -1;
  for (int r = 0; r < cfg.restarts; ++r) {
    RngStream rng = RngStream::derive(cfg.seed, "strong_ensemble_init", r);
    HeadEnsemble e0 = HeadEnsemble::random(k, c, d, init_sd, rng);
    Vec p0(k * head_sz + k);
    for (int a = 0; a < k; ++a)
      p0.segment(a * head_sz, head_sz) = detail::flatten_head(e0.heads[a].W);
    p0.tail(k) = e0.mix_logits;
    AdamResult res = adam_minimize(obj, std::move(p0), cfg);
    if (res.diverged) continue;
    if (best_restart < 0 || res.objective < best.objective) {
      best = std::move(res);
      best_restart = r;
    }
  }
  if (best_restart < 0)
    throw std::runtime_error("all strong ensemble restarts diverged");

  HeadEnsemble e = unpack(best.params);
  TrainReport rep;
  rep.final_objective = best.objective;
  rep.trace = std::move(best.trace);
  rep.iterations = best.iterations;
  rep.restart_index = best_restart;
  rep.converged = best.converged;
  return {std::move(e), std::move(rep)};
}

struct MlpArch {
  int in_dim;
  int hidden;
  int out_dim;
  int hidden_layers;
};

struct PretrainData {
  Mat X;  // N x in_dim
  Mat Y;  // N x c, soft labels
};

// Jointly train a representation network and one head per task on the pooled
// multi-task cross-entropy.
inline std::tuple<MlpParams, std::vector<SoftmaxHead>, TrainReport>
pretrain_representation_from(MlpParams mlp0,
                             const std::vector<PretrainData>& tasks,
                             const OptimizerConfig& cfg, RngStream& rng,
                             double head_init_sd = 0.01) {
  cfg.check();
  if (tasks.empty()) throw std::invalid_argument("need at least one task");
  const int T = static_cast<int>(tasks.size());
  const int c = static_cast<int>(tasks[0].Y.cols());
  const int d = mlp0.out_dim();
  const int head_sz = (c - 1) * d;

  std::vector<SoftmaxHead> heads0;
  for (int t = 0; t < T; ++t)
    heads0.push_back(SoftmaxHead::random(c, d, head_init_sd, rng));

  // flat layout: all mlp layers (W then b per layer), then the T heads
  int mlp_sz = 0;
  for (size_t l = 0; l < mlp0.W.size(); ++l)
    mlp_sz += static_cast<int>(mlp0.W[l].size() + mlp0.b[l].size());
  Vec p0(mlp_sz + T * head_sz);
  {
    int off = 0;
    for (size_t l = 0; l < mlp0.W.size(); ++l) {
      p0.segment(off, mlp0.W[l].size()) =
          Eigen::Map<const Vec>(mlp0.W[l].data(), mlp0.W[l].size());
      off += static_cast<int>(mlp0.W[l].size());
      p0.segment(off, mlp0.b[l].size()) = mlp0.b[l];
      off += static_cast<int>(mlp0.b[l].size());
    }
    for (int t = 0; t < T; ++t) {
      p0.segment(off, head_sz) = detail::flatten_head(heads0[t].W);
      off += head_sz;
    }
  }

  auto unpack = [&](const Vec& p, MlpParams& m, std::vector<SoftmaxHead>& hs) {
    m = mlp0;
    hs.resize(T);
    int off = 0;
    for (size_t l = 0; l < m.W.size(); ++l) {
      m.W[l] = Eigen::Map<const Mat>(p.data() + off, m.W[l].rows(),
                                     m.W[l].cols());
      off += static_cast<int>(m.W[l].size());
      m.b[l] = p.segment(off, m.b[l].size());
      off += static_cast<int>(m.b[l].size());
    }
    for (int t = 0; t < T; ++t) {
      hs[t].W = detail::unflatten_head(p.segment(off, head_sz), c - 1, d);
      off += head_sz;
    }
  };

  double ntotal = 0.0;
  for (const auto& tk : tasks) ntotal += tk.X.rows();

  Objective obj = [&](const Vec& p, Vec& g) {
    MlpParams m;
    std::vector<SoftmaxHead> hs;
    unpack(p, m, hs);
    g.setZero(p.size());
    double pooled = 0.0;
    int head_off = mlp_sz;
    for (int t = 0; t < T; ++t) {
      Mat R = mlp_forward_batch(m, tasks[t].X);
      Mat dR;
      HeadGrad hg = grad_forward_xe_with_rep(hs[t], R, tasks[t].Y, dR);
      double scale = tasks[t].X.rows() / ntotal;  // pooled mean over examples
      pooled += scale * hg.objective;
      g.segment(head_off + t * head_sz, head_sz) +=
          scale * detail::flatten_head(hg.dW);
      MlpGrad mg = mlp_backward(m, tasks[t].X, dR);
      int off = 0;
      for (size_t l = 0; l < mg.dW.size(); ++l) {
        g.segment(off, mg.dW[l].size()) +=
            scale * Eigen::Map<const Vec>(mg.dW[l].data(), mg.dW[l].size());
        off += static_cast<int>(mg.dW[l].size());
        g.segment(off, mg.db[l].size()) += scale * mg.db[l];
        off += static_cast<int>(mg.db[l].size());
      }
    }
    return pooled;
  };

  AdamResult res = adam_minimize(obj, std::move(p0), cfg);
  if (res.diverged) throw std::runtime_error("pretraining diverged");

  MlpParams m;
  std::vector<SoftmaxHead> hs;
  unpack(res.params, m, hs);
  TrainReport rep;
  rep.final_objective = res.objective;
  rep.trace = std::move(res.trace);
  rep.iterations = res.iterations;
  rep.restart_index = 0;
  rep.converged = res.converged;
  return {std::move(m), std::move(hs), std::move(rep)};
}

inline std::tuple<MlpParams, std::vector<SoftmaxHead>, TrainReport>
pretrain_representation(const MlpArch& arch,
                        const std::vector<PretrainData>& tasks,
                        const OptimizerConfig& cfg, double head_init_sd = 0.01,
                        bool mirrored_init = false,
                        double mirror_noise_sd = 0.0) {
  RngStream rng = RngStream::derive(cfg.seed, "pretrain_init");
  MlpParams mlp0 =
      mirrored_init ? MlpParams::looks_linear(arch.in_dim, arch.hidden,
                                              arch.out_dim, arch.hidden_layers,
                                              rng, mirror_noise_sd)
                    : MlpParams::random(arch.in_dim, arch.hidden, arch.out_dim,
                                        arch.hidden_layers, rng);
  return pretrain_representation_from(std::move(mlp0), tasks, cfg, rng,
                                      head_init_sd);
}

}  // namespace wts
