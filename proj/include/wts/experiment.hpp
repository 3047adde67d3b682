#pragma once

#include <atomic>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wts/models.hpp"
#include "wts/report.hpp"
#include "wts/rng.hpp"
#include "wts/training.hpp"

namespace wts {

// Synthetic weak-to-strong pipeline configuration.  The full-scale numbers
// (the "paper" profile) are the defaults; desk() shrinks the task and sample
// counts so a full run finishes in minutes.
struct SyntheticConfig {
  int in_dim = 8;
  int rep_dim = 16;
  int hidden = 16;
  int hstar_depth = 5;   // hidden layers of the ground-truth representation
  int strong_depth = 8;  // hidden layers of the strong representation class
  int weak_depth = 2;
  int c = 2;
  int T = 10;      // pretraining tasks
  int N_r = 2000;  // samples per pretraining task
  int M = 100;     // finetuning tasks
  int N_f = 2000;  // samples per finetuning stage
  double nu = 100.0;
  int k = 100;
  std::uint64_t master_seed = 0;
  double reg_coef = 0.1;
  double planted_head_sd = 0.01;
  double slack_tol = 0.05;
  bool realizable_weak = false;      // plant f_w in F composed with h_s
  bool eval_vs_best_strong = false;  // score against a true-label reference
  OptimizerConfig pretrain_opt;
  OptimizerConfig weak_opt;
  OptimizerConfig strong_opt;

  SyntheticConfig() {
    strong_opt.restarts = 3;  // reverse KL is non-convex
  }

  static SyntheticConfig desk() {
    SyntheticConfig cfg;
    cfg.T = 5;
    cfg.N_r = 500;
    cfg.M = 20;
    cfg.N_f = 500;
    return cfg;
  }

  static SyntheticConfig paper() { return SyntheticConfig(); }

  void check() const {
    if (c < 2 || T < 1 || M < 1 || N_r < 1 || N_f < 1 || k < 1 || !(nu >= 0))
      throw std::invalid_argument("bad synthetic config");
  }
};

inline nlohmann::json config_to_json(const SyntheticConfig& cfg) {
  return {{"in_dim", cfg.in_dim},
          {"rep_dim", cfg.rep_dim},
          {"hidden", cfg.hidden},
          {"hstar_depth", cfg.hstar_depth},
          {"strong_depth", cfg.strong_depth},
          {"weak_depth", cfg.weak_depth},
          {"c", cfg.c},
          {"T", cfg.T},
          {"N_r", cfg.N_r},
          {"M", cfg.M},
          {"N_f", cfg.N_f},
          {"nu", cfg.nu},
          {"k", cfg.k},
          {"master_seed", cfg.master_seed},
          {"reg_coef", cfg.reg_coef},
          {"planted_head_sd", cfg.planted_head_sd},
          {"slack_tol", cfg.slack_tol},
          {"realizable_weak", cfg.realizable_weak},
          {"eval_vs_best_strong", cfg.eval_vs_best_strong}};
}

struct EvalRecord {
  int task_id = 0;
  int c = 0;
  int k = 0;
  int n_eval = 0;
  double weak_xe = 0.0;
  double strong_xe = 0.0;
  double misfit_kl = 0.0;
  double gain = 0.0;
  double slack = 0.0;
};

struct GroundTruth {
  MlpParams hstar;
  std::vector<SoftmaxHead> pretrain_heads;
  std::vector<SoftmaxHead> finetune_heads;
};

inline GroundTruth generate_ground_truth(const SyntheticConfig& cfg) {
  cfg.check();
  GroundTruth gt;
  RngStream hrng = RngStream::derive(cfg.master_seed, "hstar");
  gt.hstar = MlpParams::random(cfg.in_dim, cfg.hidden, cfg.rep_dim,
                               cfg.hstar_depth, hrng);
  for (int i = 0; i < cfg.T; ++i) {
    RngStream r = RngStream::derive(cfg.master_seed, "pretrain_head", i);
    gt.pretrain_heads.push_back(
        SoftmaxHead::random(cfg.c, cfg.rep_dim, cfg.planted_head_sd, r));
  }
  for (int i = 0; i < cfg.M; ++i) {
    RngStream r = RngStream::derive(cfg.master_seed, "finetune_head", i);
    gt.finetune_heads.push_back(
        SoftmaxHead::random(cfg.c, cfg.rep_dim, cfg.planted_head_sd, r));
  }
  return gt;
}

// n x in_dim inputs drawn from N(0, nu^2 I)
inline Mat sample_inputs(const SyntheticConfig& cfg, std::string_view tag,
                         int task, int n) {
  RngStream rng = RngStream::derive(cfg.master_seed, tag, task);
  Mat X(n, cfg.in_dim);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < cfg.in_dim; ++i) X(j, i) = cfg.nu * rng.next_normal();
  return X;
}

// exact soft labels y = sigma(f(hstar(x))), one row per input
inline Mat soft_labels(const MlpParams& rep, const SoftmaxHead& f,
                       const Mat& X) {
  return head_forward_batch(f, mlp_forward_batch(rep, X));
}

struct TaskState {
  SoftmaxHead weak_head;
  std::optional<TrainReport> weak_report;
  Mat wts_inputs;     // inputs the weak model labels for the strong model
  Mat weak_labels;    // f_w(h_w(x)) on wts_inputs
  Mat eval_inputs;
  Mat eval_targets;   // g on eval_inputs
  Mat eval_weak;      // f_w(h_w(x)) on eval_inputs
  double weak_xe = 0.0;
};

// Everything that does not depend on k: ground truth, both pretrained
// representations, and the per-task weak stage.
struct SharedStages {
  SyntheticConfig cfg;
  GroundTruth gt;
  MlpParams h_s;
  MlpParams h_w;
  TrainReport strong_pretrain_report;
  TrainReport weak_pretrain_report;
  std::vector<TaskState> tasks;
};

inline double mean_xe_rows(const Mat& P, const Mat& Q) {
  double s = 0.0;
  for (int j = 0; j < P.rows(); ++j)
    s -= (P.row(j).array() * Q.row(j).array().log()).sum();
  return s / P.rows();
}

inline double mean_kl_rows(const Mat& P, const Mat& Q) {
  double s = 0.0;
  for (int j = 0; j < P.rows(); ++j)
    s += (P.row(j).array() * (P.row(j).array() / Q.row(j).array()).log()).sum();
  return s / P.rows();
}

inline SharedStages prepare_shared_stages(const SyntheticConfig& cfg) {
  cfg.check();
  SharedStages sh;
  sh.cfg = cfg;
  sh.gt = generate_ground_truth(cfg);

  std::vector<PretrainData> pool(cfg.T);
  for (int i = 0; i < cfg.T; ++i) {
    pool[i].X = sample_inputs(cfg, "pretrain_data", i, cfg.N_r);
    pool[i].Y = soft_labels(sh.gt.hstar, sh.gt.pretrain_heads[i], pool[i].X);
  }

  MlpArch strong_arch{cfg.in_dim, cfg.hidden, cfg.rep_dim, cfg.strong_depth};
  OptimizerConfig sopt = cfg.pretrain_opt;
  sopt.seed = RngStream::derive(cfg.master_seed, "pretrain_strong").next_u64();
  // Both representations start from the mirrored-block init where the shape
  // permits: a plain fan-in-scaled Gaussian leaves the deep network barely
  // trainable within the fixed iteration budget, while the mirrored init
  // lets depth help.
  const bool mirrored = cfg.hidden % 2 == 0 && cfg.hidden / 2 >= cfg.in_dim;
  std::vector<SoftmaxHead> tmp_heads;
  std::tie(sh.h_s, tmp_heads, sh.strong_pretrain_report) =
      pretrain_representation(strong_arch, pool, sopt, 0.01, mirrored);

  if (cfg.realizable_weak) {
    sh.h_w = sh.h_s;
  } else {
    MlpArch weak_arch{cfg.in_dim, cfg.hidden, cfg.rep_dim, cfg.weak_depth};
    OptimizerConfig wopt = cfg.pretrain_opt;
    wopt.seed = RngStream::derive(cfg.master_seed, "pretrain_weak").next_u64();
    std::tie(sh.h_w, tmp_heads, sh.weak_pretrain_report) =
        pretrain_representation(weak_arch, pool, wopt, 0.01, mirrored);
  }

  sh.tasks.resize(cfg.M);
  for (int i = 0; i < cfg.M; ++i) {
    TaskState& ts = sh.tasks[i];
    if (cfg.realizable_weak) {
      // plant the weak model inside F composed with h_s
      RngStream r = RngStream::derive(cfg.master_seed, "realizable_weak", i);
      ts.weak_head =
          SoftmaxHead::random(cfg.c, cfg.rep_dim, cfg.planted_head_sd, r);
    } else {
      Mat Xf = sample_inputs(cfg, "finetune_data", i, cfg.N_f);
      Mat Yf = soft_labels(sh.gt.hstar, sh.gt.finetune_heads[i], Xf);
      Mat Rw = mlp_forward_batch(sh.h_w, Xf);
      OptimizerConfig wopt = cfg.weak_opt;
      wopt.seed = RngStream::derive(cfg.master_seed, "weak_head", i).next_u64();
      auto [head, rep] = train_weak_head(Rw, Yf, wopt);
      ts.weak_head = std::move(head);
      ts.weak_report = std::move(rep);
    }

    ts.wts_inputs = sample_inputs(cfg, "wts_data", i, cfg.N_f);
    ts.weak_labels = head_forward_batch(
        ts.weak_head, mlp_forward_batch(sh.h_w, ts.wts_inputs));

    ts.eval_inputs = sample_inputs(cfg, "eval_data", i, cfg.N_f);
    ts.eval_targets =
        soft_labels(sh.gt.hstar, sh.gt.finetune_heads[i], ts.eval_inputs);
    ts.eval_weak = head_forward_batch(
        ts.weak_head, mlp_forward_batch(sh.h_w, ts.eval_inputs));
    ts.weak_xe = mean_xe_rows(ts.eval_targets, ts.eval_weak);
  }
  return sh;
}

// The k-dependent part of one task: strong reverse-KL training + evaluation
// of the three expectations.
inline EvalRecord run_task_strong(const SharedStages& sh, int task, int k,
                                  HeadEnsemble* out_ens = nullptr,
                                  TrainReport* out_rep = nullptr) {
  const SyntheticConfig& cfg = sh.cfg;
  const TaskState& ts = sh.tasks[task];
  Mat Rs = mlp_forward_batch(sh.h_s, ts.wts_inputs);
  OptimizerConfig sopt = cfg.strong_opt;
  sopt.seed = RngStream::derive(cfg.master_seed, "strong_train", task).next_u64();
  auto [ens, rep] = train_strong_ensemble(Rs, ts.weak_labels, k, sopt,
                                          cfg.reg_coef);

  Mat Re = mlp_forward_batch(sh.h_s, ts.eval_inputs);
  Mat Ps = ensemble_forward_batch(ens, Re);

  EvalRecord rec;
  rec.task_id = task;
  rec.c = cfg.c;
  rec.k = k;
  rec.n_eval = static_cast<int>(ts.eval_inputs.rows());
  if (cfg.eval_vs_best_strong) {
    // realizability correction: score both models against a strong reference
    // trained on true labels instead of against g itself
    Mat Ytrue = soft_labels(sh.gt.hstar, sh.gt.finetune_heads[task],
                            ts.wts_inputs);
    OptimizerConfig ropt = cfg.strong_opt;
    ropt.seed =
        RngStream::derive(cfg.master_seed, "reference_strong", task).next_u64();
    auto [ref, ref_rep] = train_strong_ensemble(Rs, Ytrue, k, ropt,
                                                cfg.reg_coef);
    Mat Pref = ensemble_forward_batch(ref, Re);
    rec.weak_xe = mean_xe_rows(Pref, ts.eval_weak);
    rec.strong_xe = mean_xe_rows(Pref, Ps);
  } else {
    rec.weak_xe = ts.weak_xe;
    rec.strong_xe = mean_xe_rows(ts.eval_targets, Ps);
  }
  rec.misfit_kl = mean_kl_rows(Ps, ts.eval_weak);
  rec.gain = rec.weak_xe - rec.strong_xe;
  rec.slack = rec.gain - rec.misfit_kl;
  if (out_ens) *out_ens = std::move(ens);
  if (out_rep) *out_rep = std::move(rep);
  return rec;
}

struct PipelineOutput {
  std::vector<EvalRecord> records;                  // completed tasks only
  std::vector<std::optional<std::string>> failures; // per-task diagnostics
  nlohmann::json summary;
};

inline nlohmann::json summarize_records(const SyntheticConfig& cfg, int k,
                                        const std::vector<EvalRecord>& recs) {
  std::vector<double> gains, misfits, slacks, weak, strong;
  int ok = 0;
  for (const auto& r : recs) {
    gains.push_back(r.gain);
    misfits.push_back(r.misfit_kl);
    slacks.push_back(r.slack);
    weak.push_back(r.weak_xe);
    strong.push_back(r.strong_xe);
    if (r.slack >= -cfg.slack_tol) ++ok;
  }
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["k"] = k;
  j["weak_xe"] = stats_json(weak);
  j["strong_xe"] = stats_json(strong);
  j["gain"] = stats_json(gains);
  j["misfit_kl"] = stats_json(misfits);
  j["slack"] = stats_json(slacks);
  j["pearson_gain_misfit"] = pearson(gains, misfits);
  j["frac_slack_ge_neg_tol"] =
      recs.empty() ? 0.0 : static_cast<double>(ok) / recs.size();
  j["completed_tasks"] = recs.size();
  return j;
}

// Runs the k-dependent stages for all tasks of prepared shared state.  Tasks
// are independent; `threads` only partitions them, results are identical for
// any thread count.
inline PipelineOutput run_strong_stage(const SharedStages& sh, int k,
                                       int threads = 1) {
  const int M = sh.cfg.M;
  std::vector<std::optional<EvalRecord>> slots(M);
  std::vector<std::optional<std::string>> failures(M);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= M) break;
      try {
        slots[i] = run_task_strong(sh, i, k);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  int nthreads = std::max(1, std::min(threads, M));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  PipelineOutput out;
  out.failures = std::move(failures);
  for (int i = 0; i < M; ++i)
    if (slots[i]) out.records.push_back(*slots[i]);
  out.summary = summarize_records(sh.cfg, k, out.records);
  return out;
}

inline PipelineOutput run_pipeline(const SyntheticConfig& cfg,
                                   int threads = 1) {
  SharedStages sh = prepare_shared_stages(cfg);
  return run_strong_stage(sh, cfg.k, threads);
}

struct SweepEntry {
  int k;
  double median_diff;  // median over tasks of misfit - gain
  double mean_diff;
  PipelineOutput output;
};

// Varying-k sweep with shared ground truth, pretraining and weak stage;
// only the strong training differs between entries.
inline std::vector<SweepEntry> sweep_k(const SyntheticConfig& cfg,
                                       const std::vector<int>& ks,
                                       int threads = 1) {
  if (ks.empty()) throw std::invalid_argument("empty k list");
  SharedStages sh = prepare_shared_stages(cfg);
  std::vector<SweepEntry> entries;
  for (int k : ks) {
    SweepEntry e;
    e.k = k;
    e.output = run_strong_stage(sh, k, threads);
    std::vector<double> diffs;
    for (const auto& r : e.output.records)
      diffs.push_back(r.misfit_kl - r.gain);
    e.median_diff = median_of(diffs);
    e.mean_diff = mean_of(diffs);
    entries.push_back(std::move(e));
  }
  return entries;
}

// EvalRecord CSV with the exact column header; a manifest echo rides along
// as a trailing comment so every artifact records its provenance.
inline std::string records_to_csv(const std::vector<EvalRecord>& recs,
                                  const nlohmann::json& manifest) {
  std::ostringstream s;
  s << "task_id,c,k,n_eval,weak_xe,strong_xe,misfit_kl,gain,slack\n";
  for (const auto& r : recs) {
    s << r.task_id << "," << r.c << "," << r.k << "," << r.n_eval << ","
      << format_g17(r.weak_xe) << "," << format_g17(r.strong_xe) << ","
      << format_g17(r.misfit_kl) << "," << format_g17(r.gain) << ","
      << format_g17(r.slack) << "\n";
  }
  s << "# manifest: " << manifest.dump() << "\n";
  return s.str();
}

}  // namespace wts
