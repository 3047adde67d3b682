// Batch front end: run the synthetic pipeline, sweep k, or run the
// geometry / bound verification suites.  Exit codes: 0 ok, 1 verification
// or run failure, 2 usage or config error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wts/experiment.hpp"
#include "wts/projection.hpp"
#include "wts/sampling.hpp"

using namespace wts;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::string profile = "desk";
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs* a) {
  cmd->add_option("--config", a->config_path, "JSON config file");
  cmd->add_option("--seed", a->seed, "master seed");
  cmd->add_option("--out", a->out_dir, "output directory");
  cmd->add_option("--profile", a->profile, "size preset")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--threads", a->threads, "worker thread cap")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--set", a->overrides, "field override key=value");
}

void apply_field(SyntheticConfig& cfg, const std::string& key,
                 const nlohmann::json& v) {
  if (key == "in_dim") cfg.in_dim = v.get<int>();
  else if (key == "rep_dim") cfg.rep_dim = v.get<int>();
  else if (key == "hidden") cfg.hidden = v.get<int>();
  else if (key == "hstar_depth") cfg.hstar_depth = v.get<int>();
  else if (key == "strong_depth") cfg.strong_depth = v.get<int>();
  else if (key == "weak_depth") cfg.weak_depth = v.get<int>();
  else if (key == "c") cfg.c = v.get<int>();
  else if (key == "T") cfg.T = v.get<int>();
  else if (key == "N_r") cfg.N_r = v.get<int>();
  else if (key == "M") cfg.M = v.get<int>();
  else if (key == "N_f") cfg.N_f = v.get<int>();
  else if (key == "nu") cfg.nu = v.get<double>();
  else if (key == "k") cfg.k = v.get<int>();
  else if (key == "master_seed") cfg.master_seed = v.get<std::uint64_t>();
  else if (key == "reg_coef") cfg.reg_coef = v.get<double>();
  else if (key == "planted_head_sd") cfg.planted_head_sd = v.get<double>();
  else if (key == "slack_tol") cfg.slack_tol = v.get<double>();
  else if (key == "realizable_weak") cfg.realizable_weak = v.get<bool>();
  else if (key == "eval_vs_best_strong")
    cfg.eval_vs_best_strong = v.get<bool>();
  else if (key == "pretrain_opt.max_iters")
    cfg.pretrain_opt.max_iters = v.get<int>();
  else if (key == "weak_opt.max_iters") cfg.weak_opt.max_iters = v.get<int>();
  else if (key == "strong_opt.max_iters")
    cfg.strong_opt.max_iters = v.get<int>();
  else if (key == "strong_opt.restarts")
    cfg.strong_opt.restarts = v.get<int>();
  else if (key == "pretrain_opt.step") cfg.pretrain_opt.step = v.get<double>();
  else if (key == "weak_opt.step") cfg.weak_opt.step = v.get<double>();
  else if (key == "strong_opt.step") cfg.strong_opt.step = v.get<double>();
  else throw std::invalid_argument("unknown config field: " + key);
}

SyntheticConfig build_config(const CommonArgs& a) {
  SyntheticConfig cfg =
      a.profile == "paper" ? SyntheticConfig::paper() : SyntheticConfig::desk();
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw std::invalid_argument("cannot read " + a.config_path);
    nlohmann::json j = nlohmann::json::parse(in);
    for (auto& [key, val] : j.items()) apply_field(cfg, key, val);
  }
  for (const std::string& kv : a.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got " + kv);
    apply_field(cfg, kv.substr(0, eq),
                nlohmann::json::parse(kv.substr(eq + 1)));
  }
  cfg.master_seed = a.seed;
  cfg.check();
  return cfg;
}

nlohmann::json manifest_for(const std::string& command, const CommonArgs& a,
                            const SyntheticConfig& cfg) {
  nlohmann::json m = config_to_json(cfg);
  m["command"] = command;
  m["profile"] = a.profile;
  m["threads"] = a.threads;
  return m;
}

void ensure_out(const CommonArgs& a) { fs::create_directories(a.out_dir); }

int cmd_run_synthetic(const CommonArgs& a) {
  SyntheticConfig cfg = build_config(a);
  ensure_out(a);
  nlohmann::json manifest = manifest_for("run-synthetic", a, cfg);
  PipelineOutput out = run_pipeline(cfg, a.threads);
  if (out.records.empty()) {
    std::cerr << "no task completed\n";
    for (const auto& f : out.failures)
      if (f) std::cerr << "  " << *f << "\n";
    return 1;
  }
  write_text_file(a.out_dir + "/eval_records.csv",
                  records_to_csv(out.records, manifest));
  nlohmann::json summary = out.summary;
  summary["manifest"] = manifest;
  write_text_file(a.out_dir + "/summary.json", summary.dump(2) + "\n");
  std::vector<double> misfits, gains;
  for (const auto& r : out.records) {
    misfits.push_back(r.misfit_kl);
    gains.push_back(r.gain);
  }
  write_text_file(a.out_dir + "/gain_vs_misfit.svg",
                  svg_scatter(misfits, gains, "misfit (nats)", "gain (nats)",
                              "gain vs misfit, c=" + std::to_string(cfg.c)));
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_sweep_k(const CommonArgs& a, const std::vector<int>& ks) {
  SyntheticConfig cfg = build_config(a);
  ensure_out(a);
  std::vector<SweepEntry> entries = sweep_k(cfg, ks, a.threads);
  std::ostringstream csv;
  csv << "k,median_diff,mean_diff\n";
  std::vector<double> xs, ys;
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& e : entries) {
    if (e.output.records.empty()) {
      std::cerr << "no task completed at k=" << e.k << "\n";
      return 1;
    }
    SyntheticConfig kc = cfg;
    kc.k = e.k;
    nlohmann::json manifest = manifest_for("sweep-k", a, kc);
    write_text_file(a.out_dir + "/eval_records_k" + std::to_string(e.k) +
                        ".csv",
                    records_to_csv(e.output.records, manifest));
    csv << e.k << "," << format_g17(e.median_diff) << ","
        << format_g17(e.mean_diff) << "\n";
    xs.push_back(e.k);
    ys.push_back(e.median_diff);
    summary.push_back(e.output.summary);
  }
  nlohmann::json manifest = manifest_for("sweep-k", a, cfg);
  manifest["ks"] = ks;
  csv << "# manifest: " << manifest.dump() << "\n";
  write_text_file(a.out_dir + "/misfit_minus_gain_vs_k.csv", csv.str());
  write_text_file(a.out_dir + "/misfit_minus_gain_vs_k.svg",
                  svg_line_plot(xs, ys, "k", "median(misfit - gain) (nats)",
                                "misfit minus gain vs k"));
  nlohmann::json top;
  top["manifest"] = manifest;
  top["per_k"] = summary;
  write_text_file(a.out_dir + "/sweep_summary.json", top.dump(2) + "\n");
  std::cout << csv.str();
  return 0;
}

int cmd_verify_geometry(const CommonArgs& a, int samples, double tol_residual,
                        double tol_slack) {
  ensure_out(a);
  nlohmann::json rep;
  rep["manifest"] = {{"command", "verify-geometry"},
                     {"seed", a.seed},
                     {"samples", samples},
                     {"tol_residual", tol_residual},
                     {"tol_slack", tol_slack}};
  bool ok = true;

  auto gens = {Generator::l2(3),
               Generator::neg_entropy_binary(),
               Generator::neg_entropy_multiclass(3),
               Generator::neg_entropy_multiclass(10),
               Generator::logistic(2),
               Generator::itakura_saito(2)};
  for (const auto& gen : gens) {
    RngStream rng = RngStream::derive(a.seed, to_string(gen.kind()));
    double worst_cos = 0.0, worst_dual = 0.0;
    nlohmann::json offender;
    for (int t = 0; t < samples; ++t) {
      Vec x = random_interior_point(gen, rng);
      Vec y = random_interior_point(gen, rng);
      Vec z = random_interior_point(gen, rng);
      double rc = std::abs(gen.law_of_cosines_residual(x, y, z));
      double rd = gen.duality_residual(x, y);
      if (rc > worst_cos || rd > worst_dual) {
        offender = {{"x", std::vector<double>(x.data(), x.data() + x.size())},
                    {"y", std::vector<double>(y.data(), y.data() + y.size())},
                    {"z", std::vector<double>(z.data(), z.data() + z.size())}};
      }
      worst_cos = std::max(worst_cos, rc);
      worst_dual = std::max(worst_dual, rd);
    }
    bool gok = worst_cos <= tol_residual && worst_dual <= tol_residual;
    ok = ok && gok;
    rep["generators"][to_string(gen.kind())] = {
        {"worst_law_of_cosines", worst_cos},
        {"worst_duality", worst_dual},
        {"pass", gok},
        {"worst_sample", offender}};
  }

  {
    Generator gen = Generator::neg_entropy_multiclass(3);
    RngStream rng = RngStream::derive(a.seed, "pythagorean");
    double min_slack = kInf;
    for (int t = 0; t < samples; ++t) {
      int m = 2 + static_cast<int>(rng.next_index(4));
      Eigen::MatrixXd pts(m, 2);
      for (int i = 0; i < m; ++i)
        pts.row(i) = random_simplex_point(3, rng).p.head(2).transpose();
      ConvexHullSet hull = ConvexHullSet::of_points(pts);
      Vec z = random_simplex_point(3, rng).p.head(2);
      Vec xw = random_simplex_point(m, rng).p;
      min_slack = std::min(min_slack, pythagorean_slack(gen, hull, z, xw));
    }
    bool pok = min_slack >= tol_slack;
    ok = ok && pok;
    rep["pythagorean"] = {{"min_slack", min_slack}, {"pass", pok}};
  }

  rep["pass"] = ok;
  write_text_file(a.out_dir + "/verify_geometry.json", rep.dump(2) + "\n");
  std::cout << rep.dump(2) << "\n";
  return ok ? 0 : 1;
}

int cmd_verify_bounds(const CommonArgs& a, int trials) {
  ensure_out(a);
  nlohmann::json rep;
  rep["manifest"] = {{"command", "verify-bounds"},
                     {"seed", a.seed},
                     {"trials", trials}};
  bool ok = true;

  for (int c : {2, 3, 5}) {
    Generator gen = Generator::neg_entropy_multiclass(c);
    RngStream arng = RngStream::derive(a.seed, "atoms", c);
    int m = 4;
    Eigen::MatrixXd atoms(m, c - 1);
    double last_min = kInf;
    for (int i = 0; i < m; ++i) {
      ProbVector p = random_simplex_point(c, arng, 0.02);
      atoms.row(i) = p.p.head(c - 1).transpose();
      last_min = std::min(last_min, p.p[c - 1]);
    }
    Vec aa(c);
    for (int i = 0; i < c - 1; ++i) aa[i] = 1.0 / atoms.col(i).minCoeff();
    aa[c - 1] = 1.0 / last_min;
    Vec probs = Vec::Constant(m, 1.0 / m);
    for (int k : {1, 2, 5, 25}) {
      JensenGapReport jr = jensen_gap_estimate(
          gen, atoms, probs, k, trials, RngStream::derive(a.seed, "mc", c, k));
      EntropyGapBound b = jensen_gap_entropy_bound(aa, k);
      bool jok = jr.estimate <= b.tighter + 3.0 * jr.stderr_est;
      ok = ok && jok;
      rep["jensen"].push_back({{"c", c},
                               {"k", k},
                               {"estimate", jr.estimate},
                               {"stderr", jr.stderr_est},
                               {"bound_tighter", b.tighter},
                               {"bound_looser", b.looser},
                               {"pass", jok}});
    }
  }

  RngStream prng = RngStream::derive(a.seed, "pairs");
  double min_pinsker = kInf, min_loginf = kInf;
  for (int t = 0; t < trials; ++t) {
    int c = 2 + static_cast<int>(prng.next_index(4));
    ProbVector p = random_simplex_point(c, prng);
    ProbVector q = random_simplex_point(c, prng);
    min_pinsker = std::min(min_pinsker, pinsker_slack(p, q));
    min_loginf = std::min(min_loginf, kl_loginf_bound_slack(p, q));
  }
  bool sok = min_pinsker >= -1e-12 && min_loginf >= -1e-12;
  ok = ok && sok;
  rep["pinsker_min_slack"] = min_pinsker;
  rep["kl_loginf_min_slack"] = min_loginf;
  rep["slack_pass"] = sok;
  rep["pass"] = ok;
  write_text_file(a.out_dir + "/verify_bounds.json", rep.dump(2) + "\n");
  std::cout << rep.dump(2) << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bregman geometry and weak-to-strong synthetic experiments"};
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, geo_args, bnd_args;
  std::vector<int> ks = {1, 10, 50, 100};
  int geo_samples = 1000, bnd_trials = 100000;
  double geo_tol_residual = 1e-9, geo_tol_slack = -1e-6;

  CLI::App* run = app.add_subcommand("run-synthetic", "run the pipeline once");
  add_common(run, &run_args);
  CLI::App* sweep = app.add_subcommand("sweep-k", "run for several k");
  add_common(sweep, &sweep_args);
  sweep->add_option("--ks", ks, "ensemble sizes");
  CLI::App* geo =
      app.add_subcommand("verify-geometry", "divergence identity suite");
  add_common(geo, &geo_args);
  geo->add_option("--samples", geo_samples, "triples per generator");
  geo->add_option("--tol-residual", geo_tol_residual, "identity tolerance");
  geo->add_option("--tol-slack", geo_tol_slack, "pythagorean slack floor");
  CLI::App* bnd = app.add_subcommand("verify-bounds", "appendix bound suite");
  add_common(bnd, &bnd_args);
  bnd->add_option("--trials", bnd_trials, "monte-carlo trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    if (run->parsed()) return cmd_run_synthetic(run_args);
    if (sweep->parsed()) return cmd_sweep_k(sweep_args, ks);
    if (geo->parsed())
      return cmd_verify_geometry(geo_args, geo_samples, geo_tol_residual,
                                 geo_tol_slack);
    if (bnd->parsed()) return cmd_verify_bounds(bnd_args, bnd_trials);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
