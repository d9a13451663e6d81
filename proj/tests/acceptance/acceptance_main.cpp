// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one pass/fail line per criterion. Run with no arguments
// to execute all criteria, or pass criterion numbers (e.g. "./acceptance 3 5")
// to run a subset. Exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "doadef/attack/attack.hpp"
#include "doadef/classical/esprit.hpp"
#include "doadef/defense/def_transformer.hpp"
#include "doadef/doa/classifier.hpp"
#include "doadef/harness/experiment.hpp"
#include "doadef/harness/metrics.hpp"
#include "doadef/kernels.hpp"
#include "doadef/sim/dataset.hpp"

using namespace doadef;
namespace fs = std::filesystem;

namespace {

double now_s() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------
// Desk-scale fixtures shared between criteria (built lazily, trained once).

struct Workspace {
  // Reduced single-source recipe: 41 angles x 5 SNRs x 10 samples.
  sim::DatasetConfig desk_config() const {
    sim::DatasetConfig cfg;
    cfg.num_sources = 1;
    cfg.snr_grid_db = {-2.0, 1.0, 4.0, 7.0, 10.0};
    cfg.grid = {-20.0, 20.0, 1.0};
    cfg.samples_per_doa = 10;
    cfg.snapshots = 1024;
    cfg.seed = 1001;
    cfg.val_divisor = 2;
    return cfg;
  }

  const sim::Dataset& dataset() {
    if (!data_) data_ = sim::build_dataset(desk_config());
    return *data_;
  }

  doa::DoaClassifier& baseline() {
    if (!baseline_) {
      doa::ClassifierConfig cfg;
      cfg.element_count = 8;
      cfg.num_sources = 1;
      cfg.grid = desk_config().grid;
      cfg.conv_channels = {16, 32};
      cfg.fc_hidden = {64};
      baseline_ = std::make_unique<doa::DoaClassifier>(cfg, 2001);
      doa::TrainConfig tc;
      tc.epochs = 10;
      tc.batch_size = 64;
      tc.seed = 2002;
      doa::train_classifier(*baseline_, dataset(), tc);
    }
    return *baseline_;
  }

  // Clean/PGD-5 pairs (training attack config, SIR 10 dB) for every record.
  const defense::PairedDataset& pairs() {
    if (!pairs_) {
      const sim::Dataset& data = dataset();
      doa::DoaClassifier& model = baseline();
      const attack::AttackConfig atk = attack::AttackConfig::training_default();
      defense::PairedDataset p;
      p.clean = data.samples;
      p.adv.resize(data.size());
      for (std::int64_t i = 0; i < data.size(); ++i) {
        const auto raw = attack::pgd(data.samples[i], data.labels[i], model, atk);
        p.adv[i] =
            attack::scale_to_sir(data.samples[i], raw.x_adv, atk.target_sir_db).x_adv;
      }
      p.train_count = data.train_count;
      p.val_count = data.val_count;
      pairs_ = std::move(p);
    }
    return *pairs_;
  }

  defense::DefTransformerConfig desk_defense_config() const {
    defense::DefTransformerConfig cfg;
    cfg.embed_dim = 32;
    cfg.stages = 2;
    cfg.layers_per_stage = 4;
    cfg.window = 8;
    cfg.anchor_downsample = 2;
    cfg.ffn_ratio = 2;
    cfg.alpha = 0.25;
    return cfg;
  }

  defense::DefTransformer& purifier() {
    if (!purifier_) {
      purifier_ = std::make_unique<defense::DefTransformer>(desk_defense_config(), 3001);
      defense::DefenseTrainConfig tc;
      tc.epochs = 10;
      tc.batch_size = 64;
      tc.schedule_sources = 1;
      tc.seed = 3002;
      purifier_log_ = defense::train_defense(*purifier_, pairs(), tc);
    }
    return *purifier_;
  }
  const defense::DefenseTrainLog& purifier_log() {
    purifier();
    return purifier_log_;
  }

 private:
  std::optional<sim::Dataset> data_;
  std::unique_ptr<doa::DoaClassifier> baseline_;
  std::optional<defense::PairedDataset> pairs_;
  std::unique_ptr<defense::DefTransformer> purifier_;
  defense::DefenseTrainLog purifier_log_;
};

Workspace ws;

// ---------------------------------------------------------------------------
// Criterion 1: attack constraint exactness.

bool criterion1(std::string& detail) {
  doa::DoaClassifier& model = ws.baseline();
  const sim::Dataset& data = ws.dataset();

  double max_linf_excess = -1e300;
  double max_sir_err = 0.0;
  Rng rng(42);
  const int runs = 1000;
  for (int r = 0; r < runs; ++r) {
    const std::int64_t idx = rng.uniform_int(static_cast<int>(data.size()));
    attack::AttackConfig cfg = attack::AttackConfig::evaluation_default(
        r % 2 == 0 ? attack::Method::kPgd : attack::Method::kMim);
    const auto raw = attack::run_attack(data.samples[idx], data.labels[idx], model, cfg);
    double linf = 0.0;
    for (double d : raw.delta.v) linf = std::max(linf, std::abs(d));
    max_linf_excess = std::max(max_linf_excess, linf - cfg.bound);

    const auto scaled = attack::scale_to_sir(data.samples[idx], raw.x_adv, 10.0);
    if (std::isfinite(scaled.achieved_sir_db))
      max_sir_err = std::max(max_sir_err, std::abs(scaled.achieved_sir_db - 10.0));
    else
      return false;  // zero perturbation from a trained model would be suspect
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "max linf excess %.3g (<=1e-12), max SIR err %.3g dB (<=1e-6)",
                max_linf_excess, max_sir_err);
  detail = buf;
  return max_linf_excess <= 1e-12 && max_sir_err <= 1e-6;
}

// ---------------------------------------------------------------------------
// Criterion 2: ESPRIT oracle validates the simulator.

bool criterion2(std::string& detail) {
  const auto geo = sim::ArrayGeometry::ula(8);
  sim::SourceScenario sc;
  sc.num_sources = 2;
  sc.angles_deg = {-20.0, 35.0};
  sc.snr_db = 20.0;
  sc.snapshots = 2048;
  int hits = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    const auto snap = sim::collect_snapshots(sc, geo, static_cast<std::uint64_t>(500 + s));
    const auto est = classical::esprit_estimate(sim::sample_covariance(snap), 2, geo);
    if (std::abs(est.angles_deg[0] + 20.0) <= 0.5 &&
        std::abs(est.angles_deg[1] - 35.0) <= 0.5)
      ++hits;
  }
  detail = std::to_string(hits) + "/50 trials within 0.5 deg (need >= 48)";
  return hits >= 48;
}

// ---------------------------------------------------------------------------
// Criterion 3: dataset identities.

bool criterion3(std::string& detail) {
  const auto single = sim::plan_dataset(sim::DatasetConfig::single_source_default(0));
  const auto dual = sim::plan_dataset(sim::DatasetConfig::dual_source_default(0));
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "single-source train=%lld (want 23530), dual pairs=%lld (want 7260)",
                static_cast<long long>(single.train_count),
                static_cast<long long>(dual.distinct_doa_combinations));
  detail = buf;
  return single.train_count == 23530 && dual.distinct_doa_combinations == 7260;
}

// ---------------------------------------------------------------------------
// Criterion 4: numerical correctness of both networks.

bool fd_check_classifier(doa::DoaClassifier& model, Rng& rng, double& worst_rel) {
  Tensor x({3, 8, 8});
  for (double& v : x.v) v = rng.normal();
  doa::DoaClassifier::Cache cache;
  model.forward(x, cache);
  Tensor ones({model.grid_size()});
  ones.fill(1.0);
  const Tensor analytic = model.backward(ones, cache, false);

  const double h = 1e-5;
  double max_num = 0.0, max_err = 0.0;
  for (int probe = 0; probe < 8; ++probe) {
    const std::size_t i = rng.uniform_int(static_cast<int>(x.size()));
    Tensor xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    double sp = 0.0, sm = 0.0;
    for (double v : model.forward(xp).v) sp += v;
    for (double v : model.forward(xm).v) sm += v;
    const double numeric = (sp - sm) / (2.0 * h);
    max_num = std::max(max_num, std::abs(numeric));
    max_err = std::max(max_err, std::abs(numeric - analytic[i]));
  }
  const double rel = max_err / std::max(max_num, 1e-9);
  worst_rel = std::max(worst_rel, rel);
  return rel <= 1e-3;
}

bool fd_check_defense(defense::DefTransformer& model, Rng& rng, double& worst_rel) {
  Tensor x({3, 8, 8});
  for (double& v : x.v) v = rng.normal();
  Tensor w({3, 8, 8});
  for (double& v : w.v) v = rng.normal();

  defense::DefTransformer::Cache cache;
  model.forward(x, cache);
  const Tensor analytic = model.backward(w, cache, false);

  const double h = 1e-6;
  double max_num = 0.0, max_err = 0.0;
  for (int probe = 0; probe < 6; ++probe) {
    const std::size_t i = rng.uniform_int(static_cast<int>(x.size()));
    Tensor xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const Tensor yp = model.reconstruct(xp);
    const Tensor ym = model.reconstruct(xm);
    double sp = 0.0, sm = 0.0;
    for (std::size_t e = 0; e < yp.size(); ++e) {
      sp += w[e] * yp[e];
      sm += w[e] * ym[e];
    }
    const double numeric = (sp - sm) / (2.0 * h);
    max_num = std::max(max_num, std::abs(numeric));
    max_err = std::max(max_err, std::abs(numeric - analytic[i]));
  }
  const double rel = max_err / std::max(max_num, 1e-9);
  worst_rel = std::max(worst_rel, rel);
  return rel <= 1e-3;
}

bool criterion4(std::string& detail) {
  Rng rng(4040);
  bool ok = true;
  double worst_rel = 0.0;

  // >= 10 random probes across both networks; the defense model uses the
  // full-scale architecture (embed 64, 4 stages x 4 layers).
  doa::ClassifierConfig ccfg;
  ccfg.element_count = 8;
  ccfg.num_sources = 1;
  ccfg.grid = {-20.0, 20.0, 1.0};
  ccfg.conv_channels = {12, 16};
  ccfg.fc_hidden = {32};
  doa::DoaClassifier cnn(ccfg, 4001);
  for (int probe = 0; probe < 6; ++probe) ok = fd_check_classifier(cnn, rng, worst_rel) && ok;

  defense::DefTransformerConfig full;
  defense::DefTransformer big(full, 4002);
  for (int probe = 0; probe < 6; ++probe) ok = fd_check_defense(big, rng, worst_rel) && ok;

  // Attention row-stochasticity on a live forward pass.
  double worst_row_dev = 0.0;
  {
    Tensor x({3, 8, 8});
    for (double& v : x.v) v = rng.normal();
    defense::DefTransformer::Cache cache;
    big.forward(x, cache);
    auto scan_rows = [&](const Tensor& m) {
      for (int i = 0; i < m.shape[0]; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.shape[1]; ++j) s += m.at(i, j);
        worst_row_dev = std::max(worst_row_dev, std::abs(s - 1.0));
      }
    };
    for (const auto& layer : cache.layers) {
      for (const auto& stripe : layer.assa.stripes) {
        scan_rows(stripe.parts.me);
        scan_rows(stripe.parts.md);
      }
      for (const auto& win : layer.win.windows) scan_rows(win.parts.attn);
    }
    ok = ok && worst_row_dev <= 1e-6;
  }

  // Zero-weight transformer layers are identity maps.
  bool identity_ok = true;
  {
    defense::DefTransformerConfig cfg;
    cfg.embed_dim = 16;
    cfg.stages = 1;
    Rng lrng(4003);
    for (int li = 0; li < 4; ++li) {
      defense::TransformerLayer layer;
      layer.init("probe", cfg, defense::stripe_pattern_for_layer(li), lrng);
      std::vector<nn::Param*> params;
      layer.collect(params);
      for (auto* p : params) p->value.fill(0.0);
      const auto stripes = defense::build_stripes(8, 8, cfg.window, layer.pattern);
      const auto windows = defense::build_windows(8, 8, cfg.window);
      Tensor tokens({64, cfg.embed_dim});
      for (double& v : tokens.v) v = lrng.normal();
      const Tensor out = layer.forward(tokens, stripes, windows, nullptr);
      for (std::size_t i = 0; i < tokens.size(); ++i)
        if (std::abs(out[i] - tokens[i]) > 1e-12) identity_ok = false;
    }
    ok = ok && identity_ok;
  }

  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "worst FD rel err %.3g (<=1e-3), worst attention row dev %.3g (<=1e-6), "
                "zero-weight identity %s",
                worst_rel, worst_row_dev, identity_ok ? "ok" : "BROKEN");
  detail = buf;
  return ok;
}

// ---------------------------------------------------------------------------
// Criterion 5: FLOP formulas.

bool criterion5(std::string& detail) {
  const double assa = defense::assa_flop_estimate(64, 64, 2);
  const double global = defense::global_flop_estimate(64, 64);
  bool ok = assa == 1310720.0 && global == 1572864.0;
  Rng rng(5050);
  for (int t = 0; t < 100; ++t) {
    const std::int64_t eta = 1 + rng.uniform_int(1024);
    const std::int64_t c = 1 + rng.uniform_int(512);
    const std::int64_t s = 2 + rng.uniform_int(9);
    if (!(defense::assa_flop_estimate(eta, c, s) < defense::global_flop_estimate(eta, c)))
      ok = false;
  }
  char buf[140];
  std::snprintf(buf, sizeof(buf),
                "assa(64,64,2)=%.0f, global(64,64)=%.0f, 100-triple sweep %s", assa, global,
                ok ? "ok" : "violated");
  detail = buf;
  return ok;
}

// ---------------------------------------------------------------------------
// Criterion 6: desk-scale trend reproduction.

struct EvalResult {
  double nodef_rmse, nodef_acc;
  double tadd_rmse, tadd_acc;
  double taddn_rmse;
  double baseline_rmse;
};

EvalResult evaluate_at_snr6(attack::Method method) {
  doa::DoaClassifier& baseline = ws.baseline();
  defense::DefTransformer& purifier = ws.purifier();
  const auto grid = baseline.config().grid;
  attack::AttackConfig atk = attack::AttackConfig::evaluation_default(method);

  std::vector<std::vector<double>> nodef, tadd, taddn, base, truth;
  for (int gi = 0; gi < 40; ++gi) {
    const double ang = -19.5 + gi;
    sim::SourceScenario sc;
    sc.num_sources = 1;
    sc.angles_deg = {ang};
    sc.snr_db = 6.0;
    sc.snapshots = 1024;
    Rng rng = Rng::derive(6001 + static_cast<int>(method), gi);
    const std::vector<int> label{grid.nearest_index(ang)};
    for (int s = 0; s < 5; ++s) {
      const auto snap = sim::collect_snapshots(sc, sim::ArrayGeometry::ula(8), rng);
      const Tensor clean = sim::encode_covariance_tensor(sim::sample_covariance(snap));
      const auto raw = attack::run_attack(clean, label, baseline, atk);
      const Tensor attacked =
          attack::scale_to_sir(clean, raw.x_adv, atk.target_sir_db).x_adv;
      truth.push_back({ang});
      nodef.push_back(doa::decode_angles(baseline.forward(attacked), grid, 1));
      tadd.push_back(
          doa::decode_angles(baseline.forward(purifier.reconstruct(attacked)), grid, 1));
      taddn.push_back(
          doa::decode_angles(baseline.forward(purifier.reconstruct(clean)), grid, 1));
      base.push_back(doa::decode_angles(baseline.forward(clean), grid, 1));
    }
  }
  EvalResult r;
  r.nodef_rmse = harness::rmse(nodef, truth);
  r.nodef_acc = harness::accuracy(nodef, truth, 2.0);
  r.tadd_rmse = harness::rmse(tadd, truth);
  r.tadd_acc = harness::accuracy(tadd, truth, 2.0);
  r.taddn_rmse = harness::rmse(taddn, truth);
  r.baseline_rmse = harness::rmse(base, truth);
  return r;
}

bool criterion6(std::string& detail) {
  const EvalResult pgd = evaluate_at_snr6(attack::Method::kPgd);
  const EvalResult mim = evaluate_at_snr6(attack::Method::kMim);

  const bool a = pgd.nodef_acc < 30.0;
  const bool b = pgd.tadd_rmse <= 0.5 * pgd.nodef_rmse;
  const bool c = pgd.taddn_rmse <= 2.0 * pgd.baseline_rmse;
  const bool d = mim.tadd_rmse <= 0.5 * mim.nodef_rmse;

  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "PGD-10: NoDef acc %.1f%% (<30) rmse %.2f, T-ADD rmse %.2f (<=%.2f), "
                "T-ADD-N clean rmse %.2f (<=%.2f), Baseline clean rmse %.2f | "
                "MIM-10: NoDef rmse %.2f, T-ADD rmse %.2f (<=%.2f)",
                pgd.nodef_acc, pgd.nodef_rmse, pgd.tadd_rmse, 0.5 * pgd.nodef_rmse,
                pgd.taddn_rmse, 2.0 * pgd.baseline_rmse, pgd.baseline_rmse, mim.nodef_rmse,
                mim.tadd_rmse, 0.5 * mim.nodef_rmse);
  detail = buf;
  return a && b && c && d;
}

// ---------------------------------------------------------------------------
// Criterion 7: ablation directions.

defense::PairedDataset subset_pairs(const defense::PairedDataset& all, std::int64_t train,
                                    std::int64_t val) {
  defense::PairedDataset out;
  out.train_count = std::min(train, all.train_count);
  out.val_count = std::min(val, all.val_count);
  for (std::int64_t i = 0; i < out.train_count; ++i) {
    out.clean.push_back(all.clean[i]);
    out.adv.push_back(all.adv[i]);
  }
  for (std::int64_t i = 0; i < out.val_count; ++i) {
    out.clean.push_back(all.clean[all.train_count + i]);
    out.adv.push_back(all.adv[all.train_count + i]);
  }
  return out;
}

bool criterion7(std::string& detail) {
  const auto data = subset_pairs(ws.pairs(), 1025, 510);

  auto train_variant = [&](double alpha, defense::DefTransformerConfig::ReconNorm norm,
                           defense::DefenseTrainLog& log) {
    defense::DefTransformerConfig cfg = ws.desk_defense_config();
    cfg.alpha = alpha;
    cfg.recon_norm = norm;
    defense::DefTransformer model(cfg, 7001);
    defense::DefenseTrainConfig tc;
    tc.epochs = 6;
    tc.batch_size = 64;
    tc.schedule_sources = 1;
    tc.seed = 7002;
    log = defense::train_defense(model, data, tc);
  };

  using Norm = defense::DefTransformerConfig::ReconNorm;
  defense::DefenseTrainLog log_a025, log_a100, log_mse;
  train_variant(0.25, Norm::kL1, log_a025);
  train_variant(1.0, Norm::kL1, log_a100);
  train_variant(0.25, Norm::kMse, log_mse);

  const double adv_a025 = log_a025.val_adv_recon.back();
  const double adv_a100 = log_a100.val_adv_recon.back();
  const double rec_l1 = log_a025.val_recon.back();
  const double rec_mse = log_mse.val_recon.back();
  const double adv_mse = log_mse.val_adv_recon.back();

  const bool alpha_order = adv_a025 <= adv_a100;
  const bool l1_order = rec_l1 <= rec_mse && adv_a025 <= adv_mse;
  // Clean samples reconstruct more easily than adversarial ones.
  const bool recon_below_adv = rec_l1 < adv_a025;

  char buf[260];
  std::snprintf(buf, sizeof(buf),
                "val L_adv_recon: a=0.25 %.4f <= a=1.0 %.4f: %s; L1 (%.4f/%.4f) <= "
                "MSE-trained (%.4f/%.4f): %s; L_recon < L_adv_recon: %s",
                adv_a025, adv_a100, alpha_order ? "yes" : "NO", rec_l1, adv_a025, rec_mse,
                adv_mse, l1_order ? "yes" : "NO", recon_below_adv ? "yes" : "NO");
  detail = buf;
  return alpha_order && l1_order && recon_below_adv;
}

// ---------------------------------------------------------------------------
// Criterion 8: metric oracles.

bool criterion8(std::string& detail) {
  bool ok = true;
  auto approx_eq = [](double a, double b) { return std::abs(a - b) <= 1e-9; };

  ok = ok && harness::rmse({{10.0}}, {{10.0}}) == 0.0;
  ok = ok && approx_eq(harness::rmse({{13.0}}, {{10.0}}), 3.0);
  ok = ok && approx_eq(harness::rmse({{13.0}, {14.0}}, {{10.0}, {10.0}}), std::sqrt(12.5));
  ok = ok && harness::accuracy({{1.0}}, {{1.0}}, 2.0) == 100.0;
  ok = ok && harness::accuracy({{12.0}}, {{10.0}}, 2.0) == 100.0;  // inclusive boundary
  ok = ok && approx_eq(harness::accuracy({{11.0}, {13.0}}, {{10.0}, {10.0}}, 2.0), 50.0);

  const auto w_same = harness::welch_t_test({1.0, 2.0, 3.0, 4.0}, {1.0, 2.0, 3.0, 4.0});
  ok = ok && w_same.t == 0.0 && approx_eq(w_same.p, 1.0);
  const auto w_diff =
      harness::welch_t_test({0.0, 0.0, 0.0, 0.0, 0.0}, {10.0, 10.0, 10.0, 10.0, 11.0});
  ok = ok && w_diff.p < 0.001;

  // Zero-step attacks reproduce clean behavior bit-exactly.
  const sim::Dataset& data = ws.dataset();
  doa::DoaClassifier& model = ws.baseline();
  attack::AttackConfig atk = attack::AttackConfig::evaluation_default(attack::Method::kPgd);
  atk.steps = 0;
  bool zero_ok = true;
  for (int i = 0; i < 20; ++i) {
    const auto raw = attack::run_attack(data.samples[i], data.labels[i], model, atk);
    const auto scaled = attack::scale_to_sir(data.samples[i], raw.x_adv, atk.target_sir_db);
    if (scaled.x_adv.v != data.samples[i].v) zero_ok = false;
    if (model.forward(scaled.x_adv).v != model.forward(data.samples[i]).v) zero_ok = false;
  }
  ok = ok && zero_ok;

  detail = std::string("hand-value oracles ") + (ok ? "match at 1e-9" : "MISMATCH") +
           ", zero-step attack bit-exact: " + (zero_ok ? "yes" : "NO");
  return ok;
}

// ---------------------------------------------------------------------------
// Criterion 9: evaluate determinism.

bool criterion9(std::string& detail) {
  const fs::path root = fs::temp_directory_path() / "doadef_acceptance_c9";
  fs::remove_all(root);
  fs::create_directories(root);

  // Small but complete pipeline: the run exercises attacks, purification,
  // ESPRIT and CSV emission end to end, twice, under one seed.
  doa::ClassifierConfig ccfg;
  ccfg.element_count = 8;
  ccfg.num_sources = 1;
  ccfg.grid = {-10.0, 10.0, 2.0};
  ccfg.conv_channels = {6};
  ccfg.fc_hidden = {12};
  doa::DoaClassifier(ccfg, 9001).save((root / "baseline").string());
  defense::DefTransformerConfig dcfg;
  dcfg.embed_dim = 8;
  dcfg.stages = 1;
  defense::DefTransformer(dcfg, 9002).save((root / "defense").string());

  harness::ExperimentConfig cfg;
  cfg.axis = "snr";
  cfg.values = {"-4", "2", "8"};
  cfg.num_sources = 1;
  cfg.baseline_ckpt = (root / "baseline").string();
  cfg.defense_ckpt = (root / "defense").string();
  cfg.test_grid = {-9.0, 7.0, 4.0};
  cfg.angle_offset_deg = 0.5;
  cfg.samples_per_doa = 2;
  cfg.snapshots = 128;
  cfg.seed = 999;

  harness::write_result_csv(harness::run_experiment(cfg), (root / "a.csv").string());
  harness::write_result_csv(harness::run_experiment(cfg), (root / "b.csv").string());

  std::ifstream fa(root / "a.csv", std::ios::binary), fb(root / "b.csv", std::ios::binary);
  const std::string a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  detail = "two runs, " + std::to_string(a.size()) + " bytes each, " +
           (a == b && !a.empty() ? "byte-identical" : "DIFFER");
  return a == b && !a.empty();
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int number;
    const char* title;
    bool (*fn)(std::string&);
  };
  const Criterion criteria[] = {
      {1, "attack constraint exactness (linf bound, SIR 10 dB +- 1e-6)", criterion1},
      {2, "simulator validity via the ESPRIT oracle", criterion2},
      {3, "dataset count identities (23,530 / 7,260)", criterion3},
      {4, "finite-difference gradients, attention rows, identity layers", criterion4},
      {5, "attention FLOP formulas", criterion5},
      {6, "desk-scale defense trend reproduction", criterion6},
      {7, "ablation direction (alpha and L1-vs-MSE ordering)", criterion7},
      {8, "metric oracles and zero-step attack equivalence", criterion8},
      {9, "evaluate determinism (byte-identical CSVs)", criterion9},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const double t0 = now_s();
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %d: %s (%.1fs) -- %s\n", ok ? "PASS" : "FAIL", c.number,
                c.title, now_s() - t0, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures == 0)
    std::printf("all criteria passed\n");
  else
    std::printf("%d criteria FAILED\n", failures);
  return failures;
}
