// SPDX-License-Identifier: Apache-2.0

// Command-line front end: gen-data, train-doa, attack, train-defense,
// evaluate, report. Config files are UTF-8 JSON; see README for the schemas.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "doadef/attack/attack.hpp"
#include "doadef/defense/def_transformer.hpp"
#include "doadef/doa/classifier.hpp"
#include "doadef/harness/experiment.hpp"
#include "doadef/harness/metrics.hpp"
#include "doadef/kernels.hpp"
#include "doadef/sim/dataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace doadef;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Relative output paths resolve under $DOADEF_RESULTS_ROOT when it is set.
std::string resolve_out(const std::string& path) {
  const char* root = std::getenv("DOADEF_RESULTS_ROOT");
  if (!root || *root == '\0' || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

int cmd_gen_data(const std::string& config_path, const std::string& out,
                 std::optional<std::uint64_t> seed) {
  sim::DatasetConfig cfg = sim::dataset_config_from_json(read_file(config_path));
  if (seed) cfg.seed = *seed;
  const auto plan = sim::generate_container(cfg, resolve_out(out));
  std::cout << "wrote " << plan.total() << " samples (" << plan.train_count << " train, "
            << plan.val_count << " val; " << plan.distinct_doa_combinations
            << " distinct DOA combinations) to " << resolve_out(out) << "\n";
  return 0;
}

int cmd_train_doa(const std::string& data_dir, const std::string& config_path,
                  const std::string& out, std::uint64_t seed, bool verbose) {
  const sim::Dataset data = sim::read_container(data_dir);
  json j = json::parse(read_file(config_path));

  doa::ClassifierConfig cfg;
  cfg.element_count = data.element_count;
  cfg.num_sources = data.num_sources;
  cfg.grid = data.grid;
  if (j.contains("conv_channels")) cfg.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  if (j.contains("fc_hidden")) cfg.fc_hidden = j.at("fc_hidden").get<std::vector<int>>();

  doa::TrainConfig tc;
  tc.epochs = j.value("epochs", 30);
  tc.batch_size = j.value("batch_size", 64);
  tc.lr = j.value("lr", 1e-3);
  tc.seed = seed;
  tc.verbose = verbose;

  doa::DoaClassifier model(cfg, seed);
  const auto log = doa::train_classifier(model, data, tc);
  const std::string out_dir = resolve_out(out);
  model.save(out_dir);
  json curve;
  curve["epoch_loss"] = log.epoch_loss;
  curve["first_epoch_step_loss"] = log.first_step_loss;
  std::ofstream(fs::path(out_dir) / "training_log.json") << curve.dump(2) << "\n";
  std::cout << "trained " << tc.epochs << " epochs, final loss "
            << log.epoch_loss.back() << ", checkpoint at " << out_dir << "\n";
  return 0;
}

int cmd_attack(const std::string& model_dir, const std::string& data_dir,
               const std::string& method, int steps, double step_size, double eps,
               double omega, double sir, double zeta, const std::string& out) {
  doa::DoaClassifier model = doa::DoaClassifier::load(model_dir);
  sim::Dataset data = sim::read_container(data_dir);

  attack::AttackConfig cfg;
  cfg.method = attack::method_from_string(method);
  cfg.steps = steps;
  cfg.step_size = step_size;
  cfg.bound = eps;
  cfg.momentum_decay = omega;
  cfg.target_sir_db = sir;

  json report;
  report["attack"] = {{"method", method},     {"steps", steps}, {"step_size", step_size},
                      {"bound", eps},         {"omega", omega}, {"target_sir_db", sir},
                      {"zeta_deg", zeta}};
  json per_sample = json::array();

  sim::Dataset out_data = data;
  std::int64_t successes = 0;
  for (std::int64_t i = 0; i < data.size(); ++i) {
    const auto raw = attack::run_attack(data.samples[i], data.labels[i], model, cfg);
    const auto scaled = attack::scale_to_sir(data.samples[i], raw.x_adv, sir);
    out_data.samples[i] = scaled.x_adv;
    const auto pred =
        doa::decode_angles(model.forward(scaled.x_adv), model.config().grid, data.num_sources);
    const int success = attack::attack_success(pred, data.angles[i], zeta);
    successes += success;
    per_sample.push_back(json{{"index", i},
                              {"achieved_sir_db", scaled.achieved_sir_db},
                              {"success", success}});
  }
  report["samples"] = std::move(per_sample);
  report["success_rate"] =
      data.size() ? static_cast<double>(successes) / static_cast<double>(data.size()) : 0.0;

  const std::string out_dir = resolve_out(out);
  sim::write_container_files(out_data, out_dir);
  json manifest = json::parse(read_file((fs::path(data_dir) / "manifest.json").string()));
  manifest["attack"] = report["attack"];
  std::ofstream(fs::path(out_dir) / "manifest.json") << manifest.dump(2) << "\n";
  std::ofstream(fs::path(out_dir) / "attack_report.json") << report.dump(2) << "\n";
  std::cout << "attacked " << data.size() << " samples, success rate "
            << report["success_rate"].get<double>() << ", container at " << out_dir << "\n";
  return 0;
}

int cmd_train_defense(const std::string& clean_dir, const std::string& adv_dir,
                      const std::string& config_path, std::optional<double> alpha,
                      const std::string& out, std::uint64_t seed,
                      std::optional<int> epochs, bool verbose) {
  const sim::Dataset clean = sim::read_container(clean_dir);
  const sim::Dataset adv = sim::read_container(adv_dir);
  if (clean.size() != adv.size())
    throw std::invalid_argument("clean/adversarial containers are unpaired");

  defense::DefTransformerConfig cfg = defense::DefTransformerConfig::from_json(read_file(config_path));
  if (alpha) cfg.alpha = *alpha;

  json j = json::parse(read_file(config_path));
  defense::DefenseTrainConfig tc;
  tc.epochs = epochs ? *epochs : j.value("epochs", 30);
  tc.batch_size = j.value("batch_size", 64);
  tc.lr = j.value("lr", 1e-3);
  tc.schedule_sources = clean.num_sources;
  tc.seed = seed;
  tc.verbose = verbose;

  defense::PairedDataset pairs;
  pairs.clean = clean.samples;
  pairs.adv = adv.samples;
  pairs.train_count = clean.train_count;
  pairs.val_count = clean.val_count;

  defense::DefTransformer model(cfg, seed);
  const auto log = defense::train_defense(model, pairs, tc);
  const std::string out_dir = resolve_out(out);
  model.save(out_dir);
  json curve;
  curve["train_loss"] = log.train_loss;
  curve["val_recon"] = log.val_recon;
  curve["val_adv_recon"] = log.val_adv_recon;
  curve["lr"] = log.lr;
  std::ofstream(fs::path(out_dir) / "training_log.json") << curve.dump(2) << "\n";
  std::cout << "trained " << tc.epochs << " epochs, final val_recon "
            << log.val_recon.back() << " val_adv_recon " << log.val_adv_recon.back()
            << ", checkpoint at " << out_dir << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& out,
                 std::optional<std::uint64_t> seed, const std::string& method_filter) {
  harness::ExperimentConfig cfg = harness::ExperimentConfig::from_json_file(config_path);
  if (seed) cfg.seed = *seed;
  if (!method_filter.empty()) {
    cfg.methods.clear();
    std::string token;
    std::stringstream ss(method_filter);
    while (std::getline(ss, token, ',')) {
      if (token == "esprit") token = "ESPRIT";
      cfg.methods.push_back(token);
    }
  }
  const auto rows = harness::run_experiment(cfg);
  const std::string out_dir = resolve_out(out);
  fs::create_directories(out_dir);
  harness::write_result_csv(rows, (fs::path(out_dir) / "results.csv").string());
  std::ofstream(fs::path(out_dir) / "config_used.json") << cfg.to_json() << "\n";

  // Welch's test: T-ADD-N vs Baseline across conditions, per metric.
  std::vector<double> taddn_acc, base_acc, taddn_rmse, base_rmse;
  for (const auto& r : rows) {
    if (r.method == "T-ADD-N") {
      taddn_acc.push_back(r.accuracy_pct);
      taddn_rmse.push_back(r.rmse);
    } else if (r.method == "Baseline") {
      base_acc.push_back(r.accuracy_pct);
      base_rmse.push_back(r.rmse);
    }
  }
  if (taddn_acc.size() >= 2 && taddn_acc.size() == base_acc.size()) {
    const auto wa = harness::welch_t_test(taddn_acc, base_acc);
    const auto wr = harness::welch_t_test(taddn_rmse, base_rmse);
    json w;
    w["accuracy"] = {{"t", wa.t}, {"p", wa.p}, {"dof", wa.dof}};
    w["rmse"] = {{"t", wr.t}, {"p", wr.p}, {"dof", wr.dof}};
    w["comparison"] = "T-ADD-N vs Baseline across conditions";
    std::ofstream(fs::path(out_dir) / "welch.json") << w.dump(2) << "\n";
  }
  std::cout << "evaluated " << cfg.values.size() << " conditions, " << rows.size()
            << " rows, results at " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& format,
               const std::string& out) {
  const auto rows =
      harness::read_result_csv((fs::path(in_dir) / "results.csv").string());
  const std::string out_dir = resolve_out(out.empty() ? in_dir : out);
  harness::emit_report(rows, out_dir, format);
  std::cout << "report (" << format << ") written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarially robust DOA estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path, data_dir, model_dir, clean_dir, adv_dir, in_dir;
  std::string out, method = "pgd", format = "csv", method_filter;
  std::uint64_t seed = 0;
  bool seed_set = false, verbose = false;
  int steps = 10;
  double step_size = 0.02, eps = 0.2, omega = 1.0, sir = 10.0, zeta = 2.0;
  std::optional<double> alpha;
  std::optional<int> epochs;

  auto* gen = app.add_subcommand("gen-data", "Synthesize a dataset container");
  gen->add_option("--config", config_path)->required();
  gen->add_option("--out", out)->required();
  gen->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });

  auto* tdoa = app.add_subcommand("train-doa", "Train the DOA classifier");
  tdoa->add_option("--data", data_dir)->required();
  tdoa->add_option("--config", config_path)->required();
  tdoa->add_option("--out", out)->required();
  tdoa->add_option("--seed", seed);
  tdoa->add_flag("--verbose", verbose);

  auto* atk = app.add_subcommand("attack", "Attack a dataset container");
  atk->add_option("--model", model_dir)->required();
  atk->add_option("--data", data_dir)->required();
  atk->add_option("--method", method)->check(CLI::IsMember({"pgd", "mim"}));
  atk->add_option("--steps", steps);
  atk->add_option("--step-size", step_size);
  atk->add_option("--eps", eps);
  atk->add_option("--omega", omega);
  atk->add_option("--sir", sir);
  atk->add_option("--zeta", zeta);
  atk->add_option("--out", out)->required();

  auto* tdef = app.add_subcommand("train-defense", "Train the Def-Transformer");
  tdef->add_option("--clean", clean_dir)->required();
  tdef->add_option("--adv", adv_dir)->required();
  tdef->add_option("--config", config_path)->required();
  tdef->add_option("--alpha", alpha);
  tdef->add_option("--epochs", epochs);
  tdef->add_option("--out", out)->required();
  tdef->add_option("--seed", seed);
  tdef->add_flag("--verbose", verbose);

  auto* ev = app.add_subcommand("evaluate", "Run an experiment sweep");
  ev->add_option("--config", config_path)->required();
  ev->add_option("--out", out)->required();
  ev->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });
  ev->add_option("--method", method_filter,
                 "Comma-separated method filter (e.g. esprit)");

  auto* rep = app.add_subcommand("report", "Re-emit results as CSV or plots");
  rep->add_option("--in", in_dir)->required();
  rep->add_option("--format", format)->check(CLI::IsMember({"csv", "plots"}));
  rep->add_option("--out", out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_data(config_path, out,
                          seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt);
    if (tdoa->parsed()) return cmd_train_doa(data_dir, config_path, out, seed, verbose);
    if (atk->parsed())
      return cmd_attack(model_dir, data_dir, method, steps, step_size, eps, omega, sir,
                        zeta, out);
    if (tdef->parsed())
      return cmd_train_defense(clean_dir, adv_dir, config_path, alpha, out, seed, epochs,
                               verbose);
    if (ev->parsed())
      return cmd_evaluate(config_path, out,
                          seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
                          method_filter);
    if (rep->parsed()) return cmd_report(in_dir, format, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
