// SPDX-License-Identifier: Apache-2.0
#include "doadef/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "doadef/classical/esprit.hpp"
#include "doadef/defense/def_transformer.hpp"
#include "doadef/harness/metrics.hpp"
#include "doadef/harness/plot.hpp"

namespace doadef::harness {

using nlohmann::json;

namespace {

const char* kMethodOrder[] = {"NoDef", "T-ADD", "T-ADD-N", "Baseline", "ESPRIT"};

json geometry_to_json(const sim::ArrayGeometry& g) {
  return json{{"positions", g.positions}};
}

sim::ArrayGeometry geometry_from_json(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "ula8") return sim::ArrayGeometry::ula(8);
    if (s == "sla8") return sim::ArrayGeometry::sla8();
    throw std::invalid_argument("unknown geometry name: " + s);
  }
  return sim::ArrayGeometry(j.at("positions").get<std::vector<double>>());
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  json j;
  j["axis"] = axis;
  j["values"] = values;
  j["num_sources"] = num_sources;
  j["geometry"] = geometry_to_json(geometry);
  j["modulation"] = sim::to_string(modulation);
  j["snr_db"] = snr_db;
  j["snapshots"] = snapshots;
  j["attack"] = {{"method", attack::to_string(attack_cfg.method)},
                 {"steps", attack_cfg.steps},
                 {"step_size", attack_cfg.step_size},
                 {"bound", attack_cfg.bound},
                 {"momentum_decay", attack_cfg.momentum_decay},
                 {"target_sir_db", attack_cfg.target_sir_db}};
  j["zeta_deg"] = zeta_deg;
  j["baseline_ckpt"] = baseline_ckpt;
  j["defense_ckpt"] = defense_ckpt;
  j["test_grid"] = {{"min_deg", test_grid.min_deg},
                    {"max_deg", test_grid.max_deg},
                    {"step_deg", test_grid.step_deg}};
  j["angle_offset_deg"] = angle_offset_deg;
  j["pair_separation_deg"] = pair_separation_deg;
  j["samples_per_doa"] = samples_per_doa;
  j["desk_divisor"] = desk_divisor;
  j["methods"] = methods;
  j["seed"] = seed;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig c;
  c.axis = j.value("axis", std::string("snr"));
  if (j.contains("values"))
    for (const auto& v : j.at("values"))
      c.values.push_back(v.is_string() ? v.get<std::string>() : json(v).dump());
  c.num_sources = j.value("num_sources", 1);
  if (j.contains("geometry")) c.geometry = geometry_from_json(j.at("geometry"));
  if (j.contains("modulation"))
    c.modulation = sim::modulation_from_string(j.at("modulation").get<std::string>());
  c.snr_db = j.value("snr_db", -1.0);
  c.snapshots = j.value("snapshots", 1024);
  if (j.contains("attack")) {
    const json& a = j.at("attack");
    c.attack_cfg.method = attack::method_from_string(a.value("method", std::string("pgd")));
    c.attack_cfg.steps = a.value("steps", 10);
    c.attack_cfg.step_size = a.value("step_size", 0.02);
    c.attack_cfg.bound = a.value("bound", 0.2);
    c.attack_cfg.momentum_decay = a.value("momentum_decay", 1.0);
    c.attack_cfg.target_sir_db = a.value("target_sir_db", 10.0);
  }
  c.zeta_deg = j.value("zeta_deg", 2.0);
  c.baseline_ckpt = j.value("baseline_ckpt", std::string());
  c.defense_ckpt = j.value("defense_ckpt", std::string());
  if (j.contains("test_grid")) {
    const json& g = j.at("test_grid");
    c.test_grid = {g.at("min_deg").get<double>(), g.at("max_deg").get<double>(),
                   g.at("step_deg").get<double>()};
  }
  c.angle_offset_deg = j.value("angle_offset_deg", 0.5);
  c.pair_separation_deg = j.value("pair_separation_deg", 3.0);
  c.samples_per_doa = j.value("samples_per_doa", 5);
  c.desk_divisor = j.value("desk_divisor", 1);
  if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
  c.seed = j.value("seed", 0ULL);
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open experiment config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

namespace {

struct Condition {
  std::string label;
  double snr_db;
  int snapshots;
  sim::Modulation modulation;
  sim::ArrayGeometry geometry;
  attack::AttackConfig attack_cfg;
};

Condition resolve_condition(const ExperimentConfig& c, const std::string& value) {
  Condition cond{value, c.snr_db, c.snapshots, c.modulation, c.geometry, c.attack_cfg};
  if (c.axis == "snr")
    cond.snr_db = std::stod(value);
  else if (c.axis == "snapshots")
    cond.snapshots = std::stoi(value);
  else if (c.axis == "sir")
    cond.attack_cfg.target_sir_db = std::stod(value);
  else if (c.axis == "modulation")
    cond.modulation = sim::modulation_from_string(value);
  else if (c.axis == "geometry")
    cond.geometry = geometry_from_json(json(value));
  else
    throw std::invalid_argument("unknown sweep axis: " + c.axis);
  return cond;
}

struct MethodAccum {
  std::vector<std::vector<double>> pred;
  std::vector<std::vector<double>> truth;
  double conf_sum = 0.0;
};

bool method_enabled(const ExperimentConfig& c, const std::string& name) {
  if (c.methods.empty()) return true;
  return std::find(c.methods.begin(), c.methods.end(), name) != c.methods.end();
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
  std::vector<ResultRow> rows;
  if (config.values.empty()) return rows;

  const bool want_nodef = method_enabled(config, "NoDef");
  const bool want_tadd = method_enabled(config, "T-ADD");
  const bool want_taddn = method_enabled(config, "T-ADD-N");
  const bool want_baseline = method_enabled(config, "Baseline");
  const bool want_esprit = method_enabled(config, "ESPRIT");
  const bool need_model = want_nodef || want_tadd || want_taddn || want_baseline ||
                          (want_esprit && config.attack_cfg.steps > 0);
  const bool need_defense = want_tadd || want_taddn;

  std::unique_ptr<doa::DoaClassifier> baseline;
  std::unique_ptr<defense::DefTransformer> purifier;
  if (need_model) {
    if (config.baseline_ckpt.empty())
      throw std::invalid_argument("experiment requires a baseline checkpoint");
    baseline = std::make_unique<doa::DoaClassifier>(
        doa::DoaClassifier::load(config.baseline_ckpt));
    if (baseline->config().num_sources != config.num_sources)
      throw std::invalid_argument("baseline checkpoint source count mismatch");
  }
  if (need_defense) {
    if (config.defense_ckpt.empty())
      throw std::invalid_argument("experiment requires a defense checkpoint");
    purifier = std::make_unique<defense::DefTransformer>(
        defense::DefTransformer::load(config.defense_ckpt));
  }

  const int per_doa = std::max(1, config.samples_per_doa / std::max(1, config.desk_divisor));

  for (std::size_t ci = 0; ci < config.values.size(); ++ci) {
    const Condition cond = resolve_condition(config, config.values[ci]);
    const bool esprit_ok = want_esprit && cond.geometry.is_uniform() &&
                           config.num_sources < cond.geometry.element_count();

    // Enumerate test DOAs (grid centers + off-grid offset).
    std::vector<std::vector<double>> doas;
    for (int gi = 0; gi < config.test_grid.size(); ++gi) {
      const double a = config.test_grid.angle(gi) + config.angle_offset_deg;
      if (config.num_sources == 1) {
        doas.push_back({a});
      } else {
        const double b = a + config.pair_separation_deg;
        if (b < 90.0 && b <= config.test_grid.max_deg + config.angle_offset_deg)
          doas.push_back({a, b});
      }
    }

    MethodAccum nodef, tadd, taddn, base, esp;
    for (std::size_t di = 0; di < doas.size(); ++di) {
      sim::SourceScenario scenario;
      scenario.num_sources = config.num_sources;
      scenario.angles_deg = doas[di];
      scenario.modulation = cond.modulation;
      scenario.snr_db = cond.snr_db;
      scenario.snapshots = cond.snapshots;

      Rng rng = Rng::derive(config.seed, (ci << 40) ^ (di + 1));
      std::vector<int> label(config.num_sources);
      const sim::AngleGrid& model_grid =
          baseline ? baseline->config().grid : config.test_grid;
      for (int l = 0; l < config.num_sources; ++l)
        label[l] = model_grid.nearest_index(doas[di][l]);
      std::sort(label.begin(), label.end());

      for (int s = 0; s < per_doa; ++s) {
        const auto snap = sim::collect_snapshots(scenario, cond.geometry, rng);
        const Tensor clean = sim::encode_covariance_tensor(sim::sample_covariance(snap));

        Tensor attacked;
        const bool need_attack = want_nodef || want_tadd || esprit_ok;
        if (need_attack) {
          const auto raw = attack::run_attack(clean, label, *baseline, cond.attack_cfg);
          attacked =
              attack::scale_to_sir(clean, raw.x_adv, cond.attack_cfg.target_sir_db).x_adv;
        }

        auto record = [&](MethodAccum& acc, const Tensor& input) {
          const Tensor logits = baseline->forward(input);
          acc.pred.push_back(
              doa::decode_angles(logits, baseline->config().grid, config.num_sources));
          acc.truth.push_back(doas[di]);
          acc.conf_sum += config.num_sources == 1 ? doa::conf_single(logits)
                                                  : doa::conf_dual(logits);
        };

        if (want_baseline) record(base, clean);
        if (want_nodef) record(nodef, attacked);
        if (want_tadd) record(tadd, purifier->reconstruct(attacked));
        if (want_taddn) record(taddn, purifier->reconstruct(clean));
        if (esprit_ok) {
          const Tensor& esprit_input = need_attack ? attacked : clean;
          std::vector<double> angles;
          try {
            angles = classical::esprit_estimate(sim::tensor_to_covariance(esprit_input),
                                                config.num_sources, cond.geometry)
                         .angles_deg;
          } catch (const std::exception&) {
            angles.assign(config.num_sources, 0.0);  // failed estimate: broadside
          }
          esp.pred.push_back(angles);
          esp.truth.push_back(doas[di]);
        }
      }
    }

    auto push_row = [&](const std::string& method, const MethodAccum& acc, bool has_conf) {
      if (acc.pred.empty()) return;
      ResultRow row;
      row.condition = cond.label;
      row.method = method;
      row.rmse = rmse(acc.pred, acc.truth);
      row.accuracy_pct = accuracy(acc.pred, acc.truth, config.zeta_deg);
      row.confidence_pct =
          has_conf ? acc.conf_sum / static_cast<double>(acc.pred.size()) : 0.0;
      row.sample_count = static_cast<std::int64_t>(acc.pred.size());
      rows.push_back(std::move(row));
    };
    push_row("NoDef", nodef, true);
    push_row("T-ADD", tadd, true);
    push_row("T-ADD-N", taddn, true);
    push_row("Baseline", base, true);
    push_row("ESPRIT", esp, false);
  }
  return rows;
}

void write_result_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "condition,method,rmse,acc,conf,B\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", r.rmse, r.accuracy_pct,
                  r.confidence_pct);
    out << r.condition << ',' << r.method << ',' << buf << ',' << r.sample_count << '\n';
  }
}

std::vector<ResultRow> read_result_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv " + path);
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    ResultRow r;
    std::getline(ss, r.condition, ',');
    std::getline(ss, r.method, ',');
    std::getline(ss, field, ',');
    r.rmse = std::stod(field);
    std::getline(ss, field, ',');
    r.accuracy_pct = std::stod(field);
    std::getline(ss, field, ',');
    r.confidence_pct = std::stod(field);
    std::getline(ss, field, ',');
    r.sample_count = std::stoll(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_report(const std::vector<ResultRow>& rows, const std::string& out_dir,
                 const std::string& format) {
  if (rows.empty()) throw std::invalid_argument("emit_report needs at least one row");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  if (format == "csv") {
    write_result_csv(rows, (fs::path(out_dir) / "results.csv").string());
    return;
  }
  if (format != "plots") throw std::invalid_argument("unknown report format: " + format);

  std::vector<std::string> conditions;
  for (const auto& r : rows)
    if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end())
      conditions.push_back(r.condition);
  std::vector<std::string> methods;
  for (const char* m : kMethodOrder)
    for (const auto& r : rows)
      if (r.method == m) {
        methods.push_back(m);
        break;
      }

  struct Metric {
    const char* file;
    const char* title;
    double ResultRow::* field;
  };
  const Metric metrics[] = {{"rmse.png", "RMSE DEG", &ResultRow::rmse},
                            {"accuracy.png", "ACCURACY %", &ResultRow::accuracy_pct},
                            {"confidence.png", "CONFIDENCE %", &ResultRow::confidence_pct}};
  for (const Metric& metric : metrics) {
    std::vector<PlotSeries> series;
    for (const auto& m : methods) {
      PlotSeries s;
      s.label = m;
      s.values.assign(conditions.size(), std::nan(""));
      for (const auto& r : rows)
        if (r.method == m) {
          const auto it = std::find(conditions.begin(), conditions.end(), r.condition);
          s.values[static_cast<std::size_t>(it - conditions.begin())] = r.*(metric.field);
        }
      series.push_back(std::move(s));
    }
    line_plot_png((fs::path(out_dir) / metric.file).string(), metric.title, conditions,
                  series);
  }
}

}  // namespace doadef::harness
