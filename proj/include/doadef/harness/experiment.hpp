// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "doadef/attack/attack.hpp"
#include "doadef/sim/dataset.hpp"

namespace doadef::harness {

// One sweep: every condition generates off-grid test samples, attacks them,
// and evaluates the method set.
struct ExperimentConfig {
  std::string axis = "snr";  // snr | snapshots | sir | modulation | geometry
  std::vector<std::string> values;
  int num_sources = 1;
  sim::ArrayGeometry geometry = sim::ArrayGeometry::ula(8);
  sim::Modulation modulation = sim::Modulation::kBpsk;
  double snr_db = -1.0;
  int snapshots = 1024;
  attack::AttackConfig attack_cfg = attack::AttackConfig::evaluation_default(attack::Method::kPgd);
  double zeta_deg = 2.0;
  std::string baseline_ckpt;
  std::string defense_ckpt;
  // Test DOAs are these grid centers plus angle_offset_deg (off-grid by
  // construction); L=2 pairs each base angle with base + pair_separation_deg.
  sim::AngleGrid test_grid{-90.0, 89.0, 1.0};
  double angle_offset_deg = 0.5;
  double pair_separation_deg = 3.0;
  int samples_per_doa = 5;
  int desk_divisor = 1;  // divides samples_per_doa (floor, min 1)
  // Empty = every applicable method; subset of
  // {NoDef, T-ADD, T-ADD-N, Baseline, ESPRIT}.
  std::vector<std::string> methods;
  std::uint64_t seed = 0;

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
};

struct ResultRow {
  std::string condition;
  std::string method;
  double rmse = 0.0;
  double accuracy_pct = 0.0;
  double confidence_pct = 0.0;
  std::int64_t sample_count = 0;
};

std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

// Stable column order: condition, method, rmse, acc, conf, B. Doubles are
// written with %.17g so parsing restores the exact values.
void write_result_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> read_result_csv(const std::string& path);

// format "csv": <out_dir>/results.csv; format "plots": one PNG per metric
// (rmse.png, accuracy.png, confidence.png).
void emit_report(const std::vector<ResultRow>& rows, const std::string& out_dir,
                 const std::string& format);

}  // namespace doadef::harness
