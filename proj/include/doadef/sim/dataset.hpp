// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "doadef/sim/signal.hpp"
#include "doadef/tensor.hpp"

namespace doadef::sim {

// Uniform angle grid used both for scenario enumeration and as the label grid.
struct AngleGrid {
  double min_deg = -90.0;
  double max_deg = 90.0;
  double step_deg = 1.0;

  int size() const;
  double angle(int index) const;
  // Nearest grid class, clamped to the grid.
  int nearest_index(double angle_deg) const;
  std::vector<double> angles() const;
};

struct DatasetConfig {
  int num_sources = 1;
  ArrayGeometry geometry = ArrayGeometry::ula(8);
  Modulation modulation = Modulation::kBpsk;
  std::vector<double> snr_grid_db;
  AngleGrid grid;
  // Enumerated scenario angles are grid centers plus this offset (off-grid
  // test sets use 0.5); labels always snap to the nearest grid class.
  double angle_offset_deg = 0.0;
  // L=2: 0 enumerates all unordered grid pairs; >0 enumerates (a, a+sep).
  double pair_separation_deg = 0.0;
  int samples_per_doa = 10;  // per angle (L=1) or per pair (L=2), per SNR
  int snapshots = 1024;
  std::uint64_t seed = 0;
  // Validation samples per DOA = samples_per_doa / val_divisor (0 disables
  // the validation split).
  int val_divisor = 2;

  static DatasetConfig single_source_default(std::uint64_t seed = 0);
  static DatasetConfig dual_source_default(std::uint64_t seed = 0);
};

struct ScenarioSpec {
  std::vector<double> angles_deg;
  double snr_db = 0.0;
  int count = 0;
  std::string split;        // "train" | "val"
  std::int64_t offset = 0;  // first record index in the container
};

struct DatasetPlan {
  std::vector<ScenarioSpec> scenarios;
  std::int64_t train_count = 0;
  std::int64_t val_count = 0;
  std::int64_t distinct_doa_combinations = 0;

  std::int64_t total() const { return train_count + val_count; }
};

// Scenario enumeration and counts without synthesizing any sample.
DatasetPlan plan_dataset(const DatasetConfig& config);

// In-memory dataset: one tensor per record plus labels and true angles.
struct Dataset {
  int num_sources = 1;
  int element_count = 8;
  AngleGrid grid;
  std::vector<Tensor> samples;              // [3,M,M] each
  std::vector<std::vector<int>> labels;     // L sorted grid indices per record
  std::vector<std::vector<double>> angles;  // L sorted true angles per record
  std::int64_t train_count = 0;             // records [0, train_count) are train
  std::int64_t val_count = 0;

  std::int64_t size() const { return static_cast<std::int64_t>(samples.size()); }
};

// Synthesize every record in the plan. Record r of scenario s is drawn from
// the RNG stream derived from (seed, s), so the result is independent of any
// parallel decomposition.
Dataset build_dataset(const DatasetConfig& config);

// Container layout: <dir>/manifest.json + samples.bin (float32 [3,M,M]
// records) + labels.bin (int32, L per record) + angles.bin (float32, L per
// record). Little-endian throughout.
void write_container(const Dataset& dataset, const DatasetConfig& config,
                     const DatasetPlan& plan, const std::string& dir);
// The three binary files only; callers provide their own manifest.json.
void write_container_files(const Dataset& dataset, const std::string& dir);
Dataset read_container(const std::string& dir);

// Convenience: plan + build + write.
DatasetPlan generate_container(const DatasetConfig& config, const std::string& dir);

// JSON round trip for dataset configs (used by the gen-data CLI).
DatasetConfig dataset_config_from_json(const std::string& text);
std::string dataset_config_to_json(const DatasetConfig& config);

}  // namespace doadef::sim
