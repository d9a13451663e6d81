// SPDX-License-Identifier: Apache-2.0
#include "doadef/sim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace doadef::sim {

using nlohmann::json;

int AngleGrid::size() const {
  if (step_deg <= 0.0) throw std::invalid_argument("grid step must be positive");
  return static_cast<int>(std::llround((max_deg - min_deg) / step_deg)) + 1;
}

double AngleGrid::angle(int index) const { return min_deg + index * step_deg; }

int AngleGrid::nearest_index(double angle_deg) const {
  int idx = static_cast<int>(std::llround((angle_deg - min_deg) / step_deg));
  return std::clamp(idx, 0, size() - 1);
}

std::vector<double> AngleGrid::angles() const {
  std::vector<double> out(size());
  for (int i = 0; i < size(); ++i) out[i] = angle(i);
  return out;
}

DatasetConfig DatasetConfig::single_source_default(std::uint64_t seed) {
  DatasetConfig c;
  c.num_sources = 1;
  for (int s = -14; s <= 10; s += 2) c.snr_grid_db.push_back(s);
  c.grid = {-90.0, 90.0, 1.0};
  c.samples_per_doa = 10;
  c.seed = seed;
  return c;
}

DatasetConfig DatasetConfig::dual_source_default(std::uint64_t seed) {
  DatasetConfig c;
  c.num_sources = 2;
  for (int s = -14; s <= 10; s += 2) c.snr_grid_db.push_back(s);
  c.grid = {-60.0, 60.0, 1.0};
  c.samples_per_doa = 2;
  c.seed = seed;
  return c;
}

namespace {

std::vector<std::vector<double>> enumerate_doas(const DatasetConfig& c) {
  std::vector<std::vector<double>> out;
  const int n = c.grid.size();
  if (c.num_sources == 1) {
    for (int i = 0; i < n; ++i) out.push_back({c.grid.angle(i) + c.angle_offset_deg});
  } else if (c.num_sources == 2) {
    if (c.pair_separation_deg > 0.0) {
      for (int i = 0; i < n; ++i) {
        const double a = c.grid.angle(i) + c.angle_offset_deg;
        const double b = a + c.pair_separation_deg;
        if (b <= c.grid.max_deg + c.angle_offset_deg) out.push_back({a, b});
      }
    } else {
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          out.push_back({c.grid.angle(i) + c.angle_offset_deg,
                         c.grid.angle(j) + c.angle_offset_deg});
    }
  } else {
    throw std::invalid_argument("source count must be 1 or 2");
  }
  return out;
}

}  // namespace

DatasetPlan plan_dataset(const DatasetConfig& config) {
  if (config.samples_per_doa < 0)
    throw std::invalid_argument("samples_per_doa must be non-negative");
  if (config.snr_grid_db.empty())
    throw std::invalid_argument("SNR grid must not be empty");
  const auto doas = enumerate_doas(config);
  const int val_per_doa =
      config.val_divisor > 0 ? config.samples_per_doa / config.val_divisor : 0;

  DatasetPlan plan;
  plan.distinct_doa_combinations = static_cast<std::int64_t>(doas.size());
  std::int64_t offset = 0;
  for (const char* split : {"train", "val"}) {
    const int per = (std::string(split) == "train") ? config.samples_per_doa : val_per_doa;
    for (double snr : config.snr_grid_db)
      for (const auto& angles : doas) {
        if (per == 0) continue;
        ScenarioSpec spec;
        spec.angles_deg = angles;
        spec.snr_db = snr;
        spec.count = per;
        spec.split = split;
        spec.offset = offset;
        offset += per;
        plan.scenarios.push_back(std::move(spec));
      }
    if (std::string(split) == "train")
      plan.train_count = offset;
    else
      plan.val_count = offset - plan.train_count;
  }
  return plan;
}

Dataset build_dataset(const DatasetConfig& config) {
  const DatasetPlan plan = plan_dataset(config);
  Dataset ds;
  ds.num_sources = config.num_sources;
  ds.element_count = config.geometry.element_count();
  ds.grid = config.grid;
  ds.train_count = plan.train_count;
  ds.val_count = plan.val_count;
  ds.samples.resize(plan.total());
  ds.labels.resize(plan.total());
  ds.angles.resize(plan.total());

  for (std::size_t s = 0; s < plan.scenarios.size(); ++s) {
    const ScenarioSpec& spec = plan.scenarios[s];
    SourceScenario scenario;
    scenario.num_sources = config.num_sources;
    scenario.angles_deg = spec.angles_deg;
    scenario.modulation = config.modulation;
    scenario.snr_db = spec.snr_db;
    scenario.snapshots = config.snapshots;

    Rng rng = Rng::derive(config.seed, s);
    std::vector<int> label(config.num_sources);
    for (int l = 0; l < config.num_sources; ++l)
      label[l] = config.grid.nearest_index(spec.angles_deg[l]);
    std::sort(label.begin(), label.end());

    for (int r = 0; r < spec.count; ++r) {
      const auto snap = collect_snapshots(scenario, config.geometry, rng);
      const auto cov = sample_covariance(snap);
      const std::int64_t idx = spec.offset + r;
      ds.samples[idx] = encode_covariance_tensor(cov);
      ds.labels[idx] = label;
      ds.angles[idx] = spec.angles_deg;
    }
  }
  return ds;
}

namespace {

void write_f32(std::ofstream& out, const std::vector<float>& buf) {
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

json grid_to_json(const AngleGrid& g) {
  return json{{"min_deg", g.min_deg},
              {"max_deg", g.max_deg},
              {"step_deg", g.step_deg},
              {"size", g.size()}};
}

AngleGrid grid_from_json(const json& j) {
  return AngleGrid{j.at("min_deg").get<double>(), j.at("max_deg").get<double>(),
                   j.at("step_deg").get<double>()};
}

}  // namespace

void write_container_files(const Dataset& dataset, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int m = dataset.element_count;
  const std::size_t record = static_cast<std::size_t>(3) * m * m;
  {
    std::ofstream out(fs::path(dir) / "samples.bin", std::ios::binary);
    std::vector<float> buf(record);
    for (const Tensor& t : dataset.samples) {
      for (std::size_t i = 0; i < record; ++i) buf[i] = static_cast<float>(t.v[i]);
      write_f32(out, buf);
    }
  }
  {
    std::ofstream out(fs::path(dir) / "labels.bin", std::ios::binary);
    for (const auto& lab : dataset.labels) {
      std::vector<std::int32_t> buf(lab.begin(), lab.end());
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(std::int32_t)));
    }
  }
  {
    std::ofstream out(fs::path(dir) / "angles.bin", std::ios::binary);
    for (const auto& ang : dataset.angles) {
      std::vector<float> buf(ang.begin(), ang.end());
      write_f32(out, buf);
    }
  }
}

void write_container(const Dataset& dataset, const DatasetConfig& config,
                     const DatasetPlan& plan, const std::string& dir) {
  namespace fs = std::filesystem;
  write_container_files(dataset, dir);
  const int m = dataset.element_count;

  json manifest;
  manifest["format"] = "doadef-dataset-v1";
  manifest["endianness"] = "little";
  manifest["dtype"] = "float32";
  manifest["seed"] = config.seed;
  manifest["num_sources"] = config.num_sources;
  manifest["element_count"] = m;
  manifest["geometry"] = {{"positions", config.geometry.positions}};
  manifest["modulation"] = to_string(config.modulation);
  if (config.modulation == Modulation::kOfdm)
    manifest["ofdm"] = {{"subcarriers", 64}, {"cyclic_prefix", 16}, {"loading", "qam16"}};
  manifest["snapshots"] = config.snapshots;
  manifest["channel_semantics"] = {"real", "imag", "phase"};
  manifest["tensor_shape"] = {3, m, m};
  manifest["grid"] = grid_to_json(dataset.grid);
  manifest["angle_offset_deg"] = config.angle_offset_deg;
  manifest["snr_grid_db"] = config.snr_grid_db;
  manifest["counts"] = {{"train", plan.train_count},
                        {"val", plan.val_count},
                        {"total", plan.total()},
                        {"distinct_doa_combinations", plan.distinct_doa_combinations}};
  json scen = json::array();
  for (const auto& s : plan.scenarios)
    scen.push_back(json{{"angles_deg", s.angles_deg},
                        {"snr_db", s.snr_db},
                        {"count", s.count},
                        {"split", s.split},
                        {"offset", s.offset}});
  manifest["scenarios"] = std::move(scen);

  std::ofstream out(fs::path(dir) / "manifest.json");
  out << manifest.dump(2) << "\n";
}

Dataset read_container(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream min(fs::path(dir) / "manifest.json");
  if (!min) throw std::runtime_error("cannot open manifest.json in " + dir);
  json manifest = json::parse(min);

  Dataset ds;
  ds.num_sources = manifest.at("num_sources").get<int>();
  ds.element_count = manifest.at("element_count").get<int>();
  ds.grid = grid_from_json(manifest.at("grid"));
  ds.train_count = manifest.at("counts").at("train").get<std::int64_t>();
  ds.val_count = manifest.at("counts").at("val").get<std::int64_t>();
  const std::int64_t total = manifest.at("counts").at("total").get<std::int64_t>();

  const int m = ds.element_count;
  const std::size_t record = static_cast<std::size_t>(3) * m * m;
  std::ifstream sin(fs::path(dir) / "samples.bin", std::ios::binary);
  std::ifstream lin(fs::path(dir) / "labels.bin", std::ios::binary);
  std::ifstream ain(fs::path(dir) / "angles.bin", std::ios::binary);
  if (!sin || !lin || !ain) throw std::runtime_error("container files missing in " + dir);

  ds.samples.resize(total);
  ds.labels.resize(total);
  ds.angles.resize(total);
  std::vector<float> fbuf(record);
  std::vector<std::int32_t> lbuf(ds.num_sources);
  std::vector<float> abuf(ds.num_sources);
  for (std::int64_t r = 0; r < total; ++r) {
    sin.read(reinterpret_cast<char*>(fbuf.data()),
             static_cast<std::streamsize>(record * sizeof(float)));
    lin.read(reinterpret_cast<char*>(lbuf.data()),
             static_cast<std::streamsize>(lbuf.size() * sizeof(std::int32_t)));
    ain.read(reinterpret_cast<char*>(abuf.data()),
             static_cast<std::streamsize>(abuf.size() * sizeof(float)));
    if (!sin || !lin || !ain) throw std::runtime_error("container truncated in " + dir);
    Tensor t({3, m, m});
    for (std::size_t i = 0; i < record; ++i) t.v[i] = fbuf[i];
    ds.samples[r] = std::move(t);
    ds.labels[r].assign(lbuf.begin(), lbuf.end());
    ds.angles[r].assign(abuf.begin(), abuf.end());
  }
  return ds;
}

DatasetPlan generate_container(const DatasetConfig& config, const std::string& dir) {
  const DatasetPlan plan = plan_dataset(config);
  const Dataset ds = build_dataset(config);
  write_container(ds, config, plan, dir);
  return plan;
}

DatasetConfig dataset_config_from_json(const std::string& text) {
  json j = json::parse(text);
  DatasetConfig c;
  c.num_sources = j.value("num_sources", 1);
  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    if (g.is_string()) {
      const std::string s = g.get<std::string>();
      if (s == "ula8")
        c.geometry = ArrayGeometry::ula(8);
      else if (s == "sla8")
        c.geometry = ArrayGeometry::sla8();
      else
        throw std::invalid_argument("unknown geometry name: " + s);
    } else {
      c.geometry = ArrayGeometry(g.at("positions").get<std::vector<double>>());
    }
  }
  if (j.contains("modulation"))
    c.modulation = modulation_from_string(j.at("modulation").get<std::string>());
  c.snr_grid_db.clear();
  if (j.contains("snr_grid_db")) {
    const json& s = j.at("snr_grid_db");
    if (s.is_array()) {
      c.snr_grid_db = s.get<std::vector<double>>();
    } else {
      const double lo = s.at("min").get<double>();
      const double hi = s.at("max").get<double>();
      const double step = s.at("step").get<double>();
      for (double v = lo; v <= hi + 1e-9; v += step) c.snr_grid_db.push_back(v);
    }
  }
  if (j.contains("grid"))
    c.grid = grid_from_json(j.at("grid"));
  c.angle_offset_deg = j.value("angle_offset_deg", 0.0);
  c.pair_separation_deg = j.value("pair_separation_deg", 0.0);
  c.samples_per_doa = j.value("samples_per_doa", 10);
  c.snapshots = j.value("snapshots", 1024);
  c.seed = j.value("seed", 0ULL);
  c.val_divisor = j.value("val_divisor", 2);
  return c;
}

std::string dataset_config_to_json(const DatasetConfig& config) {
  json j;
  j["num_sources"] = config.num_sources;
  j["geometry"] = {{"positions", config.geometry.positions}};
  j["modulation"] = to_string(config.modulation);
  j["snr_grid_db"] = config.snr_grid_db;
  j["grid"] = grid_to_json(config.grid);
  j["angle_offset_deg"] = config.angle_offset_deg;
  j["pair_separation_deg"] = config.pair_separation_deg;
  j["samples_per_doa"] = config.samples_per_doa;
  j["snapshots"] = config.snapshots;
  j["seed"] = config.seed;
  j["val_divisor"] = config.val_divisor;
  return j.dump(2);
}

}  // namespace doadef::sim
