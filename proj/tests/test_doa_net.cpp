// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>

#include <doctest.h>

#include "doadef/doa/classifier.hpp"
#include "doadef/rng.hpp"
#include "doadef/sim/dataset.hpp"

using namespace doadef;
using namespace doadef::doa;

namespace {

ClassifierConfig tiny_config() {
  ClassifierConfig cfg;
  cfg.element_count = 8;
  cfg.num_sources = 1;
  cfg.grid = {-10.0, 10.0, 2.0};  // 11 classes
  cfg.conv_channels = {8, 12};
  cfg.fc_hidden = {24};
  return cfg;
}

Tensor random_input(Rng& rng, int m = 8) {
  Tensor x({3, m, m});
  for (double& v : x.v) v = rng.uniform() * 2.0 - 1.0;
  return x;
}

std::string temp_dir(const char* tag) {
  auto p = std::filesystem::temp_directory_path() / (std::string("doadef_doa_") + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("forward determinism and shape checks") {
  DoaClassifier model(tiny_config(), 5);
  Rng rng(1);
  const Tensor x = random_input(rng);
  const Tensor l1 = model.forward(x);
  const Tensor l2 = model.forward(x);
  CHECK(l1.v == l2.v);
  CHECK(static_cast<int>(l1.size()) == model.grid_size());
  for (double v : l1.v) CHECK(std::isfinite(v));

  Tensor bad({3, 4, 4});
  CHECK_THROWS_AS(model.forward(bad), std::domain_error);
}

TEST_CASE("sum-of-logits input gradient matches central differences") {
  DoaClassifier model(tiny_config(), 5);
  Rng rng(2);
  const Tensor x = random_input(rng);

  DoaClassifier::Cache cache;
  model.forward(x, cache);
  Tensor ones({model.grid_size()});
  ones.fill(1.0);
  const Tensor analytic = model.backward(ones, cache, /*param_grads=*/false);

  const double h = 1e-5;
  double max_num = 0.0, max_err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
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
  CHECK(max_err <= 1e-3 * std::max(max_num, 1e-9));
}

TEST_CASE("training-loss input gradient matches central differences (both modes)") {
  for (int sources : {1, 2}) {
    ClassifierConfig cfg = tiny_config();
    cfg.num_sources = sources;
    DoaClassifier model(cfg, 7);
    Rng rng(3 + sources);
    const Tensor x = random_input(rng);
    const std::vector<int> label = sources == 1 ? std::vector<int>{4}
                                                : std::vector<int>{2, 7};

    const Tensor analytic = model.input_gradient(x, label);
    const double h = 1e-5;
    double max_num = 0.0, max_err = 0.0;
    for (std::size_t i = 0; i < x.size(); i += 3) {
      Tensor xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double numeric =
          (model.loss(model.forward(xp), label) - model.loss(model.forward(xm), label)) /
          (2.0 * h);
      max_num = std::max(max_num, std::abs(numeric));
      max_err = std::max(max_err, std::abs(numeric - analytic[i]));
    }
    CHECK(max_err <= 1e-3 * std::max(max_num, 1e-9));
  }
}

TEST_CASE("decode_angles hand values") {
  DoaGrid grid181{-90.0, 90.0, 1.0};
  Tensor logits({181});
  logits.fill(-5.0);
  logits[0] = 3.0;
  CHECK(decode_angles(logits, grid181, 1) == std::vector<double>{-90.0});

  // All-equal logits: tie broken toward the lowest index.
  Tensor flat({181});
  CHECK(decode_angles(flat, grid181, 1) == std::vector<double>{-90.0});

  DoaGrid grid121{-60.0, 60.0, 1.0};
  Tensor two({121});
  two.fill(-1.0);
  two[grid121.nearest_index(20.0)] = 5.0;
  two[grid121.nearest_index(-10.0)] = 4.0;
  CHECK(decode_angles(two, grid121, 2) == std::vector<double>{-10.0, 20.0});

  CHECK_THROWS_AS(decode_angles(Tensor({3}), DoaGrid{-1.0, 1.0, 1.0}, 4),
                  std::domain_error);
}

TEST_CASE("decode_angles is argmax-shift invariant") {
  DoaGrid grid{-30.0, 30.0, 1.0};
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits({grid.size()});
    for (double& v : logits.v) v = rng.uniform() * 10.0 - 5.0;
    const auto base = decode_angles(logits, grid, 2);
    Tensor shifted = logits;
    for (double& v : shifted.v) v += 123.456;
    CHECK(decode_angles(shifted, grid, 2) == base);
  }
}

TEST_CASE("confidence scores") {
  {
    Tensor logits({2});
    CHECK(conf_single(logits) == doctest::Approx(50.0));
  }
  {
    Tensor logits({2});
    logits[0] = std::log(9.0);
    CHECK(conf_single(logits) == doctest::Approx(90.0));
  }
  {
    Tensor logits({5});
    logits.v = {0.3, -1.2, 2.0, 0.0, 1.1};
    const double base = conf_single(logits);
    for (double& v : logits.v) v += 42.0;
    CHECK(conf_single(logits) == doctest::Approx(base).epsilon(1e-12));
  }
  {
    Tensor logits({3});
    logits.v = {0.0, 0.0, -100.0};
    CHECK(conf_dual(logits) == doctest::Approx(50.0));
  }
  {
    Tensor logits({3});
    logits.v = {60.0, 60.0, 0.0};
    CHECK(conf_dual(logits) == doctest::Approx(100.0).epsilon(1e-4));
  }
  {
    Tensor logits({3});
    logits.v = {std::log(3.0), 0.0, -std::log(3.0)};
    CHECK(conf_dual(logits) == doctest::Approx(62.5));
  }
  // Range properties on random logits.
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits({13});
    for (double& v : logits.v) v = rng.uniform() * 20.0 - 10.0;
    const double c1 = conf_single(logits);
    CHECK(c1 > 100.0 / 13.0);
    CHECK(c1 <= 100.0);
    const double c2 = conf_dual(logits);
    CHECK(c2 > 0.0);
    CHECK(c2 <= 100.0);
  }
}

TEST_CASE("smoke training: full-batch loss strictly decreases") {
  sim::DatasetConfig dcfg;
  dcfg.num_sources = 1;
  dcfg.snr_grid_db = {10.0};
  dcfg.grid = {-10.0, 10.0, 2.0};
  dcfg.samples_per_doa = 6;  // 66 samples
  dcfg.snapshots = 64;
  dcfg.seed = 4;
  dcfg.val_divisor = 0;
  const sim::Dataset data = sim::build_dataset(dcfg);

  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 128;  // single full batch per epoch
  tc.seed = 10;
  DoaClassifier model(tiny_config(), 10);
  const auto log = train_classifier(model, data, tc);
  REQUIRE(log.epoch_loss.size() == 3);
  CHECK(log.epoch_loss[0] > log.epoch_loss[1]);
  CHECK(log.epoch_loss[1] > log.epoch_loss[2]);

  // Seed-fixed double run reaches an identical final loss.
  DoaClassifier model2(tiny_config(), 10);
  const auto log2 = train_classifier(model2, data, tc);
  CHECK(log.epoch_loss.back() == log2.epoch_loss.back());
}

TEST_CASE("mini training run separates well-spaced classes") {
  sim::DatasetConfig dcfg;
  dcfg.num_sources = 1;
  dcfg.snr_grid_db = {10.0};
  dcfg.grid = {-10.0, 10.0, 5.0};  // 5 classes
  dcfg.samples_per_doa = 20;
  dcfg.snapshots = 128;
  dcfg.seed = 6;
  dcfg.val_divisor = 2;
  const sim::Dataset data = sim::build_dataset(dcfg);

  ClassifierConfig cfg = tiny_config();
  cfg.grid = dcfg.grid;
  DoaClassifier model(cfg, 20);
  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 16;
  tc.seed = 20;
  train_classifier(model, data, tc);

  int hits = 0;
  int total = 0;
  for (std::int64_t i = data.train_count; i < data.size(); ++i) {
    const auto pred = decode_angles(model.forward(data.samples[i]), cfg.grid, 1);
    hits += std::abs(pred[0] - data.angles[i][0]) <= 2.0 ? 1 : 0;
    ++total;
  }
  CHECK(total > 0);
  CHECK(100.0 * hits / total > 90.0);
}

TEST_CASE("dataset/model mode mismatch is rejected") {
  sim::DatasetConfig dcfg;
  dcfg.num_sources = 2;
  dcfg.snr_grid_db = {10.0};
  dcfg.grid = {-10.0, 10.0, 5.0};
  dcfg.samples_per_doa = 1;
  dcfg.snapshots = 16;
  const sim::Dataset data = sim::build_dataset(dcfg);
  DoaClassifier model(tiny_config(), 1);
  CHECK_THROWS_AS(train_classifier(model, data, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("checkpoint round trip") {
  DoaClassifier model(tiny_config(), 31);
  const std::string dir = temp_dir("ckpt");
  model.save(dir);
  DoaClassifier loaded = DoaClassifier::load(dir);
  Rng rng(12);
  const Tensor x = random_input(rng);
  CHECK(model.forward(x).v == loaded.forward(x).v);
}
