// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "doadef/nn/nn.hpp"
#include "doadef/sim/dataset.hpp"
#include "doadef/tensor.hpp"

namespace doadef::doa {

using DoaGrid = sim::AngleGrid;

// Grid-classification CNN: stacked 3x3 conv blocks with ReLU followed by a
// fully connected head. Output mode is exclusive (softmax target) for one
// source and multi-label (sigmoid target) for two.
struct ClassifierConfig {
  int element_count = 8;
  int num_sources = 1;
  DoaGrid grid{-90.0, 90.0, 1.0};
  std::vector<int> conv_channels{64, 128, 256, 512};
  std::vector<int> fc_hidden{1024};

  std::string to_json() const;
  static ClassifierConfig from_json(const std::string& text);
};

class DoaClassifier {
 public:
  DoaClassifier(ClassifierConfig config, std::uint64_t init_seed);

  const ClassifierConfig& config() const { return config_; }
  int grid_size() const { return config_.grid.size(); }
  bool multilabel() const { return config_.num_sources >= 2; }

  struct Cache {
    std::vector<Tensor> conv_pre;  // pre-activation conv outputs
    std::vector<nn::Conv2d::Cache> conv_caches;
    std::vector<Tensor> fc_in;   // input to each linear
    std::vector<Tensor> fc_pre;  // pre-activation hidden outputs
  };

  // x: [3,M,M] -> logits [grid]; throws std::domain_error on shape mismatch.
  Tensor forward(const Tensor& x) const;
  Tensor forward(const Tensor& x, Cache& cache) const;
  // dlogits -> dx; accumulates parameter grads when param_grads is set.
  Tensor backward(const Tensor& dlogits, const Cache& cache, bool param_grads);

  // Training loss against grid-index labels: cross-entropy (L=1) or
  // multi-label binary cross-entropy (L=2). Also the attack objective.
  double loss(const Tensor& logits, const std::vector<int>& label) const;
  Tensor loss_grad(const Tensor& logits, const std::vector<int>& label) const;

  // d(loss)/d(input) without touching parameter grads.
  Tensor input_gradient(const Tensor& x, const std::vector<int>& label);

  std::vector<nn::Param*> params();

  void save(const std::string& dir) const;
  static DoaClassifier load(const std::string& dir);

 private:
  ClassifierConfig config_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::Linear> fcs_;
};

// Class centers of the top-L logits, sorted ascending; ties broken toward the
// lower index.
std::vector<double> decode_angles(const Tensor& logits, const DoaGrid& grid, int num_sources);

// 100 * max softmax probability.
double conf_single(const Tensor& logits);
// 100 * mean of the two largest sigmoid probabilities.
double conf_dual(const Tensor& logits);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool verbose = false;
};

struct TrainLog {
  std::vector<double> epoch_loss;       // mean training loss per epoch
  std::vector<double> first_step_loss;  // per-step losses of the first epoch
};

// Adam at fixed lr; shuffling is deterministic under (seed, epoch).
TrainLog train_classifier(DoaClassifier& model, const sim::Dataset& data,
                          const TrainConfig& config);

}  // namespace doadef::doa
