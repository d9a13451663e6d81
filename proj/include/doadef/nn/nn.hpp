// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "doadef/rng.hpp"
#include "doadef/tensor.hpp"

namespace doadef::nn {

// Learnable tensor with gradient accumulator and Adam state.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m, adam_v;

  void init_shape(const std::string& n, std::vector<int> shape);
};

void fill_kaiming_normal(Tensor& t, Rng& rng, int fan_in);

// Dense layer on row-major token batches: [n, in] -> [n, out].
struct Linear {
  Param w;  // [out, in]
  Param b;  // [out]
  int in = 0, out = 0;

  void init(const std::string& name, int in_dim, int out_dim, Rng& rng);
  void init_zero(const std::string& name, int in_dim, int out_dim);
  Tensor forward(const Tensor& x) const;
  // dy: [n, out]; x is the forward input. Returns dx.
  Tensor backward(const Tensor& dy, const Tensor& x, bool param_grads);
  void collect(std::vector<Param*>& out_params);
};

// 2-d convolution on [C,H,W] with odd square kernel and zero same-padding.
struct Conv2d {
  Param w;  // [out_ch, in_ch*k*k]
  Param b;  // [out_ch]
  int in_ch = 0, out_ch = 0, ksize = 3;

  void init(const std::string& name, int in_channels, int out_channels, int k, Rng& rng);
  struct Cache {
    Tensor cols;  // [in_ch*k*k, H*W]
    int h = 0, w = 0;
  };
  Tensor forward(const Tensor& x, Cache* cache) const;
  Tensor backward(const Tensor& dy, const Cache& cache, bool param_grads);
  void collect(std::vector<Param*>& out_params);
};

// Layer norm over the last dimension of [n, C].
struct LayerNorm {
  Param gamma, beta;  // [C]
  int dim = 0;
  double eps = 1e-6;

  void init(const std::string& name, int c);
  struct Cache {
    Tensor xhat;                 // [n, C]
    std::vector<double> inv_std;  // per row
  };
  Tensor forward(const Tensor& x, Cache* cache) const;
  Tensor backward(const Tensor& dy, const Cache& cache, bool param_grads);
  void collect(std::vector<Param*>& out_params);
};

// Elementwise activations; backward takes the forward input.
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& dy, const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& dy, const Tensor& x);

// Row-wise softmax on [n, C]; backward takes the forward output.
Tensor softmax_rows(const Tensor& x);
Tensor softmax_rows_backward(const Tensor& dy, const Tensor& y);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig config = {});
  void zero_grad();
  void step(double lr);
  int steps_taken() const { return t_; }

 private:
  std::vector<Param*> params_;
  AdamConfig config_;
  int t_ = 0;
};

// Checkpoint: flat little-endian float64 blobs in weights.bin plus a JSON
// index (name, shape, dtype, offset); config_json is stored alongside as
// config.json.
void save_checkpoint(const std::string& dir, const std::vector<Param*>& params,
                     const std::string& config_json);
void load_checkpoint(const std::string& dir, const std::vector<Param*>& params);
std::string read_checkpoint_config(const std::string& dir);

}  // namespace doadef::nn
