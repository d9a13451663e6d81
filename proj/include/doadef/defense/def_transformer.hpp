// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "doadef/nn/nn.hpp"
#include "doadef/tensor.hpp"

namespace doadef::defense {

struct DefTransformerConfig {
  int embed_dim = 64;
  int stages = 4;
  int layers_per_stage = 4;
  int window = 8;
  int anchor_downsample = 2;  // S
  double alpha = 0.25;
  enum class ReconNorm { kL1, kMse };
  ReconNorm recon_norm = ReconNorm::kL1;
  int ffn_ratio = 2;

  void validate() const;
  std::string to_json() const;
  static DefTransformerConfig from_json(const std::string& text);
};

// The four per-stage attention footprints, applied in this order.
struct StripePattern {
  bool vertical = false;
  bool shifted = false;
};
StripePattern stripe_pattern_for_layer(int layer_in_stage);

// A contiguous token group with its local (h x w) grid; ids index into the
// row-major token sequence of the full map.
struct TokenGroup {
  std::vector<int> ids;
  int h = 0, w = 0;
};

// Horizontal stripes: bands of `stripe_width` rows spanning the full width.
// Vertical stripes: bands of columns. Shifted variants roll the striped axis
// cyclically by half a stripe. stripe_width must divide the padded sides.
std::vector<TokenGroup> build_stripes(int h, int w, int stripe_width, StripePattern pattern);
std::vector<TokenGroup> build_windows(int h, int w, int window);

// S x S average pooling over a group's local grid; edge blocks pool whatever
// remains, so a group smaller than S x S yields a single pooled token.
int pooled_count(int h, int w, int s);
Tensor pool_tokens(const Tensor& xs, int h, int w, int s);
Tensor pool_tokens_backward(const Tensor& dpooled, int h, int w, int s);

// Anchored attention: Y = softmax(Q A^T / sqrt(d)) (softmax(A K^T / sqrt(d)) V).
struct AnchoredAttentionParts {
  Tensor me;   // [n, a]
  Tensor md;   // [a, n]
  Tensor mdv;  // [a, dv]
  Tensor y;    // [n, dv]
};
AnchoredAttentionParts anchored_attention_parts(const Tensor& q, const Tensor& k,
                                                const Tensor& v, const Tensor& a);
Tensor anchored_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                          const Tensor& a);

// Scaled-cosine attention with additive pre-softmax relative-position bias:
// softmax(cos(Q,K)/gamma + bias) V. Zero-norm rows contribute cosine 0.
struct CosineAttentionParts {
  Tensor qhat, khat;  // unit rows (zero rows stay zero)
  std::vector<double> qnorm, knorm;
  Tensor cos;   // [n, n]
  Tensor attn;  // softmax output
  Tensor y;     // [n, dv]
};
CosineAttentionParts cosine_attention_parts(const Tensor& q, const Tensor& k,
                                            const Tensor& v, double gamma,
                                            const Tensor& bias);
Tensor cosine_window_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                               double gamma, const Tensor& bias);

// Anchored stripe self-attention over all stripes of a pattern; weights are
// shared across stripes.
struct AnchoredStripeAttention {
  nn::Linear wq, wk, wv, wo, anchor_proj;
  int dim = 0;
  int downsample = 2;

  void init(const std::string& name, int d, int s, Rng& rng);
  struct StripeCache {
    TokenGroup group;
    Tensor xs, q, k, v, pooled, anchors;
    AnchoredAttentionParts parts;
  };
  struct Cache {
    std::vector<StripeCache> stripes;
  };
  Tensor forward(const Tensor& tokens, const std::vector<TokenGroup>& groups,
                 Cache* cache) const;
  Tensor backward(const Tensor& dout, const Cache& cache, bool param_grads);
  void collect(std::vector<nn::Param*>& out);
};

struct CosineWindowAttention {
  nn::Linear wq, wk, wv, wo;
  nn::Param gamma;       // scalar, lower-bounded at kGammaMin
  nn::Param bias_table;  // [(2w-1)^2]
  std::vector<int> rel_index;  // [w^2 * w^2]
  int dim = 0;
  int window = 8;

  static constexpr double kGammaMin = 0.01;

  void init(const std::string& name, int d, int w, Rng& rng);
  Tensor bias_matrix() const;  // [w^2, w^2] gathered from the table
  struct WindowCache {
    TokenGroup group;
    Tensor xs, q, k, v;
    CosineAttentionParts parts;
  };
  struct Cache {
    std::vector<WindowCache> windows;
    double gamma_eff = 0.0;
  };
  Tensor forward(const Tensor& tokens, const std::vector<TokenGroup>& groups,
                 Cache* cache) const;
  Tensor backward(const Tensor& dout, const Cache& cache, bool param_grads);
  void collect(std::vector<nn::Param*>& out);
};

// One transformer layer: parallel ASSA + cosine window attention summed, a
// skip branch, then a feed-forward block; residual-post-norm placement, so a
// fully zeroed layer is the identity map.
struct TransformerLayer {
  AnchoredStripeAttention assa;
  CosineWindowAttention win;
  nn::Linear ffn1, ffn2;
  nn::LayerNorm ln1, ln2;
  StripePattern pattern;

  void init(const std::string& name, const DefTransformerConfig& cfg, StripePattern p,
            Rng& rng);
  struct Cache {
    AnchoredStripeAttention::Cache assa;
    CosineWindowAttention::Cache win;
    nn::LayerNorm::Cache ln1, ln2;
    Tensor x1;       // after the first residual, input to the FFN
    Tensor ffn_pre;  // fc1 output
    Tensor ffn_mid;  // gelu(fc1)
  };
  Tensor forward(const Tensor& tokens, const std::vector<TokenGroup>& stripes,
                 const std::vector<TokenGroup>& windows, Cache* cache) const;
  Tensor backward(const Tensor& dtokens, const Cache& cache, bool param_grads);
  void collect(std::vector<nn::Param*>& out);
};

class DefTransformer {
 public:
  DefTransformer(DefTransformerConfig config, std::uint64_t init_seed);

  const DefTransformerConfig& config() const { return config_; }

  // Input conv + symmetric-reflect padding of the spatial dims up to a window
  // multiple: [3,M,M] -> [C,H,W].
  Tensor feature_extract(const Tensor& x) const;

  struct Cache;
  Tensor forward(const Tensor& x, Cache& cache) const;
  Tensor backward(const Tensor& dy, const Cache& cache, bool param_grads);
  // Purified tensor, same shape as the input.
  Tensor reconstruct(const Tensor& x) const;

  std::vector<nn::Param*> params();
  // Re-apply parameter constraints (gamma lower bound) after an optimizer step.
  void clamp_constraints();

  void save(const std::string& dir) const;
  static DefTransformer load(const std::string& dir);

 private:
  DefTransformerConfig config_;
  nn::Conv2d conv_in_, conv_mid_, conv_out_;
  std::vector<TransformerLayer> layers_;
};

struct DefTransformer::Cache {
  int m = 0, h = 0, w = 0;
  nn::Conv2d::Cache conv_in, conv_mid, conv_out;
  std::vector<TransformerLayer::Cache> layers;
};

// FLOP estimates for one attention application on an eta-token, C-channel
// feature map: anchored stripe attention vs global ViT self-attention.
double assa_flop_estimate(std::int64_t eta, std::int64_t channels, std::int64_t s);
double global_flop_estimate(std::int64_t eta, std::int64_t channels);

// Mean-reduced reconstruction error and its gradient w.r.t. the
// reconstruction.
struct ReconLossResult {
  double value = 0.0;
  Tensor grad;
};
ReconLossResult reconstruction_loss(const Tensor& recon, const Tensor& target,
                                    DefTransformerConfig::ReconNorm norm);

// alpha * ||T(x_n) - x_n|| + ||T(x_adv) - x_n||, mean-reduced per term.
double joint_loss(const Tensor& x_clean, const Tensor& x_adv,
                  const std::function<Tensor(const Tensor&)>& reconstruct, double alpha,
                  DefTransformerConfig::ReconNorm norm = DefTransformerConfig::ReconNorm::kL1);
double joint_loss(const Tensor& x_clean, const Tensor& x_adv, const DefTransformer& model,
                  double alpha);

struct PairedDataset {
  std::vector<Tensor> clean;
  std::vector<Tensor> adv;
  std::int64_t train_count = 0;
  std::int64_t val_count = 0;
};

struct DefenseTrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
  int schedule_sources = 1;  // picks the L=1 or L=2 learning-rate schedule
  std::uint64_t seed = 0;
  bool verbose = false;
};

// L=1: halved every five epochs; L=2: halved at epoch five, then every two.
double lr_at_epoch(int epoch_1based, int num_sources, double lr0);

struct DefenseTrainLog {
  std::vector<double> train_loss;
  std::vector<double> val_recon;      // mean-abs reconstruction error, clean
  std::vector<double> val_adv_recon;  // mean-abs reconstruction error, adversarial
  std::vector<double> lr;
};

DefenseTrainLog train_defense(DefTransformer& model, const PairedDataset& data,
                              const DefenseTrainConfig& config);

}  // namespace doadef::defense
