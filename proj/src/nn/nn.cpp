// SPDX-License-Identifier: Apache-2.0
#include "doadef/nn/nn.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "doadef/kernels.hpp"

namespace doadef::nn {

using nlohmann::json;

void Param::init_shape(const std::string& n, std::vector<int> shape) {
  name = n;
  value = Tensor(shape);
  grad = Tensor(shape);
  adam_m = Tensor(shape);
  adam_v = Tensor(std::move(shape));
}

void fill_kaiming_normal(Tensor& t, Rng& rng, int fan_in) {
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : t.v) v = rng.normal() * std_dev;
}

// ---------------------------------------------------------------------------
// Linear

void Linear::init(const std::string& name, int in_dim, int out_dim, Rng& rng) {
  in = in_dim;
  out = out_dim;
  w.init_shape(name + ".weight", {out, in});
  b.init_shape(name + ".bias", {out});
  fill_kaiming_normal(w.value, rng, in);
}

void Linear::init_zero(const std::string& name, int in_dim, int out_dim) {
  in = in_dim;
  out = out_dim;
  w.init_shape(name + ".weight", {out, in});
  b.init_shape(name + ".bias", {out});
}

Tensor Linear::forward(const Tensor& x) const {
  const int n = x.shape[0];
  Tensor y({n, out});
  linalg::matmul_bt_acc(x.data(), w.value.data(), y.data(), n, in, out);
  for (int i = 0; i < n; ++i)
    kernels::add(b.value.data(), y.data() + static_cast<std::size_t>(i) * out, out);
  return y;
}

Tensor Linear::backward(const Tensor& dy, const Tensor& x, bool param_grads) {
  const int n = dy.shape[0];
  Tensor dx({n, in});
  linalg::matmul_acc(dy.data(), w.value.data(), dx.data(), n, out, in);
  if (param_grads) {
    linalg::matmul_at_acc(dy.data(), x.data(), w.grad.data(), n, out, in);
    for (int i = 0; i < n; ++i)
      kernels::add(dy.data() + static_cast<std::size_t>(i) * out, b.grad.data(), out);
  }
  return dx;
}

void Linear::collect(std::vector<Param*>& out_params) {
  out_params.push_back(&w);
  out_params.push_back(&b);
}

// ---------------------------------------------------------------------------
// Conv2d

void Conv2d::init(const std::string& name, int in_channels, int out_channels, int k,
                  Rng& rng) {
  if (k % 2 == 0) throw std::invalid_argument("conv kernel must be odd");
  in_ch = in_channels;
  out_ch = out_channels;
  ksize = k;
  w.init_shape(name + ".weight", {out_ch, in_ch * k * k});
  b.init_shape(name + ".bias", {out_ch});
  fill_kaiming_normal(w.value, rng, in_ch * k * k);
}

Tensor Conv2d::forward(const Tensor& x, Cache* cache) const {
  if (x.shape.size() != 3 || x.shape[0] != in_ch)
    throw std::domain_error("conv input shape mismatch");
  const int h = x.shape[1], wd = x.shape[2];
  const int pad = ksize / 2;
  const int kk = ksize * ksize;
  Tensor cols({in_ch * kk, h * wd});
  for (int ci = 0; ci < in_ch; ++ci)
    for (int dy = 0; dy < ksize; ++dy)
      for (int dx = 0; dx < ksize; ++dx) {
        double* crow = cols.data() +
                       static_cast<std::size_t>(ci * kk + dy * ksize + dx) * h * wd;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy - pad;
          if (sy < 0 || sy >= h) continue;
          for (int xx = 0; xx < wd; ++xx) {
            const int sx = xx + dx - pad;
            if (sx < 0 || sx >= wd) continue;
            crow[y * wd + xx] = x.at(ci, sy, sx);
          }
        }
      }
  Tensor y({out_ch, h, wd});
  linalg::matmul_acc(w.value.data(), cols.data(), y.data(), out_ch, in_ch * kk, h * wd);
  for (int co = 0; co < out_ch; ++co) {
    double* row = y.data() + static_cast<std::size_t>(co) * h * wd;
    const double bias = b.value[co];
    for (int i = 0; i < h * wd; ++i) row[i] += bias;
  }
  if (cache) {
    cache->cols = std::move(cols);
    cache->h = h;
    cache->w = wd;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, const Cache& cache, bool param_grads) {
  const int h = cache.h, wd = cache.w;
  const int kk = ksize * ksize;
  const int hw = h * wd;
  if (param_grads) {
    linalg::matmul_bt_acc(dy.data(), cache.cols.data(), w.grad.data(), out_ch,
                          hw, in_ch * kk);
    for (int co = 0; co < out_ch; ++co)
      b.grad[co] += kernels::sum(dy.data() + static_cast<std::size_t>(co) * hw, hw);
  }
  Tensor dcols({in_ch * kk, hw});
  linalg::matmul_at_acc(w.value.data(), dy.data(), dcols.data(), out_ch, in_ch * kk, hw);
  // col2im scatter-add
  Tensor dx({in_ch, h, wd});
  const int pad = ksize / 2;
  for (int ci = 0; ci < in_ch; ++ci)
    for (int dyk = 0; dyk < ksize; ++dyk)
      for (int dxk = 0; dxk < ksize; ++dxk) {
        const double* crow = dcols.data() +
                             static_cast<std::size_t>(ci * kk + dyk * ksize + dxk) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dyk - pad;
          if (sy < 0 || sy >= h) continue;
          for (int xx = 0; xx < wd; ++xx) {
            const int sx = xx + dxk - pad;
            if (sx < 0 || sx >= wd) continue;
            dx.at(ci, sy, sx) += crow[y * wd + xx];
          }
        }
      }
  return dx;
}

void Conv2d::collect(std::vector<Param*>& out_params) {
  out_params.push_back(&w);
  out_params.push_back(&b);
}

// ---------------------------------------------------------------------------
// LayerNorm

void LayerNorm::init(const std::string& name, int c) {
  dim = c;
  gamma.init_shape(name + ".gamma", {c});
  beta.init_shape(name + ".beta", {c});
  gamma.value.fill(1.0);
}

Tensor LayerNorm::forward(const Tensor& x, Cache* cache) const {
  const int n = x.shape[0];
  Tensor y({n, dim});
  if (cache) {
    cache->xhat = Tensor({n, dim});
    cache->inv_std.assign(n, 0.0);
  }
  for (int i = 0; i < n; ++i) {
    const double* row = x.data() + static_cast<std::size_t>(i) * dim;
    double mu = kernels::sum(row, dim) / dim;
    double var = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double d = row[j] - mu;
      var += d * d;
    }
    var /= dim;
    const double inv = 1.0 / std::sqrt(var + eps);
    double* yrow = y.data() + static_cast<std::size_t>(i) * dim;
    for (int j = 0; j < dim; ++j) {
      const double xh = (row[j] - mu) * inv;
      if (cache) cache->xhat.at(i, j) = xh;
      yrow[j] = gamma.value[j] * xh + beta.value[j];
    }
    if (cache) cache->inv_std[i] = inv;
  }
  return y;
}

Tensor LayerNorm::backward(const Tensor& dy, const Cache& cache, bool param_grads) {
  const int n = dy.shape[0];
  Tensor dx({n, dim});
  for (int i = 0; i < n; ++i) {
    const double* dyr = dy.data() + static_cast<std::size_t>(i) * dim;
    const double* xh = cache.xhat.data() + static_cast<std::size_t>(i) * dim;
    double sum_dxh = 0.0, sum_dxh_xh = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double dxh = dyr[j] * gamma.value[j];
      sum_dxh += dxh;
      sum_dxh_xh += dxh * xh[j];
    }
    const double inv = cache.inv_std[i];
    double* dxr = dx.data() + static_cast<std::size_t>(i) * dim;
    for (int j = 0; j < dim; ++j) {
      const double dxh = dyr[j] * gamma.value[j];
      dxr[j] = inv * (dxh - sum_dxh / dim - xh[j] * sum_dxh_xh / dim);
    }
    if (param_grads)
      for (int j = 0; j < dim; ++j) {
        gamma.grad[j] += dyr[j] * xh[j];
        beta.grad[j] += dyr[j];
      }
  }
  return dx;
}

void LayerNorm::collect(std::vector<Param*>& out_params) {
  out_params.push_back(&gamma);
  out_params.push_back(&beta);
}

// ---------------------------------------------------------------------------
// Activations

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.v)
    if (v < 0.0) v = 0.0;
  return y;
}

Tensor relu_backward(const Tensor& dy, const Tensor& x) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (x[i] <= 0.0) dx[i] = 0.0;
  return dx;
}

namespace {
inline double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)); }
inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}
}  // namespace

Tensor gelu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.v) v = v * norm_cdf(v);
  return y;
}

Tensor gelu_backward(const Tensor& dy, const Tensor& x) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    dx[i] *= norm_cdf(x[i]) + x[i] * norm_pdf(x[i]);
  return dx;
}

Tensor softmax_rows(const Tensor& x) {
  const int n = x.shape[0], c = x.shape[1];
  Tensor y({n, c});
  for (int i = 0; i < n; ++i) {
    const double* row = x.data() + static_cast<std::size_t>(i) * c;
    double* yrow = y.data() + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      yrow[j] = std::exp(row[j] - mx);
      z += yrow[j];
    }
    const double inv = 1.0 / z;
    for (int j = 0; j < c; ++j) yrow[j] *= inv;
  }
  return y;
}

Tensor softmax_rows_backward(const Tensor& dy, const Tensor& y) {
  const int n = y.shape[0], c = y.shape[1];
  Tensor dx({n, c});
  for (int i = 0; i < n; ++i) {
    const double* dyr = dy.data() + static_cast<std::size_t>(i) * c;
    const double* yr = y.data() + static_cast<std::size_t>(i) * c;
    const double dot = kernels::dot(dyr, yr, c);
    double* dxr = dx.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) dxr[j] = yr[j] * (dyr[j] - dot);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Param*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {}

void Adam::zero_grad() {
  for (Param* p : params_) p->grad.fill(0.0);
}

void Adam::step(double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, t_);
  const double bc2 = 1.0 - std::pow(b2, t_);
  for (Param* p : params_) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      p->adam_m[i] = b1 * p->adam_m[i] + (1.0 - b1) * g;
      p->adam_v[i] = b2 * p->adam_v[i] + (1.0 - b2) * g * g;
      const double mhat = p->adam_m[i] / bc1;
      const double vhat = p->adam_v[i] / bc2;
      p->value[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& dir, const std::vector<Param*>& params,
                     const std::string& config_json) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json index;
  index["format"] = "doadef-ckpt-v1";
  index["endianness"] = "little";
  json tensors = json::array();
  std::ofstream blob(fs::path(dir) / "weights.bin", std::ios::binary);
  std::int64_t offset = 0;
  for (const Param* p : params) {
    tensors.push_back(json{{"name", p->name},
                           {"shape", p->value.shape},
                           {"dtype", "float64"},
                           {"offset_bytes", offset}});
    blob.write(reinterpret_cast<const char*>(p->value.data()),
               static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    offset += static_cast<std::int64_t>(p->value.size() * sizeof(double));
  }
  index["tensors"] = std::move(tensors);
  std::ofstream idx(fs::path(dir) / "index.json");
  idx << index.dump(2) << "\n";
  if (!config_json.empty()) {
    std::ofstream cfg(fs::path(dir) / "config.json");
    cfg << config_json << "\n";
  }
}

void load_checkpoint(const std::string& dir, const std::vector<Param*>& params) {
  namespace fs = std::filesystem;
  std::ifstream idx_in(fs::path(dir) / "index.json");
  if (!idx_in) throw std::runtime_error("cannot open checkpoint index in " + dir);
  json index = json::parse(idx_in);
  std::ifstream blob(fs::path(dir) / "weights.bin", std::ios::binary);
  if (!blob) throw std::runtime_error("cannot open weights.bin in " + dir);

  std::unordered_map<std::string, const json*> by_name;
  for (const auto& t : index.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;

  for (Param* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint missing tensor: " + p->name);
    const json& t = *it->second;
    const auto shape = t.at("shape").get<std::vector<int>>();
    if (shape != p->value.shape)
      throw std::runtime_error("checkpoint shape mismatch for " + p->name);
    blob.seekg(t.at("offset_bytes").get<std::int64_t>());
    blob.read(reinterpret_cast<char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!blob) throw std::runtime_error("checkpoint blob truncated at " + p->name);
  }
}

std::string read_checkpoint_config(const std::string& dir) {
  std::ifstream cfg(std::filesystem::path(dir) / "config.json");
  if (!cfg) throw std::runtime_error("cannot open config.json in " + dir);
  std::string s((std::istreambuf_iterator<char>(cfg)), std::istreambuf_iterator<char>());
  return s;
}

}  // namespace doadef::nn
