// SPDX-License-Identifier: Apache-2.0
#include "doadef/defense/def_transformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "doadef/kernels.hpp"

namespace doadef::defense {

using nlohmann::json;

void DefTransformerConfig::validate() const {
  if (embed_dim < 1) throw std::invalid_argument("embed_dim must be positive");
  if (stages < 1 || layers_per_stage < 1)
    throw std::invalid_argument("stage/layer counts must be positive");
  if (window < 1) throw std::invalid_argument("window must be positive");
  if (anchor_downsample < 2)
    throw std::invalid_argument("anchor downsampling factor must be >= 2");
  if (ffn_ratio < 1) throw std::invalid_argument("ffn_ratio must be positive");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
}

std::string DefTransformerConfig::to_json() const {
  json j;
  j["embed_dim"] = embed_dim;
  j["stages"] = stages;
  j["layers_per_stage"] = layers_per_stage;
  j["window"] = window;
  j["anchor_downsample"] = anchor_downsample;
  j["alpha"] = alpha;
  j["recon_norm"] = recon_norm == ReconNorm::kL1 ? "l1" : "mse";
  j["ffn_ratio"] = ffn_ratio;
  return j.dump(2);
}

DefTransformerConfig DefTransformerConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  DefTransformerConfig c;
  c.embed_dim = j.value("embed_dim", 64);
  c.stages = j.value("stages", 4);
  c.layers_per_stage = j.value("layers_per_stage", 4);
  c.window = j.value("window", 8);
  c.anchor_downsample = j.value("anchor_downsample", 2);
  c.alpha = j.value("alpha", 0.25);
  c.recon_norm = j.value("recon_norm", std::string("l1")) == "mse" ? ReconNorm::kMse
                                                                   : ReconNorm::kL1;
  c.ffn_ratio = j.value("ffn_ratio", 2);
  c.validate();
  return c;
}

StripePattern stripe_pattern_for_layer(int layer_in_stage) {
  switch (layer_in_stage % 4) {
    case 0: return {false, false};  // horizontal
    case 1: return {true, false};   // vertical
    case 2: return {false, true};   // shifted horizontal
    default: return {true, true};   // shifted vertical
  }
}

std::vector<TokenGroup> build_stripes(int h, int w, int stripe_width, StripePattern pattern) {
  const int axis = pattern.vertical ? w : h;
  if (axis % stripe_width != 0)
    throw std::invalid_argument("stripe width must divide the striped axis");
  const int shift = pattern.shifted ? stripe_width / 2 : 0;
  const int nstripes = axis / stripe_width;
  std::vector<TokenGroup> groups(nstripes);
  for (int s = 0; s < nstripes; ++s) {
    TokenGroup& g = groups[s];
    if (pattern.vertical) {
      g.h = h;
      g.w = stripe_width;
      g.ids.reserve(static_cast<std::size_t>(h) * stripe_width);
      for (int r = 0; r < h; ++r)
        for (int lc = 0; lc < stripe_width; ++lc) {
          const int c = (s * stripe_width + lc - shift + w) % w;
          g.ids.push_back(r * w + c);
        }
    } else {
      g.h = stripe_width;
      g.w = w;
      g.ids.reserve(static_cast<std::size_t>(stripe_width) * w);
      for (int lr = 0; lr < stripe_width; ++lr) {
        const int r = (s * stripe_width + lr - shift + h) % h;
        for (int c = 0; c < w; ++c) g.ids.push_back(r * w + c);
      }
    }
  }
  return groups;
}

std::vector<TokenGroup> build_windows(int h, int w, int window) {
  if (h % window != 0 || w % window != 0)
    throw std::invalid_argument("window must divide the padded sides");
  std::vector<TokenGroup> groups;
  for (int wy = 0; wy < h / window; ++wy)
    for (int wx = 0; wx < w / window; ++wx) {
      TokenGroup g;
      g.h = g.w = window;
      g.ids.reserve(static_cast<std::size_t>(window) * window);
      for (int y = 0; y < window; ++y)
        for (int x = 0; x < window; ++x)
          g.ids.push_back((wy * window + y) * w + (wx * window + x));
      groups.push_back(std::move(g));
    }
  return groups;
}

int pooled_count(int h, int w, int s) {
  if (s < 1) throw std::domain_error("pool factor must be >= 1");
  return ((h + s - 1) / s) * ((w + s - 1) / s);
}

Tensor pool_tokens(const Tensor& xs, int h, int w, int s) {
  const int d = xs.shape[1];
  const int ph = (h + s - 1) / s, pw = (w + s - 1) / s;
  Tensor out({ph * pw, d});
  for (int by = 0; by < ph; ++by)
    for (int bx = 0; bx < pw; ++bx) {
      const int y0 = by * s, y1 = std::min(h, y0 + s);
      const int x0 = bx * s, x1 = std::min(w, x0 + s);
      double* orow = out.data() + static_cast<std::size_t>(by * pw + bx) * d;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          kernels::add(xs.data() + static_cast<std::size_t>(y * w + x) * d, orow, d);
      kernels::scale(1.0 / ((y1 - y0) * (x1 - x0)), orow, d);
    }
  return out;
}

Tensor pool_tokens_backward(const Tensor& dpooled, int h, int w, int s) {
  const int d = dpooled.shape[1];
  const int ph = (h + s - 1) / s, pw = (w + s - 1) / s;
  Tensor dxs({h * w, d});
  for (int by = 0; by < ph; ++by)
    for (int bx = 0; bx < pw; ++bx) {
      const int y0 = by * s, y1 = std::min(h, y0 + s);
      const int x0 = bx * s, x1 = std::min(w, x0 + s);
      const double inv = 1.0 / ((y1 - y0) * (x1 - x0));
      const double* prow = dpooled.data() + static_cast<std::size_t>(by * pw + bx) * d;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          kernels::axpy(inv, prow, dxs.data() + static_cast<std::size_t>(y * w + x) * d, d);
    }
  return dxs;
}

// ---------------------------------------------------------------------------
// Attention primitives

AnchoredAttentionParts anchored_attention_parts(const Tensor& q, const Tensor& k,
                                                const Tensor& v, const Tensor& a) {
  if (a.shape.empty() || a.shape[0] < 1)
    throw std::domain_error("anchored attention needs at least one anchor");
  const int n = q.shape[0], d = q.shape[1];
  const int na = a.shape[0], dv = v.shape[1];
  if (k.shape[0] != n || k.shape[1] != d || v.shape[0] != n || a.shape[1] != d)
    throw std::domain_error("anchored attention shape mismatch");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  AnchoredAttentionParts parts;
  Tensor se({n, na});
  linalg::matmul_bt_acc(q.data(), a.data(), se.data(), n, d, na);
  kernels::scale(inv_sqrt_d, se.data(), se.size());
  parts.me = nn::softmax_rows(se);

  Tensor sd({na, n});
  linalg::matmul_bt_acc(a.data(), k.data(), sd.data(), na, d, n);
  kernels::scale(inv_sqrt_d, sd.data(), sd.size());
  parts.md = nn::softmax_rows(sd);

  parts.mdv = Tensor({na, dv});
  linalg::matmul_acc(parts.md.data(), v.data(), parts.mdv.data(), na, n, dv);
  parts.y = Tensor({n, dv});
  linalg::matmul_acc(parts.me.data(), parts.mdv.data(), parts.y.data(), n, na, dv);
  return parts;
}

Tensor anchored_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                          const Tensor& a) {
  return anchored_attention_parts(q, k, v, a).y;
}

CosineAttentionParts cosine_attention_parts(const Tensor& q, const Tensor& k,
                                            const Tensor& v, double gamma,
                                            const Tensor& bias) {
  if (!(gamma > 0.0)) throw std::invalid_argument("cosine attention needs gamma > 0");
  const int n = q.shape[0], d = q.shape[1], dv = v.shape[1];
  if (k.shape[0] != n || k.shape[1] != d || v.shape[0] != n)
    throw std::domain_error("cosine attention shape mismatch");
  if (!bias.v.empty() && bias.shape != std::vector<int>{n, n})
    throw std::domain_error("bias must be [n,n]");

  CosineAttentionParts parts;
  parts.qhat = q;
  parts.khat = k;
  parts.qnorm.resize(n);
  parts.knorm.resize(n);
  for (int i = 0; i < n; ++i) {
    double* qr = parts.qhat.data() + static_cast<std::size_t>(i) * d;
    double* kr = parts.khat.data() + static_cast<std::size_t>(i) * d;
    parts.qnorm[i] = std::sqrt(kernels::dot(qr, qr, d));
    parts.knorm[i] = std::sqrt(kernels::dot(kr, kr, d));
    if (parts.qnorm[i] > 0.0)
      kernels::scale(1.0 / parts.qnorm[i], qr, d);
    else
      std::fill(qr, qr + d, 0.0);
    if (parts.knorm[i] > 0.0)
      kernels::scale(1.0 / parts.knorm[i], kr, d);
    else
      std::fill(kr, kr + d, 0.0);
  }
  parts.cos = Tensor({n, n});
  linalg::matmul_bt_acc(parts.qhat.data(), parts.khat.data(), parts.cos.data(), n, d, n);
  Tensor scores = parts.cos;
  kernels::scale(1.0 / gamma, scores.data(), scores.size());
  if (!bias.v.empty()) kernels::add(bias.data(), scores.data(), scores.size());
  parts.attn = nn::softmax_rows(scores);
  parts.y = Tensor({n, dv});
  linalg::matmul_acc(parts.attn.data(), v.data(), parts.y.data(), n, n, dv);
  return parts;
}

Tensor cosine_window_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                               double gamma, const Tensor& bias) {
  return cosine_attention_parts(q, k, v, gamma, bias).y;
}

// ---------------------------------------------------------------------------
// Gather/scatter helpers

namespace {

Tensor gather_rows(const Tensor& tokens, const std::vector<int>& ids) {
  const int d = tokens.shape[1];
  Tensor out({static_cast<int>(ids.size()), d});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::memcpy(out.data() + i * d, tokens.data() + static_cast<std::size_t>(ids[i]) * d,
                sizeof(double) * d);
  return out;
}

void scatter_rows_add(const Tensor& rows, const std::vector<int>& ids, Tensor& out) {
  const int d = out.shape[1];
  for (std::size_t i = 0; i < ids.size(); ++i)
    kernels::add(rows.data() + i * d, out.data() + static_cast<std::size_t>(ids[i]) * d, d);
}

}  // namespace

// ---------------------------------------------------------------------------
// AnchoredStripeAttention

void AnchoredStripeAttention::init(const std::string& name, int d, int s, Rng& rng) {
  dim = d;
  downsample = s;
  wq.init(name + ".wq", d, d, rng);
  wk.init(name + ".wk", d, d, rng);
  wv.init(name + ".wv", d, d, rng);
  wo.init(name + ".wo", d, d, rng);
  anchor_proj.init(name + ".anchor_proj", d, d, rng);
}

Tensor AnchoredStripeAttention::forward(const Tensor& tokens,
                                        const std::vector<TokenGroup>& groups,
                                        Cache* cache) const {
  Tensor out({tokens.shape[0], dim});
  if (cache) cache->stripes.clear();
  for (const TokenGroup& g : groups) {
    StripeCache sc;
    sc.group = g;
    sc.xs = gather_rows(tokens, g.ids);
    sc.q = wq.forward(sc.xs);
    sc.k = wk.forward(sc.xs);
    sc.v = wv.forward(sc.xs);
    sc.pooled = pool_tokens(sc.xs, g.h, g.w, downsample);
    sc.anchors = anchor_proj.forward(sc.pooled);
    sc.parts = anchored_attention_parts(sc.q, sc.k, sc.v, sc.anchors);
    const Tensor o = wo.forward(sc.parts.y);
    scatter_rows_add(o, g.ids, out);
    if (cache) cache->stripes.push_back(std::move(sc));
  }
  return out;
}

Tensor AnchoredStripeAttention::backward(const Tensor& dout, const Cache& cache,
                                         bool param_grads) {
  Tensor dtokens({dout.shape[0], dim});
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));
  for (const StripeCache& sc : cache.stripes) {
    const int n = static_cast<int>(sc.group.ids.size());
    const int na = sc.anchors.shape[0];
    const Tensor do_rows = gather_rows(dout, sc.group.ids);
    Tensor dy = wo.backward(do_rows, sc.parts.y, param_grads);

    // y = me * mdv
    Tensor dme({n, na});
    linalg::matmul_bt_acc(dy.data(), sc.parts.mdv.data(), dme.data(), n, dim, na);
    Tensor dmdv({na, dim});
    linalg::matmul_at_acc(sc.parts.me.data(), dy.data(), dmdv.data(), n, na, dim);

    // mdv = md * v
    Tensor dmd({na, n});
    linalg::matmul_bt_acc(dmdv.data(), sc.v.data(), dmd.data(), na, dim, n);
    Tensor dv({n, dim});
    linalg::matmul_at_acc(sc.parts.md.data(), dmdv.data(), dv.data(), na, n, dim);

    // me = softmax(q a^T / sqrt(d))
    Tensor dse = nn::softmax_rows_backward(dme, sc.parts.me);
    kernels::scale(inv_sqrt_d, dse.data(), dse.size());
    Tensor dq({n, dim});
    linalg::matmul_acc(dse.data(), sc.anchors.data(), dq.data(), n, na, dim);
    Tensor danchors({na, dim});
    linalg::matmul_at_acc(dse.data(), sc.q.data(), danchors.data(), n, na, dim);

    // md = softmax(a k^T / sqrt(d))
    Tensor dsd = nn::softmax_rows_backward(dmd, sc.parts.md);
    kernels::scale(inv_sqrt_d, dsd.data(), dsd.size());
    linalg::matmul_acc(dsd.data(), sc.k.data(), danchors.data(), na, n, dim);
    Tensor dk({n, dim});
    linalg::matmul_at_acc(dsd.data(), sc.anchors.data(), dk.data(), na, n, dim);

    const Tensor dpooled = anchor_proj.backward(danchors, sc.pooled, param_grads);
    Tensor dxs = pool_tokens_backward(dpooled, sc.group.h, sc.group.w, downsample);
    {
      Tensor t = wq.backward(dq, sc.xs, param_grads);
      kernels::add(t.data(), dxs.data(), dxs.size());
      t = wk.backward(dk, sc.xs, param_grads);
      kernels::add(t.data(), dxs.data(), dxs.size());
      t = wv.backward(dv, sc.xs, param_grads);
      kernels::add(t.data(), dxs.data(), dxs.size());
    }
    scatter_rows_add(dxs, sc.group.ids, dtokens);
  }
  return dtokens;
}

void AnchoredStripeAttention::collect(std::vector<nn::Param*>& out) {
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
  anchor_proj.collect(out);
}

// ---------------------------------------------------------------------------
// CosineWindowAttention

void CosineWindowAttention::init(const std::string& name, int d, int w, Rng& rng) {
  dim = d;
  window = w;
  wq.init(name + ".wq", d, d, rng);
  wk.init(name + ".wk", d, d, rng);
  wv.init(name + ".wv", d, d, rng);
  wo.init(name + ".wo", d, d, rng);
  gamma.init_shape(name + ".gamma", {1});
  gamma.value[0] = kGammaMin;
  const int span = 2 * w - 1;
  bias_table.init_shape(name + ".bias_table", {span * span});
  const int n = w * w;
  rel_index.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int dy = (i / w) - (j / w) + w - 1;
      const int dx = (i % w) - (j % w) + w - 1;
      rel_index[static_cast<std::size_t>(i) * n + j] = dy * span + dx;
    }
}

Tensor CosineWindowAttention::bias_matrix() const {
  const int n = window * window;
  Tensor bias({n, n});
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = bias_table.value[rel_index[i]];
  return bias;
}

Tensor CosineWindowAttention::forward(const Tensor& tokens,
                                      const std::vector<TokenGroup>& groups,
                                      Cache* cache) const {
  Tensor out({tokens.shape[0], dim});
  const double gamma_eff = std::max(gamma.value[0], kGammaMin);
  const Tensor bias = bias_matrix();
  if (cache) {
    cache->windows.clear();
    cache->gamma_eff = gamma_eff;
  }
  for (const TokenGroup& g : groups) {
    WindowCache wc;
    wc.group = g;
    wc.xs = gather_rows(tokens, g.ids);
    wc.q = wq.forward(wc.xs);
    wc.k = wk.forward(wc.xs);
    wc.v = wv.forward(wc.xs);
    wc.parts = cosine_attention_parts(wc.q, wc.k, wc.v, gamma_eff, bias);
    const Tensor o = wo.forward(wc.parts.y);
    scatter_rows_add(o, g.ids, out);
    if (cache) cache->windows.push_back(std::move(wc));
  }
  return out;
}

Tensor CosineWindowAttention::backward(const Tensor& dout, const Cache& cache,
                                       bool param_grads) {
  Tensor dtokens({dout.shape[0], dim});
  const double ge = cache.gamma_eff;
  for (const WindowCache& wc : cache.windows) {
    const int n = static_cast<int>(wc.group.ids.size());
    const Tensor do_rows = gather_rows(dout, wc.group.ids);
    Tensor dy = wo.backward(do_rows, wc.parts.y, param_grads);

    Tensor dattn({n, n});
    linalg::matmul_bt_acc(dy.data(), wc.v.data(), dattn.data(), n, dim, n);
    Tensor dv({n, dim});
    linalg::matmul_at_acc(wc.parts.attn.data(), dy.data(), dv.data(), n, n, dim);

    Tensor dscores = nn::softmax_rows_backward(dattn, wc.parts.attn);
    if (param_grads) {
      double dgamma = 0.0;
      for (std::size_t i = 0; i < dscores.size(); ++i) {
        bias_table.grad[rel_index[i]] += dscores[i];
        dgamma -= dscores[i] * wc.parts.cos[i];
      }
      gamma.grad[0] += dgamma / (ge * ge);
    }
    Tensor dcos = dscores;
    kernels::scale(1.0 / ge, dcos.data(), dcos.size());

    Tensor dqhat({n, dim});
    linalg::matmul_acc(dcos.data(), wc.parts.khat.data(), dqhat.data(), n, n, dim);
    Tensor dkhat({n, dim});
    linalg::matmul_at_acc(dcos.data(), wc.parts.qhat.data(), dkhat.data(), n, n, dim);

    Tensor dq({n, dim}), dk({n, dim});
    for (int i = 0; i < n; ++i) {
      const double* qh = wc.parts.qhat.data() + static_cast<std::size_t>(i) * dim;
      const double* dqh = dqhat.data() + static_cast<std::size_t>(i) * dim;
      double* dqr = dq.data() + static_cast<std::size_t>(i) * dim;
      if (wc.parts.qnorm[i] > 0.0) {
        const double proj = kernels::dot(dqh, qh, dim);
        const double inv = 1.0 / wc.parts.qnorm[i];
        for (int c = 0; c < dim; ++c) dqr[c] = (dqh[c] - proj * qh[c]) * inv;
      }
      const double* kh = wc.parts.khat.data() + static_cast<std::size_t>(i) * dim;
      const double* dkh = dkhat.data() + static_cast<std::size_t>(i) * dim;
      double* dkr = dk.data() + static_cast<std::size_t>(i) * dim;
      if (wc.parts.knorm[i] > 0.0) {
        const double proj = kernels::dot(dkh, kh, dim);
        const double inv = 1.0 / wc.parts.knorm[i];
        for (int c = 0; c < dim; ++c) dkr[c] = (dkh[c] - proj * kh[c]) * inv;
      }
    }

    Tensor dxs = wq.backward(dq, wc.xs, param_grads);
    {
      Tensor t = wk.backward(dk, wc.xs, param_grads);
      kernels::add(t.data(), dxs.data(), dxs.size());
      t = wv.backward(dv, wc.xs, param_grads);
      kernels::add(t.data(), dxs.data(), dxs.size());
    }
    scatter_rows_add(dxs, wc.group.ids, dtokens);
  }
  return dtokens;
}

void CosineWindowAttention::collect(std::vector<nn::Param*>& out) {
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
  out.push_back(&gamma);
  out.push_back(&bias_table);
}

// ---------------------------------------------------------------------------
// TransformerLayer

void TransformerLayer::init(const std::string& name, const DefTransformerConfig& cfg,
                            StripePattern p, Rng& rng) {
  pattern = p;
  assa.init(name + ".assa", cfg.embed_dim, cfg.anchor_downsample, rng);
  win.init(name + ".win", cfg.embed_dim, cfg.window, rng);
  ffn1.init(name + ".ffn1", cfg.embed_dim, cfg.embed_dim * cfg.ffn_ratio, rng);
  ffn2.init(name + ".ffn2", cfg.embed_dim * cfg.ffn_ratio, cfg.embed_dim, rng);
  ln1.init(name + ".ln1", cfg.embed_dim);
  ln2.init(name + ".ln2", cfg.embed_dim);
}

Tensor TransformerLayer::forward(const Tensor& tokens,
                                 const std::vector<TokenGroup>& stripes,
                                 const std::vector<TokenGroup>& windows,
                                 Cache* cache) const {
  Tensor attn = assa.forward(tokens, stripes, cache ? &cache->assa : nullptr);
  {
    const Tensor a2 = win.forward(tokens, windows, cache ? &cache->win : nullptr);
    kernels::add(a2.data(), attn.data(), attn.size());
  }
  const Tensor n1 = ln1.forward(attn, cache ? &cache->ln1 : nullptr);
  Tensor x1 = tokens;
  kernels::add(n1.data(), x1.data(), x1.size());

  Tensor pre = ffn1.forward(x1);
  Tensor mid = nn::gelu(pre);
  const Tensor f = ffn2.forward(mid);
  const Tensor n2 = ln2.forward(f, cache ? &cache->ln2 : nullptr);
  Tensor out = x1;
  kernels::add(n2.data(), out.data(), out.size());
  if (cache) {
    cache->x1 = std::move(x1);
    cache->ffn_pre = std::move(pre);
    cache->ffn_mid = std::move(mid);
  }
  return out;
}

Tensor TransformerLayer::backward(const Tensor& dtokens, const Cache& cache,
                                  bool param_grads) {
  // out = x1 + ln2(ffn(x1))
  Tensor dx1 = dtokens;
  {
    const Tensor df = ln2.backward(dtokens, cache.ln2, param_grads);
    Tensor dmid = ffn2.backward(df, cache.ffn_mid, param_grads);
    const Tensor dpre = nn::gelu_backward(dmid, cache.ffn_pre);
    const Tensor d = ffn1.backward(dpre, cache.x1, param_grads);
    kernels::add(d.data(), dx1.data(), dx1.size());
  }
  // x1 = x + ln1(assa(x) + win(x))
  Tensor dx = dx1;
  const Tensor ds = ln1.backward(dx1, cache.ln1, param_grads);
  {
    const Tensor d1 = assa.backward(ds, cache.assa, param_grads);
    kernels::add(d1.data(), dx.data(), dx.size());
    const Tensor d2 = win.backward(ds, cache.win, param_grads);
    kernels::add(d2.data(), dx.data(), dx.size());
  }
  return dx;
}

void TransformerLayer::collect(std::vector<nn::Param*>& out) {
  assa.collect(out);
  win.collect(out);
  ffn1.collect(out);
  ffn2.collect(out);
  ln1.collect(out);
  ln2.collect(out);
}

// ---------------------------------------------------------------------------
// DefTransformer

namespace {

int mirror_index(int i, int m) {
  // Symmetric reflection (edge included), valid for any pad width.
  while (i < 0 || i >= m) {
    if (i < 0) i = -1 - i;
    if (i >= m) i = 2 * m - 1 - i;
  }
  return i;
}

Tensor reflect_pad(const Tensor& x, int h, int w) {
  const int c = x.shape[0], mh = x.shape[1], mw = x.shape[2];
  const int top = (h - mh) / 2, left = (w - mw) / 2;
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y) {
      const int sy = mirror_index(y - top, mh);
      for (int xx = 0; xx < w; ++xx)
        out.at(ch, y, xx) = x.at(ch, sy, mirror_index(xx - left, mw));
    }
  return out;
}

Tensor reflect_pad_backward(const Tensor& dpad, int mh, int mw) {
  const int c = dpad.shape[0], h = dpad.shape[1], w = dpad.shape[2];
  const int top = (h - mh) / 2, left = (w - mw) / 2;
  Tensor dx({c, mh, mw});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y) {
      const int sy = mirror_index(y - top, mh);
      for (int xx = 0; xx < w; ++xx)
        dx.at(ch, sy, mirror_index(xx - left, mw)) += dpad.at(ch, y, xx);
    }
  return dx;
}

Tensor crop_center(const Tensor& y, int m) {
  const int c = y.shape[0], h = y.shape[1], w = y.shape[2];
  const int top = (h - m) / 2, left = (w - m) / 2;
  Tensor out({c, m, m});
  for (int ch = 0; ch < c; ++ch)
    for (int yy = 0; yy < m; ++yy)
      for (int xx = 0; xx < m; ++xx) out.at(ch, yy, xx) = y.at(ch, yy + top, xx + left);
  return out;
}

Tensor crop_center_backward(const Tensor& dy, int h, int w) {
  const int c = dy.shape[0], m = dy.shape[1];
  const int top = (h - m) / 2, left = (w - m) / 2;
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int yy = 0; yy < m; ++yy)
      for (int xx = 0; xx < m; ++xx) out.at(ch, yy + top, xx + left) = dy.at(ch, yy, xx);
  return out;
}

Tensor chw_to_tokens(const Tensor& f) {
  const int c = f.shape[0], h = f.shape[1], w = f.shape[2];
  Tensor tokens({h * w, c});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) tokens.at(y * w + xx, ch) = f.at(ch, y, xx);
  return tokens;
}

Tensor tokens_to_chw(const Tensor& tokens, int c, int h, int w) {
  Tensor f({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) f.at(ch, y, xx) = tokens.at(y * w + xx, ch);
  return f;
}

}  // namespace

DefTransformer::DefTransformer(DefTransformerConfig config, std::uint64_t init_seed)
    : config_(std::move(config)) {
  config_.validate();
  Rng rng = Rng::derive(init_seed, 0xdef0);
  conv_in_.init("conv_in", 3, config_.embed_dim, 3, rng);
  conv_mid_.init("conv_mid", config_.embed_dim, config_.embed_dim, 3, rng);
  conv_out_.init("conv_out", config_.embed_dim, 3, 3, rng);
  const int total = config_.stages * config_.layers_per_stage;
  layers_.resize(total);
  for (int i = 0; i < total; ++i) {
    const int in_stage = i % config_.layers_per_stage;
    layers_[i].init("layers." + std::to_string(i), config_,
                    stripe_pattern_for_layer(in_stage), rng);
  }
}

Tensor DefTransformer::feature_extract(const Tensor& x) const {
  if (x.shape.size() != 3 || x.shape[0] != 3 || x.shape[1] != x.shape[2])
    throw std::domain_error("expected a [3,M,M] input tensor");
  const int m = x.shape[1];
  const int h = ((m + config_.window - 1) / config_.window) * config_.window;
  const Tensor xp = reflect_pad(x, h, h);
  return conv_in_.forward(xp, nullptr);
}

Tensor DefTransformer::forward(const Tensor& x, Cache& cache) const {
  if (x.shape.size() != 3 || x.shape[0] != 3 || x.shape[1] != x.shape[2])
    throw std::domain_error("expected a [3,M,M] input tensor");
  const int m = x.shape[1];
  const int h = ((m + config_.window - 1) / config_.window) * config_.window;
  cache.m = m;
  cache.h = cache.w = h;
  cache.layers.resize(layers_.size());

  const Tensor xp = reflect_pad(x, h, h);
  const Tensor f0 = conv_in_.forward(xp, &cache.conv_in);
  Tensor tokens = chw_to_tokens(f0);

  const auto windows = build_windows(h, h, config_.window);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto stripes = build_stripes(h, h, config_.window, layers_[i].pattern);
    tokens = layers_[i].forward(tokens, stripes, windows, &cache.layers[i]);
  }

  const Tensor fmid_in = tokens_to_chw(tokens, config_.embed_dim, h, h);
  Tensor fsum = conv_mid_.forward(fmid_in, &cache.conv_mid);
  kernels::add(f0.data(), fsum.data(), fsum.size());
  const Tensor y = conv_out_.forward(fsum, &cache.conv_out);
  return crop_center(y, m);
}

Tensor DefTransformer::backward(const Tensor& dy, const Cache& cache, bool param_grads) {
  const Tensor dy_full = crop_center_backward(dy, cache.h, cache.w);
  Tensor dfsum = conv_out_.backward(dy_full, cache.conv_out, param_grads);
  // Global skip: fsum = conv_mid(tokens) + f0.
  Tensor df0 = dfsum;
  Tensor dtokens_chw = conv_mid_.backward(dfsum, cache.conv_mid, param_grads);
  Tensor dtokens = chw_to_tokens(dtokens_chw);
  for (std::size_t i = layers_.size(); i-- > 0;)
    dtokens = layers_[i].backward(dtokens, cache.layers[i], param_grads);
  {
    const Tensor d = tokens_to_chw(dtokens, config_.embed_dim, cache.h, cache.w);
    kernels::add(d.data(), df0.data(), df0.size());
  }
  const Tensor dxp = conv_in_.backward(df0, cache.conv_in, param_grads);
  return reflect_pad_backward(dxp, cache.m, cache.m);
}

Tensor DefTransformer::reconstruct(const Tensor& x) const {
  Cache scratch;
  return forward(x, scratch);
}

std::vector<nn::Param*> DefTransformer::params() {
  std::vector<nn::Param*> out;
  conv_in_.collect(out);
  for (auto& layer : layers_) layer.collect(out);
  conv_mid_.collect(out);
  conv_out_.collect(out);
  return out;
}

void DefTransformer::clamp_constraints() {
  for (auto& layer : layers_)
    layer.win.gamma.value[0] =
        std::max(layer.win.gamma.value[0], CosineWindowAttention::kGammaMin);
}

void DefTransformer::save(const std::string& dir) const {
  auto* self = const_cast<DefTransformer*>(this);
  nn::save_checkpoint(dir, self->params(), config_.to_json());
}

DefTransformer DefTransformer::load(const std::string& dir) {
  DefTransformerConfig cfg = DefTransformerConfig::from_json(nn::read_checkpoint_config(dir));
  DefTransformer model(cfg, 0);
  auto params = model.params();
  nn::load_checkpoint(dir, params);
  return model;
}

// ---------------------------------------------------------------------------
// Complexity estimates

double assa_flop_estimate(std::int64_t eta, std::int64_t channels, std::int64_t s) {
  if (eta < 1 || channels < 1) throw std::domain_error("eta and C must be positive");
  if (s < 1) throw std::domain_error("downsampling factor must be >= 1");
  const double e = static_cast<double>(eta);
  const double c = static_cast<double>(channels);
  const double s2 = static_cast<double>(s) * static_cast<double>(s);
  return (3.0 + 2.0 / s2) * e * c * c + (1.0 + 2.0 / s2) * e * e * c;
}

double global_flop_estimate(std::int64_t eta, std::int64_t channels) {
  if (eta < 1 || channels < 1) throw std::domain_error("eta and C must be positive");
  const double e = static_cast<double>(eta);
  const double c = static_cast<double>(channels);
  return 4.0 * e * c * c + 2.0 * e * e * c;
}

// ---------------------------------------------------------------------------
// Losses and training

ReconLossResult reconstruction_loss(const Tensor& recon, const Tensor& target,
                                    DefTransformerConfig::ReconNorm norm) {
  if (!recon.same_shape(target)) throw std::domain_error("loss shape mismatch");
  const double inv = 1.0 / static_cast<double>(recon.size());
  ReconLossResult out;
  out.grad = Tensor(recon.shape);
  if (norm == DefTransformerConfig::ReconNorm::kL1) {
    for (std::size_t i = 0; i < recon.size(); ++i) {
      const double r = recon[i] - target[i];
      out.value += std::abs(r) * inv;
      out.grad[i] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * inv;
    }
  } else {
    for (std::size_t i = 0; i < recon.size(); ++i) {
      const double r = recon[i] - target[i];
      out.value += r * r * inv;
      out.grad[i] = 2.0 * r * inv;
    }
  }
  return out;
}

double joint_loss(const Tensor& x_clean, const Tensor& x_adv,
                  const std::function<Tensor(const Tensor&)>& reconstruct, double alpha,
                  DefTransformerConfig::ReconNorm norm) {
  if (!x_clean.same_shape(x_adv)) throw std::domain_error("clean/adv shape mismatch");
  const double clean_term = reconstruction_loss(reconstruct(x_clean), x_clean, norm).value;
  const double adv_term = reconstruction_loss(reconstruct(x_adv), x_clean, norm).value;
  return alpha * clean_term + adv_term;
}

double joint_loss(const Tensor& x_clean, const Tensor& x_adv, const DefTransformer& model,
                  double alpha) {
  return joint_loss(
      x_clean, x_adv, [&](const Tensor& t) { return model.reconstruct(t); }, alpha,
      model.config().recon_norm);
}

double lr_at_epoch(int epoch_1based, int num_sources, double lr0) {
  if (epoch_1based < 1) throw std::invalid_argument("epochs are 1-based");
  int halvings = 0;
  if (num_sources <= 1) {
    halvings = (epoch_1based - 1) / 5;
  } else {
    if (epoch_1based >= 5) halvings = 1 + (epoch_1based - 5) / 2;
  }
  return lr0 * std::pow(0.5, halvings);
}

DefenseTrainLog train_defense(DefTransformer& model, const PairedDataset& data,
                              const DefenseTrainConfig& config) {
  if (data.clean.size() != data.adv.size())
    throw std::invalid_argument("clean/adversarial containers are unpaired");
  if (data.train_count < 1) throw std::invalid_argument("empty training split");
  if (data.train_count + data.val_count > static_cast<std::int64_t>(data.clean.size()))
    throw std::invalid_argument("split counts exceed container size");

  const double alpha = model.config().alpha;
  const auto norm = model.config().recon_norm;
  nn::Adam opt(model.params());
  DefenseTrainLog log;

  std::vector<std::int64_t> order(data.train_count);
  for (std::int64_t i = 0; i < data.train_count; ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, config.schedule_sources, config.lr);
    Rng shuffle_rng = Rng::derive(config.seed, 0xdef50000ULL + epoch);
    for (std::int64_t i = data.train_count - 1; i > 0; --i) {
      const std::int64_t j = shuffle_rng.uniform_int(static_cast<int>(i + 1));
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0.0;
    std::int64_t nbatches = 0;
    for (std::int64_t start = 0; start < data.train_count; start += config.batch_size) {
      const std::int64_t end =
          std::min<std::int64_t>(start + config.batch_size, data.train_count);
      const double inv = 1.0 / static_cast<double>(end - start);
      opt.zero_grad();
      double batch_loss = 0.0;
      for (std::int64_t r = start; r < end; ++r) {
        const std::int64_t s = order[r];
        DefTransformer::Cache cache;
        const Tensor recon_clean = model.forward(data.clean[s], cache);
        ReconLossResult lc = reconstruction_loss(recon_clean, data.clean[s], norm);
        kernels::scale(alpha * inv, lc.grad.data(), lc.grad.size());
        model.backward(lc.grad, cache, /*param_grads=*/true);

        DefTransformer::Cache cache_adv;
        const Tensor recon_adv = model.forward(data.adv[s], cache_adv);
        ReconLossResult la = reconstruction_loss(recon_adv, data.clean[s], norm);
        kernels::scale(inv, la.grad.data(), la.grad.size());
        model.backward(la.grad, cache_adv, /*param_grads=*/true);

        batch_loss += (alpha * lc.value + la.value) * inv;
      }
      opt.step(lr);
      model.clamp_constraints();
      epoch_loss += batch_loss;
      ++nbatches;
    }

    // Validation metrics are always the mean-abs reconstruction errors so the
    // L1 and MSE training variants are compared on the same scale.
    double val_recon = 0.0, val_adv = 0.0;
    if (data.val_count > 0) {
      for (std::int64_t s = data.train_count; s < data.train_count + data.val_count; ++s) {
        const Tensor rc = model.reconstruct(data.clean[s]);
        const Tensor ra = model.reconstruct(data.adv[s]);
        val_recon += reconstruction_loss(rc, data.clean[s],
                                         DefTransformerConfig::ReconNorm::kL1)
                         .value;
        val_adv += reconstruction_loss(ra, data.clean[s],
                                       DefTransformerConfig::ReconNorm::kL1)
                       .value;
      }
      val_recon /= static_cast<double>(data.val_count);
      val_adv /= static_cast<double>(data.val_count);
    }

    log.train_loss.push_back(epoch_loss / static_cast<double>(nbatches));
    log.val_recon.push_back(val_recon);
    log.val_adv_recon.push_back(val_adv);
    log.lr.push_back(lr);
    if (config.verbose)
      std::fprintf(stderr,
                   "[train-defense] epoch %d lr %.2e loss %.6f val_recon %.6f "
                   "val_adv_recon %.6f\n",
                   epoch, lr, log.train_loss.back(), val_recon, val_adv);
  }
  return log;
}

}  // namespace doadef::defense
