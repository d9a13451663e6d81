// SPDX-License-Identifier: Apache-2.0
#include "doadef/doa/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "doadef/kernels.hpp"

namespace doadef::doa {

using nlohmann::json;

std::string ClassifierConfig::to_json() const {
  json j;
  j["element_count"] = element_count;
  j["num_sources"] = num_sources;
  j["grid"] = {{"min_deg", grid.min_deg}, {"max_deg", grid.max_deg}, {"step_deg", grid.step_deg}};
  j["conv_channels"] = conv_channels;
  j["fc_hidden"] = fc_hidden;
  return j.dump(2);
}

ClassifierConfig ClassifierConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ClassifierConfig c;
  c.element_count = j.at("element_count").get<int>();
  c.num_sources = j.at("num_sources").get<int>();
  c.grid = {j.at("grid").at("min_deg").get<double>(), j.at("grid").at("max_deg").get<double>(),
            j.at("grid").at("step_deg").get<double>()};
  c.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  c.fc_hidden = j.at("fc_hidden").get<std::vector<int>>();
  return c;
}

DoaClassifier::DoaClassifier(ClassifierConfig config, std::uint64_t init_seed)
    : config_(std::move(config)) {
  Rng rng = Rng::derive(init_seed, 0x0d0a);
  int ch = 3;
  for (std::size_t i = 0; i < config_.conv_channels.size(); ++i) {
    nn::Conv2d conv;
    conv.init("conv" + std::to_string(i), ch, config_.conv_channels[i], 3, rng);
    ch = config_.conv_channels[i];
    convs_.push_back(std::move(conv));
  }
  int width = ch * config_.element_count * config_.element_count;
  for (std::size_t i = 0; i < config_.fc_hidden.size(); ++i) {
    nn::Linear fc;
    fc.init("fc" + std::to_string(i), width, config_.fc_hidden[i], rng);
    width = config_.fc_hidden[i];
    fcs_.push_back(std::move(fc));
  }
  nn::Linear head;
  head.init("head", width, grid_size(), rng);
  fcs_.push_back(std::move(head));
}

Tensor DoaClassifier::forward(const Tensor& x) const {
  Cache scratch;
  return forward(x, scratch);
}

Tensor DoaClassifier::forward(const Tensor& x, Cache& cache) const {
  const int m = config_.element_count;
  if (x.shape != std::vector<int>{3, m, m})
    throw std::domain_error("classifier input must be [3,M,M]");
  cache.conv_pre.clear();
  cache.conv_caches.resize(convs_.size());
  cache.fc_in.clear();
  cache.fc_pre.clear();

  Tensor f = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    Tensor pre = convs_[i].forward(f, &cache.conv_caches[i]);
    cache.conv_pre.push_back(pre);
    f = nn::relu(pre);
  }
  Tensor flat({1, static_cast<int>(f.size())});
  flat.v = f.v;
  for (std::size_t i = 0; i + 1 < fcs_.size(); ++i) {
    cache.fc_in.push_back(flat);
    Tensor pre = fcs_[i].forward(flat);
    cache.fc_pre.push_back(pre);
    flat = nn::relu(pre);
  }
  cache.fc_in.push_back(flat);
  Tensor out = fcs_.back().forward(flat);
  Tensor logits({grid_size()});
  logits.v = out.v;
  return logits;
}

Tensor DoaClassifier::backward(const Tensor& dlogits, const Cache& cache, bool param_grads) {
  Tensor dflat({1, grid_size()});
  dflat.v = dlogits.v;
  dflat = fcs_.back().backward(dflat, cache.fc_in.back(), param_grads);
  for (std::size_t i = fcs_.size() - 1; i-- > 0;) {
    dflat = nn::relu_backward(dflat, cache.fc_pre[i]);
    dflat = fcs_[i].backward(dflat, cache.fc_in[i], param_grads);
  }
  const int ch = config_.conv_channels.back();
  const int m = config_.element_count;
  Tensor df({ch, m, m});
  df.v = dflat.v;
  for (std::size_t i = convs_.size(); i-- > 0;) {
    df = nn::relu_backward(df, cache.conv_pre[i]);
    df = convs_[i].backward(df, cache.conv_caches[i], param_grads);
  }
  return df;
}

namespace {
inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Numerically stable -log(sigmoid(z)) and -log(1-sigmoid(z)).
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}
}  // namespace

double DoaClassifier::loss(const Tensor& logits, const std::vector<int>& label) const {
  const int c = grid_size();
  for (int idx : label)
    if (idx < 0 || idx >= c) throw std::domain_error("label index out of grid range");
  if (!multilabel()) {
    if (label.size() != 1) throw std::invalid_argument("exclusive mode expects one label");
    double mx = logits[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(logits[j] - mx);
    return std::log(z) + mx - logits[label[0]];
  }
  std::vector<char> hot(c, 0);
  for (int idx : label) hot[idx] = 1;
  double acc = 0.0;
  for (int j = 0; j < c; ++j)
    acc += hot[j] ? softplus(-logits[j]) : softplus(logits[j]);
  return acc / c;
}

Tensor DoaClassifier::loss_grad(const Tensor& logits, const std::vector<int>& label) const {
  const int c = grid_size();
  Tensor g({c});
  if (!multilabel()) {
    Tensor l2({1, c});
    l2.v = logits.v;
    Tensor p = nn::softmax_rows(l2);
    g.v = p.v;
    g[label[0]] -= 1.0;
    return g;
  }
  std::vector<char> hot(c, 0);
  for (int idx : label) hot[idx] = 1;
  for (int j = 0; j < c; ++j) g[j] = (sigmoid(logits[j]) - (hot[j] ? 1.0 : 0.0)) / c;
  return g;
}

Tensor DoaClassifier::input_gradient(const Tensor& x, const std::vector<int>& label) {
  Cache cache;
  const Tensor logits = forward(x, cache);
  const Tensor dlogits = loss_grad(logits, label);
  return backward(dlogits, cache, /*param_grads=*/false);
}

std::vector<nn::Param*> DoaClassifier::params() {
  std::vector<nn::Param*> out;
  for (auto& c : convs_) c.collect(out);
  for (auto& f : fcs_) f.collect(out);
  return out;
}

void DoaClassifier::save(const std::string& dir) const {
  auto* self = const_cast<DoaClassifier*>(this);
  nn::save_checkpoint(dir, self->params(), config_.to_json());
}

DoaClassifier DoaClassifier::load(const std::string& dir) {
  ClassifierConfig cfg = ClassifierConfig::from_json(nn::read_checkpoint_config(dir));
  DoaClassifier model(cfg, 0);
  auto params = model.params();
  nn::load_checkpoint(dir, params);
  return model;
}

std::vector<double> decode_angles(const Tensor& logits, const DoaGrid& grid, int num_sources) {
  const int c = static_cast<int>(logits.size());
  if (num_sources < 1 || num_sources > c)
    throw std::domain_error("source count exceeds grid size");
  // Top-L by logit; ties keep the earlier index.
  std::vector<int> idx(c);
  for (int i = 0; i < c; ++i) idx[i] = i;
  std::partial_sort(idx.begin(), idx.begin() + num_sources, idx.end(),
                    [&](int a, int b) {
                      if (logits[a] != logits[b]) return logits[a] > logits[b];
                      return a < b;
                    });
  std::vector<double> angles(num_sources);
  for (int l = 0; l < num_sources; ++l) angles[l] = grid.angle(idx[l]);
  std::sort(angles.begin(), angles.end());
  return angles;
}

double conf_single(const Tensor& logits) {
  Tensor l2({1, static_cast<int>(logits.size())});
  l2.v = logits.v;
  const Tensor p = nn::softmax_rows(l2);
  double mx = 0.0;
  for (double v : p.v) mx = std::max(mx, v);
  return 100.0 * mx;
}

double conf_dual(const Tensor& logits) {
  if (logits.size() < 2) throw std::domain_error("conf_dual needs at least two logits");
  double top1 = -1e300, top2 = -1e300;
  for (double z : logits.v) {
    if (z > top1) {
      top2 = top1;
      top1 = z;
    } else if (z > top2) {
      top2 = z;
    }
  }
  return 100.0 * 0.5 * (sigmoid(top1) + sigmoid(top2));
}

TrainLog train_classifier(DoaClassifier& model, const sim::Dataset& data,
                          const TrainConfig& config) {
  if (data.num_sources != model.config().num_sources)
    throw std::invalid_argument("dataset/model source count mismatch");
  if (data.train_count == 0) throw std::invalid_argument("empty training split");

  nn::Adam opt(model.params());
  TrainLog log;
  std::vector<std::int64_t> order(data.train_count);
  for (std::int64_t i = 0; i < data.train_count; ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = Rng::derive(config.seed, 0x5f5f0000ULL + epoch);
    for (std::int64_t i = data.train_count - 1; i > 0; --i) {
      const std::int64_t j = shuffle_rng.uniform_int(static_cast<int>(i + 1));
      std::swap(order[i], order[j]);
    }
    double epoch_loss = 0.0;
    std::int64_t nbatches = 0;
    for (std::int64_t start = 0; start < data.train_count; start += config.batch_size) {
      const std::int64_t end = std::min<std::int64_t>(start + config.batch_size, data.train_count);
      const double inv = 1.0 / static_cast<double>(end - start);
      opt.zero_grad();
      double batch_loss = 0.0;
      for (std::int64_t r = start; r < end; ++r) {
        const std::int64_t s = order[r];
        DoaClassifier::Cache cache;
        const Tensor logits = model.forward(data.samples[s], cache);
        batch_loss += model.loss(logits, data.labels[s]) * inv;
        Tensor dlogits = model.loss_grad(logits, data.labels[s]);
        kernels::scale(inv, dlogits.data(), dlogits.size());
        model.backward(dlogits, cache, /*param_grads=*/true);
      }
      opt.step(config.lr);
      epoch_loss += batch_loss;
      ++nbatches;
      if (epoch == 1) log.first_step_loss.push_back(batch_loss);
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(nbatches));
    if (config.verbose)
      std::fprintf(stderr, "[train-doa] epoch %d loss %.6f\n", epoch, log.epoch_loss.back());
  }
  return log;
}

}  // namespace doadef::doa
