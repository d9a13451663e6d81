// SPDX-License-Identifier: Apache-2.0
#include "doadef/attack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "doadef/kernels.hpp"

namespace doadef::attack {

Method method_from_string(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::tolower(c)));
  if (s == "pgd") return Method::kPgd;
  if (s == "mim") return Method::kMim;
  throw std::invalid_argument("unknown attack method: " + name);
}

std::string to_string(Method m) { return m == Method::kPgd ? "pgd" : "mim"; }

AttackConfig AttackConfig::training_default() { return AttackConfig{}; }

AttackConfig AttackConfig::evaluation_default(Method m) {
  AttackConfig c;
  c.method = m;
  c.steps = 10;
  c.momentum_decay = 1.0;
  return c;
}

namespace {

double mean_power(const Tensor& t) {
  return kernels::dot(t.data(), t.data(), t.size()) / static_cast<double>(t.size());
}

void check_gradient_finite(const Tensor& g, int step) {
  for (double v : g.v)
    if (!std::isfinite(v))
      throw std::runtime_error("non-finite attack gradient at step " + std::to_string(step));
}

AdversarialSample finish(const Tensor& x_clean, Tensor x_adv) {
  AdversarialSample out;
  out.delta = x_adv;
  for (std::size_t i = 0; i < out.delta.size(); ++i) out.delta[i] -= x_clean[i];
  out.achieved_sir_db = measure_sir_db(x_clean, x_adv);
  out.x_adv = std::move(x_adv);
  return out;
}

}  // namespace

AdversarialSample pgd(const Tensor& x, const GradientFn& grad, const AttackConfig& config) {
  if (config.method != Method::kPgd) throw std::invalid_argument("config method is not pgd");
  Tensor lo = x, hi = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lo[i] -= config.bound;
    hi[i] += config.bound;
  }
  Tensor cur = x;
  for (int step = 0; step < config.steps; ++step) {
    const Tensor g = grad(cur);
    check_gradient_finite(g, step);
    kernels::sign_step(config.step_size, g.data(), cur.data(), cur.size());
    kernels::clamp_box(lo.data(), hi.data(), cur.data(), cur.size());
  }
  return finish(x, std::move(cur));
}

AdversarialSample pgd(const Tensor& x, const std::vector<int>& label,
                      doa::DoaClassifier& model, const AttackConfig& config) {
  return pgd(x, [&](const Tensor& t) { return model.input_gradient(t, label); }, config);
}

AdversarialSample mim(const Tensor& x, const GradientFn& grad, const AttackConfig& config) {
  if (config.method != Method::kMim) throw std::invalid_argument("config method is not mim");
  Tensor lo = x, hi = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lo[i] -= config.bound;
    hi[i] += config.bound;
  }
  Tensor cur = x;
  Tensor momentum({static_cast<int>(x.size())});
  for (int step = 0; step < config.steps; ++step) {
    Tensor g = grad(cur);
    check_gradient_finite(g, step);
    const double l1 = kernels::l1_norm(g.data(), g.size());
    kernels::scale(config.momentum_decay, momentum.data(), momentum.size());
    if (l1 > 0.0) kernels::axpy(1.0 / l1, g.data(), momentum.data(), momentum.size());
    kernels::sign_step(config.step_size, momentum.data(), cur.data(), cur.size());
    kernels::clamp_box(lo.data(), hi.data(), cur.data(), cur.size());
  }
  return finish(x, std::move(cur));
}

AdversarialSample mim(const Tensor& x, const std::vector<int>& label,
                      doa::DoaClassifier& model, const AttackConfig& config) {
  return mim(x, [&](const Tensor& t) { return model.input_gradient(t, label); }, config);
}

AdversarialSample run_attack(const Tensor& x, const std::vector<int>& label,
                             doa::DoaClassifier& model, const AttackConfig& config) {
  return config.method == Method::kPgd ? pgd(x, label, model, config)
                                       : mim(x, label, model, config);
}

double measure_sir_db(const Tensor& x_clean, const Tensor& x_adv) {
  if (!x_clean.same_shape(x_adv)) throw std::domain_error("SIR inputs must share a shape");
  Tensor delta = x_adv;
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= x_clean[i];
  const double p_pert = mean_power(delta);
  if (p_pert == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(mean_power(x_clean) / p_pert);
}

AdversarialSample scale_to_sir(const Tensor& x_clean, const Tensor& x_adv,
                               double target_sir_db) {
  if (!x_clean.same_shape(x_adv)) throw std::domain_error("SIR inputs must share a shape");
  AdversarialSample out;
  out.delta = x_adv;
  for (std::size_t i = 0; i < out.delta.size(); ++i) out.delta[i] -= x_clean[i];
  const double p_pert = mean_power(out.delta);
  if (p_pert == 0.0 || !std::isfinite(target_sir_db)) {
    out.x_adv = x_clean;
    out.delta.fill(0.0);
    out.achieved_sir_db = std::numeric_limits<double>::infinity();
    return out;
  }
  const double p_clean = mean_power(x_clean);
  const double scale =
      std::sqrt(p_clean / (p_pert * std::pow(10.0, target_sir_db / 10.0)));
  kernels::scale(scale, out.delta.data(), out.delta.size());
  out.x_adv = x_clean;
  kernels::add(out.delta.data(), out.x_adv.data(), out.x_adv.size());
  out.achieved_sir_db = 10.0 * std::log10(p_clean / mean_power(out.delta));
  return out;
}

int attack_success(const std::vector<double>& predicted_deg,
                   const std::vector<double>& true_deg, double zeta_deg) {
  if (predicted_deg.size() != true_deg.size())
    throw std::invalid_argument("angle lists must have equal length");
  std::vector<double> p = predicted_deg, t = true_deg;
  std::sort(p.begin(), p.end());
  std::sort(t.begin(), t.end());
  for (std::size_t i = 0; i < p.size(); ++i)
    if (std::abs(p[i] - t[i]) > zeta_deg) return 1;
  return 0;
}

}  // namespace doadef::attack
