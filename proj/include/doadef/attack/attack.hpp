// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "doadef/doa/classifier.hpp"
#include "doadef/tensor.hpp"

namespace doadef::attack {

enum class Method { kPgd, kMim };

Method method_from_string(const std::string& name);
std::string to_string(Method m);

struct AttackConfig {
  Method method = Method::kPgd;
  int steps = 5;
  double step_size = 0.02;      // psi
  double bound = 0.2;           // epsilon, l-infinity
  double momentum_decay = 1.0;  // omega, MIM only
  double target_sir_db = 10.0;

  // Paper training regime: PGD-5, psi 0.02, eps 0.2, SIR 10 dB.
  static AttackConfig training_default();
  // Evaluation regime: 10 steps, omega 1.
  static AttackConfig evaluation_default(Method m);
};

struct AdversarialSample {
  Tensor x_adv;
  Tensor delta;            // x_adv - x_clean
  double achieved_sir_db;  // +inf when delta is zero
};

// d(loss)/d(input) of whatever model is under attack.
using GradientFn = std::function<Tensor(const Tensor&)>;

// Iterated sign-gradient ascent on the model's training loss, projected into
// the l-infinity ball around x after every step. No SIR scaling here.
AdversarialSample pgd(const Tensor& x, const GradientFn& grad, const AttackConfig& config);
AdversarialSample pgd(const Tensor& x, const std::vector<int>& label,
                      doa::DoaClassifier& model, const AttackConfig& config);

// Momentum variant: g <- omega*g + grad/||grad||_1, step by sign(g), then
// clipped into the epsilon ball.
AdversarialSample mim(const Tensor& x, const GradientFn& grad, const AttackConfig& config);
AdversarialSample mim(const Tensor& x, const std::vector<int>& label,
                      doa::DoaClassifier& model, const AttackConfig& config);

AdversarialSample run_attack(const Tensor& x, const std::vector<int>& label,
                             doa::DoaClassifier& model, const AttackConfig& config);

// Rescales delta = x_adv - x_clean so the clean-power to perturbation-power
// ratio equals the target exactly. Zero delta with a finite target returns
// x_clean with achieved_sir = +inf.
AdversarialSample scale_to_sir(const Tensor& x_clean, const Tensor& x_adv,
                               double target_sir_db);

// Measured 10*log10(P_clean / P_delta); +inf for zero delta.
double measure_sir_db(const Tensor& x_clean, const Tensor& x_adv);

// 1 if any per-source absolute angle error exceeds zeta (sorted pairing).
int attack_success(const std::vector<double>& predicted_deg,
                   const std::vector<double>& true_deg, double zeta_deg);

}  // namespace doadef::attack
