// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace doadef::harness {

// sqrt(mean squared per-source angle error); rows are sorted before pairing.
double rmse(const std::vector<std::vector<double>>& predicted,
            const std::vector<std::vector<double>>& truth);

// Percentage of samples whose every per-source error is <= zeta (inclusive).
double accuracy(const std::vector<std::vector<double>>& predicted,
                const std::vector<std::vector<double>>& truth, double zeta_deg);

struct WelchResult {
  double t = 0.0;
  double p = 1.0;
  double dof = 0.0;
};

// Unequal-variance t statistic with Welch-Satterthwaite degrees of freedom and
// a two-sided p value. Degenerate zero-variance pairs with equal means return
// t=0, p=1.
WelchResult welch_t_test(const std::vector<double>& sample_a,
                         const std::vector<double>& sample_b);

}  // namespace doadef::harness
