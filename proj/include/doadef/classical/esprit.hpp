// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "doadef/sim/signal.hpp"

namespace doadef::classical {

struct EspritEstimate {
  std::vector<double> angles_deg;       // sorted ascending
  std::vector<double> eigenvalues;      // covariance spectrum, descending
  double signal_noise_eigengap = 0.0;   // lambda_L / lambda_{L+1}
};

// Subspace rotational-invariance estimate from a (possibly noisy) covariance
// matrix. The geometry must be a unit-spaced ULA; the signal subspace is the
// span of the L dominant eigenvectors, and the rotation between the first and
// last M-1 rows is solved in the least-squares sense.
//
// Throws std::invalid_argument for non-uniform geometries, std::domain_error
// for L >= M, and std::runtime_error when the signal subspace is
// rank-deficient.
EspritEstimate esprit_estimate(const sim::CMat& covariance, int num_sources,
                               const sim::ArrayGeometry& geometry);

}  // namespace doadef::classical
