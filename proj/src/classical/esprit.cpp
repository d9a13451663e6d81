// SPDX-License-Identifier: Apache-2.0
#include "doadef/classical/esprit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace doadef::classical {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kRankTol = 1e-12;
}  // namespace

EspritEstimate esprit_estimate(const sim::CMat& covariance, int num_sources,
                               const sim::ArrayGeometry& geometry) {
  const int m = geometry.element_count();
  if (!geometry.is_uniform())
    throw std::invalid_argument("esprit requires a unit-spaced uniform linear array");
  if (covariance.rows != m || covariance.cols != m)
    throw std::domain_error("covariance size does not match geometry");
  if (num_sources < 1 || num_sources >= m)
    throw std::domain_error("esprit requires 1 <= L < M");

  Eigen::MatrixXcd r(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) r(i, j) = covariance.at(i, j);
  // Symmetrize; perturbed tensors can carry a non-Hermitian part.
  r = 0.5 * (r + r.adjoint()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(r);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("esprit eigendecomposition failed");

  EspritEstimate out;
  out.eigenvalues.resize(m);
  for (int i = 0; i < m; ++i) out.eigenvalues[i] = eig.eigenvalues()(m - 1 - i);

  const double lead = std::abs(out.eigenvalues[0]);
  const double noise_floor = std::abs(out.eigenvalues[num_sources]);
  const double signal_floor = std::abs(out.eigenvalues[num_sources - 1]);
  out.signal_noise_eigengap =
      noise_floor > 0.0 ? signal_floor / noise_floor : std::numeric_limits<double>::infinity();
  if (signal_floor <= kRankTol * std::max(lead, 1e-300))
    throw std::runtime_error(
        "esprit: rank-deficient signal subspace (eigenvalue " +
        std::to_string(signal_floor) + " vs leading " + std::to_string(lead) + ")");

  // Dominant-eigenvector subspace; eigenvalues come back ascending.
  Eigen::MatrixXcd us(m, num_sources);
  for (int l = 0; l < num_sources; ++l) us.col(l) = eig.eigenvectors().col(m - 1 - l);

  const Eigen::MatrixXcd us1 = us.topRows(m - 1);
  const Eigen::MatrixXcd us2 = us.bottomRows(m - 1);
  const Eigen::MatrixXcd psi = us1.colPivHouseholderQr().solve(us2);

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> rot(psi);
  if (rot.info() != Eigen::Success)
    throw std::runtime_error("esprit rotation eigendecomposition failed");

  out.angles_deg.resize(num_sources);
  for (int l = 0; l < num_sources; ++l) {
    const std::complex<double> lambda = rot.eigenvalues()(l);
    if (std::abs(lambda) == 0.0)
      throw std::runtime_error("esprit: zero rotation eigenvalue");
    const double sin_theta = std::clamp(-std::arg(lambda) / kPi, -1.0, 1.0);
    out.angles_deg[l] = std::asin(sin_theta) * 180.0 / kPi;
  }
  std::sort(out.angles_deg.begin(), out.angles_deg.end());
  return out;
}

}  // namespace doadef::classical
