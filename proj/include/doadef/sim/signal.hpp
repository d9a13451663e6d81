// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <string>
#include <vector>

#include "doadef/rng.hpp"
#include "doadef/tensor.hpp"

namespace doadef::sim {

using cd = std::complex<double>;

// Complex matrix, row-major.
struct CMat {
  int rows = 0, cols = 0;
  std::vector<cd> a;

  CMat() = default;
  CMat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c) {}
  cd& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  const cd& at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
};

// Element positions in half-wavelength units; strictly increasing, first 0.
struct ArrayGeometry {
  std::vector<double> positions;

  ArrayGeometry() = default;
  explicit ArrayGeometry(std::vector<double> pos);

  int element_count() const { return static_cast<int>(positions.size()); }
  // Unit spacing everywhere (required by the shift-invariance estimator).
  bool is_uniform() const;

  static ArrayGeometry ula(int elements);
  // 8-element sparse array at positions [0,1,2,5,6,9,10,11].
  static ArrayGeometry sla8();
};

enum class Modulation { kBpsk, kQam16, kQam64, kQam256, kOfdm };

Modulation modulation_from_string(const std::string& name);
std::string to_string(Modulation m);

// One generated sample: L sources at given angles, with SNR and K snapshots.
// snr_db = +infinity disables noise.
struct SourceScenario {
  int num_sources = 1;
  std::vector<double> angles_deg;
  Modulation modulation = Modulation::kBpsk;
  double snr_db = 0.0;
  int snapshots = 1024;

  void validate() const;
};

struct SnapshotMatrix {
  CMat x;  // M x K
};

// a(theta)[m] = exp(-j * pi * position_m * sin(theta)); entry 0 is 1.
std::vector<cd> steering_vector(double theta_deg, const ArrayGeometry& geometry);

// M x L matrix whose columns are steering vectors.
CMat steering_matrix(const std::vector<double>& angles_deg, const ArrayGeometry& geometry);

// L x K matrix of independent unit-average-power baseband waveforms.
// Single-carrier modulations are root-raised-cosine shaped (roll-off 0.5,
// 8 samples/symbol); OFDM uses 64 QAM16-loaded subcarriers with a length-16
// cyclic prefix.
CMat synthesize_sources(const SourceScenario& scenario, Rng& rng);
CMat synthesize_sources(const SourceScenario& scenario, std::uint64_t seed);

// X = A*S + N with per-element circular Gaussian noise calibrated against the
// average received signal power so 10*log10(Psig/Pnoise) = snr_db.
SnapshotMatrix collect_snapshots(const SourceScenario& scenario,
                                 const ArrayGeometry& geometry, Rng& rng);
SnapshotMatrix collect_snapshots(const SourceScenario& scenario,
                                 const ArrayGeometry& geometry, std::uint64_t seed);

// (1/K) sum_n x(n) x(n)^H; Hermitian by construction.
CMat sample_covariance(const SnapshotMatrix& snapshots);

// [Re, Im, phase] channels of R, jointly power-normalized so the mean squared
// entry is 1. Phase uses the principal value in (-pi, pi].
Tensor encode_covariance_tensor(const CMat& r);

// Reassemble a complex matrix from channels 0/1 of a covariance tensor
// (possibly perturbed); inverse of the Re/Im part of the encoding up to the
// normalization scale.
CMat tensor_to_covariance(const Tensor& t);

}  // namespace doadef::sim
