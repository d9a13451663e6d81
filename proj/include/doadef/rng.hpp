// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>

namespace doadef {

// Deterministic xoshiro256** generator with explicit distributions, so that
// identical (seed, stream) pairs produce identical samples on every platform
// and compiler. std::mt19937 distributions are implementation-defined, which
// would break the bit-identical container contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (seed, stream_index); used to make
  // per-scenario generation order-independent.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53-bit resolution.
  double uniform();
  // Uniform integer in [0, n).
  int uniform_int(int n);
  // Standard normal via Box-Muller (pair-cached).
  double normal();
  // Circular complex normal with unit total variance.
  std::complex<double> cnormal();

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace doadef
