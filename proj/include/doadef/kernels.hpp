// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

// Data-parallel arithmetic kernels used by the hot loops (dense layers,
// attention, attack projection). Scalar reference implementations live in
// doadef::kernels::scalar; vectorized variants (AVX2 on x86-64, NEON on
// aarch64) are selected once at startup based on CPU capabilities. The
// elementwise kernels are bit-identical across backends (no FMA contraction);
// reductions may differ by summation order and are equivalence-tested under
// tolerance.
namespace doadef::kernels {

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);
// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);
// sum_i x[i]
double sum(const double* x, std::size_t n);
// sum_i |x[i]|
double l1_norm(const double* x, std::size_t n);
// x[i] *= a
void scale(double a, double* x, std::size_t n);
// y[i] += x[i]
void add(const double* x, double* y, std::size_t n);
// y[i] *= x[i]
void hadamard(const double* x, double* y, std::size_t n);
// x[i] = min(max(x[i], lo[i]), hi[i])
void clamp_box(const double* lo, const double* hi, double* x, std::size_t n);
// x[i] += a * sign(g[i]), sign(0) = 0
void sign_step(double a, const double* g, double* x, std::size_t n);

// Name of the active backend: "avx2", "neon" or "scalar".
const std::string& backend();

// Force a specific backend ("scalar", "avx2", "neon"). Throws
// std::invalid_argument if the backend is unknown or unsupported on this
// CPU. Intended for equivalence tests; the default selection is automatic.
void force_backend(const std::string& name);

// Reference implementations, always available.
namespace scalar {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
double l1_norm(const double* x, std::size_t n);
void scale(double a, double* x, std::size_t n);
void add(const double* x, double* y, std::size_t n);
void hadamard(const double* x, double* y, std::size_t n);
void clamp_box(const double* lo, const double* hi, double* x, std::size_t n);
void sign_step(double a, const double* g, double* x, std::size_t n);
}  // namespace scalar

}  // namespace doadef::kernels
