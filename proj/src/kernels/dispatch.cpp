// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "doadef/kernels.hpp"

namespace doadef::kernels {

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void axpy(double, const double*, double*, std::size_t);
double dot(const double*, const double*, std::size_t);
double sum(const double*, std::size_t);
double l1_norm(const double*, std::size_t);
void scale(double, double*, std::size_t);
void add(const double*, double*, std::size_t);
void hadamard(const double*, double*, std::size_t);
void clamp_box(const double*, const double*, double*, std::size_t);
void sign_step(double, const double*, double*, std::size_t);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
void axpy(double, const double*, double*, std::size_t);
double dot(const double*, const double*, std::size_t);
double sum(const double*, std::size_t);
double l1_norm(const double*, std::size_t);
void scale(double, double*, std::size_t);
void add(const double*, double*, std::size_t);
void hadamard(const double*, double*, std::size_t);
void clamp_box(const double*, const double*, double*, std::size_t);
void sign_step(double, const double*, double*, std::size_t);
}  // namespace neon
#endif

namespace {

struct Table {
  void (*axpy)(double, const double*, double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*l1_norm)(const double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*add)(const double*, double*, std::size_t);
  void (*hadamard)(const double*, double*, std::size_t);
  void (*clamp_box)(const double*, const double*, double*, std::size_t);
  void (*sign_step)(double, const double*, double*, std::size_t);
  std::string name;
};

Table make_scalar() {
  return {scalar::axpy, scalar::dot,      scalar::sum,       scalar::l1_norm,
          scalar::scale, scalar::add,     scalar::hadamard,  scalar::clamp_box,
          scalar::sign_step, "scalar"};
}

#if defined(__x86_64__) || defined(_M_X64)
Table make_avx2() {
  return {avx2::axpy, avx2::dot,      avx2::sum,       avx2::l1_norm,
          avx2::scale, avx2::add,     avx2::hadamard,  avx2::clamp_box,
          avx2::sign_step, "avx2"};
}
#endif

#if defined(__aarch64__)
Table make_neon() {
  return {neon::axpy, neon::dot,      neon::sum,       neon::l1_norm,
          neon::scale, neon::add,     neon::hadamard,  neon::clamp_box,
          neon::sign_step, "neon"};
}
#endif

bool backend_available(const std::string& name) {
  if (name == "scalar") return true;
#if defined(__x86_64__) || defined(_M_X64)
  if (name == "avx2") return __builtin_cpu_supports("avx2") != 0;
#endif
#if defined(__aarch64__)
  if (name == "neon") return true;
#endif
  return false;
}

Table make_named(const std::string& name) {
#if defined(__x86_64__) || defined(_M_X64)
  if (name == "avx2") return make_avx2();
#endif
#if defined(__aarch64__)
  if (name == "neon") return make_neon();
#endif
  return make_scalar();
}

Table auto_select() {
  if (const char* env = std::getenv("DOADEF_KERNELS")) {
    std::string name(env);
    if (backend_available(name)) return make_named(name);
    return make_scalar();
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return make_avx2();
#endif
#if defined(__aarch64__)
  return make_neon();
#endif
  return make_scalar();
}

Table& active() {
  static Table table = auto_select();
  return table;
}

}  // namespace

void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
double sum(const double* x, std::size_t n) { return active().sum(x, n); }
double l1_norm(const double* x, std::size_t n) { return active().l1_norm(x, n); }
void scale(double a, double* x, std::size_t n) { active().scale(a, x, n); }
void add(const double* x, double* y, std::size_t n) { active().add(x, y, n); }
void hadamard(const double* x, double* y, std::size_t n) { active().hadamard(x, y, n); }
void clamp_box(const double* lo, const double* hi, double* x, std::size_t n) {
  active().clamp_box(lo, hi, x, n);
}
void sign_step(double a, const double* g, double* x, std::size_t n) {
  active().sign_step(a, g, x, n);
}

const std::string& backend() { return active().name; }

void force_backend(const std::string& name) {
  if (!backend_available(name))
    throw std::invalid_argument("kernel backend unavailable: " + name);
  active() = make_named(name);
}

}  // namespace doadef::kernels
