// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include <doctest.h>

#include "doadef/kernels.hpp"
#include "doadef/rng.hpp"
#include "doadef/tensor.hpp"

using namespace doadef;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = (rng.uniform() * 2.0 - 1.0) * scale;
  return v;
}

// Lengths that cover empty, sub-vector-width, and ragged tails.
const std::size_t kLens[] = {0, 1, 2, 3, 4, 5, 7, 8, 15, 64, 257, 1000};

}  // namespace

TEST_CASE("vector backend matches the scalar reference") {
  const bool has_simd = kernels::backend() != "scalar";
  if (!has_simd) return;  // nothing to compare against on this CPU

  Rng rng(42);
  for (std::size_t n : kLens) {
    auto x = random_vec(rng, n), y = random_vec(rng, n);
    const double a = rng.uniform() * 4.0 - 2.0;

    // Elementwise kernels avoid FMA, so they are bit-identical to scalar.
    {
      auto ys = y, yv = y;
      kernels::scalar::axpy(a, x.data(), ys.data(), n);
      kernels::axpy(a, x.data(), yv.data(), n);
      CHECK(ys == yv);
    }
    {
      auto xs = x, xv = x;
      kernels::scalar::scale(a, xs.data(), n);
      kernels::scale(a, xv.data(), n);
      CHECK(xs == xv);
    }
    {
      auto ys = y, yv = y;
      kernels::scalar::add(x.data(), ys.data(), n);
      kernels::add(x.data(), yv.data(), n);
      CHECK(ys == yv);
    }
    {
      auto ys = y, yv = y;
      kernels::scalar::hadamard(x.data(), ys.data(), n);
      kernels::hadamard(x.data(), yv.data(), n);
      CHECK(ys == yv);
    }
    {
      auto lo = random_vec(rng, n), hi = lo;
      for (std::size_t i = 0; i < n; ++i) hi[i] += 0.5;
      auto xs = x, xv = x;
      kernels::scalar::clamp_box(lo.data(), hi.data(), xs.data(), n);
      kernels::clamp_box(lo.data(), hi.data(), xv.data(), n);
      CHECK(xs == xv);
    }
    {
      auto g = random_vec(rng, n);
      if (n > 2) g[n / 2] = 0.0;  // exercise sign(0) = 0
      auto xs = x, xv = x;
      kernels::scalar::sign_step(a, g.data(), xs.data(), n);
      kernels::sign_step(a, g.data(), xv.data(), n);
      CHECK(xs == xv);
    }

    // Reductions reorder sums; compare under a scaled tolerance.
    const double tol = 1e-12 * (static_cast<double>(n) + 1.0);
    CHECK(std::abs(kernels::scalar::dot(x.data(), y.data(), n) -
                   kernels::dot(x.data(), y.data(), n)) <= tol);
    CHECK(std::abs(kernels::scalar::sum(x.data(), n) - kernels::sum(x.data(), n)) <= tol);
    CHECK(std::abs(kernels::scalar::l1_norm(x.data(), n) -
                   kernels::l1_norm(x.data(), n)) <= tol);
  }
}

TEST_CASE("kernel reference values") {
  const double x[] = {1.0, 2.0, 3.0};
  double y[] = {4.0, 5.0, 6.0};
  CHECK(kernels::dot(x, y, 3) == doctest::Approx(32.0));
  CHECK(kernels::sum(x, 3) == doctest::Approx(6.0));
  kernels::axpy(2.0, x, y, 3);
  CHECK(y[0] == doctest::Approx(6.0));
  CHECK(y[2] == doctest::Approx(12.0));
  const double g[] = {-3.0, 0.0, 9.0};
  double z[] = {0.0, 0.0, 0.0};
  kernels::sign_step(0.5, g, z, 3);
  CHECK(z[0] == doctest::Approx(-0.5));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(0.5));
}

TEST_CASE("force_backend rejects unknown names") {
  CHECK_THROWS_AS(kernels::force_backend("quantum"), std::invalid_argument);
}

TEST_CASE("matmul helpers agree with naive triple loops") {
  Rng rng(7);
  const int m = 5, k = 7, n = 6;
  auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
  auto bt = std::vector<double>(n * k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];

  std::vector<double> want(m * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p)
      for (int j = 0; j < n; ++j) want[i * n + j] += a[i * k + p] * b[p * n + j];

  std::vector<double> c1(m * n, 0.0), c2(m * n, 0.0);
  linalg::matmul_acc(a.data(), b.data(), c1.data(), m, k, n);
  linalg::matmul_bt_acc(a.data(), bt.data(), c2.data(), m, k, n);
  for (int i = 0; i < m * n; ++i) {
    CHECK(c1[i] == doctest::Approx(want[i]).epsilon(1e-12));
    CHECK(c2[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }

  // matmul_at_acc: C[k x n] += A^T B with A [m x k], B [m x n]
  auto bb = random_vec(rng, m * n);
  std::vector<double> want_t(k * n, 0.0), c3(k * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p)
      for (int j = 0; j < n; ++j) want_t[p * n + j] += a[i * k + p] * bb[i * n + j];
  linalg::matmul_at_acc(a.data(), bb.data(), c3.data(), m, k, n);
  for (int i = 0; i < k * n; ++i) CHECK(c3[i] == doctest::Approx(want_t[i]).epsilon(1e-12));
}
