// SPDX-License-Identifier: Apache-2.0
#include "doadef/kernels.hpp"
#include "doadef/tensor.hpp"

namespace doadef::linalg {

void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p)
      kernels::axpy(arow[p], b + static_cast<std::size_t>(p) * n, crow, n);
  }
}

void matmul_bt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j)
      crow[j] += kernels::dot(arow, b + static_cast<std::size_t>(j) * k, k);
  }
}

void matmul_at_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    const double* brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p)
      kernels::axpy(arow[p], brow, c + static_cast<std::size_t>(p) * n, n);
  }
}

}  // namespace doadef::linalg
