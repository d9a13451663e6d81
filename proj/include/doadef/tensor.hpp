// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace doadef {

// Dense row-major double tensor. All model math runs in double; container
// files store float32 (see sim/container).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(static_cast<std::size_t>(count(shape)), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> data)
      : shape(std::move(s)), v(std::move(data)) {
    if (v.size() != static_cast<std::size_t>(count(shape)))
      throw std::invalid_argument("tensor data does not match shape");
  }

  static std::int64_t count(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("negative tensor dimension");
      n *= d;
    }
    return n;
  }

  std::size_t size() const { return v.size(); }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  // 3-d accessor (c, y, x) for [C,H,W] tensors.
  double& at(int c, int y, int x) {
    return v[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  double at(int c, int y, int x) const {
    return v[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  // 2-d accessor (i, j) for [R,C] tensors.
  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * shape[1] + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * shape[1] + j]; }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

namespace linalg {

// C[m x n] += A[m x k] * B[k x n]; row-major, contiguous.
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n);
// C[m x n] += A[m x k] * B[n x k]^T
void matmul_bt_acc(const double* a, const double* b, double* c, int m, int k, int n);
// C[k x n] += A[m x k]^T * B[m x n]
void matmul_at_acc(const double* a, const double* b, double* c, int m, int k, int n);

}  // namespace linalg

}  // namespace doadef
