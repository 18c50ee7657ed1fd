#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "formcoach/common.hpp"

namespace formcoach {

// Dense row-major double tensor. The single numeric container shared by the
// motion, alignment and autodiff layers.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)), v_(count(shape_), 0.0) {}
  Tensor(std::vector<std::size_t> shape, std::vector<double> values) : shape_(std::move(shape)), v_(std::move(values)) {
    if (v_.size() != count(shape_)) throw ShapeError("tensor value count does not match shape " + shape_string());
  }

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.v_.begin(), t.v_.end(), value);
    return t;
  }
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return v_.size(); }
  bool is_scalar() const { return v_.size() == 1; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  double& at(std::size_t i, std::size_t j) { return v_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return v_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) { return v_[(i * shape_[1] + j) * shape_[2] + k]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return v_[(i * shape_[1] + j) * shape_[2] + k]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void fill(double value) { std::fill(v_.begin(), v_.end(), value); }

  std::string shape_string() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> v_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

namespace detail {

// C[n x m] += A[n x k] * B[k x m]
inline void matmul_acc(const double* A, const double* B, double* C, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* a_row = A + i * k;
    double* c_row = C + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      double a = a_row[p];
      if (a == 0.0) continue;
      const double* b_row = B + p * m;
      for (std::size_t j = 0; j < m; ++j) c_row[j] += a * b_row[j];
    }
  }
}

// C[n x k] += A[n x m] * B[k x m]^T
inline void matmul_bt_acc(const double* A, const double* B, double* C, std::size_t n, std::size_t m, std::size_t k) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* a_row = A + i * m;
    double* c_row = C + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      const double* b_row = B + j * m;
      double acc = 0.0;
      for (std::size_t p = 0; p < m; ++p) acc += a_row[p] * b_row[p];
      c_row[j] += acc;
    }
  }
}

// C[k x m] += A[n x k]^T * B[n x m]
inline void matmul_at_acc(const double* A, const double* B, double* C, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* a_row = A + i * k;
    const double* b_row = B + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      double a = a_row[p];
      if (a == 0.0) continue;
      double* c_row = C + p * m;
      for (std::size_t j = 0; j < m; ++j) c_row[j] += a * b_row[j];
    }
  }
}

}  // namespace detail
}  // namespace formcoach
