// SPDX-License-Identifier: Apache-2.0
/**
 * @file   numerics.hpp
 * @brief  Dense row-major matrix, activation kernels and a portable PRNG.
 *
 * Vectors are represented as 1 x n matrices throughout. All arithmetic is
 * double precision.
 */

#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqclass/errors.hpp"

namespace seqclass {

class Matrix {
public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != checked_size(rows, cols))
      throw ShapeError("matrix " + shape_string(rows, cols) + " given " +
                       std::to_string(data_.size()) + " values");
  }

  /// 1 x n row vector.
  static Matrix row(std::initializer_list<double> values) {
    return Matrix(1, values.size(), std::vector<double>(values));
  }

  static Matrix row(std::vector<double> values) {
    const auto n = values.size();
    return Matrix(1, n, std::move(values));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double &operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::span<const double> row_values(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<double> row_values(std::size_t r) {
    return std::span<double>(data_).subspan(r * cols_, cols_);
  }

  bool same_shape(const Matrix &o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  std::string shape() const { return shape_string(rows_, cols_); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c)
        t(c, r) = (*this)(r, c);
    return t;
  }

  Matrix &operator+=(const Matrix &o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i)
      data_[i] += o.data_[i];
    return *this;
  }

  Matrix &operator-=(const Matrix &o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i)
      data_[i] -= o.data_[i];
    return *this;
  }

  Matrix &operator*=(double s) {
    for (auto &v : data_)
      v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix &b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix &b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }

  friend bool operator==(const Matrix &a, const Matrix &b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  static std::string shape_string(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
  }

private:
  static std::size_t checked_size(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0)
      throw ShapeError("matrix dimensions must be positive, got " +
                       shape_string(rows, cols));
    return rows * cols;
  }

  void require_same_shape(const Matrix &o, const char *op) const {
    if (!same_shape(o))
      throw ShapeError(std::string("operator") + op + ": " + shape() +
                       " vs " + o.shape());
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix matmul(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + a.shape() + " x " + b.shape());
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0)
        continue;
      auto brow = b.row_values(k);
      auto orow = out.row_values(i);
      for (std::size_t j = 0; j < brow.size(); ++j)
        orow[j] += aik * brow[j];
    }
  }
  return out;
}

/// a^T * b without materializing the transpose.
inline Matrix matmul_tn(const Matrix &a, const Matrix &b) {
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: " + a.shape() + "^T x " + b.shape());
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row_values(k);
    auto brow = b.row_values(k);
    for (std::size_t i = 0; i < arow.size(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0)
        continue;
      auto orow = out.row_values(i);
      for (std::size_t j = 0; j < brow.size(); ++j)
        orow[j] += aki * brow[j];
    }
  }
  return out;
}

/// a * b^T without materializing the transpose.
inline Matrix matmul_nt(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: " + a.shape() + " x " + b.shape() + "^T");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row_values(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row_values(j);
      double s = 0.0;
      for (std::size_t k = 0; k < arow.size(); ++k)
        s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
  return out;
}

inline double sigmoid_scalar(double x) {
  if (x >= 0.0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F> Matrix map(Matrix x, F &&f) {
  for (auto &v : x.values())
    v = f(v);
  return x;
}

inline Matrix sigmoid(const Matrix &x) { return map(x, sigmoid_scalar); }

inline Matrix tanh_act(const Matrix &x) {
  return map(x, [](double v) { return std::tanh(v); });
}

inline Matrix softmax(const Matrix &v) {
  if (v.rows() != 1 || v.cols() < 2)
    throw ShapeError("softmax expects 1xk with k >= 2, got " + v.shape());
  const auto vals = v.values();
  const double mx = *std::max_element(vals.begin(), vals.end());
  Matrix out(1, v.cols());
  double sum = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    out[i] = std::exp(vals[i] - mx);
    sum += out[i];
  }
  out *= 1.0 / sum;
  return out;
}

inline Matrix hadamard(const Matrix &a, const Matrix &b) {
  if (!a.same_shape(b))
    throw ShapeError("hadamard: " + a.shape() + " vs " + b.shape());
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] *= b[i];
  return out;
}

inline std::size_t argmax(const Matrix &v) {
  const auto vals = v.values();
  return static_cast<std::size_t>(
      std::max_element(vals.begin(), vals.end()) - vals.begin());
}

inline double sum_of_squares(const Matrix &m) {
  double s = 0.0;
  for (double v : m.values())
    s += v * v;
  return s;
}

/// splitmix64 stream. Bit-identical on every platform, unlike the
/// distributions in <random>.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0)
      throw ParameterError("Rng::below requires n > 0");
    const std::uint64_t limit = -n % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= limit)
        return r % n;
    }
  }

  template <typename T> void shuffle(std::vector<T> &v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t state() const noexcept { return state_; }

private:
  std::uint64_t state_;
};

} // namespace seqclass
