// SPDX-License-Identifier: Apache-2.0
//
// Dense real-valued linear algebra, activations and the deterministic RNG
// used by every other part of the library. Everything is 64-bit.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace grnn {

/// Raised on any dimension mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Vector = std::vector<double>;

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " times " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// The kernels below are the hot loops of the recurrent cells. They assume the
// caller has validated shapes.

/// out += m * x
inline void gemv_acc(const Matrix& m, std::span<const double> x, std::span<double> out) noexcept {
  const std::size_t cols = m.cols();
  const double* p = m.data().data();
  for (std::size_t i = 0; i < m.rows(); ++i, p += cols) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += p[j] * x[j];
    out[i] += s;
  }
}

/// out += m^T * y
inline void gemv_t_acc(const Matrix& m, std::span<const double> y, std::span<double> out) noexcept {
  const std::size_t cols = m.cols();
  const double* p = m.data().data();
  for (std::size_t i = 0; i < m.rows(); ++i, p += cols) {
    const double yi = y[i];
    if (yi == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) out[j] += p[j] * yi;
  }
}

/// m += y * x^T
inline void outer_acc(std::span<const double> y, std::span<const double> x, Matrix& m) noexcept {
  const std::size_t cols = m.cols();
  double* p = m.data().data();
  for (std::size_t i = 0; i < m.rows(); ++i, p += cols) {
    const double yi = y[i];
    if (yi == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) p[j] += yi * x[j];
  }
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(std::span<const double> xs) noexcept {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Activations

enum class Activation : std::uint8_t { Tanh = 0, Relu = 1 };

inline const char* to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

/// Branches on sign so that exp never overflows.
inline double sigmoid(double x) noexcept {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

inline double activate(Activation a, double x) noexcept {
  return a == Activation::Tanh ? std::tanh(x) : relu(x);
}

/// Derivative of the activation at pre-activation x, given y = act(x).
inline double activate_grad(Activation a, double x, double y) noexcept {
  return a == Activation::Tanh ? 1.0 - y * y : (x > 0.0 ? 1.0 : 0.0);
}

/// sigma'(x) expressed through s = sigma(x)
inline double sigmoid_grad_from_output(double s) noexcept { return s * (1.0 - s); }

inline Vector sigmoid(std::span<const double> x) {
  Vector y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return sigmoid(v); });
  return y;
}
inline Vector tanh(std::span<const double> x) {
  Vector y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return std::tanh(v); });
  return y;
}
inline Vector relu(std::span<const double> x) {
  Vector y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return relu(v); });
  return y;
}

// ---------------------------------------------------------------------------
// Rng

/// xoshiro256** seeded through splitmix64. The stream depends only on the
/// seed, never on the platform's standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64(sm);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [lo, hi], unbiased (Lemire rejection).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % range) - 1;
    std::uint64_t x = next_u64();
    while (x > limit) x = next_u64();
    return lo + static_cast<std::int64_t>(x % range);
  }

  /// Standard normal via Box-Muller (no cached second draw, so the stream
  /// position is a simple function of the number of calls).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  /// Independent child stream keyed by `stream`; the parent is not advanced.
  Rng split(std::uint64_t stream) const noexcept {
    std::uint64_t sm = seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
    return Rng(splitmix64(sm));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
  static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t state_[4];
};

/// Entries i.i.d. uniform on [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))],
/// shaped fan_out x fan_in.
/// rows x cols matrix with entries uniform on [-limit, limit].
inline Matrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double limit) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.uniform(-limit, limit);
  return m;
}

inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) throw ShapeError("glorot_uniform: zero fan");
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline Matrix glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  return uniform_matrix(rng, fan_out, fan_in, glorot_limit(fan_in, fan_out));
}

}  // namespace grnn
