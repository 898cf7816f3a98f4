#pragma once

// Dense numeric substrate: row-major matrices, a 3-d sample tensor,
// activations and a fixed-algorithm PRNG.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace finrisk {

using Vector = std::vector<double>;

class Matrix {
 public:
  // rows, cols >= 1; throws ShapeError otherwise.
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  void fill(double v);
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

// a · b, inner index summed in ascending order.
Matrix matmul(const Matrix& a, const Matrix& b);
// a · bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// out += aᵀ · b
void add_matmul_tn(Matrix& out, const Matrix& a, const Matrix& b);

// Samples × timesteps × features, row-major. Zero samples is allowed.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t n, std::size_t steps, std::size_t features, double fill = 0.0);
  Tensor3(std::size_t n, std::size_t steps, std::size_t features, std::vector<double> data);

  std::size_t samples() const noexcept { return n_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t features() const noexcept { return features_; }
  bool empty() const noexcept { return n_ == 0; }

  double& operator()(std::size_t i, std::size_t t, std::size_t j) noexcept {
    return data_[(i * steps_ + t) * features_ + j];
  }
  double operator()(std::size_t i, std::size_t t, std::size_t j) const noexcept {
    return data_[(i * steps_ + t) * features_ + j];
  }

  // All steps × features values of one sample.
  std::span<double> sample(std::size_t i) noexcept {
    return {data_.data() + i * steps_ * features_, steps_ * features_};
  }
  std::span<const double> sample(std::size_t i) const noexcept {
    return {data_.data() + i * steps_ * features_, steps_ * features_};
  }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  // Rows `indices` in the given order.
  Tensor3 select(std::span<const std::size_t> indices) const;
  // Collapse steps × features into a single step.
  Tensor3 flattened() const;
  // Feature matrix (samples × features) at one timestep; requires samples >= 1.
  Matrix step_matrix(std::size_t t) const;

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t steps_ = 0;
  std::size_t features_ = 0;
  std::vector<double> data_;
};

enum class Activation { Sigmoid, Tanh };

// Throws DomainError for non-finite x. Stable for large |x|.
double activation(double x, Activation kind);
// Derivative expressed through the activation's output y.
double activation_grad(double y, Activation kind);

namespace detail {
// Unchecked hot-path variants.
inline double sigmoid(double x) noexcept;
}  // namespace detail

// xoshiro256** seeded through splitmix64. Output stream depends only on the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() noexcept;
  // [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  // Standard normal via Box-Muller (one draw per call).
  double normal() noexcept;
  // Unbiased integer in [0, bound); bound >= 1.
  std::uint64_t below(std::uint64_t bound) noexcept;

  // Fisher-Yates, independent of the standard library's shuffle.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

// Glorot-uniform: entries in ±sqrt(6 / (rows + cols)).
Matrix init_weights(std::size_t rows, std::size_t cols, Rng& rng);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index runs exactly once.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

inline double detail::sigmoid(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace finrisk
