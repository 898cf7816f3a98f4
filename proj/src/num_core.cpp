#include "finrisk/num_core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "finrisk/errors.hpp"

namespace finrisk {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix dimensions must be >= 1, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  data_.assign(rows * cols, fill);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix dimensions must be >= 1, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  if (rows_ == 0 || cols_ == 0) {
    throw ShapeError("matrix literal must be non-empty");
  }
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw ShapeError("ragged matrix literal");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
  }
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) {
        o[j] += aik * brow[j];
      }
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt shape mismatch: " + a.shape_string() + " x " + b.shape_string() +
                     "^T");
  }
  Matrix out(a.rows(), b.rows());
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) {
        s += ar[k] * br[k];
      }
      out(i, j) = s;
    }
  }
  return out;
}

void add_matmul_tn(Matrix& out, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
    throw ShapeError("add_matmul_tn shape mismatch: " + out.shape_string() + " += " +
                     a.shape_string() + "^T x " + b.shape_string());
  }
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* ar = a.row(r).data();
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = ar[i];
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) {
        o[j] += ari * br[j];
      }
    }
  }
}

Tensor3::Tensor3(std::size_t n, std::size_t steps, std::size_t features, double fill)
    : n_(n), steps_(steps), features_(features), data_(n * steps * features, fill) {
  if (steps == 0 || features == 0) {
    throw ShapeError("tensor needs >= 1 timestep and >= 1 feature");
  }
}

Tensor3::Tensor3(std::size_t n, std::size_t steps, std::size_t features, std::vector<double> data)
    : n_(n), steps_(steps), features_(features), data_(std::move(data)) {
  if (steps == 0 || features == 0) {
    throw ShapeError("tensor needs >= 1 timestep and >= 1 feature");
  }
  if (data_.size() != n * steps * features) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(n) + "x" + std::to_string(steps) + "x" +
                     std::to_string(features));
  }
}

Tensor3 Tensor3::select(std::span<const std::size_t> indices) const {
  Tensor3 out(indices.size(), steps_, features_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= n_) {
      throw ShapeError("sample index " + std::to_string(indices[r]) + " out of range");
    }
    const auto src = sample(indices[r]);
    std::copy(src.begin(), src.end(), out.sample(r).begin());
  }
  return out;
}

Tensor3 Tensor3::flattened() const { return Tensor3(n_, 1, steps_ * features_, data_); }

Matrix Tensor3::step_matrix(std::size_t t) const {
  Matrix m(n_, features_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double* src = data_.data() + (i * steps_ + t) * features_;
    std::copy(src, src + features_, m.row(i).begin());
  }
  return m;
}

double activation(double x, Activation kind) {
  if (!std::isfinite(x)) {
    throw DomainError("activation input must be finite");
  }
  switch (kind) {
    case Activation::Sigmoid:
      return detail::sigmoid(x);
    case Activation::Tanh:
      return std::tanh(x);
  }
  throw DomainError("unknown activation");
}

double activation_grad(double y, Activation kind) {
  if (!std::isfinite(y)) {
    throw DomainError("activation output must be finite");
  }
  switch (kind) {
    case Activation::Sigmoid:
      return y * (1.0 - y);
    case Activation::Tanh:
      return 1.0 - y * y;
  }
  throw DomainError("unknown activation");
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) {
    s = splitmix64(x);
  }
}

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

double Rng::normal() noexcept {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

namespace {
__extension__ typedef unsigned __int128 u128;
}  // namespace

std::uint64_t Rng::below(std::uint64_t bound) noexcept {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  u128 m = static_cast<u128>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<u128>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

Matrix init_weights(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : m.data()) {
    v = rng.uniform(-limit, limit);
  }
  return m;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            if (!failed.exchange(true)) {
              failure = std::current_exception();
            }
          }
        }
      });
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace finrisk
