#pragma once

// Stacked LSTM classifier: canonical gated cells feeding a dense sigmoid head
// that reads the top layer's hidden state at the final timestep.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "finrisk/num_core.hpp"
#include "json.hpp"

namespace finrisk {

enum class Gate : std::size_t { Input = 0, Forget = 1, Cell = 2, Output = 3 };
inline constexpr std::size_t kGateCount = 4;
inline constexpr std::array<const char*, kGateCount> kGateNames{"input", "forget", "cell", "output"};

// One gate's weights: w is hidden × input, u is hidden × hidden.
struct GateWeights {
  Matrix w;
  Matrix u;
  Vector b;
};

class LstmLayerParams {
 public:
  // All-zero parameters.
  LstmLayerParams(std::size_t input_dim, std::size_t hidden_dim);
  // Glorot-uniform w and u, zero biases.
  static LstmLayerParams glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden_dim() const noexcept { return hidden_dim_; }

  GateWeights& gate(Gate g) noexcept { return gates_[static_cast<std::size_t>(g)]; }
  const GateWeights& gate(Gate g) const noexcept { return gates_[static_cast<std::size_t>(g)]; }

  // 4 · (h · (h + i) + h)
  std::size_t param_count() const noexcept;

  // Gate-major order: (w, u, b) for input, forget, cell, output.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  friend bool operator==(const LstmLayerParams& a, const LstmLayerParams& b);

 private:
  std::size_t input_dim_;
  std::size_t hidden_dim_;
  std::vector<GateWeights> gates_;
};

bool operator==(const GateWeights& a, const GateWeights& b);

// Dense hidden_last → 1 followed by a sigmoid.
struct DenseHead {
  Vector w;
  double b = 0.0;
  friend bool operator==(const DenseHead&, const DenseHead&) = default;
};

struct LstmWeights {
  std::vector<LstmLayerParams> layers;
  DenseHead head;

  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
  friend bool operator==(const LstmWeights&, const LstmWeights&) = default;
};

struct NetworkConfig {
  std::size_t input_dim = 45;
  std::vector<std::size_t> hidden_dims{64, 32, 16};
  std::uint64_t seed = 0;

  // Throws DomainError when hidden_dims is empty or any width is zero.
  void validate() const;
};

// Per-layer parameter counts; the last entry is the dense head.
std::vector<std::size_t> param_count(const NetworkConfig& cfg);

class LstmNetwork {
 public:
  // Glorot-initialized from cfg.seed.
  explicit LstmNetwork(NetworkConfig cfg);
  LstmNetwork(NetworkConfig cfg, LstmWeights weights);
  static LstmNetwork zeros(NetworkConfig cfg);

  const NetworkConfig& config() const noexcept { return config_; }
  LstmWeights& weights() noexcept { return weights_; }
  const LstmWeights& weights() const noexcept { return weights_; }

  // Counted by walking every allocated scalar.
  std::size_t parameter_count() const noexcept;
  // Same shapes, all zero; used as a gradient accumulator.
  LstmWeights zeros_like() const;

  friend bool operator==(const LstmNetwork& a, const LstmNetwork& b) {
    return a.weights_ == b.weights_;
  }

 private:
  NetworkConfig config_;
  LstmWeights weights_;
};

struct CellState {
  Vector h;
  Vector c;
  static CellState zeros(std::size_t hidden) { return {Vector(hidden, 0.0), Vector(hidden, 0.0)}; }
};

struct GateCache {
  Vector input;
  Vector forget;
  Vector candidate;
  Vector output;
  Vector c_prev;
  Vector c;
};

// One timestep of one layer for a single sample.
std::pair<CellState, GateCache> cell_forward(std::span<const double> x, const CellState& prev,
                                             const LstmLayerParams& p);

// One timestep of one layer for a batch (rows = samples).
struct StepCache {
  Matrix x;
  Matrix h_prev;
  Matrix c_prev;
  Matrix input;
  Matrix forget;
  Matrix candidate;
  Matrix output;
  Matrix c;
  Matrix tanh_c;
  Matrix h;
};

StepCache step_forward(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                       const LstmLayerParams& p);

// Everything backpropagation needs from a forward pass.
struct ForwardTape {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<std::vector<StepCache>> layers;  // [layer][t]
  Vector logits;
  Vector probs;

  bool empty() const noexcept { return layers.empty(); }
};

ForwardTape forward_tape(const Tensor3& batch, const LstmNetwork& net);

// Probability per sample in (0, 1). Empty batch gives an empty result.
Vector forward(const Tensor3& batch, const LstmNetwork& net);

nlohmann::json to_json(const LstmNetwork& net);
LstmNetwork lstm_from_json(const nlohmann::json& j);

}  // namespace finrisk
