// Feed-forward (BP) network baseline.

#include <algorithm>
#include <string>

#include "finrisk/baselines.hpp"
#include "finrisk/errors.hpp"

namespace finrisk {

namespace {

Matrix flat_rows(const Tensor3& batch) {
  const std::size_t width = batch.steps() * batch.features();
  return Matrix(batch.samples(), width, Vector(batch.data().begin(), batch.data().end()));
}

void sigmoid_rows(Matrix& z, const Vector& bias) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      r[j] = detail::sigmoid(r[j] + bias[j]);
    }
  }
}

}  // namespace

void MlpConfig::validate() const {
  if (hidden.empty()) {
    throw DomainError("MLP needs at least one hidden layer");
  }
  for (const std::size_t h : hidden) {
    if (h == 0) {
      throw DomainError("MLP hidden widths must be >= 1");
    }
  }
}

Mlp Mlp::zeros(std::size_t input_dim, MlpConfig cfg) {
  cfg.validate();
  if (input_dim == 0) {
    throw DomainError("MLP input dimension must be >= 1");
  }
  Mlp m(input_dim, cfg);
  for (auto& w : m.weights_) {
    w.fill(0.0);
  }
  for (auto& b : m.biases_) {
    std::fill(b.begin(), b.end(), 0.0);
  }
  return m;
}

Mlp::Mlp(std::size_t input_dim, MlpConfig cfg) : input_dim_(input_dim), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (input_dim == 0) {
    throw DomainError("MLP input dimension must be >= 1");
  }
  Rng rng(cfg_.seed);
  std::size_t in = input_dim;
  for (const std::size_t h : cfg_.hidden) {
    weights_.push_back(init_weights(h, in, rng));
    biases_.emplace_back(h, 0.0);
    in = h;
  }
  weights_.push_back(init_weights(1, in, rng));
  biases_.emplace_back(1, 0.0);
}

std::vector<std::span<double>> Mlp::parameter_blocks() {
  std::vector<std::span<double>> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.emplace_back(weights_[l].data());
    out.emplace_back(biases_[l]);
  }
  return out;
}

Vector Mlp::score(const Tensor3& batch) const {
  if (batch.empty()) {
    return {};
  }
  if (batch.steps() * batch.features() != input_dim_) {
    throw ShapeError("flattened input width " + std::to_string(batch.steps() * batch.features()) +
                     " does not match MLP input " + std::to_string(input_dim_));
  }
  Matrix a = flat_rows(batch);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = matmul_nt(a, weights_[l]);
    sigmoid_rows(z, biases_[l]);
    a = std::move(z);
  }
  return Vector(a.data().begin(), a.data().end());
}

double Mlp::loss_and_gradient(const Tensor3& batch, std::span<const int> labels, LossKind kind,
                              std::vector<Vector>& grads) {
  if (batch.samples() != labels.size()) {
    throw ShapeError("label count does not match batch");
  }
  if (batch.steps() * batch.features() != input_dim_) {
    throw ShapeError("flattened input width does not match MLP input");
  }
  const std::size_t n = batch.samples();
  std::vector<Matrix> acts;
  acts.push_back(flat_rows(batch));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = matmul_nt(acts.back(), weights_[l]);
    sigmoid_rows(z, biases_[l]);
    acts.push_back(std::move(z));
  }
  const Matrix& out = acts.back();
  const Vector probs(out.data().begin(), out.data().end());

  grads.assign(2 * weights_.size(), Vector());
  Matrix dz(n, 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    dz(i, 0) = loss_logit_grad(probs[i], labels[i], kind) * inv_n;
  }
  for (std::size_t l = weights_.size(); l-- > 0;) {
    Matrix gw(weights_[l].rows(), weights_[l].cols());
    add_matmul_tn(gw, dz, acts[l]);
    Vector gb(biases_[l].size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < gb.size(); ++j) {
        gb[j] += dz(i, j);
      }
    }
    grads[2 * l].assign(gw.data().begin(), gw.data().end());
    grads[2 * l + 1] = std::move(gb);
    if (l > 0) {
      Matrix da = matmul(dz, weights_[l]);
      const Matrix& a = acts[l];
      for (std::size_t k = 0; k < da.size(); ++k) {
        const double y = a.data()[k];
        da.data()[k] *= y * (1.0 - y);
      }
      dz = std::move(da);
    }
  }
  return loss(probs, labels, kind);
}

nlohmann::json Mlp::params_json() const {
  nlohmann::json j;
  j["input_dim"] = input_dim_;
  j["hidden"] = cfg_.hidden;
  j["seed"] = cfg_.seed;
  auto& layers = j["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    layers.push_back({{"w", Vector(weights_[l].data().begin(), weights_[l].data().end())},
                      {"b", biases_[l]}});
  }
  return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  try {
    MlpConfig cfg;
    cfg.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    Mlp m = Mlp::zeros(j.at("input_dim").get<std::size_t>(), cfg);
    const auto& layers = j.at("layers");
    if (layers.size() != m.weights_.size()) {
      throw ValidationError("MLP layer count mismatch");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto w = layers[l].at("w").get<Vector>();
      const auto b = layers[l].at("b").get<Vector>();
      if (w.size() != m.weights_[l].size() || b.size() != m.biases_[l].size()) {
        throw ValidationError("MLP layer " + std::to_string(l) + " has wrong size");
      }
      std::copy(w.begin(), w.end(), m.weights_[l].data().begin());
      m.biases_[l] = b;
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed MLP model: ") + e.what());
  }
}

Mlp train_mlp(const Dataset& data, const MlpConfig& cfg, const TrainConfig& tcfg) {
  Mlp model(data.steps() * data.dims(), cfg);
  train(model, data, tcfg);
  return model;
}

}  // namespace finrisk
