#include "finrisk/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "finrisk/errors.hpp"

namespace finrisk {

const char* to_string(LossKind kind) noexcept {
  return kind == LossKind::LogLoss ? "log_loss" : "mse";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "log_loss" || s == "logloss") {
    return LossKind::LogLoss;
  }
  if (s == "mse") {
    return LossKind::Mse;
  }
  throw DomainError("unknown loss '" + s + "' (expected log_loss or mse)");
}

double loss(std::span<const double> pred, std::span<const int> labels, LossKind kind) {
  if (pred.size() != labels.size()) {
    throw ShapeError("prediction count " + std::to_string(pred.size()) +
                     " does not match label count " + std::to_string(labels.size()));
  }
  if (pred.empty()) {
    throw DomainError("loss of an empty batch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double y = labels[i];
    if (kind == LossKind::Mse) {
      const double r = pred[i] - y;
      sum += r * r;
    } else {
      const double p = std::clamp(pred[i], kProbClamp, 1.0 - kProbClamp);
      sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
  }
  return sum / static_cast<double>(pred.size());
}

double loss_logit_grad(double prob, int label, LossKind kind) noexcept {
  const double y = label;
  if (kind == LossKind::Mse) {
    return 2.0 * (prob - y) * prob * (1.0 - prob);
  }
  // Outside the clamp window the clamped loss is flat.
  if (prob < kProbClamp || prob > 1.0 - kProbClamp) {
    return 0.0;
  }
  return prob - y;
}

void TrainConfig::validate() const {
  if (!(adam.learning_rate >= 0.0) || !std::isfinite(adam.learning_rate)) {
    throw DomainError("learning rate must be finite and >= 0");
  }
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0) || !(adam.beta2 > 0.0 && adam.beta2 < 1.0)) {
    throw DomainError("Adam betas must lie in (0, 1)");
  }
  if (!(adam.epsilon > 0.0)) {
    throw DomainError("Adam epsilon must be > 0");
  }
  if (batch_size < 1) {
    throw DomainError("batch size must be >= 1");
  }
  if (epochs < 1) {
    throw DomainError("epochs must be >= 1");
  }
}

AdamState AdamState::zeros_like(std::span<const std::span<double>> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<const std::span<double>> params, std::span<const Vector> grads,
               AdamState& state, std::size_t t, const AdamConfig& cfg) {
  if (t < 1) {
    throw DomainError("Adam step index must be >= 1");
  }
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("Adam block count mismatch");
  }
  const double td = static_cast<double>(t);
  const double corr1 = 1.0 - std::pow(cfg.beta1, td);
  const double corr2 = 1.0 - std::pow(cfg.beta2, td);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto theta = params[b];
    const auto& g = grads[b];
    auto& m = state.m[b];
    auto& v = state.v[b];
    if (g.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
      throw ShapeError("Adam block " + std::to_string(b) + " shape mismatch");
    }
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double m_hat = m[k] / corr1;
      const double v_hat = v[k] / corr2;
      theta[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

TrainReport train(Differentiable& model, const Dataset& data, const TrainConfig& cfg,
                  const EpochHook& on_epoch) {
  cfg.validate();
  const std::size_t n = data.size();
  if (n == 0 || data.features.samples() != n) {
    throw DomainError("training data must be non-empty with one label per sample");
  }
  for (const int y : data.labels) {
    if (y != 0 && y != 1) {
      throw DomainError("training labels must be 0 or 1");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  const auto params = model.parameter_blocks();
  AdamState state = AdamState::zeros_like(params);
  std::vector<Vector> grads;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);
  TrainReport report;
  Labels batch_labels;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_sum = 0.0;
    for (std::size_t b = 0; b < n; b += cfg.batch_size) {
      const std::size_t e = std::min(n, b + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + b, e - b);
      const Tensor3 x = data.features.select(idx);
      batch_labels.clear();
      for (const std::size_t i : idx) {
        batch_labels.push_back(data.labels[i]);
      }
      const double batch_loss = model.loss_and_gradient(x, batch_labels, cfg.loss, grads);
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError(epoch, report.epoch_loss);
      }
      adam_step(params, grads, state, ++report.steps, cfg.adam);
      epoch_sum += batch_loss * static_cast<double>(idx.size());
    }
    const double epoch_loss = epoch_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError(epoch, report.epoch_loss);
    }
    report.epoch_loss.push_back(epoch_loss);
    if (on_epoch) {
      on_epoch(epoch);
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainReport train(LstmNetwork& net, const Dataset& data, const TrainConfig& cfg,
                  const EpochHook& on_epoch) {
  LstmTrainable model(net);
  return train(model, data, cfg, on_epoch);
}

void write_loss_stream(std::ostream& out, const TrainReport& report) {
  out << "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%.17g", report.epoch_loss[e]);
    out << (e + 1) << ',' << buf << '\n';
  }
}

Vector finite_diff(const std::function<double(std::span<const double>)>& f,
                   std::span<const double> theta, double step) {
  Vector x(theta.begin(), theta.end());
  Vector g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x[k];
    x[k] = orig + step;
    const double up = f(x);
    x[k] = orig - step;
    const double down = f(x);
    x[k] = orig;
    g[k] = (up - down) / (2.0 * step);
  }
  return g;
}

LstmWeights finite_diff_grad(const LstmNetwork& net, const Tensor3& batch,
                             std::span<const int> labels, LossKind kind, double step) {
  LstmNetwork probe = net;
  LstmWeights grads = net.zeros_like();
  auto params = probe.weights().blocks();
  auto out = grads.blocks();
  const auto eval = [&] { return loss(forward(batch, probe), labels, kind); };
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t k = 0; k < params[b].size(); ++k) {
      const double orig = params[b][k];
      params[b][k] = orig + step;
      const double up = eval();
      params[b][k] = orig - step;
      const double down = eval();
      params[b][k] = orig;
      out[b][k] = (up - down) / (2.0 * step);
    }
  }
  return grads;
}

}  // namespace finrisk
