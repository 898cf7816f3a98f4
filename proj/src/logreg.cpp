#include <string>

#include "finrisk/baselines.hpp"
#include "finrisk/errors.hpp"

namespace finrisk {

LogisticRegression::LogisticRegression(std::size_t input_dim) : w_(input_dim, 0.0) {
  if (input_dim == 0) {
    throw DomainError("logistic regression input dimension must be >= 1");
  }
}

Vector LogisticRegression::score(const Tensor3& batch) const {
  if (batch.empty()) {
    return {};
  }
  if (batch.steps() * batch.features() != w_.size()) {
    throw ShapeError("flattened input width " + std::to_string(batch.steps() * batch.features()) +
                     " does not match model input " + std::to_string(w_.size()));
  }
  Vector out(batch.samples());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto x = batch.sample(i);
    double z = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      z += w_[j] * x[j];
    }
    out[i] = detail::sigmoid(z + b_);
  }
  return out;
}

std::vector<std::span<double>> LogisticRegression::parameter_blocks() {
  return {std::span<double>(w_), std::span<double>(&b_, 1)};
}

double LogisticRegression::loss_and_gradient(const Tensor3& batch, std::span<const int> labels,
                                             LossKind kind, std::vector<Vector>& grads) {
  if (batch.samples() != labels.size()) {
    throw ShapeError("label count does not match batch");
  }
  const Vector probs = score(batch);
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  grads.assign(2, Vector());
  grads[0].assign(w_.size(), 0.0);
  grads[1].assign(1, 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double dz = loss_logit_grad(probs[i], labels[i], kind) * inv_n;
    const auto x = batch.sample(i);
    for (std::size_t j = 0; j < x.size(); ++j) {
      grads[0][j] += dz * x[j];
    }
    grads[1][0] += dz;
  }
  return loss(probs, labels, kind);
}

nlohmann::json LogisticRegression::params_json() const { return {{"w", w_}, {"b", b_}}; }

LogisticRegression LogisticRegression::from_json(const nlohmann::json& j) {
  try {
    const auto w = j.at("w").get<Vector>();
    LogisticRegression m(w.size());
    m.w_ = w;
    m.b_ = j.at("b").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed logistic regression model: ") + e.what());
  }
}

LogisticRegression train_logreg(const Dataset& data, const TrainConfig& tcfg, TrainReport* report) {
  LogisticRegression model(data.steps() * data.dims());
  TrainReport r = train(model, data, tcfg);
  if (report) {
    *report = std::move(r);
  }
  return model;
}

}  // namespace finrisk
