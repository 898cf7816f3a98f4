#pragma once

// Losses, backpropagation through time, Adam, the mini-batch training loop,
// k-fold cross-validation and a finite-difference gradient oracle.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "finrisk/datakit.hpp"
#include "finrisk/lstm_net.hpp"
#include "finrisk/metrics.hpp"

namespace finrisk {

enum class LossKind { LogLoss, Mse };

inline constexpr double kProbClamp = 1e-12;

const char* to_string(LossKind kind) noexcept;
LossKind loss_kind_from_string(const std::string& s);

// mse = mean (p - y)²; log_loss = -mean[y ln p + (1 - y) ln(1 - p)] with p
// clamped to [1e-12, 1 - 1e-12].
double loss(std::span<const double> pred, std::span<const int> labels, LossKind kind);

// d loss / d logit for one sample, before the 1/n mean factor.
double loss_logit_grad(double prob, int label, LossKind kind) noexcept;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  LossKind loss = LossKind::LogLoss;
  AdamConfig adam;
  std::size_t batch_size = 100;
  std::size_t epochs = 1000;
  std::uint64_t seed = 0;

  // Throws DomainError on out-of-range hyperparameters.
  void validate() const;
};

// First and second moment estimates, one buffer per parameter block.
struct AdamState {
  std::vector<Vector> m;
  std::vector<Vector> v;

  static AdamState zeros_like(std::span<const std::span<double>> params);
};

// One bias-corrected Adam update. t is the 1-based step index.
void adam_step(std::span<const std::span<double>> params, std::span<const Vector> grads,
               AdamState& state, std::size_t t, const AdamConfig& cfg);

// A model trainable by the generic loop: parameter blocks, a mean-reduced
// loss with its gradient (one Vector per block), and batch scoring.
class Differentiable {
 public:
  virtual ~Differentiable() = default;
  virtual std::vector<std::span<double>> parameter_blocks() = 0;
  virtual double loss_and_gradient(const Tensor3& batch, std::span<const int> labels,
                                   LossKind kind, std::vector<Vector>& grads) = 0;
  virtual Vector predict(const Tensor3& batch) const = 0;
};

// Reverse-mode gradients through the canonical cell, mean-reduced over the
// tape's batch. Throws UsageError when the tape is empty or does not match.
LstmWeights backward(const ForwardTape& tape, std::span<const int> labels, const LstmNetwork& net,
                     LossKind kind);

// forward_tape + backward, returning the loss as well.
double loss_and_gradient(const LstmNetwork& net, const Tensor3& batch, std::span<const int> labels,
                         LossKind kind, LstmWeights& grads);

class LstmTrainable final : public Differentiable {
 public:
  explicit LstmTrainable(LstmNetwork& net) : net_(net) {}
  std::vector<std::span<double>> parameter_blocks() override { return net_.weights().blocks(); }
  double loss_and_gradient(const Tensor3& batch, std::span<const int> labels, LossKind kind,
                           std::vector<Vector>& grads) override;
  Vector predict(const Tensor3& batch) const override { return forward(batch, net_); }

 private:
  LstmNetwork& net_;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // sample-weighted mean of mini-batch losses
  std::size_t steps = 0;           // Adam updates performed
  double wall_seconds = 0.0;
};

// Called after each epoch with the 1-based epoch index.
using EpochHook = std::function<void(std::size_t epoch)>;

// epochs × ceil(n / batch_size) Adam steps; batch order reshuffled each epoch
// from cfg.seed. Throws DivergenceError on a non-finite epoch loss.
TrainReport train(Differentiable& model, const Dataset& data, const TrainConfig& cfg,
                  const EpochHook& on_epoch = {});
TrainReport train(LstmNetwork& net, const Dataset& data, const TrainConfig& cfg,
                  const EpochHook& on_epoch = {});

// "epoch,loss" header then one record per epoch.
void write_loss_stream(std::ostream& out, const TrainReport& report);

// Central differences of f at theta, one coordinate at a time.
Vector finite_diff(const std::function<double(std::span<const double>)>& f,
                   std::span<const double> theta, double step);

// Central-difference gradient of the mean loss with respect to every weight.
LstmWeights finite_diff_grad(const LstmNetwork& net, const Tensor3& batch,
                             std::span<const int> labels, LossKind kind, double step);

// k folds of sizes differing by at most one (the first n % k are larger),
// taken as contiguous slices of a seeded shuffle.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed);
// Positives and negatives shuffled separately, then dealt round-robin.
std::vector<std::vector<std::size_t>> make_stratified_folds(std::span<const int> labels,
                                                            std::size_t k, std::uint64_t seed);

struct MetricSummary {
  double acc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  double auc = 0.0;  // over folds with a defined AUC
};

struct CvResult {
  std::vector<EvalReport> folds;
  MetricSummary mean;
  MetricSummary stddev;  // sample standard deviation across folds
  std::size_t auc_folds = 0;
};

using FoldRunner = std::function<EvalReport(const Dataset& train, const Dataset& test, std::size_t fold)>;

CvResult kfold_cv(const Dataset& data, std::size_t k, std::uint64_t seed, const FoldRunner& run,
                  bool stratified = false);

}  // namespace finrisk
