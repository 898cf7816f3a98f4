#pragma once

// Comparison models behind one scoring interface: feed-forward (BP) network,
// logistic regression, CART random forest, the LSTM adapter, and externally
// produced score files. Also the on-disk model container shared by all of them.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finrisk/datakit.hpp"
#include "finrisk/lstm_net.hpp"
#include "finrisk/trainer.hpp"
#include "json.hpp"

namespace finrisk {

// Batch of samples → probability per sample in [0, 1].
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string kind() const = 0;
  virtual Vector score(const Tensor3& batch) const = 0;
  virtual nlohmann::json params_json() const = 0;
};

class LstmScorer final : public Scorer, public Differentiable {
 public:
  explicit LstmScorer(LstmNetwork net) : net_(std::move(net)) {}

  std::string kind() const override { return "lstm"; }
  Vector score(const Tensor3& batch) const override { return forward(batch, net_); }
  nlohmann::json params_json() const override { return to_json(net_); }

  std::vector<std::span<double>> parameter_blocks() override { return net_.weights().blocks(); }
  double loss_and_gradient(const Tensor3& batch, std::span<const int> labels, LossKind kind,
                           std::vector<Vector>& grads) override;
  Vector predict(const Tensor3& batch) const override { return score(batch); }

  const LstmNetwork& network() const noexcept { return net_; }

 private:
  LstmNetwork net_;
};

struct MlpConfig {
  std::vector<std::size_t> hidden{20};
  std::uint64_t seed = 0;
  void validate() const;
};

// Sigmoid hidden layers and a sigmoid output on flattened (T·d) features.
class Mlp final : public Scorer, public Differentiable {
 public:
  Mlp(std::size_t input_dim, MlpConfig cfg);  // Glorot-initialized from cfg.seed
  static Mlp zeros(std::size_t input_dim, MlpConfig cfg);

  std::string kind() const override { return "mlp"; }
  Vector score(const Tensor3& batch) const override;
  nlohmann::json params_json() const override;
  static Mlp from_json(const nlohmann::json& j);

  std::vector<std::span<double>> parameter_blocks() override;
  double loss_and_gradient(const Tensor3& batch, std::span<const int> labels, LossKind kind,
                           std::vector<Vector>& grads) override;
  Vector predict(const Tensor3& batch) const override { return score(batch); }

  std::size_t input_dim() const noexcept { return input_dim_; }
  const MlpConfig& config() const noexcept { return cfg_; }

 private:
  std::size_t input_dim_;
  MlpConfig cfg_;
  std::vector<Matrix> weights_;  // layer k: out × in
  std::vector<Vector> biases_;
};

// One sigmoid unit on flattened features.
class LogisticRegression final : public Scorer, public Differentiable {
 public:
  explicit LogisticRegression(std::size_t input_dim);  // zero-initialized

  std::string kind() const override { return "logreg"; }
  Vector score(const Tensor3& batch) const override;
  nlohmann::json params_json() const override;
  static LogisticRegression from_json(const nlohmann::json& j);

  std::vector<std::span<double>> parameter_blocks() override;
  double loss_and_gradient(const Tensor3& batch, std::span<const int> labels, LossKind kind,
                           std::vector<Vector>& grads) override;
  Vector predict(const Tensor3& batch) const override { return score(batch); }

  const Vector& weights() const noexcept { return w_; }
  double bias() const noexcept { return b_; }

 private:
  Vector w_;
  double b_ = 0.0;
};

struct ForestConfig {
  std::size_t trees = 100;
  std::size_t max_depth = 10;
  std::size_t min_samples_leaf = 1;
  std::size_t features_per_split = 0;  // 0 selects floor(sqrt(d)), at least 1
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  void validate() const;
};

// Gini impurity of a binary node: 1 - p² - (1-p)².
double gini(std::size_t positives, std::size_t total) noexcept;

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;   // value <= threshold
  int right = -1;  // value > threshold
  int label = 0;   // leaf majority class (ties → 1)
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int predict(std::span<const double> row) const;
  std::size_t depth() const;
};

class RandomForest final : public Scorer {
 public:
  RandomForest(std::size_t input_dim, std::vector<DecisionTree> trees);

  std::string kind() const override { return "forest"; }
  // Fraction of trees voting positive.
  Vector score(const Tensor3& batch) const override;
  nlohmann::json params_json() const override;
  static RandomForest from_json(const nlohmann::json& j);

  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

 private:
  std::size_t input_dim_;
  std::vector<DecisionTree> trees_;
};

Mlp train_mlp(const Dataset& data, const MlpConfig& cfg, const TrainConfig& tcfg);
LogisticRegression train_logreg(const Dataset& data, const TrainConfig& tcfg,
                                TrainReport* report = nullptr);
// CART on Gini impurity, splitting at midpoints of sorted distinct values.
// Tree t draws from Rng(seed + t), so results do not depend on cfg.jobs.
RandomForest train_forest(const Dataset& data, const ForestConfig& cfg);

struct ExternalScores {
  std::string model;
  Vector scores;  // aligned to dataset row order
};

// CSV with header "row_id,score"; row_id is the 0-based dataset row. Rows may
// appear in any order. Throws ValidationError listing every offending line.
ExternalScores parse_external_scores(std::istream& in, std::size_t dataset_size,
                                     const std::string& model);
ExternalScores load_external_scores(const std::string& path, std::size_t dataset_size,
                                    const std::string& model);

// Everything needed to score raw rows: the scorer, the input shape it was
// trained on and the normalizer fitted on its training rows.
struct ModelBundle {
  std::unique_ptr<Scorer> scorer;
  std::size_t steps = 1;
  std::size_t features = 0;  // raw feature count before normalization
  std::vector<std::string> feature_names;
  std::optional<Normalizer> normalizer;

  // Validates shape, normalizes, scores.
  Vector score_dataset(const Dataset& ds) const;
};

nlohmann::json to_json(const ModelBundle& bundle);
ModelBundle model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const ModelBundle& bundle);
ModelBundle load_model(const std::string& path);

}  // namespace finrisk
