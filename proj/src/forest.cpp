// Random forest of CART trees grown on Gini impurity.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "finrisk/baselines.hpp"
#include "finrisk/errors.hpp"

namespace finrisk {

namespace {

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity = 0.0;
};

class TreeGrower {
 public:
  TreeGrower(const Tensor3& rows, const Labels& labels, const ForestConfig& cfg, std::size_t mtry,
             Rng& rng)
      : rows_(rows), labels_(labels), cfg_(cfg), mtry_(mtry), rng_(rng) {
    features_.resize(rows.features());
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  DecisionTree grow(std::vector<std::size_t> sample) {
    DecisionTree tree;
    tree_ = &tree;
    build(sample, 0);
    return tree;
  }

 private:
  double value(std::size_t i, std::size_t f) const { return rows_(i, 0, f); }

  int build(std::vector<std::size_t>& idx, std::size_t depth) {
    const auto node = static_cast<int>(tree_->nodes.size());
    tree_->nodes.emplace_back();
    std::size_t pos = 0;
    for (const std::size_t i : idx) {
      pos += static_cast<std::size_t>(labels_[i]);
    }
    tree_->nodes[node].label = 2 * pos >= idx.size() ? 1 : 0;
    if (depth >= cfg_.max_depth || pos == 0 || pos == idx.size() ||
        idx.size() < 2 * cfg_.min_samples_leaf) {
      return node;
    }
    const SplitChoice split = best_split(idx, pos);
    if (!split.found) {
      return node;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (const std::size_t i : idx) {
      (value(i, split.feature) <= split.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    tree_->nodes[node].feature = static_cast<int>(split.feature);
    tree_->nodes[node].threshold = split.threshold;
    const int l = build(left, depth + 1);
    tree_->nodes[node].left = l;
    const int r = build(right, depth + 1);
    tree_->nodes[node].right = r;
    return node;
  }

  SplitChoice best_split(const std::vector<std::size_t>& idx, std::size_t pos) {
    // Partial Fisher-Yates picks mtry candidate features.
    for (std::size_t k = 0; k < mtry_; ++k) {
      const auto j = k + static_cast<std::size_t>(rng_.below(features_.size() - k));
      std::swap(features_[k], features_[j]);
    }
    const std::size_t n = idx.size();
    SplitChoice best;
    std::vector<std::pair<double, int>> col(n);
    for (std::size_t k = 0; k < mtry_; ++k) {
      const std::size_t f = features_[k];
      for (std::size_t r = 0; r < n; ++r) {
        col[r] = {value(idx[r], f), labels_[idx[r]]};
      }
      std::sort(col.begin(), col.end());
      std::size_t left_pos = 0;
      for (std::size_t r = 0; r + 1 < n; ++r) {
        left_pos += static_cast<std::size_t>(col[r].second);
        if (col[r].first == col[r + 1].first) {
          continue;
        }
        const std::size_t nl = r + 1;
        const std::size_t nr = n - nl;
        if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) {
          continue;
        }
        const double imp = (static_cast<double>(nl) * gini(left_pos, nl) +
                            static_cast<double>(nr) * gini(pos - left_pos, nr)) /
                           static_cast<double>(n);
        const double thr = 0.5 * (col[r].first + col[r + 1].first);
        const bool better =
            !best.found || imp < best.impurity ||
            (imp == best.impurity &&
             (thr < best.threshold || (thr == best.threshold && f < best.feature)));
        if (better) {
          best = {true, f, thr, imp};
        }
      }
    }
    return best;
  }

  const Tensor3& rows_;
  const Labels& labels_;
  const ForestConfig& cfg_;
  std::size_t mtry_;
  Rng& rng_;
  std::vector<std::size_t> features_;
  DecisionTree* tree_ = nullptr;
};

nlohmann::json tree_json(const DecisionTree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
  }
  return nodes;
}

}  // namespace

double gini(std::size_t positives, std::size_t total) noexcept {
  if (total == 0) {
    return 0.0;
  }
  const double p = static_cast<double>(positives) / static_cast<double>(total);
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

void ForestConfig::validate() const {
  if (trees < 1) {
    throw DomainError("forest needs at least one tree");
  }
  if (max_depth < 1) {
    throw DomainError("tree depth must be >= 1");
  }
  if (min_samples_leaf < 1) {
    throw DomainError("min samples per leaf must be >= 1");
  }
}

int DecisionTree::predict(std::span<const double> row) const {
  std::size_t k = 0;
  while (nodes[k].feature >= 0) {
    const auto& n = nodes[k];
    k = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                          : n.right);
  }
  return nodes[k].label;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    deepest = std::max(deepest, d[k]);
    if (nodes[k].feature >= 0) {
      d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
      d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
    }
  }
  return deepest;
}

RandomForest::RandomForest(std::size_t input_dim, std::vector<DecisionTree> trees)
    : input_dim_(input_dim), trees_(std::move(trees)) {
  if (trees_.empty()) {
    throw DomainError("forest needs at least one tree");
  }
}

Vector RandomForest::score(const Tensor3& batch) const {
  if (batch.empty()) {
    return {};
  }
  if (batch.steps() * batch.features() != input_dim_) {
    throw ShapeError("flattened input width " + std::to_string(batch.steps() * batch.features()) +
                     " does not match forest input " + std::to_string(input_dim_));
  }
  Vector out(batch.samples());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = batch.sample(i);
    std::size_t votes = 0;
    for (const auto& t : trees_) {
      votes += static_cast<std::size_t>(t.predict(row));
    }
    out[i] = static_cast<double>(votes) / static_cast<double>(trees_.size());
  }
  return out;
}

nlohmann::json RandomForest::params_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    trees.push_back(tree_json(t));
  }
  return {{"input_dim", input_dim_}, {"node_layout", {"feature", "threshold", "left", "right", "label"}},
          {"trees", std::move(trees)}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
  try {
    const auto input_dim = j.at("input_dim").get<std::size_t>();
    std::vector<DecisionTree> trees;
    for (const auto& tj : j.at("trees")) {
      DecisionTree t;
      for (const auto& nj : tj) {
        TreeNode n;
        n.feature = nj.at(0).get<int>();
        n.threshold = nj.at(1).get<double>();
        n.left = nj.at(2).get<int>();
        n.right = nj.at(3).get<int>();
        n.label = nj.at(4).get<int>();
        t.nodes.push_back(n);
      }
      const auto size = static_cast<int>(t.nodes.size());
      for (const auto& n : t.nodes) {
        if (n.feature >= static_cast<int>(input_dim) ||
            (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))) {
          throw ValidationError("forest tree has an invalid node");
        }
      }
      if (t.nodes.empty()) {
        throw ValidationError("forest tree has no nodes");
      }
      trees.push_back(std::move(t));
    }
    return RandomForest(input_dim, std::move(trees));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed forest model: ") + e.what());
  }
}

RandomForest train_forest(const Dataset& data, const ForestConfig& cfg) {
  cfg.validate();
  if (data.size() < 2) {
    throw DomainError("forest training needs at least 2 samples");
  }
  const Tensor3 rows = data.features.flattened();
  const std::size_t d = rows.features();
  std::size_t mtry = cfg.features_per_split;
  if (mtry == 0) {
    mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
  }
  mtry = std::min(mtry, d);
  const std::size_t n = data.size();
  std::vector<DecisionTree> trees(cfg.trees);
  parallel_for(cfg.trees, cfg.jobs, [&](std::size_t t) {
    Rng rng(cfg.seed + t);
    std::vector<std::size_t> sample(n);
    if (cfg.bootstrap) {
      for (auto& s : sample) {
        s = static_cast<std::size_t>(rng.below(n));
      }
    } else {
      std::iota(sample.begin(), sample.end(), std::size_t{0});
    }
    TreeGrower grower(rows, data.labels, cfg, mtry, rng);
    trees[t] = grower.grow(std::move(sample));
  });
  return RandomForest(d, std::move(trees));
}

}  // namespace finrisk
