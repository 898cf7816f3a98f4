#include <cmath>
#include <numeric>
#include <string>

#include "finrisk/errors.hpp"
#include "finrisk/trainer.hpp"

namespace finrisk {

namespace {

void check_k(std::size_t n, std::size_t k) {
  if (k < 2) {
    throw DomainError("k-fold needs k >= 2");
  }
  if (k > n) {
    throw DomainError("k-fold needs k <= n (k = " + std::to_string(k) + ", n = " +
                      std::to_string(n) + ")");
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  check_k(n, k);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                    idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return folds;
}

std::vector<std::vector<std::size_t>> make_stratified_folds(std::span<const int> labels,
                                                            std::size_t k, std::uint64_t seed) {
  check_k(labels.size(), k);
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == 1 ? pos : neg).push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(pos));
  rng.shuffle(std::span<std::size_t>(neg));
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t slot = 0;
  for (const auto* group : {&pos, &neg}) {
    for (const std::size_t i : *group) {
      folds[slot % k].push_back(i);
      ++slot;
    }
  }
  return folds;
}

CvResult kfold_cv(const Dataset& data, std::size_t k, std::uint64_t seed, const FoldRunner& run,
                  bool stratified) {
  const auto folds = stratified ? make_stratified_folds(data.labels, k, seed)
                                : make_folds(data.size(), k, seed);
  CvResult result;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) {
        train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
      }
    }
    result.folds.push_back(run(data.subset(train_idx), data.subset(folds[f]), f));
  }

  const auto stats = [](const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    sd = 0.0;
    if (xs.empty()) {
      return;
    }
    mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() < 2) {
      return;
    }
    double ss = 0.0;
    for (const double x : xs) {
      ss += (x - mean) * (x - mean);
    }
    sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  };
  std::vector<double> acc, prec, rec, f1, auc;
  for (const auto& r : result.folds) {
    acc.push_back(r.acc);
    prec.push_back(r.prf.precision);
    rec.push_back(r.prf.recall);
    f1.push_back(r.prf.f);
    if (r.auc) {
      auc.push_back(*r.auc);
    }
  }
  stats(acc, result.mean.acc, result.stddev.acc);
  stats(prec, result.mean.precision, result.stddev.precision);
  stats(rec, result.mean.recall, result.stddev.recall);
  stats(f1, result.mean.f, result.stddev.f);
  stats(auc, result.mean.auc, result.stddev.auc);
  result.auc_folds = auc.size();
  return result;
}

}  // namespace finrisk
