// Synthetic stand-ins for a labelled risk dataset.

#include <algorithm>
#include <cmath>

#include "finrisk/datakit.hpp"
#include "finrisk/errors.hpp"

namespace finrisk {

namespace {

std::vector<std::string> default_names(std::size_t d) {
  std::vector<std::string> names;
  names.reserve(d);
  for (std::size_t j = 0; j < d; ++j) {
    names.push_back("f" + std::to_string(j));
  }
  return names;
}

}  // namespace

Dataset synth_tabular(std::size_t n, std::size_t d, double separation, std::uint64_t seed,
                      double positive_fraction) {
  if (n < 2 || d < 1) {
    throw DomainError("synth_tabular needs n >= 2 and d >= 1");
  }
  if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0)) {
    throw DomainError("positive fraction must lie in [0, 1]");
  }
  Rng rng(seed);
  Vector dir(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& v : dir) {
    v /= norm;
  }

  const auto n_pos = static_cast<std::size_t>(std::llround(positive_fraction * static_cast<double>(n)));
  Labels labels(n, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(std::min(n_pos, n)), 1);
  rng.shuffle(std::span<int>(labels));

  Dataset ds;
  ds.features = Tensor3(n, 1, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double offset = (labels[i] == 1 ? 0.5 : -0.5) * separation;
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(i, 0, j) = offset * dir[j] + rng.normal();
    }
  }
  ds.labels = std::move(labels);
  ds.feature_names = default_names(d);
  ds.provenance = "synth_tabular(n=" + std::to_string(n) + ",d=" + std::to_string(d) +
                  ",separation=" + std::to_string(separation) + ",seed=" + std::to_string(seed) + ")";
  return ds;
}

Vector sequence_weights(std::size_t steps) {
  if (steps < 2) {
    throw DomainError("sequence weights need T >= 2");
  }
  Vector w(steps);
  const double span = static_cast<double>(steps - 1);
  for (std::size_t t = 0; t < steps; ++t) {
    w[t] = (span - 2.0 * static_cast<double>(t)) / span;
  }
  return w;
}

constexpr double kSequenceGain = 3.0;

Dataset synth_sequence(std::size_t n, std::size_t steps, std::size_t d, std::uint64_t seed) {
  if (steps < 2) {
    throw DomainError("synth_sequence needs T >= 2");
  }
  if (n < 1 || d < 1) {
    throw DomainError("synth_sequence needs n >= 1 and d >= 1");
  }
  const Vector w = sequence_weights(steps);
  Rng rng(seed);
  Dataset ds;
  ds.features = Tensor3(n, steps, d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double score = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      double mean = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double v = rng.normal();
        ds.features(i, t, j) = v;
        mean += v;
      }
      // Standardized step mean through a saturating squash: strictly
      // increasing, so the T = 2 case stays 1{mean_0 > mean_1}.
      const double z = mean / std::sqrt(static_cast<double>(d));
      score += w[t] * std::tanh(kSequenceGain * z);
    }
    ds.labels[i] = score > 0.0 ? 1 : 0;
  }
  ds.feature_names = default_names(d);
  ds.provenance = "synth_sequence(n=" + std::to_string(n) + ",T=" + std::to_string(steps) +
                  ",d=" + std::to_string(d) + ",seed=" + std::to_string(seed) + ")";
  return ds;
}

Dataset shuffle_timesteps(const Dataset& ds, std::uint64_t seed) {
  Dataset out = ds;
  Rng rng(seed);
  const std::size_t steps = ds.steps();
  std::vector<std::size_t> perm(steps);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t t = 0; t < steps; ++t) {
      perm[t] = t;
    }
    rng.shuffle(std::span<std::size_t>(perm));
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t j = 0; j < ds.dims(); ++j) {
        out.features(i, t, j) = ds.features(i, perm[t], j);
      }
    }
  }
  out.provenance = ds.provenance + "+shuffle_timesteps(seed=" + std::to_string(seed) + ")";
  return out;
}

}  // namespace finrisk
