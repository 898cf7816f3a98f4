#pragma once

// Dataset contract, CSV ingestion, normalization, splits and synthetic generators.
//
// CSV contract: UTF-8, one header row, one sample per row. One column holds the
// binary label (0/1). The remaining columns are numeric and, read in header
// order, fill the sample's timesteps × features block timestep-major: with T
// timesteps and F = columns / T, column k maps to (t = k / F, feature = k % F).

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "finrisk/num_core.hpp"
#include "json.hpp"

namespace finrisk {

using Labels = std::vector<int>;

struct Dataset {
  Tensor3 features;
  Labels labels;
  std::vector<std::string> feature_names;
  std::string provenance;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t steps() const noexcept { return features.steps(); }
  std::size_t dims() const noexcept { return features.features(); }

  // Labels in {0,1}, consistent lengths, every feature value finite.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  double positive_fraction() const;
};

Dataset load_csv(const std::string& path, const std::string& label_column, std::size_t timesteps);
Dataset parse_csv(std::istream& in, const std::string& label_column, std::size_t timesteps,
                  const std::string& source = "<stream>");
// Inverse layout of parse_csv; T > 1 column names are "<feature>@t<k>".
void write_csv(std::ostream& out, const Dataset& ds, const std::string& label_column = "label");

// z-score statistics per (timestep, feature), fit on training rows only.
struct Normalizer {
  std::size_t steps = 0;
  std::size_t features = 0;
  Vector mean;    // steps × features
  Vector stddev;  // steps × features; 0 marks a constant cell
  std::vector<std::size_t> kept;  // retained feature indices, ascending
  std::vector<std::string> warnings;

  Dataset apply(const Dataset& ds) const;
  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);
};

// Features constant at every timestep are dropped (with a warning). A feature
// constant only at some timesteps keeps those cells centred but unscaled.
Normalizer fit_normalize(const Dataset& train);
inline Dataset apply(const Normalizer& norm, const Dataset& rows) { return norm.apply(rows); }

// Seeded shuffle, then the first round(n * test_fraction) indices form the test set.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(
    std::size_t n, double test_fraction, std::uint64_t seed);

// Two unit-variance Gaussian clusters at ±separation/2 along a seeded random
// direction; T = 1. Exactly round(n · positive_fraction) samples are positive.
Dataset synth_tabular(std::size_t n, std::size_t d, double separation, std::uint64_t seed,
                      double positive_fraction = 0.5);

// Per-step weights ((T-1) - 2t) / (T-1): distinct, antisymmetric in time, sum zero.
Vector sequence_weights(std::size_t steps);

// i.i.d. standard normal features; label = 1{ Σ_t w_t · tanh(3 z_t) > 0 } where
// z_t = Σ_j x[t][j] / sqrt(d) and w comes from sequence_weights, so the label
// depends on timestep order. For T = 2 this is 1{ mean x[0] > mean x[1] }.
Dataset synth_sequence(std::size_t n, std::size_t steps, std::size_t d, std::uint64_t seed);

// Each sample's timesteps permuted independently (seeded). Labels untouched.
Dataset shuffle_timesteps(const Dataset& ds, std::uint64_t seed);

enum class EconFeatureKind { Beta, VarResidual };

// One value per sample, broadcast across timesteps when appended.
struct EconFeature {
  std::string name;
  EconFeatureKind kind;
  Vector values;
};

// Appends one feature column per entry, named "<name>:beta" or "<name>:var_resid".
Dataset augment_with_econ_features(const Dataset& ds, std::span<const EconFeature> extra);

nlohmann::json summary_json(const Dataset& ds);

}  // namespace finrisk
