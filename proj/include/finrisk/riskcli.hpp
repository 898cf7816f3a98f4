#pragma once

// Experiment layer behind the riskcli tool: resolved run specification,
// architecture sweeps, k-fold model comparison and the command entry point.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "finrisk/baselines.hpp"
#include "finrisk/datakit.hpp"
#include "finrisk/metrics.hpp"
#include "finrisk/trainer.hpp"
#include "json.hpp"

namespace finrisk {

// Exit codes of every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitDivergence = 2;

struct ExperimentSpec {
  std::string data;
  std::string label_col = "label";
  std::size_t timesteps = 1;
  std::string model = "lstm";  // lstm | mlp | logreg | forest
  std::vector<std::size_t> hidden{64, 32, 16};
  std::vector<std::size_t> mlp_hidden{20};
  TrainConfig train;
  ForestConfig forest;
  std::size_t folds = 5;
  bool stratified = false;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out = ".";

  void validate() const;
  nlohmann::json to_json() const;
};

// Loads the CSV named by spec.data with the spec's label column and timesteps.
Dataset load_experiment_data(const ExperimentSpec& spec);

// Trains spec.model on `train` (normalizer fitted on `train`) with the given seed.
// The optional hook receives the scorer after every epoch of gradient-trained models.
struct FittedModel {
  ModelBundle bundle;
  TrainReport report;  // empty for the forest
};
using ScorerHook = std::function<void(std::size_t epoch, const Scorer& scorer)>;
FittedModel fit_model(const ExperimentSpec& spec, const Dataset& train, std::uint64_t seed,
                      const ScorerHook& hook = {});

enum class SweepKind { Layers, Nodes };

struct SweepRow {
  std::string label;
  std::vector<std::size_t> hidden;
  std::uint64_t seed = 0;
  std::optional<std::string> error;  // set when the row failed; metrics then absent
  std::optional<double> train_loss;
  std::optional<double> train_auc;
  std::optional<double> test_loss;
  std::optional<double> test_auc;
  std::vector<double> train_loss_curve;
  std::vector<double> test_loss_curve;
};

struct SweepReport {
  SweepKind kind;
  std::vector<SweepRow> rows;
  std::optional<std::size_t> best;  // argmax test AUC, first on ties
};

// Hidden-layer tuples swept by each kind, in row order.
std::vector<std::vector<std::size_t>> sweep_configurations(SweepKind kind);
std::string sweep_row_label(SweepKind kind, const std::vector<std::size_t>& hidden);

// Row r trains with seed spec.seed + r on a fixed seeded train/test split.
SweepReport run_sweep(const ExperimentSpec& spec, const Dataset& data, SweepKind kind);
nlohmann::json to_json(const SweepReport& report, const ExperimentSpec& spec);
void write_sweep_table(std::ostream& out, const SweepReport& report);

struct CompareRow {
  std::string model;
  bool external = false;  // scored on the full dataset, no cross-validation
  std::optional<std::string> error;
  MetricSummary mean;
  MetricSummary stddev;
  std::size_t folds = 0;
  std::optional<double> auc;  // absent when no fold had a defined AUC
};

struct CompareReport {
  std::vector<CompareRow> rows;
};

struct ExternalModel {
  std::string name;
  std::string path;
};

CompareReport run_compare(const ExperimentSpec& spec, const Dataset& data,
                          const std::vector<std::string>& models,
                          const std::vector<ExternalModel>& externals);
nlohmann::json to_json(const CompareReport& report, const ExperimentSpec& spec);
void write_compare_table(std::ostream& out, const CompareReport& report);

// Plain SVG polyline of a curve in the unit square.
std::string curve_svg(const CurvePoints& curve, double size = 400.0);

// Parses args (without the program name) and runs one command.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace finrisk
