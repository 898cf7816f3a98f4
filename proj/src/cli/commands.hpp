#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "finrisk/riskcli.hpp"

namespace finrisk::cli {

struct ModelInput {
  std::string model_path;
  std::optional<std::size_t> timesteps;  // defaults to the model's own
};

struct GenDataOptions {
  std::string kind = "tabular";  // tabular | sequence
  std::size_t n = 1000;
  std::size_t dims = 45;
  std::size_t timesteps = 1;
  double separation = 2.0;
  double positive_fraction = 0.5;
  std::uint64_t seed = 0;
  std::string out;
  std::string label_col = "label";
};

struct EconOptions {
  std::string series;
  std::size_t order = 1;
  bool no_intercept = false;
  std::size_t shock = 0;
  std::size_t horizon = 10;
  std::string asset;
  std::string market;
  std::optional<std::string> out;
};

int cmd_train(const ExperimentSpec& spec, std::ostream& out);
int cmd_evaluate(ExperimentSpec spec, const ModelInput& in, std::ostream& out);
int cmd_curves(ExperimentSpec spec, const ModelInput& in, bool svg, std::ostream& out);
int cmd_sweep(const ExperimentSpec& spec, SweepKind kind, std::ostream& out);
int cmd_compare(const ExperimentSpec& spec, const std::vector<std::string>& models,
                const std::vector<std::string>& externals, std::ostream& out);
int cmd_gen_data(const GenDataOptions& opt, std::ostream& out);
int cmd_econ_var_fit(const EconOptions& opt, std::ostream& out);
int cmd_econ_var_irf(const EconOptions& opt, std::ostream& out);
int cmd_econ_beta(const EconOptions& opt, std::ostream& out);

}  // namespace finrisk::cli
