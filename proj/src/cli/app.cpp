#include <algorithm>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"
#include "finrisk/econometrics.hpp"
#include "finrisk/errors.hpp"

namespace finrisk {

namespace {

constexpr const char* kSweepNote =
    "Reproduces the sweep procedure and the Loss/AUC table layout. Values are computed on the "
    "supplied dataset and are not expected to match any published numbers.";

// Flags shared by every dataset-driven command; `loss` is resolved after parsing.
void add_data_flags(CLI::App* sub, ExperimentSpec& spec) {
  sub->add_option("--data", spec.data, "dataset CSV (header row, one label column)");
  sub->add_option("--label-col", spec.label_col, "label column name")->capture_default_str();
  sub->add_option("--timesteps", spec.timesteps, "timesteps T; feature columns are split T-major")
      ->capture_default_str();
  sub->add_option("--seed", spec.seed, "base seed for splits, initialization and shuffling")
      ->capture_default_str();
  sub->add_option("--out", spec.out, "output directory")->capture_default_str();
  sub->add_option("--config", "key=value file; command-line flags take precedence");
}

void add_train_flags(CLI::App* sub, ExperimentSpec& spec, std::string& loss_name, bool with_model) {
  if (with_model) {
    sub->add_option("--model", spec.model, "lstm | mlp | logreg | forest")->capture_default_str();
    sub->add_option("--hidden", spec.hidden, "LSTM hidden widths, comma separated")
        ->delimiter(',')
        ->capture_default_str();
  }
  sub->add_option("--mlp-hidden", spec.mlp_hidden, "MLP hidden widths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--loss", loss_name, "log_loss | mse")->capture_default_str();
  sub->add_option("--lr", spec.train.adam.learning_rate, "Adam learning rate")->capture_default_str();
  sub->add_option("--beta1", spec.train.adam.beta1, "Adam beta1")->capture_default_str();
  sub->add_option("--beta2", spec.train.adam.beta2, "Adam beta2")->capture_default_str();
  sub->add_option("--epsilon", spec.train.adam.epsilon, "Adam epsilon")->capture_default_str();
  sub->add_option("--batch-size", spec.train.batch_size, "mini-batch size")->capture_default_str();
  sub->add_option("--epochs", spec.train.epochs, "training epochs")->capture_default_str();
  sub->add_option("--trees", spec.forest.trees, "forest tree count")->capture_default_str();
  sub->add_option("--max-depth", spec.forest.max_depth, "forest tree depth")->capture_default_str();
  sub->add_option("--min-leaf", spec.forest.min_samples_leaf, "forest min samples per leaf")
      ->capture_default_str();
  sub->add_option("--features-per-split", spec.forest.features_per_split,
                  "forest candidate features per split (0 = sqrt(d))")
      ->capture_default_str();
  sub->add_flag("!--no-bootstrap", spec.forest.bootstrap, "grow forest trees on the full sample");
  sub->add_option("--jobs", spec.jobs, "worker threads (results do not depend on it)")
      ->capture_default_str();
}

// Fills options the command line left unset from a key=value file. Keys are
// long option names without the leading dashes.
void apply_config(CLI::App* sub) {
  const CLI::Option* cfg = sub->get_option("--config");
  if (cfg->count() == 0) {
    return;
  }
  const std::string path = cfg->as<std::string>();
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw ValidationError("cannot read config file '" + path + "': " + e.what(), {path});
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") {
      continue;  // section markers
    }
    if (!item.parents.empty() && item.parents.front() != sub->get_name()) {
      continue;
    }
    const std::string key = item.name;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw ValidationError("config file '" + path + "': unknown key '" + key + "'", {key});
    }
    if (opt->count() > 0) {
      continue;
    }
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ValidationError("config file '" + path + "': bad value for '" + key + "': " + e.what(),
                            {key});
    }
  }
}

CLI::App* parsed_leaf(CLI::App& app) {
  CLI::App* cur = &app;
  for (;;) {
    const auto subs = cur->get_subcommands();
    if (subs.empty()) {
      return cur;
    }
    cur = subs.front();
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Financial-risk sequence classification experiments", "riskcli"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  std::map<std::string, ExperimentSpec> specs;
  std::map<std::string, std::string> loss_names;
  auto make = [&](const std::string& name, const std::string& desc, std::size_t epochs) {
    CLI::App* sub = app.add_subcommand(name, desc);
    ExperimentSpec& spec = specs[name];
    spec.train.epochs = epochs;
    loss_names[name] = "log_loss";
    add_data_flags(sub, spec);
    return sub;
  };

  CLI::App* train = make("train", "train one model and save it with its loss stream", 1000);
  add_train_flags(train, specs["train"], loss_names["train"], true);

  cli::ModelInput eval_in;
  CLI::App* evaluate = make("evaluate", "score a dataset with a saved model (threshold 0.5)", 1);
  evaluate->add_option("--model", eval_in.model_path, "model file written by train")->required();

  cli::ModelInput curve_in;
  bool svg = false;
  CLI::App* curves = make("curves", "write ROC and P-R point files for a saved model", 1);
  curves->add_option("--model", curve_in.model_path, "model file written by train")->required();
  curves->add_flag("--svg", svg, "also write polyline SVG renderings");

  CLI::App* layers = make("sweep-layers", std::string("LSTM with 1-4 hidden layers of 20 units. ") + kSweepNote, 100);
  add_train_flags(layers, specs["sweep-layers"], loss_names["sweep-layers"], false);
  layers->add_option("--test-fraction", specs["sweep-layers"].test_fraction, "held-out share")
      ->capture_default_str();

  CLI::App* nodes = make("sweep-nodes",
                         std::string("LSTM with node tuples (20,20,20), (60,60,60), (100,100,100), "
                                     "(64,32,16). ") + kSweepNote, 100);
  add_train_flags(nodes, specs["sweep-nodes"], loss_names["sweep-nodes"], false);
  nodes->add_option("--test-fraction", specs["sweep-nodes"].test_fraction, "held-out share")
      ->capture_default_str();

  std::vector<std::string> models{"lstm", "mlp", "logreg", "forest"};
  std::vector<std::string> externals;
  CLI::App* compare = make("compare", "k-fold comparison table (Acc, Precision, Recall, F, AUC)", 1000);
  add_train_flags(compare, specs["compare"], loss_names["compare"], false);
  compare->add_option("--hidden", specs["compare"].hidden, "LSTM hidden widths")
      ->delimiter(',')
      ->capture_default_str();
  compare->add_option("--models", models, "native models to cross-validate")
      ->delimiter(',')
      ->capture_default_str();
  compare->add_option("--external", externals,
                      "NAME=PATH score file (row_id,score); evaluated on the full dataset");
  compare->add_option("--folds", specs["compare"].folds, "number of folds")->capture_default_str();
  compare->add_flag("--stratified", specs["compare"].stratified, "class-stratified folds");

  cli::GenDataOptions gen;
  CLI::App* gen_data = app.add_subcommand("gen-data", "write a synthetic dataset CSV");
  gen_data->add_option("--kind", gen.kind, "tabular | sequence")->capture_default_str();
  gen_data->add_option("--n", gen.n, "rows")->capture_default_str();
  gen_data->add_option("--dims", gen.dims, "features per timestep")->capture_default_str();
  gen_data->add_option("--timesteps", gen.timesteps, "timesteps (sequence needs >= 2)")
      ->capture_default_str();
  gen_data->add_option("--separation", gen.separation, "tabular cluster separation")
      ->capture_default_str();
  gen_data->add_option("--positive-fraction", gen.positive_fraction, "tabular positive share")
      ->capture_default_str();
  gen_data->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
  gen_data->add_option("--label-col", gen.label_col, "label column name")->capture_default_str();
  gen_data->add_option("--out", gen.out, "CSV file to write")->required();
  gen_data->add_option("--config", "key=value file; command-line flags take precedence");

  cli::EconOptions econ_opt;
  std::string econ_out;
  CLI::App* econ = app.add_subcommand("econ", "VAR estimation, impulse responses and beta");
  econ->require_subcommand(1);
  auto econ_common = [&](CLI::App* s) {
    s->add_option("--out", econ_out, "also write the JSON report into this directory");
    s->add_option("--config", "key=value file; command-line flags take precedence");
  };
  CLI::App* var_fit = econ->add_subcommand("var-fit", "least-squares VAR fit");
  CLI::App* var_irf = econ->add_subcommand("var-irf", "unit-shock impulse responses of a fitted VAR");
  for (CLI::App* s : {var_fit, var_irf}) {
    s->add_option("--series", econ_opt.series, "CSV: key column then one column per series")
        ->required();
    s->add_option("--order", econ_opt.order, "lag order")->capture_default_str();
    s->add_flag("--no-intercept", econ_opt.no_intercept, "fit without an intercept");
    econ_common(s);
  }
  var_irf->add_option("--shock", econ_opt.shock, "index of the shocked series")->capture_default_str();
  var_irf->add_option("--horizon", econ_opt.horizon, "response rows")->capture_default_str();
  CLI::App* beta = econ->add_subcommand("beta", "Cov(asset, market) / Var(market)");
  beta->add_option("--asset", econ_opt.asset, "CSV: key,return")->required();
  beta->add_option("--market", econ_opt.market, "CSV: key,return")->required();
  econ_common(beta);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  apply_config(parsed_leaf(app));
  for (auto& [name, spec] : specs) {
    spec.train.loss = loss_kind_from_string(loss_names[name]);
  }
  if (!econ_out.empty()) {
    econ_opt.out = econ_out;
  }

  if (train->parsed()) {
    return cli::cmd_train(specs["train"], out);
  }
  if (evaluate->parsed()) {
    if (evaluate->count("--timesteps")) {
      eval_in.timesteps = specs["evaluate"].timesteps;
    }
    return cli::cmd_evaluate(specs["evaluate"], eval_in, out);
  }
  if (curves->parsed()) {
    if (curves->count("--timesteps")) {
      curve_in.timesteps = specs["curves"].timesteps;
    }
    return cli::cmd_curves(specs["curves"], curve_in, svg, out);
  }
  if (layers->parsed()) {
    return cli::cmd_sweep(specs["sweep-layers"], SweepKind::Layers, out);
  }
  if (nodes->parsed()) {
    return cli::cmd_sweep(specs["sweep-nodes"], SweepKind::Nodes, out);
  }
  if (compare->parsed()) {
    return cli::cmd_compare(specs["compare"], models, externals, out);
  }
  if (gen_data->parsed()) {
    return cli::cmd_gen_data(gen, out);
  }
  if (var_fit->parsed()) {
    return cli::cmd_econ_var_fit(econ_opt, out);
  }
  if (var_irf->parsed()) {
    return cli::cmd_econ_var_irf(econ_opt, out);
  }
  if (beta->parsed()) {
    return cli::cmd_econ_beta(econ_opt, out);
  }
  err << "no command given\n";
  return kExitValidation;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << " (" << e.losses().size() << " epochs completed)\n";
    return kExitDivergence;
  } catch (const EstimationError& e) {
    err << "error: " << e.what() << " [column " << e.column() << "]\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace finrisk
