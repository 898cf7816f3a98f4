#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "finrisk/econometrics.hpp"
#include "finrisk/errors.hpp"

namespace finrisk::cli {

namespace fs = std::filesystem;

namespace {

fs::path out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw ValidationError("cannot create output directory '" + dir + "': " + ec.message(), {dir});
  }
  return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) {
    throw ValidationError("cannot write '" + path.string() + "'", {path.string()});
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json matrix_rows(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

struct LoadedPair {
  ModelBundle bundle;
  Dataset data;
};

LoadedPair load_model_and_data(ExperimentSpec& spec, const ModelInput& in) {
  if (in.model_path.empty()) {
    throw ValidationError("--model is required");
  }
  LoadedPair p{load_model(in.model_path), {}};
  spec.timesteps = in.timesteps.value_or(p.bundle.steps);
  p.data = load_experiment_data(spec);
  return p;
}

void emit_econ(const EconOptions& opt, const nlohmann::json& j, const std::string& file,
               std::ostream& out) {
  out << j.dump(2) << '\n';
  if (opt.out) {
    write_json(out_dir(*opt.out) / file, j);
  }
}

std::pair<SeriesTable, VarModel> fit_from_file(const EconOptions& opt) {
  if (opt.series.empty()) {
    throw ValidationError("--series is required");
  }
  SeriesTable table = read_series_csv(opt.series);
  VarModel m = fit_var(table.values, opt.order, !opt.no_intercept);
  return {std::move(table), std::move(m)};
}

}  // namespace

int cmd_train(const ExperimentSpec& spec, std::ostream& out) {
  spec.validate();
  const Dataset data = load_experiment_data(spec);
  const fs::path dir = out_dir(spec.out);
  const auto start = std::chrono::steady_clock::now();
  FittedModel fm;
  try {
    fm = fit_model(spec, data, spec.seed);
  } catch (const DivergenceError& e) {
    TrainReport partial;
    partial.epoch_loss = e.losses();
    std::ostringstream s;
    write_loss_stream(s, partial);
    write_text(dir / "train_loss.csv", s.str());
    throw;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_model((dir / "model.json").string(), fm.bundle);
  std::ostringstream losses;
  write_loss_stream(losses, fm.report);
  write_text(dir / "train_loss.csv", losses.str());

  const Vector scores = fm.bundle.score_dataset(data);
  nlohmann::json report{{"schema", "finrisk.train/1"},
                        {"model", spec.model},
                        {"dataset", summary_json(data)},
                        {"epochs_completed", fm.report.epoch_loss.size()},
                        {"adam_steps", fm.report.steps},
                        {"epoch_loss", fm.report.epoch_loss},
                        {"train_metrics", to_json(evaluate(scores, data.labels))},
                        {"spec", spec.to_json()}};
  if (fm.bundle.normalizer && !fm.bundle.normalizer->warnings.empty()) {
    report["warnings"] = fm.bundle.normalizer->warnings;
  }
  write_json(dir / "train_report.json", report);

  out << "trained " << spec.model << " on " << data.size() << " rows";
  if (!fm.report.epoch_loss.empty()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, ", final epoch loss %.6f", fm.report.epoch_loss.back());
    out << buf;
  }
  char tbuf[32];
  std::snprintf(tbuf, sizeof tbuf, "%.2f", secs);
  out << " (" << tbuf << " s)\n";
  out << "wrote " << (dir / "model.json").string() << ", " << (dir / "train_loss.csv").string()
      << ", " << (dir / "train_report.json").string() << '\n';
  return kExitOk;
}

int cmd_evaluate(ExperimentSpec spec, const ModelInput& in, std::ostream& out) {
  LoadedPair p = load_model_and_data(spec, in);
  const EvalReport ev = evaluate(p.bundle.score_dataset(p.data), p.data.labels);
  nlohmann::json j = to_json(ev);
  j["schema"] = "finrisk.eval/1";
  j["model"] = in.model_path;
  j["kind"] = p.bundle.scorer->kind();
  j["dataset"] = summary_json(p.data);
  const fs::path dir = out_dir(spec.out);
  write_json(dir / "eval_report.json", j);
  char buf[160];
  std::snprintf(buf, sizeof buf, "acc %.4f  precision %.4f  recall %.4f  f %.4f  auc %s\n", ev.acc,
                ev.prf.precision, ev.prf.recall, ev.prf.f,
                ev.auc ? std::to_string(*ev.auc).c_str() : "n/a");
  out << buf << "wrote " << (dir / "eval_report.json").string() << '\n';
  return kExitOk;
}

int cmd_curves(ExperimentSpec spec, const ModelInput& in, bool svg, std::ostream& out) {
  LoadedPair p = load_model_and_data(spec, in);
  const Vector scores = p.bundle.score_dataset(p.data);
  const RocResult roc = roc_auc(scores, p.data.labels);
  const CurvePoints pr = pr_curve(scores, p.data.labels);
  const fs::path dir = out_dir(spec.out);
  std::ostringstream r;
  write_curve_csv(r, roc.curve);
  write_text(dir / "roc.csv", r.str());
  std::ostringstream q;
  write_curve_csv(q, pr);
  write_text(dir / "pr.csv", q.str());
  if (svg) {
    write_text(dir / "roc.svg", curve_svg(roc.curve));
    write_text(dir / "pr.svg", curve_svg(pr));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "auc %.6f, %zu roc points, %zu pr points\n", roc.auc,
                roc.curve.points.size(), pr.points.size());
  out << buf;
  return kExitOk;
}

int cmd_sweep(const ExperimentSpec& spec, SweepKind kind, std::ostream& out) {
  spec.validate();
  const Dataset data = load_experiment_data(spec);
  const SweepReport report = run_sweep(spec, data, kind);
  const fs::path dir = out_dir(spec.out);
  const fs::path file =
      dir / (kind == SweepKind::Layers ? "sweep_layers.json" : "sweep_nodes.json");
  write_json(file, to_json(report, spec));
  write_sweep_table(out, report);
  out << "wrote " << file.string() << '\n';
  return kExitOk;
}

int cmd_compare(const ExperimentSpec& spec, const std::vector<std::string>& models,
                const std::vector<std::string>& externals, std::ostream& out) {
  spec.validate();
  std::vector<ExternalModel> ext;
  for (const auto& e : externals) {
    const auto eq = e.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == e.size()) {
      throw ValidationError("--external expects NAME=PATH, got '" + e + "'");
    }
    ext.push_back({e.substr(0, eq), e.substr(eq + 1)});
  }
  const Dataset data = load_experiment_data(spec);
  const CompareReport report = run_compare(spec, data, models, ext);
  const fs::path dir = out_dir(spec.out);
  write_json(dir / "compare.json", to_json(report, spec));
  write_compare_table(out, report);
  out << "wrote " << (dir / "compare.json").string() << '\n';
  return kExitOk;
}

int cmd_gen_data(const GenDataOptions& opt, std::ostream& out) {
  if (opt.out.empty()) {
    throw ValidationError("--out (CSV path) is required");
  }
  if (opt.n < 2 || opt.dims < 1) {
    throw ValidationError("--n must be >= 2 and --dims >= 1");
  }
  Dataset ds;
  if (opt.kind == "tabular") {
    if (opt.timesteps != 1) {
      throw ValidationError("tabular data has exactly one timestep");
    }
    if (!(opt.positive_fraction > 0.0 && opt.positive_fraction < 1.0)) {
      throw ValidationError("--positive-fraction must lie in (0, 1)");
    }
    ds = synth_tabular(opt.n, opt.dims, opt.separation, opt.seed, opt.positive_fraction);
  } else if (opt.kind == "sequence") {
    if (opt.timesteps < 2) {
      throw ValidationError("sequence data needs --timesteps >= 2");
    }
    ds = synth_sequence(opt.n, opt.timesteps, opt.dims, opt.seed);
  } else {
    throw ValidationError("unknown --kind '" + opt.kind + "' (expected tabular or sequence)");
  }
  const fs::path path(opt.out);
  if (path.has_parent_path()) {
    out_dir(path.parent_path().string());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw ValidationError("cannot write '" + opt.out + "'", {opt.out});
  }
  write_csv(f, ds, opt.label_col);
  out << summary_json(ds).dump(2) << '\n';
  return kExitOk;
}

int cmd_econ_var_fit(const EconOptions& opt, std::ostream& out) {
  const auto [table, m] = fit_from_file(opt);
  nlohmann::json j{{"schema", "finrisk.econ.var_fit/1"},
                   {"series", table.names},
                   {"observations", table.values.rows()},
                   {"model", to_json(m)},
                   {"input", {{"file", opt.series}, {"order", opt.order}, {"intercept", !opt.no_intercept}}}};
  emit_econ(opt, j, "var_fit.json", out);
  return kExitOk;
}

int cmd_econ_var_irf(const EconOptions& opt, std::ostream& out) {
  const auto [table, m] = fit_from_file(opt);
  if (opt.shock >= m.dim) {
    throw ValidationError("--shock " + std::to_string(opt.shock) + " out of range for " +
                          std::to_string(m.dim) + " series");
  }
  if (opt.horizon < 1) {
    throw ValidationError("--horizon must be >= 1");
  }
  nlohmann::json j{{"schema", "finrisk.econ.var_irf/1"},
                   {"series", table.names},
                   {"shock", table.names[opt.shock]},
                   {"horizon", opt.horizon},
                   {"responses", matrix_rows(impulse_response(m, opt.shock, opt.horizon))},
                   {"final_max_abs_response", response_decay(m, opt.horizon)},
                   {"model", to_json(m)},
                   {"input", {{"file", opt.series}, {"order", opt.order}, {"intercept", !opt.no_intercept}}}};
  emit_econ(opt, j, "var_irf.json", out);
  return kExitOk;
}

int cmd_econ_beta(const EconOptions& opt, std::ostream& out) {
  if (opt.asset.empty() || opt.market.empty()) {
    throw ValidationError("--asset and --market are required");
  }
  const ReturnSeries asset = read_return_series(opt.asset);
  const ReturnSeries market = read_return_series(opt.market);
  nlohmann::json j{{"schema", "finrisk.econ.beta/1"},
                   {"beta", beta_coefficient(asset, market)},
                   {"observations", asset.size()},
                   {"normalization", "sample (n-1) covariance over sample variance"},
                   {"input", {{"asset", opt.asset}, {"market", opt.market}}}};
  emit_econ(opt, j, "beta.json", out);
  return kExitOk;
}

}  // namespace finrisk::cli
