#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "finrisk/errors.hpp"
#include "finrisk/riskcli.hpp"

namespace finrisk {

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string fixed4(const std::optional<double>& v) {
  if (!v) {
    return "n/a";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

// Pads to a display width counted in UTF-8 code points.
std::string pad(std::string s, std::size_t width) {
  const auto shown = static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; }));
  if (shown < width) {
    s.append(width - shown, ' ');
  }
  return s;
}

nlohmann::json summary_json(const MetricSummary& m, bool with_auc) {
  return {{"Acc", m.acc},
          {"Precision", m.precision},
          {"Recall", m.recall},
          {"F", m.f},
          {"AUC", with_auc ? nlohmann::json(m.auc) : nlohmann::json(nullptr)}};
}

const std::vector<std::string> kCompareColumns{"Acc", "Precision", "Recall", "F", "AUC"};

}  // namespace

void ExperimentSpec::validate() const {
  if (timesteps < 1) {
    throw ValidationError("--timesteps must be >= 1");
  }
  if (model != "lstm" && model != "mlp" && model != "logreg" && model != "forest") {
    throw ValidationError("unknown model '" + model + "' (expected lstm, mlp, logreg or forest)");
  }
  if (hidden.empty() || std::find(hidden.begin(), hidden.end(), 0U) != hidden.end()) {
    throw ValidationError("hidden widths must be a non-empty list of positive counts");
  }
  if (mlp_hidden.empty() || std::find(mlp_hidden.begin(), mlp_hidden.end(), 0U) != mlp_hidden.end()) {
    throw ValidationError("MLP hidden widths must be a non-empty list of positive counts");
  }
  if (folds < 2) {
    throw ValidationError("--folds must be >= 2");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("--test-fraction must lie in (0, 1)");
  }
  try {
    train.validate();
    forest.validate();
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  }
}

nlohmann::json ExperimentSpec::to_json() const {
  // Output location and worker count do not affect results and are left out,
  // so identical runs written to different directories compare equal.
  return {{"data", data},
          {"label_col", label_col},
          {"timesteps", timesteps},
          {"model", model},
          {"hidden", hidden},
          {"mlp_hidden", mlp_hidden},
          {"loss", to_string(train.loss)},
          {"learning_rate", train.adam.learning_rate},
          {"beta1", train.adam.beta1},
          {"beta2", train.adam.beta2},
          {"epsilon", train.adam.epsilon},
          {"batch_size", train.batch_size},
          {"epochs", train.epochs},
          {"forest",
           {{"trees", forest.trees},
            {"max_depth", forest.max_depth},
            {"min_samples_leaf", forest.min_samples_leaf},
            {"features_per_split", forest.features_per_split},
            {"bootstrap", forest.bootstrap}}},
          {"folds", folds},
          {"stratified", stratified},
          {"test_fraction", test_fraction},
          {"threshold", 0.5},
          {"seed", seed}};
}

Dataset load_experiment_data(const ExperimentSpec& spec) {
  if (spec.data.empty()) {
    throw ValidationError("--data is required");
  }
  if (!std::filesystem::exists(spec.data)) {
    throw ValidationError("dataset not found: " + spec.data, {spec.data});
  }
  return load_csv(spec.data, spec.label_col, spec.timesteps);
}

FittedModel fit_model(const ExperimentSpec& spec, const Dataset& train_rows, std::uint64_t seed,
                      const ScorerHook& hook) {
  FittedModel fm;
  Normalizer norm = fit_normalize(train_rows);
  const Dataset tr = norm.apply(train_rows);
  TrainConfig tcfg = spec.train;
  tcfg.seed = seed;

  auto run = [&](auto model) {
    auto* raw = model.get();
    EpochHook on_epoch;
    if (hook) {
      on_epoch = [&hook, raw](std::size_t e) { hook(e, *raw); };
    }
    fm.report = train(*raw, tr, tcfg, on_epoch);
    fm.bundle.scorer = std::move(model);
  };

  if (spec.model == "lstm") {
    NetworkConfig cfg;
    cfg.input_dim = tr.dims();
    cfg.hidden_dims = spec.hidden;
    cfg.seed = seed;
    run(std::make_unique<LstmScorer>(LstmNetwork(cfg)));
  } else if (spec.model == "mlp") {
    MlpConfig cfg;
    cfg.hidden = spec.mlp_hidden;
    cfg.seed = seed;
    run(std::make_unique<Mlp>(tr.steps() * tr.dims(), cfg));
  } else if (spec.model == "logreg") {
    run(std::make_unique<LogisticRegression>(tr.steps() * tr.dims()));
  } else if (spec.model == "forest") {
    ForestConfig cfg = spec.forest;
    cfg.seed = seed;
    cfg.jobs = spec.jobs;
    fm.bundle.scorer = std::make_unique<RandomForest>(train_forest(tr, cfg));
  } else {
    throw ValidationError("unknown model '" + spec.model + "'");
  }
  fm.bundle.steps = train_rows.steps();
  fm.bundle.features = train_rows.dims();
  fm.bundle.feature_names = train_rows.feature_names;
  fm.bundle.normalizer = std::move(norm);
  return fm;
}

std::vector<std::vector<std::size_t>> sweep_configurations(SweepKind kind) {
  if (kind == SweepKind::Layers) {
    return {{20}, {20, 20}, {20, 20, 20}, {20, 20, 20, 20}};
  }
  return {{20, 20, 20}, {60, 60, 60}, {100, 100, 100}, {64, 32, 16}};
}

std::string sweep_row_label(SweepKind kind, const std::vector<std::size_t>& hidden) {
  if (kind == SweepKind::Layers) {
    return std::to_string(hidden.size());
  }
  std::string s = "(";
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    s += (i ? "," : "") + std::to_string(hidden[i]);
  }
  return s + ")";
}

SweepReport run_sweep(const ExperimentSpec& spec, const Dataset& data, SweepKind kind) {
  spec.validate();
  const auto [train_idx, test_idx] = train_test_split(data.size(), spec.test_fraction, spec.seed);
  const Dataset train_rows = data.subset(train_idx);
  const Dataset test_rows = data.subset(test_idx);
  const Dataset test_norm = fit_normalize(train_rows).apply(test_rows);

  SweepReport report{kind, {}, std::nullopt};
  const auto configs = sweep_configurations(kind);
  report.rows.resize(configs.size());
  parallel_for(configs.size(), spec.jobs, [&](std::size_t r) {
    SweepRow& row = report.rows[r];
    row.hidden = configs[r];
    row.label = sweep_row_label(kind, row.hidden);
    row.seed = spec.seed + r;
    ExperimentSpec rs = spec;
    rs.model = "lstm";
    rs.hidden = row.hidden;
    try {
      auto hook = [&](std::size_t, const Scorer& s) {
        const Vector p = s.score(test_norm.features);
        row.test_loss_curve.push_back(loss(p, test_rows.labels, spec.train.loss));
      };
      FittedModel fm = fit_model(rs, train_rows, row.seed, hook);
      row.train_loss_curve = fm.report.epoch_loss;
      const Vector ptr = fm.bundle.score_dataset(train_rows);
      const Vector pte = fm.bundle.score_dataset(test_rows);
      row.train_loss = loss(ptr, train_rows.labels, spec.train.loss);
      row.test_loss = loss(pte, test_rows.labels, spec.train.loss);
      row.train_auc = evaluate(ptr, train_rows.labels).auc;
      row.test_auc = evaluate(pte, test_rows.labels).auc;
    } catch (const DivergenceError& e) {
      row.error = e.what();
      row.train_loss_curve = e.losses();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const auto& auc = report.rows[r].test_auc;
    if (auc && (!report.best || *auc > *report.rows[*report.best].test_auc)) {
      report.best = r;
    }
  }
  return report;
}

nlohmann::json to_json(const SweepReport& report, const ExperimentSpec& spec) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"config", r.label},
                    {"hidden", r.hidden},
                    {"seed", r.seed},
                    {"status", r.error ? "failed" : "ok"},
                    {"error", r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr)},
                    {"train_loss", opt(r.train_loss)},
                    {"train_auc", opt(r.train_auc)},
                    {"test_loss", opt(r.test_loss)},
                    {"test_auc", opt(r.test_auc)},
                    {"train_loss_curve", r.train_loss_curve},
                    {"test_loss_curve", r.test_loss_curve}});
  }
  const bool layers = report.kind == SweepKind::Layers;
  return {{"schema", "finrisk.sweep/1"},
          {"sweep", layers ? "layers" : "nodes"},
          {"columns", {layers ? "layers" : "nodes", "train_loss", "train_auc", "test_loss", "test_auc"}},
          {"rows", std::move(rows)},
          {"best_by_test_auc",
           report.best ? nlohmann::json(report.rows[*report.best].label) : nlohmann::json(nullptr)},
          {"note", "values are computed on the supplied dataset; only the procedure and table "
                   "layout are fixed"},
          {"spec", spec.to_json()}};
}

void write_sweep_table(std::ostream& out, const SweepReport& report) {
  const bool layers = report.kind == SweepKind::Layers;
  const std::size_t w0 = 16;
  out << pad(layers ? "Layers" : "Nodes", w0) << pad("Training set", 20) << "Test set\n";
  out << pad("", w0) << pad("LOSS", 10) << pad("AUC", 10) << pad("LOSS", 10) << "AUC\n";
  for (const auto& r : report.rows) {
    out << pad(r.label, w0);
    if (r.error) {
      out << "FAILED: " << *r.error << '\n';
      continue;
    }
    out << pad(fixed4(r.train_loss), 10) << pad(fixed4(r.train_auc), 10)
        << pad(fixed4(r.test_loss), 10) << fixed4(r.test_auc) << '\n';
  }
  out << "best by test AUC: " << (report.best ? report.rows[*report.best].label : "n/a") << '\n';
}

CompareReport run_compare(const ExperimentSpec& spec, const Dataset& data,
                          const std::vector<std::string>& models,
                          const std::vector<ExternalModel>& externals) {
  spec.validate();
  if (models.empty() && externals.empty()) {
    throw ValidationError("compare needs at least one model");
  }
  CompareReport report;
  for (const auto& m : models) {
    ExperimentSpec ms = spec;
    ms.model = m;
    ms.validate();
    CompareRow row;
    row.model = m;
    try {
      const CvResult cv = kfold_cv(
          data, spec.folds, spec.seed,
          [&](const Dataset& tr, const Dataset& te, std::size_t fold) {
            FittedModel fm = fit_model(ms, tr, spec.seed + fold);
            return evaluate(fm.bundle.score_dataset(te), te.labels);
          },
          spec.stratified);
      row.mean = cv.mean;
      row.stddev = cv.stddev;
      row.folds = cv.folds.size();
      if (cv.auc_folds > 0) {
        row.auc = cv.mean.auc;
      }
    } catch (const DivergenceError&) {
      throw;
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  for (const auto& ext : externals) {
    const ExternalScores s = load_external_scores(ext.path, data.size(), ext.name);
    const EvalReport ev = evaluate(s.scores, data.labels);
    CompareRow row;
    row.model = ext.name;
    row.external = true;
    row.folds = 1;
    row.mean = {ev.acc, ev.prf.precision, ev.prf.recall, ev.prf.f, ev.auc.value_or(0.0)};
    row.auc = ev.auc;
    report.rows.push_back(std::move(row));
  }
  return report;
}

nlohmann::json to_json(const CompareReport& report, const ExperimentSpec& spec) {
  nlohmann::json rows = nlohmann::json::array();
  bool any_external = false;
  for (const auto& r : report.rows) {
    any_external = any_external || r.external;
    nlohmann::json j{{"model", r.model},
                     {"evaluation", r.external ? "full_dataset" : "kfold"},
                     {"status", r.error ? "failed" : "ok"},
                     {"error", r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr)},
                     {"folds", r.folds}};
    if (!r.error) {
      j["mean"] = summary_json(r.mean, r.auc.has_value());
      j["std"] = r.external ? nlohmann::json(nullptr) : summary_json(r.stddev, r.auc.has_value());
    }
    if (r.external) {
      j["footnote"] = 1;
    }
    rows.push_back(std::move(j));
  }
  nlohmann::json j{{"schema", "finrisk.compare/1"},
                   {"columns", kCompareColumns},
                   {"rows", std::move(rows)},
                   {"spec", spec.to_json()}};
  j["footnotes"] = nlohmann::json::array();
  if (any_external) {
    j["footnotes"].push_back(
        "[1] external scores evaluated once on the full dataset; no cross-validation possible");
  }
  return j;
}

void write_compare_table(std::ostream& out, const CompareReport& report) {
  out << pad("Model", 12);
  for (const auto& c : kCompareColumns) {
    out << pad(c, 20);
  }
  out << '\n';
  bool any_external = false;
  for (const auto& r : report.rows) {
    out << pad(r.model + (r.external ? " [1]" : ""), 12);
    any_external = any_external || r.external;
    if (r.error) {
      out << "FAILED: " << *r.error << '\n';
      continue;
    }
    const double means[] = {r.mean.acc, r.mean.precision, r.mean.recall, r.mean.f, r.mean.auc};
    const double sds[] = {r.stddev.acc, r.stddev.precision, r.stddev.recall, r.stddev.f,
                          r.stddev.auc};
    for (std::size_t c = 0; c < 5; ++c) {
      std::string cell;
      if (c == 4 && !r.auc) {
        cell = "n/a";
      } else {
        cell = fixed4(means[c]);
        if (!r.external) {
          cell += " ± " + fixed4(sds[c]);
        }
      }
      out << pad(cell, 20);
    }
    out << '\n';
  }
  if (any_external) {
    out << "[1] external scores evaluated once on the full dataset; no cross-validation possible\n";
  }
}

std::string curve_svg(const CurvePoints& curve, double size) {
  std::ostringstream s;
  const bool roc = curve.kind == CurveKind::Roc;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
    << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  s << "<title>" << (roc ? "ROC (x=fpr, y=tpr)" : "PR (x=recall, y=precision)") << "</title>\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << size << "\" height=\"" << size
    << "\" fill=\"none\" stroke=\"#888\"/>\n";
  s << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\" points=\"";
  char buf[64];
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    // y axis flipped: SVG origin is top-left.
    std::snprintf(buf, sizeof buf, "%s%.6f,%.6f", i ? " " : "", curve.points[i].x * size,
                  (1.0 - curve.points[i].y) * size);
    s << buf;
  }
  s << "\"/>\n</svg>\n";
  return s.str();
}

}  // namespace finrisk
