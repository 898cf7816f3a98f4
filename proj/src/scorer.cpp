#include <fstream>
#include <sstream>
#include <string>

#include "finrisk/baselines.hpp"
#include "finrisk/csv.hpp"
#include "finrisk/errors.hpp"

namespace finrisk {

namespace {

constexpr const char* kModelSchema = "finrisk.model/1";

std::unique_ptr<Scorer> scorer_from_json(const std::string& kind, const nlohmann::json& params) {
  if (kind == "lstm") {
    return std::make_unique<LstmScorer>(lstm_from_json(params));
  }
  if (kind == "mlp") {
    return std::make_unique<Mlp>(Mlp::from_json(params));
  }
  if (kind == "logreg") {
    return std::make_unique<LogisticRegression>(LogisticRegression::from_json(params));
  }
  if (kind == "forest") {
    return std::make_unique<RandomForest>(RandomForest::from_json(params));
  }
  throw ValidationError("unknown model kind '" + kind + "'");
}

}  // namespace

double LstmScorer::loss_and_gradient(const Tensor3& batch, std::span<const int> labels,
                                     LossKind kind, std::vector<Vector>& grads) {
  LstmTrainable adapter(net_);
  return adapter.loss_and_gradient(batch, labels, kind, grads);
}

ExternalScores parse_external_scores(std::istream& in, std::size_t dataset_size,
                                     const std::string& model) {
  csv::Table table;
  try {
    table = csv::read(in);
  } catch (const ParseError& e) {
    throw ValidationError(model + ": " + e.what(), {e.what()});
  }
  if (table.header.size() != 2 || table.header[0] != "row_id" || table.header[1] != "score") {
    throw ValidationError(model + ": external score file must have header 'row_id,score'",
                          {"line 1: bad header"});
  }
  ExternalScores out{model, Vector(dataset_size, 0.0)};
  std::vector<std::size_t> seen_line(dataset_size, 0);
  std::vector<std::string> offenders;
  for (const auto& row : table.rows) {
    const std::string where = "line " + std::to_string(row.line) + ": ";
    const std::string& id_cell = row.cells[0];
    std::size_t id = 0;
    bool id_ok = !id_cell.empty();
    for (const char ch : id_cell) {
      if (ch < '0' || ch > '9') {
        id_ok = false;
        break;
      }
    }
    if (id_ok) {
      try {
        id = std::stoull(id_cell);
      } catch (const std::exception&) {
        id_ok = false;
      }
    }
    if (!id_ok) {
      offenders.push_back(where + "row_id '" + id_cell + "' is not a non-negative integer");
      continue;
    }
    if (id >= dataset_size) {
      offenders.push_back(where + "row_id " + id_cell + " outside dataset of " +
                          std::to_string(dataset_size) + " rows");
      continue;
    }
    double score = 0.0;
    try {
      score = csv::parse_double(row.cells[1], row.line, "score");
    } catch (const ParseError& e) {
      offenders.push_back(e.what());
      continue;
    }
    if (!(score >= 0.0 && score <= 1.0)) {
      offenders.push_back(where + "score " + row.cells[1] + " outside [0,1]");
      continue;
    }
    if (seen_line[id] != 0) {
      offenders.push_back(where + "duplicate row_id " + id_cell + " (first on line " +
                          std::to_string(seen_line[id]) + ")");
      continue;
    }
    seen_line[id] = row.line;
    out.scores[id] = score;
  }
  std::size_t missing = 0;
  for (std::size_t i = 0; i < dataset_size; ++i) {
    if (seen_line[i] == 0) {
      ++missing;
      if (missing <= 20) {
        offenders.push_back("missing row_id " + std::to_string(i));
      }
    }
  }
  if (missing > 20) {
    offenders.push_back("... " + std::to_string(missing - 20) + " more missing row_ids");
  }
  if (!offenders.empty()) {
    std::string msg = model + ": invalid external scores";
    for (const auto& o : offenders) {
      msg += "\n  " + o;
    }
    throw ValidationError(msg, std::move(offenders));
  }
  return out;
}

ExternalScores load_external_scores(const std::string& path, std::size_t dataset_size,
                                    const std::string& model) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError(model + ": cannot open score file '" + path + "'", {path});
  }
  return parse_external_scores(in, dataset_size, model);
}

Vector ModelBundle::score_dataset(const Dataset& ds) const {
  if (!scorer) {
    throw UsageError("model bundle has no scorer");
  }
  if (ds.steps() != steps || ds.dims() != features) {
    throw ShapeError("dataset shape (T=" + std::to_string(ds.steps()) + ", d=" +
                     std::to_string(ds.dims()) + ") does not match model input (T=" +
                     std::to_string(steps) + ", d=" + std::to_string(features) + ")");
  }
  if (normalizer) {
    return scorer->score(normalizer->apply(ds).features);
  }
  return scorer->score(ds.features);
}

nlohmann::json to_json(const ModelBundle& bundle) {
  if (!bundle.scorer) {
    throw UsageError("model bundle has no scorer");
  }
  nlohmann::json j;
  j["schema"] = kModelSchema;
  j["kind"] = bundle.scorer->kind();
  j["input"] = {{"steps", bundle.steps},
                {"features", bundle.features},
                {"feature_names", bundle.feature_names}};
  j["normalizer"] = bundle.normalizer ? bundle.normalizer->to_json() : nlohmann::json(nullptr);
  j["params"] = bundle.scorer->params_json();
  return j;
}

ModelBundle model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kModelSchema) {
      throw ValidationError("unsupported model schema '" + j.at("schema").get<std::string>() + "'");
    }
    ModelBundle b;
    b.scorer = scorer_from_json(j.at("kind").get<std::string>(), j.at("params"));
    const auto& input = j.at("input");
    b.steps = input.at("steps").get<std::size_t>();
    b.features = input.at("features").get<std::size_t>();
    b.feature_names = input.at("feature_names").get<std::vector<std::string>>();
    if (!j.at("normalizer").is_null()) {
      b.normalizer = Normalizer::from_json(j.at("normalizer"));
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::string& path, const ModelBundle& bundle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot write model file '" + path + "'", {path});
  }
  out << to_json(bundle).dump(1) << '\n';
  if (!out) {
    throw ValidationError("failed writing model file '" + path + "'", {path});
  }
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open model file '" + path + "'", {path});
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file '" + path + "' is not valid JSON: " + e.what(), {path});
  }
  return model_from_json(j);
}

}  // namespace finrisk
