#include "finrisk/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "finrisk/csv.hpp"
#include "finrisk/errors.hpp"

namespace finrisk {

void Dataset::validate() const {
  if (features.samples() != labels.size()) {
    throw ShapeError("feature rows (" + std::to_string(features.samples()) +
                     ") do not match label count (" + std::to_string(labels.size()) + ")");
  }
  if (feature_names.size() != features.features()) {
    throw ShapeError("feature name count does not match feature dimension");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw DomainError("label at row " + std::to_string(i) + " is not 0/1");
    }
  }
  for (const double v : features.data()) {
    if (!std::isfinite(v)) {
      throw DomainError("dataset contains a non-finite feature value");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.select(indices);
  out.labels.reserve(indices.size());
  for (const std::size_t i : indices) {
    out.labels.push_back(labels.at(i));
  }
  out.feature_names = feature_names;
  out.provenance = provenance;
  return out;
}

double Dataset::positive_fraction() const {
  if (labels.empty()) {
    return 0.0;
  }
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  return static_cast<double>(pos) / static_cast<double>(labels.size());
}

Dataset parse_csv(std::istream& in, const std::string& label_column, std::size_t timesteps,
                  const std::string& source) {
  if (timesteps == 0) {
    throw DomainError("timesteps must be >= 1");
  }
  const csv::Table table = csv::read(in);
  const auto label_it = std::find(table.header.begin(), table.header.end(), label_column);
  if (label_it == table.header.end()) {
    throw ParseError(1, "label column '" + label_column + "' not found in header");
  }
  const auto label_idx = static_cast<std::size_t>(label_it - table.header.begin());
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c != label_idx) {
      feature_cols.push_back(c);
    }
  }
  if (feature_cols.empty() || feature_cols.size() % timesteps != 0) {
    throw ParseError(1, std::to_string(feature_cols.size()) +
                            " feature columns are not divisible by timesteps " +
                            std::to_string(timesteps));
  }
  const std::size_t d = feature_cols.size() / timesteps;

  Dataset ds;
  ds.features = Tensor3(table.rows.size(), timesteps, d);
  ds.labels.reserve(table.rows.size());
  for (std::size_t j = 0; j < d; ++j) {
    std::string name = table.header[feature_cols[j]];
    if (timesteps > 1 && name.size() > 3 && name.compare(name.size() - 3, 3, "@t0") == 0) {
      name.resize(name.size() - 3);
    }
    ds.feature_names.push_back(std::move(name));
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string& lab = row.cells[label_idx];
    if (lab.empty()) {
      throw ParseError(row.line, "missing label");
    }
    if (lab == "0" || lab == "0.0") {
      ds.labels.push_back(0);
    } else if (lab == "1" || lab == "1.0") {
      ds.labels.push_back(1);
    } else {
      throw ParseError(row.line, "label value '" + lab + "' is not 0 or 1");
    }
    auto dst = ds.features.sample(r);
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const std::string& colname = table.header[feature_cols[k]];
      const double v = csv::parse_double(row.cells[feature_cols[k]], row.line, colname);
      if (!std::isfinite(v)) {
        throw ParseError(row.line, "non-finite value in column '" + colname + "'");
      }
      dst[k] = v;
    }
  }
  ds.provenance = "csv:" + source;
  return ds;
}

Dataset load_csv(const std::string& path, const std::string& label_column, std::size_t timesteps) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open dataset: " + path, {path});
  }
  return parse_csv(in, label_column, timesteps, path);
}

void write_csv(std::ostream& out, const Dataset& ds, const std::string& label_column) {
  const std::size_t steps = ds.steps();
  for (std::size_t t = 0; t < steps; ++t) {
    for (const auto& name : ds.feature_names) {
      out << name;
      if (steps > 1) {
        out << "@t" << t;
      }
      out << ',';
    }
  }
  out << label_column << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (const double v : ds.features.sample(i)) {
      out << csv::format_double(v) << ',';
    }
    out << ds.labels[i] << '\n';
  }
}

Normalizer fit_normalize(const Dataset& train) {
  const std::size_t n = train.size();
  if (n < 2) {
    throw DomainError("normalization needs at least 2 training rows");
  }
  Normalizer norm;
  norm.steps = train.steps();
  norm.features = train.dims();
  const std::size_t cells = norm.steps * norm.features;
  norm.mean.assign(cells, 0.0);
  norm.stddev.assign(cells, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = train.features.sample(i);
    for (std::size_t k = 0; k < cells; ++k) {
      norm.mean[k] += s[k];
    }
  }
  for (double& m : norm.mean) {
    m /= static_cast<double>(n);
  }
  Vector var(cells, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = train.features.sample(i);
    for (std::size_t k = 0; k < cells; ++k) {
      const double dlt = s[k] - norm.mean[k];
      var[k] += dlt * dlt;
    }
  }
  for (std::size_t k = 0; k < cells; ++k) {
    norm.stddev[k] = std::sqrt(var[k] / static_cast<double>(n));
  }
  for (std::size_t j = 0; j < norm.features; ++j) {
    bool any_varying = false;
    for (std::size_t t = 0; t < norm.steps; ++t) {
      any_varying = any_varying || norm.stddev[t * norm.features + j] > 0.0;
    }
    if (any_varying) {
      norm.kept.push_back(j);
    } else {
      const std::string name = j < train.feature_names.size() ? train.feature_names[j] : std::to_string(j);
      norm.warnings.push_back("dropping constant feature '" + name + "'");
    }
  }
  if (norm.kept.empty()) {
    throw DomainError("every feature is constant on the training rows");
  }
  return norm;
}

Dataset Normalizer::apply(const Dataset& ds) const {
  if (ds.steps() != steps || ds.dims() != features) {
    throw ShapeError("dataset shape does not match the normalizer (" + std::to_string(steps) + "x" +
                     std::to_string(features) + ")");
  }
  if (ds.feature_names.size() != features) {
    throw ShapeError("feature name count does not match feature dimension");
  }
  Dataset out;
  out.features = Tensor3(ds.size(), steps, kept.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t k = 0; k < kept.size(); ++k) {
        const std::size_t cell = t * features + kept[k];
        const double centred = ds.features(i, t, kept[k]) - mean[cell];
        out.features(i, t, k) = stddev[cell] > 0.0 ? centred / stddev[cell] : centred;
      }
    }
  }
  out.labels = ds.labels;
  for (const std::size_t j : kept) {
    out.feature_names.push_back(ds.feature_names.at(j));
  }
  out.provenance = ds.provenance;
  return out;
}

nlohmann::json Normalizer::to_json() const {
  return {{"steps", steps}, {"features", features}, {"mean", mean}, {"stddev", stddev}, {"kept", kept}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  try {
    Normalizer n;
    n.steps = j.at("steps").get<std::size_t>();
    n.features = j.at("features").get<std::size_t>();
    n.mean = j.at("mean").get<Vector>();
    n.stddev = j.at("stddev").get<Vector>();
    n.kept = j.at("kept").get<std::vector<std::size_t>>();
    if (n.mean.size() != n.steps * n.features || n.stddev.size() != n.mean.size()) {
      throw ValidationError("normalizer statistics have the wrong length");
    }
    for (const std::size_t k : n.kept) {
      if (k >= n.features) {
        throw ValidationError("normalizer keeps an out-of-range feature");
      }
    }
    return n;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed normalizer: ") + e.what());
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(
    std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DomainError("test fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    idx[i] = i;
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n) {
    throw DomainError("split leaves an empty partition (n = " + std::to_string(n) + ")");
  }
  std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  return {std::move(train), std::move(test)};
}

Dataset augment_with_econ_features(const Dataset& ds, std::span<const EconFeature> extra) {
  if (extra.empty()) {
    return ds;
  }
  for (const auto& e : extra) {
    if (e.values.size() != ds.size()) {
      throw ShapeError("feature '" + e.name + "' has " + std::to_string(e.values.size()) +
                       " values for " + std::to_string(ds.size()) + " samples");
    }
  }
  const std::size_t d = ds.dims();
  const std::size_t d2 = d + extra.size();
  Dataset out;
  out.features = Tensor3(ds.size(), ds.steps(), d2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t t = 0; t < ds.steps(); ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        out.features(i, t, j) = ds.features(i, t, j);
      }
      for (std::size_t k = 0; k < extra.size(); ++k) {
        out.features(i, t, d + k) = extra[k].values[i];
      }
    }
  }
  out.labels = ds.labels;
  out.feature_names = ds.feature_names;
  for (const auto& e : extra) {
    out.feature_names.push_back(e.name + (e.kind == EconFeatureKind::Beta ? ":beta" : ":var_resid"));
  }
  out.provenance = ds.provenance;
  return out;
}

nlohmann::json summary_json(const Dataset& ds) {
  const auto pos = static_cast<std::size_t>(std::count(ds.labels.begin(), ds.labels.end(), 1));
  return {{"schema", "finrisk.dataset_summary/1"},
          {"n", ds.size()},
          {"T", ds.steps()},
          {"d", ds.dims()},
          {"positives", pos},
          {"negatives", ds.size() - pos},
          {"positive_fraction", ds.positive_fraction()},
          {"provenance", ds.provenance}};
}

}  // namespace finrisk
