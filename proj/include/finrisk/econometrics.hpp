#pragma once

// Vector autoregression (estimation, forecasting, impulse responses) and the
// CAPM beta coefficient.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finrisk/num_core.hpp"
#include "json.hpp"

namespace finrisk {

// Y_t = c + A_1 Y_{t-1} + ... + A_order Y_{t-order}
// Row i of A_k holds equation i's coefficients on lag k of every variable.
struct VarModel {
  std::size_t dim = 0;
  std::size_t order = 0;
  std::vector<Matrix> coefficients;
  std::optional<Vector> intercept;
  Vector residual_variance;
  // Constant regressors fully explained by the intercept; their coefficients are 0.
  std::vector<std::string> absorbed;

  void validate() const;
};

// Equation-by-equation least squares on lagged regressors. series is T × dim
// (rows chronological) and needs T > order·dim + order + 1. Throws
// EstimationError naming the first linearly dependent regressor.
VarModel fit_var(const Matrix& series, std::size_t order, bool with_intercept = true);

// history: the last `order` observations, oldest first. Returns horizon × dim.
Matrix var_forecast(const VarModel& model, const Matrix& history, std::size_t horizon);

// Unit shock to one variable at t = 0 propagated without intercept or noise.
// Row 0 is the impulse itself. Returns horizon × dim.
Matrix impulse_response(const VarModel& model, std::size_t shock_index, std::size_t horizon);

// Largest |response| at the final horizon over every unit shock; values near
// zero indicate a stable system.
double response_decay(const VarModel& model, std::size_t horizon);

// In-sample residuals, (T - order) × dim.
Matrix var_residuals(const VarModel& model, const Matrix& series);

using ReturnSeries = std::vector<double>;

// Cov(asset, market) / Var(market), both with the n - 1 normalization.
// Throws DomainError on length mismatch, n < 2 or zero market variance.
double beta_coefficient(std::span<const double> asset, std::span<const double> market);

// CSV whose first column is an opaque ordering key (e.g. a date) and whose
// remaining columns are numeric series.
struct SeriesTable {
  std::vector<std::string> keys;
  std::vector<std::string> names;
  Matrix values;  // rows × series
};

SeriesTable read_series_csv(const std::string& path);
// Two-column (key, return) file.
ReturnSeries read_return_series(const std::string& path);

nlohmann::json to_json(const VarModel& model);

}  // namespace finrisk
