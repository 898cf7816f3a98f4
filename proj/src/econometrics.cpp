#include "finrisk/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "finrisk/csv.hpp"
#include "finrisk/errors.hpp"

namespace finrisk {

namespace {

// Schur-complement pivots below this (on unit-diagonal scaling) are deficient.
constexpr double kRankTolerance = 1e-12;

std::string regressor_name(std::size_t col, bool with_intercept, std::size_t dim) {
  if (with_intercept) {
    if (col == 0) {
      return "const";
    }
    --col;
  }
  return "y" + std::to_string(col % dim) + "(t-" + std::to_string(col / dim + 1) + ")";
}

struct PivotedCholesky {
  Matrix factor;                  // lower triangle of the leading rank × rank block
  std::vector<std::size_t> perm;  // perm[k] = original column at pivot position k
  std::size_t rank = 0;
};

// Symmetric pivoting; when lock_first is set column 0 is taken first.
PivotedCholesky pivoted_cholesky(Matrix a, bool lock_first) {
  const std::size_t p = a.rows();
  PivotedCholesky out{a, {}, 0};
  out.perm.resize(p);
  std::iota(out.perm.begin(), out.perm.end(), std::size_t{0});
  Matrix& m = out.factor;
  for (std::size_t k = 0; k < p; ++k) {
    std::size_t q = k;
    if (!(k == 0 && lock_first)) {
      for (std::size_t i = k + 1; i < p; ++i) {
        if (m(i, i) > m(q, q)) {
          q = i;
        }
      }
    }
    if (!(m(q, q) > kRankTolerance)) {
      break;
    }
    if (q != k) {
      for (std::size_t j = 0; j < p; ++j) {
        std::swap(m(k, j), m(q, j));
      }
      for (std::size_t i = 0; i < p; ++i) {
        std::swap(m(i, k), m(i, q));
      }
      std::swap(out.perm[k], out.perm[q]);
    }
    const double d = std::sqrt(m(k, k));
    m(k, k) = d;
    for (std::size_t i = k + 1; i < p; ++i) {
      m(i, k) /= d;
    }
    // Trailing block kept fully symmetric so later pivot swaps read valid entries.
    for (std::size_t j = k + 1; j < p; ++j) {
      for (std::size_t i = k + 1; i < p; ++i) {
        m(i, j) -= m(i, k) * m(j, k);
      }
    }
    for (std::size_t j = k + 1; j < p; ++j) {
      m(j, j) = std::max(m(j, j), 0.0);
    }
    out.rank = k + 1;
  }
  return out;
}

double covariance(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += (x[i] - mx) * (y[i] - my);
  }
  return s / (n - 1.0);
}

}  // namespace

void VarModel::validate() const {
  if (order < 1 || dim < 1) {
    throw DomainError("VAR order and dimension must be >= 1");
  }
  if (coefficients.size() != order) {
    throw ShapeError("VAR needs one coefficient matrix per lag");
  }
  for (const auto& a : coefficients) {
    if (a.rows() != dim || a.cols() != dim) {
      throw ShapeError("VAR coefficient matrix " + a.shape_string() + " is not " +
                       std::to_string(dim) + "x" + std::to_string(dim));
    }
  }
  if (intercept && intercept->size() != dim) {
    throw ShapeError("VAR intercept length does not match dimension");
  }
}

VarModel fit_var(const Matrix& series, std::size_t order, bool with_intercept) {
  const std::size_t t_len = series.rows();
  const std::size_t dim = series.cols();
  if (order < 1) {
    throw DomainError("VAR order must be >= 1");
  }
  if (t_len <= order * dim + order + 1) {
    throw DomainError("VAR(" + std::to_string(order) + ") on " + std::to_string(dim) +
                      " variables needs more than " + std::to_string(order * dim + order + 1) +
                      " observations, got " + std::to_string(t_len));
  }
  const std::size_t rows = t_len - order;
  const std::size_t p = order * dim + (with_intercept ? 1 : 0);
  const std::size_t off = with_intercept ? 1 : 0;

  Matrix x(rows, p);
  Matrix y(rows, dim);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = r + order;
    if (with_intercept) {
      x(r, 0) = 1.0;
    }
    for (std::size_t k = 1; k <= order; ++k) {
      for (std::size_t j = 0; j < dim; ++j) {
        x(r, off + (k - 1) * dim + j) = series(t - k, j);
      }
    }
    for (std::size_t j = 0; j < dim; ++j) {
      y(r, j) = series(t, j);
    }
  }

  // Normal equations on unit-diagonal scaling.
  Matrix gram(p, p);
  add_matmul_tn(gram, x, x);
  Matrix xty(p, dim);
  add_matmul_tn(xty, x, y);
  Vector scale(p);
  for (std::size_t i = 0; i < p; ++i) {
    scale[i] = gram(i, i) > 0.0 ? 1.0 / std::sqrt(gram(i, i)) : 0.0;
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      gram(i, j) *= scale[i] * scale[j];
    }
    for (std::size_t e = 0; e < dim; ++e) {
      xty(i, e) *= scale[i];
    }
  }
  const PivotedCholesky chol = pivoted_cholesky(gram, with_intercept);

  VarModel model;
  model.dim = dim;
  model.order = order;
  for (std::size_t k = chol.rank; k < p; ++k) {
    const std::size_t col = chol.perm[k];
    bool constant = true;
    for (std::size_t r = 1; r < rows && constant; ++r) {
      constant = x(r, col) == x(0, col);
    }
    const std::string name = regressor_name(col, with_intercept, dim);
    if (!(with_intercept && constant)) {
      throw EstimationError(name, "rank-deficient VAR design: regressor '" + name +
                                      "' is linearly dependent on the others");
    }
    model.absorbed.push_back(name);
  }
  std::sort(model.absorbed.begin(), model.absorbed.end());

  const std::size_t r = chol.rank;
  Matrix beta(p, dim);
  Vector z(r);
  for (std::size_t e = 0; e < dim; ++e) {
    for (std::size_t i = 0; i < r; ++i) {
      double s = xty(chol.perm[i], e);
      for (std::size_t k = 0; k < i; ++k) {
        s -= chol.factor(i, k) * z[k];
      }
      z[i] = s / chol.factor(i, i);
    }
    for (std::size_t i = r; i-- > 0;) {
      double s = z[i];
      for (std::size_t k = i + 1; k < r; ++k) {
        s -= chol.factor(k, i) * z[k];
      }
      z[i] = s / chol.factor(i, i);
    }
    for (std::size_t i = 0; i < r; ++i) {
      beta(chol.perm[i], e) = z[i] * scale[chol.perm[i]];
    }
  }

  if (with_intercept) {
    model.intercept = Vector(dim);
    for (std::size_t e = 0; e < dim; ++e) {
      (*model.intercept)[e] = beta(0, e);
    }
  }
  for (std::size_t k = 0; k < order; ++k) {
    Matrix a(dim, dim);
    for (std::size_t e = 0; e < dim; ++e) {
      for (std::size_t j = 0; j < dim; ++j) {
        a(e, j) = beta(off + k * dim + j, e);
      }
    }
    model.coefficients.push_back(std::move(a));
  }

  const Matrix fitted = matmul(x, beta);
  model.residual_variance.assign(dim, 0.0);
  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t e = 0; e < dim; ++e) {
      const double res = y(row, e) - fitted(row, e);
      model.residual_variance[e] += res * res;
    }
  }
  for (double& v : model.residual_variance) {
    v /= static_cast<double>(rows - r);
  }
  return model;
}

Matrix var_forecast(const VarModel& model, const Matrix& history, std::size_t horizon) {
  model.validate();
  if (history.rows() != model.order || history.cols() != model.dim) {
    throw UsageError("forecast history must be the last " + std::to_string(model.order) +
                     " observations of " + std::to_string(model.dim) + " variables, got " +
                     history.shape_string());
  }
  if (horizon < 1) {
    throw DomainError("forecast horizon must be >= 1");
  }
  const std::size_t dim = model.dim;
  // window[k] is y_{t-1-k}
  std::vector<Vector> window(model.order, Vector(dim));
  for (std::size_t k = 0; k < model.order; ++k) {
    const auto row = history.row(model.order - 1 - k);
    window[k].assign(row.begin(), row.end());
  }
  Matrix path(horizon, dim);
  for (std::size_t h = 0; h < horizon; ++h) {
    Vector next = model.intercept ? *model.intercept : Vector(dim, 0.0);
    for (std::size_t k = 0; k < model.order; ++k) {
      const Matrix& a = model.coefficients[k];
      for (std::size_t e = 0; e < dim; ++e) {
        for (std::size_t j = 0; j < dim; ++j) {
          next[e] += a(e, j) * window[k][j];
        }
      }
    }
    std::copy(next.begin(), next.end(), path.row(h).begin());
    window.pop_back();
    window.insert(window.begin(), std::move(next));
  }
  return path;
}

Matrix impulse_response(const VarModel& model, std::size_t shock_index, std::size_t horizon) {
  model.validate();
  if (shock_index >= model.dim) {
    throw DomainError("shock index " + std::to_string(shock_index) + " out of range for " +
                      std::to_string(model.dim) + " variables");
  }
  if (horizon < 1) {
    throw DomainError("impulse-response horizon must be >= 1");
  }
  const std::size_t dim = model.dim;
  Matrix resp(horizon, dim);
  resp(0, shock_index) = 1.0;
  for (std::size_t h = 1; h < horizon; ++h) {
    for (std::size_t k = 1; k <= model.order && k <= h; ++k) {
      const Matrix& a = model.coefficients[k - 1];
      for (std::size_t e = 0; e < dim; ++e) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          s += a(e, j) * resp(h - k, j);
        }
        resp(h, e) += s;
      }
    }
  }
  return resp;
}

double response_decay(const VarModel& model, std::size_t horizon) {
  double worst = 0.0;
  for (std::size_t s = 0; s < model.dim; ++s) {
    const Matrix r = impulse_response(model, s, horizon);
    for (const double v : r.row(horizon - 1)) {
      worst = std::max(worst, std::abs(v));
    }
  }
  return worst;
}

Matrix var_residuals(const VarModel& model, const Matrix& series) {
  model.validate();
  if (series.cols() != model.dim || series.rows() <= model.order) {
    throw ShapeError("series " + series.shape_string() + " incompatible with VAR(" +
                     std::to_string(model.order) + ") of dimension " + std::to_string(model.dim));
  }
  Matrix res(series.rows() - model.order, model.dim);
  for (std::size_t t = model.order; t < series.rows(); ++t) {
    for (std::size_t e = 0; e < model.dim; ++e) {
      double pred = model.intercept ? (*model.intercept)[e] : 0.0;
      for (std::size_t k = 1; k <= model.order; ++k) {
        for (std::size_t j = 0; j < model.dim; ++j) {
          pred += model.coefficients[k - 1](e, j) * series(t - k, j);
        }
      }
      res(t - model.order, e) = series(t, e) - pred;
    }
  }
  return res;
}

double beta_coefficient(std::span<const double> asset, std::span<const double> market) {
  if (asset.size() != market.size()) {
    throw DomainError("asset and market series differ in length (" + std::to_string(asset.size()) +
                      " vs " + std::to_string(market.size()) + ")");
  }
  if (asset.size() < 2) {
    throw DomainError("beta needs at least 2 observations");
  }
  const double var = covariance(market, market);
  if (!(var > 0.0)) {
    throw DomainError("market return variance is zero");
  }
  return covariance(asset, market) / var;
}

SeriesTable read_series_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  if (table.header.size() < 2) {
    throw ParseError(1, "series file needs a key column and at least one value column");
  }
  if (table.rows.empty()) {
    throw ParseError(0, "series file has no data rows");
  }
  SeriesTable out{{}, {table.header.begin() + 1, table.header.end()},
                  Matrix(table.rows.size(), table.header.size() - 1)};
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    out.keys.push_back(row.cells[0]);
    for (std::size_t c = 1; c < row.cells.size(); ++c) {
      const double v = csv::parse_double(row.cells[c], row.line, table.header[c]);
      if (!std::isfinite(v)) {
        throw ParseError(row.line, "non-finite value in column '" + table.header[c] + "'");
      }
      out.values(r, c - 1) = v;
    }
  }
  return out;
}

ReturnSeries read_return_series(const std::string& path) {
  const SeriesTable t = read_series_csv(path);
  if (t.values.cols() != 1) {
    throw ParseError(1, "return series file must have exactly two columns (key, return)");
  }
  return {t.values.data().begin(), t.values.data().end()};
}

nlohmann::json to_json(const VarModel& model) {
  nlohmann::json j;
  j["dim"] = model.dim;
  j["order"] = model.order;
  auto& coefs = j["coefficients"] = nlohmann::json::array();
  for (const auto& a : model.coefficients) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < a.rows(); ++r) {
      rows.push_back(std::vector<double>(a.row(r).begin(), a.row(r).end()));
    }
    coefs.push_back(std::move(rows));
  }
  j["intercept"] = model.intercept ? nlohmann::json(*model.intercept) : nlohmann::json(nullptr);
  j["residual_variance"] = model.residual_variance;
  j["absorbed_regressors"] = model.absorbed;
  return j;
}

}  // namespace finrisk
