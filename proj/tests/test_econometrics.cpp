#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "finrisk/errors.hpp"
#include "finrisk/econometrics.hpp"

using namespace finrisk;

namespace {

// y_t = c + Σ_k A_k y_{t-k} + σ ε_t, started from `init` (order rows).
Matrix simulate(const std::vector<Matrix>& a, const Vector& c, const Matrix& init, std::size_t t_len,
                double sigma, Rng& rng) {
  const std::size_t dim = init.cols();
  const std::size_t order = a.size();
  Matrix y(t_len, dim);
  for (std::size_t t = 0; t < order; ++t) {
    for (std::size_t j = 0; j < dim; ++j) {
      y(t, j) = init(t, j);
    }
  }
  for (std::size_t t = order; t < t_len; ++t) {
    for (std::size_t i = 0; i < dim; ++i) {
      double v = c.empty() ? 0.0 : c[i];
      for (std::size_t k = 0; k < order; ++k) {
        for (std::size_t j = 0; j < dim; ++j) {
          v += a[k](i, j) * y(t - 1 - k, j);
        }
      }
      y(t, i) = v + (sigma > 0.0 ? sigma * rng.normal() : 0.0);
    }
  }
  return y;
}

double max_coef_err(const VarModel& m, const std::vector<Matrix>& a) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      worst = std::max(worst, std::fabs(m.coefficients[k].data()[i] - a[k].data()[i]));
    }
  }
  return worst;
}

VarModel make_model(std::vector<Matrix> a) {
  VarModel m;
  m.dim = a.front().rows();
  m.order = a.size();
  m.coefficients = std::move(a);
  return m;
}

}  // namespace

TEST_CASE("AR(1) exact recurrence recovers the coefficient") {
  Matrix y(30, 1);
  y(0, 0) = 1.0;
  for (std::size_t t = 1; t < 30; ++t) {
    y(t, 0) = 0.5 * y(t - 1, 0);
  }
  const VarModel m = fit_var(y, 1, false);
  CHECK(std::fabs(m.coefficients[0](0, 0) - 0.5) < 1e-10);
  CHECK_FALSE(m.intercept.has_value());
}

// Persistent systems: the least-squares standard error per coefficient is
// about 0.006 (VAR(1)) and 0.005 (VAR(2)) at T = 5000, whatever sigma is.
TEST_CASE("noisy 2-dim VAR(1) within 0.02") {
  const std::vector<Matrix> a{Matrix{{0.9, 0.05}, {0.02, 0.92}}};
  for (const std::uint64_t seed : {10U, 11U, 12U}) {
    Rng rng(seed);
    const Matrix y = simulate(a, {}, Matrix(1, 2), 5000, 0.01, rng);
    const VarModel m = fit_var(y, 1, true);
    CHECK(max_coef_err(m, a) <= 0.02);
    REQUIRE(m.intercept.has_value());
    CHECK(std::fabs((*m.intercept)[0]) < 0.01);
    CHECK(m.residual_variance[0] == doctest::Approx(1e-4).epsilon(0.1));
  }
}

TEST_CASE("constant series with intercept") {
  Matrix y(20, 1, 3.5);
  const VarModel m = fit_var(y, 1, true);
  CHECK(std::fabs(m.coefficients[0](0, 0)) < 1e-12);
  REQUIRE(m.intercept.has_value());
  CHECK((*m.intercept)[0] == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(m.absorbed == std::vector<std::string>{"y0(t-1)"});
}

TEST_CASE("rank-deficient design names the column") {
  Rng rng(3);
  Matrix y(40, 2);
  for (std::size_t t = 0; t < 40; ++t) {
    y(t, 0) = rng.normal();
    y(t, 1) = 2.0 * y(t, 0);
  }
  try {
    (void)fit_var(y, 1, true);
    FAIL("expected EstimationError");
  } catch (const EstimationError& e) {
    CHECK((e.column() == "y0(t-1)" || e.column() == "y1(t-1)"));
    CHECK(std::string(e.what()).find(e.column()) != std::string::npos);
  }
  // Too few rows is a precondition failure.
  CHECK_THROWS_AS(fit_var(Matrix(4, 2), 1, true), DomainError);
}

TEST_CASE("noise-free VAR(2) re-fit within 1e-8") {
  Rng rng(8);
  // Lightly damped rotation plus a small second lag keeps the path from collapsing.
  const double c = 0.97 * std::cos(0.4);
  const double s = 0.97 * std::sin(0.4);
  const std::vector<Matrix> a{Matrix{{c, -s}, {s, c}}, Matrix{{0.01, 0.0}, {0.0, -0.01}}};
  const Matrix init{{1.0, 0.0}, {0.3, -0.7}};
  const Matrix y = simulate(a, {}, init, 60, 0.0, rng);
  CHECK(max_coef_err(fit_var(y, 2, false), a) <= 1e-8);

  const Vector icpt{0.5, -0.25};
  const Matrix yc = simulate(a, icpt, init, 60, 0.0, rng);
  const VarModel mc = fit_var(yc, 2, true);
  CHECK(max_coef_err(mc, a) <= 1e-8);
  CHECK(std::fabs((*mc.intercept)[0] - 0.5) <= 1e-8);
  CHECK(std::fabs((*mc.intercept)[1] + 0.25) <= 1e-8);
}

TEST_CASE("2-dim order-2 stable system with noise") {
  const std::vector<Matrix> a{Matrix{{0.6, 0.05}, {-0.05, 0.5}}, Matrix{{-0.95, 0.0}, {0.03, -0.93}}};
  for (const std::uint64_t seed : {21U, 22U, 23U}) {
    Rng rng(seed);
    const Matrix y = simulate(a, {}, Matrix(2, 2), 5000, 0.01, rng);
    CHECK(max_coef_err(fit_var(y, 2, true), a) <= 0.02);
  }
}

TEST_CASE("forecasts") {
  const VarModel zero = make_model({Matrix(2, 2)});
  const Matrix f0 = var_forecast(zero, Matrix{{3.0, -1.0}}, 4);
  CHECK(f0.rows() == 4);
  CHECK(std::all_of(f0.data().begin(), f0.data().end(), [](double v) { return v == 0.0; }));

  const VarModel half = make_model({Matrix{{0.5}}});
  const Matrix f1 = var_forecast(half, Matrix{{1.0}}, 3);
  CHECK(f1(0, 0) == 0.5);
  CHECK(f1(1, 0) == 0.25);
  CHECK(f1(2, 0) == 0.125);

  VarModel two = make_model({Matrix{{0.3, 0.2}, {-0.1, 0.5}}, Matrix{{0.1, 0.0}, {0.05, -0.2}}});
  two.intercept = Vector{0.1, -0.2};
  const Matrix hist{{1.0, 2.0}, {-0.5, 0.25}};  // oldest first
  const Matrix f2 = var_forecast(two, hist, 3);
  std::vector<std::vector<double>> path{{1.0, 2.0}, {-0.5, 0.25}};
  for (std::size_t h = 0; h < 3; ++h) {
    const auto& l1 = path[path.size() - 1];
    const auto& l2 = path[path.size() - 2];
    std::vector<double> next(2);
    for (std::size_t i = 0; i < 2; ++i) {
      next[i] = (*two.intercept)[i];
      for (std::size_t j = 0; j < 2; ++j) {
        next[i] += two.coefficients[0](i, j) * l1[j] + two.coefficients[1](i, j) * l2[j];
      }
      CHECK(f2(h, i) == doctest::Approx(next[i]).epsilon(1e-14));
    }
    path.push_back(next);
  }
  CHECK_THROWS_AS(var_forecast(two, Matrix{{1.0, 2.0}}, 3), UsageError);
}

TEST_CASE("impulse responses") {
  const VarModel zero = make_model({Matrix(3, 3)});
  const Matrix r0 = impulse_response(zero, 1, 4);
  for (std::size_t h = 0; h < 4; ++h) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(r0(h, j) == ((h == 0 && j == 1) ? 1.0 : 0.0));
    }
  }
  const VarModel ar = make_model({Matrix{{0.9}}});
  const Matrix r1 = impulse_response(ar, 0, 3);
  CHECK(r1(0, 0) == 1.0);
  CHECK(r1(1, 0) == 0.9);
  CHECK(r1(2, 0) == doctest::Approx(0.81).epsilon(1e-15));
  CHECK_THROWS_AS(impulse_response(ar, 1, 3), DomainError);
}

TEST_CASE("stable random systems decay over 200 steps") {
  Rng rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    // Row sums of |A| below 0.9 bound the spectral radius by 0.9.
    Matrix a(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        a(i, j) = rng.uniform(-1.0, 1.0);
        row += std::fabs(a(i, j));
      }
      for (std::size_t j = 0; j < 3; ++j) {
        a(i, j) *= 0.9 / row;
      }
    }
    const VarModel m = make_model({a});
    for (std::size_t shock = 0; shock < 3; ++shock) {
      const Matrix r = impulse_response(m, shock, 200);
      double tail = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        tail = std::max(tail, std::fabs(r(199, j)));
      }
      CHECK(tail < 1e-8);
      // Direct simulation of the same propagation.
      std::vector<double> v(3, 0.0);
      v[shock] = 1.0;
      for (std::size_t h = 1; h < 200; ++h) {
        std::vector<double> nv(3, 0.0);
        for (std::size_t i = 0; i < 3; ++i) {
          for (std::size_t j = 0; j < 3; ++j) {
            nv[i] += a(i, j) * v[j];
          }
        }
        v = nv;
      }
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(std::fabs(r(199, j) - v[j]) <= 1e-15);
      }
    }
    CHECK(response_decay(m, 200) < 1e-8);
  }
}

TEST_CASE("beta examples") {
  Rng rng(4);
  std::vector<double> m(100);
  for (auto& v : m) {
    v = rng.normal() * 0.02;
  }
  CHECK(beta_coefficient(m, m) == 1.0);
  std::vector<double> twice(m.size());
  std::transform(m.begin(), m.end(), twice.begin(), [](double v) { return 2.0 * v; });
  CHECK(beta_coefficient(twice, m) == 2.0);

  std::vector<double> mk(1000);
  std::vector<double> asset(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    mk[i] = rng.normal() * 0.01;
    asset[i] = 1.7 * mk[i] + 0.001 * rng.normal();
  }
  const double b = beta_coefficient(asset, mk);
  CHECK(b >= 1.65);
  CHECK(b <= 1.75);
}

TEST_CASE("beta invariants and errors") {
  Rng rng(9);
  std::vector<double> a(200);
  std::vector<double> mk(200);
  for (std::size_t i = 0; i < 200; ++i) {
    mk[i] = rng.normal();
    a[i] = 0.3 * mk[i] + rng.normal();
  }
  const double base = beta_coefficient(a, mk);
  for (const double scale : {2.5, -1.0, 0.1}) {
    std::vector<double> t(a.size());
    std::transform(a.begin(), a.end(), t.begin(), [&](double v) { return scale * v + 7.0; });
    CHECK(std::fabs(beta_coefficient(t, mk) - scale * base) <= 1e-12 * std::fabs(scale * base) + 1e-12);
  }
  std::vector<double> neg(mk.size());
  std::transform(mk.begin(), mk.end(), neg.begin(), [](double v) { return -0.8 * v; });
  CHECK(beta_coefficient(neg, mk) < 0.0);
  CHECK_THROWS_AS(beta_coefficient(std::vector<double>{1.0, 2.0}, std::vector<double>{3.0, 3.0}),
                  DomainError);
  CHECK_THROWS_AS(beta_coefficient(std::vector<double>{1.0}, std::vector<double>{3.0}), DomainError);
  CHECK_THROWS_AS(beta_coefficient(a, std::vector<double>{1.0, 2.0}), DomainError);
}

TEST_CASE("series files and json") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "finrisk_econ_test";
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "s.csv");
    f << "date,a,b\n2020-01,1.0,2.0\n2020-02,1.5,2.5\n2020-03,0.5,x\n";
  }
  try {
    (void)read_series_csv((dir / "s.csv").string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find('4') != std::string::npos);
  }
  {
    std::ofstream f(dir / "r.csv");
    f << "date,ret\nd1,0.01\nd2,-0.02\nd3,0.03\n";
  }
  CHECK(read_return_series((dir / "r.csv").string()) == ReturnSeries{0.01, -0.02, 0.03});

  const VarModel m = make_model({Matrix{{0.5}}});
  const nlohmann::json j = to_json(m);
  CHECK(j.contains("coefficients"));
  fs::remove_all(dir);
}
