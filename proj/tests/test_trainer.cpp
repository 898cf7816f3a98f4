#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "finrisk/errors.hpp"
#include "finrisk/trainer.hpp"

using namespace finrisk;

namespace {

Tensor3 random_batch(std::size_t n, std::size_t steps, std::size_t d, Rng& rng) {
  Tensor3 t(n, steps, d);
  for (auto& v : t.data()) {
    v = rng.uniform(-1.5, 1.5);
  }
  return t;
}

Labels random_labels(std::size_t n, Rng& rng) {
  Labels y(n);
  for (auto& v : y) {
    v = static_cast<int>(rng.below(2));
  }
  return y;
}

// Relative error with a 1e-6 floor on the denominator.
double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

double worst_rel(const LstmWeights& a, const LstmWeights& b) {
  const auto ba = a.blocks();
  const auto bb = b.blocks();
  double worst = 0.0;
  for (std::size_t k = 0; k < ba.size(); ++k) {
    for (std::size_t i = 0; i < ba[k].size(); ++i) {
      worst = std::max(worst, rel_err(ba[k][i], bb[k][i]));
    }
  }
  return worst;
}

double max_abs(const LstmWeights& w) {
  double m = 0.0;
  for (const auto& b : w.blocks()) {
    for (const double v : b) {
      m = std::max(m, std::fabs(v));
    }
  }
  return m;
}

Dataset separable_sequences(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.features = Tensor3(n, 2, 2);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    ds.labels[i] = y;
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t j = 0; j < 2; ++j) {
        ds.features(i, t, j) = rng.normal() * 0.5 + (y == 1 ? 1.0 : -1.0);
      }
    }
  }
  return ds;
}

// Returns a NaN loss from the given epoch onward; zero gradients otherwise.
class NanAfter final : public Differentiable {
 public:
  explicit NanAfter(std::size_t calls_ok) : calls_ok_(calls_ok) {}
  std::vector<std::span<double>> parameter_blocks() override { return {std::span<double>(w_)}; }
  double loss_and_gradient(const Tensor3&, std::span<const int>, LossKind,
                           std::vector<Vector>& grads) override {
    grads.assign(1, Vector(1, 0.0));
    return calls_++ < calls_ok_ ? 0.25 : std::numeric_limits<double>::quiet_NaN();
  }
  Vector predict(const Tensor3& b) const override { return Vector(b.samples(), 0.5); }

 private:
  Vector w_{0.0};
  std::size_t calls_ok_;
  std::size_t calls_ = 0;
};

}  // namespace

TEST_CASE("loss values at fixed points") {
  const std::vector<double> p{0.0, 1.0, 1.0, 0.0};
  const std::vector<int> y{0, 1, 1, 0};
  CHECK(loss(p, y, LossKind::Mse) == 0.0);
  const std::vector<double> half(4, 0.5);
  CHECK(loss(half, y, LossKind::LogLoss) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // Clamped at 1e-12: a confident miss costs -ln(1e-12).
  const std::vector<double> miss{0.0};
  const std::vector<int> one{1};
  CHECK(loss(miss, one, LossKind::LogLoss) == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
  const double perfect = loss(p, y, LossKind::LogLoss);
  CHECK(perfect >= 0.0);
  CHECK(perfect < 1e-11);
}

TEST_CASE("loss matches direct recomputation on random data") {
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<double> p(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform(0.01, 0.99);
      y[i] = static_cast<int>(rng.below(2));
    }
    double ll = 0.0;
    double se = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ll -= y[i] == 1 ? std::log(p[i]) : std::log(1.0 - p[i]);
      se += (p[i] - y[i]) * (p[i] - y[i]);
    }
    CHECK(loss(p, y, LossKind::LogLoss) == doctest::Approx(ll / n).epsilon(1e-13));
    CHECK(loss(p, y, LossKind::Mse) == doctest::Approx(se / n).epsilon(1e-13));
    CHECK(loss(p, y, LossKind::LogLoss) >= 0.0);
  }
}

TEST_CASE("loss input errors") {
  const std::vector<double> p{0.5, 0.5};
  const std::vector<int> y{1};
  CHECK_THROWS_AS(loss(p, y, LossKind::Mse), ShapeError);
  CHECK_THROWS_AS(loss(std::vector<double>{}, std::vector<int>{}, LossKind::LogLoss), DomainError);
  CHECK(loss_kind_from_string("mse") == LossKind::Mse);
  CHECK(loss_kind_from_string("log_loss") == LossKind::LogLoss);
  CHECK_THROWS_AS(loss_kind_from_string("hinge"), DomainError);
}

TEST_CASE("zero residual under mse gives exactly zero gradient") {
  LstmNetwork net = LstmNetwork::zeros(NetworkConfig{3, {4, 2}, 0});
  net.weights().head.b = 1000.0;  // sigmoid saturates to exactly 1
  Rng rng(2);
  const Tensor3 batch = random_batch(5, 3, 3, rng);
  const std::vector<int> y(5, 1);
  REQUIRE(forward(batch, net) == Vector(5, 1.0));
  LstmWeights g;
  const double l = loss_and_gradient(net, batch, y, LossKind::Mse, g);
  CHECK(l == 0.0);
  CHECK(max_abs(g) == 0.0);
}

TEST_CASE("backward matches central differences on a two-layer net") {
  for (const auto kind : {LossKind::LogLoss, LossKind::Mse}) {
    const LstmNetwork net(NetworkConfig{3, {4, 3}, 17});
    Rng rng(5);
    const Tensor3 batch = random_batch(6, 2, 3, rng);
    const Labels y = random_labels(6, rng);
    LstmWeights g;
    (void)loss_and_gradient(net, batch, y, kind, g);
    const LstmWeights fd = finite_diff_grad(net, batch, y, kind, 1e-5);
    CHECK(worst_rel(g, fd) < 1e-4);
  }
}

TEST_CASE("gradient fidelity over random small instances") {
  Rng meta(606);
  double worst = 0.0;
  for (int inst = 0; inst < 25; ++inst) {
    const std::size_t d = 1 + meta.below(3);
    const std::size_t h1 = 1 + meta.below(4);
    const std::size_t h2 = 1 + meta.below(3);
    const std::size_t steps = 1 + meta.below(3);
    std::vector<std::size_t> hidden{h1};
    if (meta.below(2) == 1) {
      hidden.push_back(h2);
    }
    const LstmNetwork net(NetworkConfig{d, hidden, meta.next_u64()});
    const std::size_t n = 1 + meta.below(5);
    const Tensor3 batch = random_batch(n, steps, d, meta);
    const Labels y = random_labels(n, meta);
    const LossKind kind = meta.below(2) == 0 ? LossKind::LogLoss : LossKind::Mse;
    LstmWeights g;
    (void)loss_and_gradient(net, batch, y, kind, g);
    worst = std::max(worst, worst_rel(g, finite_diff_grad(net, batch, y, kind, 1e-5)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
  const LstmNetwork net(NetworkConfig{2, {3}, 8});
  Rng rng(12);
  const Tensor3 batch = random_batch(4, 3, 2, rng);
  const Labels y = random_labels(4, rng);
  std::vector<std::size_t> twice{0, 1, 2, 3, 0, 1, 2, 3};
  Labels y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  LstmWeights g1;
  LstmWeights g2;
  const double l1 = loss_and_gradient(net, batch, y, LossKind::LogLoss, g1);
  const double l2 = loss_and_gradient(net, batch.select(twice), y2, LossKind::LogLoss, g2);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-14));
  CHECK(worst_rel(g1, g2) < 1e-12);
}

TEST_CASE("backward without a recorded forward pass is a usage error") {
  const LstmNetwork net(NetworkConfig{2, {3}, 8});
  const ForwardTape empty;
  const std::vector<int> y{1};
  CHECK_THROWS_AS(backward(empty, y, net, LossKind::LogLoss), UsageError);
  Rng rng(1);
  const ForwardTape tape = forward_tape(random_batch(3, 2, 2, rng), net);
  CHECK_THROWS_AS(backward(tape, y, net, LossKind::LogLoss), ShapeError);
  const LstmNetwork other(NetworkConfig{2, {5}, 8});
  const std::vector<int> y3{1, 0, 1};
  CHECK_THROWS_AS(backward(tape, y3, other, LossKind::LogLoss), UsageError);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  Vector w{0.3, -1.2, 4.0};
  const Vector before = w;
  std::vector<std::span<double>> params{std::span<double>(w)};
  AdamState st = AdamState::zeros_like(params);
  const std::vector<Vector> g{Vector(3, 0.0)};
  for (std::size_t t = 1; t <= 5; ++t) {
    adam_step(params, g, st, t, AdamConfig{});
  }
  CHECK(w == before);
}

TEST_CASE("first adam step closed form and sign symmetry") {
  for (const double g0 : {0.1, -3.0, 1e-4}) {
    Vector a{1.0};
    Vector b{1.0};
    std::vector<std::span<double>> pa{std::span<double>(a)};
    std::vector<std::span<double>> pb{std::span<double>(b)};
    AdamState sa = AdamState::zeros_like(pa);
    AdamState sb = AdamState::zeros_like(pb);
    const AdamConfig cfg;
    adam_step(pa, std::vector<Vector>{Vector{g0}}, sa, 1, cfg);
    adam_step(pb, std::vector<Vector>{Vector{-g0}}, sb, 1, cfg);
    // m̂ = g and v̂ = g² after bias correction.
    const double expected = 1.0 - cfg.learning_rate * g0 / (std::fabs(g0) + cfg.epsilon);
    CHECK(a[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(a[0] - 1.0 == doctest::Approx(-(b[0] - 1.0)).epsilon(1e-14));
  }
}

TEST_CASE("adam with zero learning rate is the identity") {
  Rng rng(3);
  Vector w{0.5, 0.25};
  const Vector before = w;
  std::vector<std::span<double>> params{std::span<double>(w)};
  AdamState st = AdamState::zeros_like(params);
  AdamConfig cfg;
  cfg.learning_rate = 0.0;
  for (std::size_t t = 1; t <= 20; ++t) {
    adam_step(params, std::vector<Vector>{Vector{rng.normal(), rng.normal()}}, st, t, cfg);
  }
  CHECK(w == before);
}

TEST_CASE("adam argument errors") {
  Vector w{1.0, 2.0};
  std::vector<std::span<double>> params{std::span<double>(w)};
  AdamState st = AdamState::zeros_like(params);
  CHECK_THROWS_AS(adam_step(params, std::vector<Vector>{Vector{1.0}}, st, 1, AdamConfig{}),
                  ShapeError);
  CHECK_THROWS_AS(adam_step(params, std::vector<Vector>{}, st, 1, AdamConfig{}), ShapeError);
  CHECK_THROWS_AS(adam_step(params, std::vector<Vector>{Vector{1.0, 1.0}}, st, 0, AdamConfig{}),
                  DomainError);
}

TEST_CASE("training configuration validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = TrainConfig{};
  cfg.adam.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = TrainConfig{};
  cfg.adam.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = TrainConfig{};
  cfg.adam.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("zero learning rate training keeps the weights") {
  const Dataset ds = separable_sequences(30, 1);
  LstmNetwork net(NetworkConfig{2, {3}, 4});
  const LstmNetwork before = net;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 7;
  cfg.adam.learning_rate = 0.0;
  const TrainReport r = train(net, ds, cfg);
  CHECK(net == before);
  CHECK(r.steps == 5);  // ceil(30 / 7)
  CHECK(r.epoch_loss.size() == 1);
}

TEST_CASE("training is deterministic and reduces loss on a separable task") {
  const Dataset ds = separable_sequences(80, 2);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 16;
  cfg.adam.learning_rate = 0.01;
  cfg.seed = 9;
  LstmNetwork a(NetworkConfig{2, {4}, 3});
  LstmNetwork b(NetworkConfig{2, {4}, 3});
  std::size_t hooks = 0;
  const TrainReport ra = train(a, ds, cfg, [&](std::size_t e) { hooks = e; });
  const TrainReport rb = train(b, ds, cfg);
  CHECK(a == b);
  CHECK(ra.epoch_loss == rb.epoch_loss);
  CHECK(hooks == 40);
  CHECK(ra.steps == 40 * 5);
  CHECK(ra.epoch_loss.back() < 0.5 * ra.epoch_loss.front());
  const Vector p = forward(ds.features, a);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    correct += static_cast<std::size_t>((p[i] >= 0.5) == (ds.labels[i] == 1));
  }
  CHECK(correct >= 76);

  cfg.seed = 10;
  LstmNetwork c(NetworkConfig{2, {4}, 3});
  train(c, ds, cfg);
  CHECK_FALSE(c == a);
}

TEST_CASE("non-finite loss aborts with the epoch and completed losses") {
  Dataset ds = separable_sequences(10, 3);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 5;
  NanAfter model(4);  // two clean epochs of two batches each
  try {
    train(model, ds, cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() == 3);
    CHECK(e.losses() == std::vector<double>{0.25, 0.25});
  }
}

TEST_CASE("training data validation") {
  Dataset ds = separable_sequences(10, 3);
  ds.labels[2] = 2;
  LstmNetwork net(NetworkConfig{2, {3}, 4});
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(net, ds, cfg), DomainError);
}

TEST_CASE("loss stream format") {
  TrainReport r;
  r.epoch_loss = {0.5, 0.25};
  std::ostringstream s;
  write_loss_stream(s, r);
  CHECK(s.str() == "epoch,loss\n1,0.5\n2,0.25\n");
}

TEST_CASE("finite_diff on simple functions") {
  const std::vector<double> theta{3.0};
  const Vector g = finite_diff([](std::span<const double> t) { return t[0] * t[0]; }, theta, 1e-4);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-9));

  // Central differences are second order: halving h cuts the error about 4x.
  const std::vector<double> x{0.7};
  const auto f = [](std::span<const double> t) { return std::exp(t[0]); };
  const double exact = std::exp(0.7);
  const double e1 = std::fabs(finite_diff(f, x, 1e-2)[0] - exact);
  const double e2 = std::fabs(finite_diff(f, x, 5e-3)[0] - exact);
  CHECK(e1 / e2 > 3.5);
  CHECK(e1 / e2 < 4.5);

  const std::vector<double> xy{1.0, 2.0};
  const Vector gxy = finite_diff(
      [](std::span<const double> t) { return t[0] * t[1] + t[1]; }, xy, 1e-5);
  CHECK(gxy[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(gxy[1] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("k-fold partitions") {
  const auto f10 = make_folds(10, 5, 1);
  REQUIRE(f10.size() == 5);
  for (const auto& f : f10) {
    CHECK(f.size() == 2);
  }
  const auto f11 = make_folds(11, 5, 1);
  std::vector<std::size_t> sizes;
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& f : f11) {
    sizes.push_back(f.size());
    seen.insert(f.begin(), f.end());
    total += f.size();
  }
  CHECK(sizes == std::vector<std::size_t>{3, 2, 2, 2, 2});
  CHECK(total == 11);
  CHECK(seen.size() == 11);
  CHECK(*seen.rbegin() == 10);
  CHECK(make_folds(11, 5, 1) == f11);
  CHECK(make_folds(11, 5, 2) != f11);
  CHECK_THROWS_AS(make_folds(3, 5, 1), DomainError);
  CHECK_THROWS_AS(make_folds(10, 1, 1), DomainError);
}

TEST_CASE("stratified folds balance the classes") {
  Labels y(23, 0);
  for (std::size_t i = 0; i < 8; ++i) {
    y[i * 2] = 1;
  }
  const auto folds = make_stratified_folds(y, 4, 7);
  REQUIRE(folds.size() == 4);
  std::set<std::size_t> seen;
  std::vector<std::size_t> pos;
  std::vector<std::size_t> sz;
  for (const auto& f : folds) {
    seen.insert(f.begin(), f.end());
    std::size_t p = 0;
    for (const std::size_t i : f) {
      p += static_cast<std::size_t>(y[i]);
    }
    pos.push_back(p);
    sz.push_back(f.size());
  }
  CHECK(seen.size() == 23);
  CHECK(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1);
  CHECK(*std::max_element(sz.begin(), sz.end()) - *std::min_element(sz.begin(), sz.end()) <= 1);
  CHECK(make_stratified_folds(y, 4, 7) == folds);
}

TEST_CASE("kfold_cv visits each fold once and summarises") {
  const Dataset ds = separable_sequences(20, 4);
  std::vector<std::size_t> test_sizes;
  std::vector<double> accs;
  const CvResult r = kfold_cv(ds, 4, 5, [&](const Dataset& tr, const Dataset& te, std::size_t) {
    CHECK(tr.size() + te.size() == 20);
    test_sizes.push_back(te.size());
    // Score = first feature; a fixed, fold-dependent quality.
    Vector s(te.size());
    for (std::size_t i = 0; i < te.size(); ++i) {
      s[i] = 1.0 / (1.0 + std::exp(-te.features(i, 0, 0)));
    }
    EvalReport ev = evaluate(s, te.labels);
    accs.push_back(ev.acc);
    return ev;
  });
  CHECK(test_sizes == std::vector<std::size_t>{5, 5, 5, 5});
  REQUIRE(r.folds.size() == 4);
  const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) / 4.0;
  double ss = 0.0;
  for (const double a : accs) {
    ss += (a - mean) * (a - mean);
  }
  CHECK(r.mean.acc == doctest::Approx(mean).epsilon(1e-14));
  CHECK(r.stddev.acc == doctest::Approx(std::sqrt(ss / 3.0)).epsilon(1e-12));
}
