#include "finrisk/lstm_net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "finrisk/errors.hpp"

namespace finrisk {

namespace {

constexpr std::size_t kInferenceChunk = 256;

void check_gate_shapes(const GateWeights& g, std::size_t input, std::size_t hidden) {
  if (g.w.rows() != hidden || g.w.cols() != input || g.u.rows() != hidden ||
      g.u.cols() != hidden || g.b.size() != hidden) {
    throw ShapeError("gate weights do not match layer shape (input " + std::to_string(input) +
                     ", hidden " + std::to_string(hidden) + ")");
  }
}

// preact = x·wᵀ + h·uᵀ + b, then the activation, in place.
Matrix gate_activation(const Matrix& x, const Matrix& h_prev, const GateWeights& g, bool use_tanh) {
  Matrix z = matmul_nt(x, g.w);
  const Matrix r = matmul_nt(h_prev, g.u);
  const std::size_t hidden = g.b.size();
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto zr = z.row(i);
    const auto rr = r.row(i);
    for (std::size_t j = 0; j < hidden; ++j) {
      const double v = zr[j] + rr[j] + g.b[j];
      zr[j] = use_tanh ? std::tanh(v) : detail::sigmoid(v);
    }
  }
  return z;
}

nlohmann::json vec_json(std::span<const double> v) { return nlohmann::json(std::vector<double>(v.begin(), v.end())); }

void read_into(const nlohmann::json& j, std::span<double> dst, const std::string& what) {
  if (!j.is_array() || j.size() != dst.size()) {
    throw ValidationError("model block '" + what + "' has wrong length");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = j[i].get<double>();
  }
}

}  // namespace

LstmLayerParams::LstmLayerParams(std::size_t input_dim, std::size_t hidden_dim)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) {
    throw DomainError("LSTM layer dimensions must be >= 1");
  }
  gates_.reserve(kGateCount);
  for (std::size_t g = 0; g < kGateCount; ++g) {
    gates_.push_back({Matrix(hidden_dim, input_dim), Matrix(hidden_dim, hidden_dim),
                      Vector(hidden_dim, 0.0)});
  }
}

LstmLayerParams LstmLayerParams::glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmLayerParams p(input_dim, hidden_dim);
  for (auto& g : p.gates_) {
    g.w = init_weights(hidden_dim, input_dim, rng);
    g.u = init_weights(hidden_dim, hidden_dim, rng);
  }
  return p;
}

std::size_t LstmLayerParams::param_count() const noexcept {
  const std::size_t h = hidden_dim_;
  return kGateCount * (h * (h + input_dim_) + h);
}

std::vector<std::span<double>> LstmLayerParams::blocks() {
  std::vector<std::span<double>> out;
  for (auto& g : gates_) {
    out.emplace_back(g.w.data());
    out.emplace_back(g.u.data());
    out.emplace_back(g.b);
  }
  return out;
}

std::vector<std::span<const double>> LstmLayerParams::blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& g : gates_) {
    out.emplace_back(g.w.data());
    out.emplace_back(g.u.data());
    out.emplace_back(g.b);
  }
  return out;
}

bool operator==(const GateWeights& a, const GateWeights& b) {
  return a.w == b.w && a.u == b.u && a.b == b.b;
}

bool operator==(const LstmLayerParams& a, const LstmLayerParams& b) {
  return a.input_dim_ == b.input_dim_ && a.hidden_dim_ == b.hidden_dim_ && a.gates_ == b.gates_;
}

std::vector<std::span<double>> LstmWeights::blocks() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers) {
    auto lb = layer.blocks();
    out.insert(out.end(), lb.begin(), lb.end());
  }
  out.emplace_back(head.w);
  out.emplace_back(&head.b, 1);
  return out;
}

std::vector<std::span<const double>> LstmWeights::blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& layer : layers) {
    auto lb = layer.blocks();
    out.insert(out.end(), lb.begin(), lb.end());
  }
  out.emplace_back(head.w);
  out.emplace_back(&head.b, 1);
  return out;
}

void NetworkConfig::validate() const {
  if (input_dim == 0) {
    throw DomainError("input_dim must be >= 1");
  }
  if (hidden_dims.empty()) {
    throw DomainError("hidden_dims must be non-empty");
  }
  if (std::any_of(hidden_dims.begin(), hidden_dims.end(), [](std::size_t h) { return h == 0; })) {
    throw DomainError("every hidden width must be >= 1");
  }
}

std::vector<std::size_t> param_count(const NetworkConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> counts;
  std::size_t in = cfg.input_dim;
  for (const std::size_t h : cfg.hidden_dims) {
    counts.push_back(kGateCount * (h * (h + in) + h));
    in = h;
  }
  counts.push_back(in + 1);
  return counts;
}

LstmNetwork::LstmNetwork(NetworkConfig cfg) : config_(std::move(cfg)) {
  config_.validate();
  Rng rng(config_.seed);
  std::size_t in = config_.input_dim;
  for (const std::size_t h : config_.hidden_dims) {
    weights_.layers.push_back(LstmLayerParams::glorot(in, h, rng));
    in = h;
  }
  const Matrix head = init_weights(1, in, rng);
  weights_.head.w.assign(head.data().begin(), head.data().end());
  weights_.head.b = 0.0;
}

LstmNetwork::LstmNetwork(NetworkConfig cfg, LstmWeights weights)
    : config_(std::move(cfg)), weights_(std::move(weights)) {
  config_.validate();
  if (weights_.layers.size() != config_.hidden_dims.size()) {
    throw ShapeError("layer count does not match config");
  }
  std::size_t in = config_.input_dim;
  for (std::size_t k = 0; k < weights_.layers.size(); ++k) {
    const auto& layer = weights_.layers[k];
    if (layer.input_dim() != in || layer.hidden_dim() != config_.hidden_dims[k]) {
      throw ShapeError("layer " + std::to_string(k) + " shape does not match config");
    }
    for (std::size_t g = 0; g < kGateCount; ++g) {
      check_gate_shapes(layer.gate(static_cast<Gate>(g)), in, layer.hidden_dim());
    }
    in = layer.hidden_dim();
  }
  if (weights_.head.w.size() != in) {
    throw ShapeError("head width does not match top layer");
  }
}

LstmNetwork LstmNetwork::zeros(NetworkConfig cfg) {
  cfg.validate();
  LstmWeights w;
  std::size_t in = cfg.input_dim;
  for (const std::size_t h : cfg.hidden_dims) {
    w.layers.emplace_back(in, h);
    in = h;
  }
  w.head.w.assign(in, 0.0);
  return LstmNetwork(std::move(cfg), std::move(w));
}

std::size_t LstmNetwork::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& block : weights_.blocks()) {
    for ([[maybe_unused]] const double v : block) {
      ++n;
    }
  }
  return n;
}

LstmWeights LstmNetwork::zeros_like() const {
  LstmWeights w;
  for (const auto& layer : weights_.layers) {
    w.layers.emplace_back(layer.input_dim(), layer.hidden_dim());
  }
  w.head.w.assign(weights_.head.w.size(), 0.0);
  return w;
}

StepCache step_forward(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                       const LstmLayerParams& p) {
  if (x.cols() != p.input_dim()) {
    throw ShapeError("input width " + std::to_string(x.cols()) + " does not match layer input " +
                     std::to_string(p.input_dim()));
  }
  if (h_prev.cols() != p.hidden_dim() || c_prev.cols() != p.hidden_dim() ||
      h_prev.rows() != x.rows() || c_prev.rows() != x.rows()) {
    throw ShapeError("previous state shape does not match layer hidden width " +
                     std::to_string(p.hidden_dim()));
  }
  Matrix in_gate = gate_activation(x, h_prev, p.gate(Gate::Input), false);
  Matrix forget = gate_activation(x, h_prev, p.gate(Gate::Forget), false);
  Matrix cand = gate_activation(x, h_prev, p.gate(Gate::Cell), true);
  Matrix out_gate = gate_activation(x, h_prev, p.gate(Gate::Output), false);

  Matrix c(x.rows(), p.hidden_dim());
  Matrix tanh_c(x.rows(), p.hidden_dim());
  Matrix h(x.rows(), p.hidden_dim());
  const auto n = c.size();
  const double* fi = forget.data().data();
  const double* ii = in_gate.data().data();
  const double* gi = cand.data().data();
  const double* oi = out_gate.data().data();
  const double* cp = c_prev.data().data();
  double* co = c.data().data();
  double* tc = tanh_c.data().data();
  double* ho = h.data().data();
  for (std::size_t k = 0; k < n; ++k) {
    co[k] = fi[k] * cp[k] + ii[k] * gi[k];
    tc[k] = std::tanh(co[k]);
    ho[k] = oi[k] * tc[k];
  }
  return StepCache{x,
                   h_prev,
                   c_prev,
                   std::move(in_gate),
                   std::move(forget),
                   std::move(cand),
                   std::move(out_gate),
                   std::move(c),
                   std::move(tanh_c),
                   std::move(h)};
}

std::pair<CellState, GateCache> cell_forward(std::span<const double> x, const CellState& prev,
                                             const LstmLayerParams& p) {
  if (x.size() != p.input_dim()) {
    throw ShapeError("input length " + std::to_string(x.size()) + " does not match layer input " +
                     std::to_string(p.input_dim()));
  }
  if (prev.h.size() != p.hidden_dim() || prev.c.size() != p.hidden_dim()) {
    throw ShapeError("previous state length does not match hidden width " +
                     std::to_string(p.hidden_dim()));
  }
  const Matrix xm(1, x.size(), Vector(x.begin(), x.end()));
  const Matrix hm(1, prev.h.size(), prev.h);
  const Matrix cm(1, prev.c.size(), prev.c);
  const StepCache s = step_forward(xm, hm, cm, p);
  auto to_vec = [](const Matrix& m) { return Vector(m.data().begin(), m.data().end()); };
  CellState next{to_vec(s.h), to_vec(s.c)};
  GateCache cache{to_vec(s.input), to_vec(s.forget), to_vec(s.candidate),
                  to_vec(s.output), prev.c, to_vec(s.c)};
  return {std::move(next), std::move(cache)};
}

ForwardTape forward_tape(const Tensor3& batch, const LstmNetwork& net) {
  const auto& cfg = net.config();
  if (batch.features() != cfg.input_dim) {
    throw ShapeError("feature dimension " + std::to_string(batch.features()) +
                     " does not match network input " + std::to_string(cfg.input_dim));
  }
  ForwardTape tape;
  tape.batch = batch.samples();
  tape.steps = batch.steps();
  if (batch.empty()) {
    return tape;
  }
  const std::size_t n = batch.samples();
  const auto& layers = net.weights().layers;
  tape.layers.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& p = layers[l];
    Matrix h(n, p.hidden_dim());
    Matrix c(n, p.hidden_dim());
    auto& caches = tape.layers[l];
    caches.reserve(batch.steps());
    for (std::size_t t = 0; t < batch.steps(); ++t) {
      const Matrix x = l == 0 ? batch.step_matrix(t) : tape.layers[l - 1][t].h;
      caches.push_back(step_forward(x, h, c, p));
      h = caches.back().h;
      c = caches.back().c;
    }
  }
  const Matrix& top = tape.layers.back().back().h;
  const auto& head = net.weights().head;
  tape.logits.resize(n);
  tape.probs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hr = top.row(i);
    double z = 0.0;
    for (std::size_t j = 0; j < hr.size(); ++j) {
      z += hr[j] * head.w[j];
    }
    z += head.b;
    tape.logits[i] = z;
    tape.probs[i] = detail::sigmoid(z);
  }
  return tape;
}

Vector forward(const Tensor3& batch, const LstmNetwork& net) {
  if (batch.features() != net.config().input_dim) {
    throw ShapeError("feature dimension " + std::to_string(batch.features()) +
                     " does not match network input " + std::to_string(net.config().input_dim));
  }
  Vector out;
  out.reserve(batch.samples());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < batch.samples(); start += kInferenceChunk) {
    const std::size_t end = std::min(batch.samples(), start + kInferenceChunk);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) {
      idx[i - start] = i;
    }
    const ForwardTape tape = forward_tape(batch.select(idx), net);
    out.insert(out.end(), tape.probs.begin(), tape.probs.end());
  }
  return out;
}

nlohmann::json to_json(const LstmNetwork& net) {
  nlohmann::json j;
  j["input_dim"] = net.config().input_dim;
  j["hidden_dims"] = net.config().hidden_dims;
  j["seed"] = net.config().seed;
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& layer : net.weights().layers) {
    nlohmann::json lj;
    for (std::size_t g = 0; g < kGateCount; ++g) {
      const auto& gw = layer.gate(static_cast<Gate>(g));
      lj[kGateNames[g]] = {{"w", vec_json(gw.w.data())}, {"u", vec_json(gw.u.data())}, {"b", gw.b}};
    }
    layers.push_back(std::move(lj));
  }
  j["head"] = {{"w", net.weights().head.w}, {"b", net.weights().head.b}};
  return j;
}

LstmNetwork lstm_from_json(const nlohmann::json& j) {
  try {
    NetworkConfig cfg;
    cfg.input_dim = j.at("input_dim").get<std::size_t>();
    cfg.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    LstmNetwork net = LstmNetwork::zeros(cfg);
    const auto& layers = j.at("layers");
    if (layers.size() != cfg.hidden_dims.size()) {
      throw ValidationError("model has " + std::to_string(layers.size()) + " layers, config says " +
                            std::to_string(cfg.hidden_dims.size()));
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = net.weights().layers[l];
      for (std::size_t g = 0; g < kGateCount; ++g) {
        auto& gw = layer.gate(static_cast<Gate>(g));
        const auto& gj = layers[l].at(kGateNames[g]);
        read_into(gj.at("w"), gw.w.data(), kGateNames[g]);
        read_into(gj.at("u"), gw.u.data(), kGateNames[g]);
        read_into(gj.at("b"), gw.b, kGateNames[g]);
      }
    }
    read_into(j.at("head").at("w"), net.weights().head.w, "head");
    net.weights().head.b = j.at("head").at("b").get<double>();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed LSTM model: ") + e.what());
  }
}

}  // namespace finrisk
