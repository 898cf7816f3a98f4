// Backpropagation through time for the stacked LSTM classifier.

#include <algorithm>
#include <string>

#include "finrisk/errors.hpp"
#include "finrisk/trainer.hpp"

namespace finrisk {

namespace {

void add_column_sums(Vector& out, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      out[j] += row[j];
    }
  }
}

void add_into(Matrix& acc, const Matrix& m) {
  auto a = acc.data();
  const auto b = m.data();
  for (std::size_t k = 0; k < a.size(); ++k) {
    a[k] += b[k];
  }
}

}  // namespace

LstmWeights backward(const ForwardTape& tape, std::span<const int> labels, const LstmNetwork& net,
                     LossKind kind) {
  if (tape.empty()) {
    throw UsageError("backward called without a forward tape");
  }
  const auto& layers = net.weights().layers;
  bool matches = tape.layers.size() == layers.size() && tape.probs.size() == tape.batch;
  for (std::size_t l = 0; matches && l < layers.size(); ++l) {
    matches = tape.layers[l].size() == tape.steps &&
              std::all_of(tape.layers[l].begin(), tape.layers[l].end(), [&](const StepCache& s) {
                return s.h.cols() == layers[l].hidden_dim() && s.h.rows() == tape.batch;
              });
  }
  if (!matches) {
    throw UsageError("forward tape does not belong to this network");
  }
  if (labels.size() != tape.batch) {
    throw ShapeError("label count " + std::to_string(labels.size()) + " does not match batch " +
                     std::to_string(tape.batch));
  }
  const std::size_t n = tape.batch;
  const std::size_t steps = tape.steps;
  const double inv_n = 1.0 / static_cast<double>(n);
  LstmWeights grads = net.zeros_like();

  // Dense head.
  const Matrix& top_h = tape.layers.back().back().h;
  const auto& head = net.weights().head;
  const std::size_t top = head.w.size();
  std::vector<Matrix> dh_above(steps, Matrix(n, top));
  for (std::size_t i = 0; i < n; ++i) {
    const double dz = loss_logit_grad(tape.probs[i], labels[i], kind) * inv_n;
    const auto hr = top_h.row(i);
    auto dh = dh_above.back().row(i);
    for (std::size_t j = 0; j < top; ++j) {
      grads.head.w[j] += dz * hr[j];
      dh[j] = dz * head.w[j];
    }
    grads.head.b += dz;
  }

  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& p = layers[l];
    auto& g = grads.layers[l];
    const std::size_t hidden = p.hidden_dim();
    std::vector<Matrix> dh_below;
    if (l > 0) {
      dh_below.assign(steps, Matrix(n, p.input_dim()));
    }
    Matrix dh_next(n, hidden);
    Matrix dc_next(n, hidden);
    Matrix dz_in(n, hidden);
    Matrix dz_forget(n, hidden);
    Matrix dz_cell(n, hidden);
    Matrix dz_out(n, hidden);
    for (std::size_t t = steps; t-- > 0;) {
      const StepCache& s = tape.layers[l][t];
      const std::size_t cells = n * hidden;
      const double* dha = dh_above[t].data().data();
      const double* i_g = s.input.data().data();
      const double* f_g = s.forget.data().data();
      const double* c_g = s.candidate.data().data();
      const double* o_g = s.output.data().data();
      const double* tc = s.tanh_c.data().data();
      const double* cp = s.c_prev.data().data();
      double* dhn = dh_next.data().data();
      double* dcn = dc_next.data().data();
      double* zi = dz_in.data().data();
      double* zf = dz_forget.data().data();
      double* zc = dz_cell.data().data();
      double* zo = dz_out.data().data();
      for (std::size_t k = 0; k < cells; ++k) {
        const double dh = dha[k] + dhn[k];
        const double dc = dcn[k] + dh * o_g[k] * (1.0 - tc[k] * tc[k]);
        zo[k] = dh * tc[k] * o_g[k] * (1.0 - o_g[k]);
        zi[k] = dc * c_g[k] * i_g[k] * (1.0 - i_g[k]);
        zc[k] = dc * i_g[k] * (1.0 - c_g[k] * c_g[k]);
        zf[k] = dc * cp[k] * f_g[k] * (1.0 - f_g[k]);
        dcn[k] = dc * f_g[k];
      }
      const Matrix* dz[kGateCount] = {&dz_in, &dz_forget, &dz_cell, &dz_out};
      dh_next.fill(0.0);
      for (std::size_t gi = 0; gi < kGateCount; ++gi) {
        const auto gate = static_cast<Gate>(gi);
        auto& gg = g.gate(gate);
        add_matmul_tn(gg.w, *dz[gi], s.x);
        add_matmul_tn(gg.u, *dz[gi], s.h_prev);
        add_column_sums(gg.b, *dz[gi]);
        add_into(dh_next, matmul(*dz[gi], p.gate(gate).u));
        if (l > 0) {
          add_into(dh_below[t], matmul(*dz[gi], p.gate(gate).w));
        }
      }
    }
    dh_above = std::move(dh_below);
  }
  return grads;
}

double loss_and_gradient(const LstmNetwork& net, const Tensor3& batch, std::span<const int> labels,
                         LossKind kind, LstmWeights& grads) {
  const ForwardTape tape = forward_tape(batch, net);
  grads = backward(tape, labels, net, kind);
  return loss(tape.probs, labels, kind);
}

double LstmTrainable::loss_and_gradient(const Tensor3& batch, std::span<const int> labels,
                                        LossKind kind, std::vector<Vector>& grads) {
  LstmWeights g = net_.zeros_like();
  const double value = finrisk::loss_and_gradient(net_, batch, labels, kind, g);
  const auto blocks = g.blocks();
  grads.resize(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    grads[b].assign(blocks[b].begin(), blocks[b].end());
  }
  return value;
}

}  // namespace finrisk
