// SPDX-License-Identifier: Apache-2.0
//
// Single-timestep LSTM and GRU cells with hand-derived backward passes.
//
// LSTM (gates f, i, o are sigmoid; act is tanh or relu):
//   f = sigma(b_f + V_f x + W_f h_prev)
//   i = sigma(b_i + V_i x + W_i h_prev)
//   o = sigma(b_o + V_o x + W_o h_prev)
//   c~ = act(b_c + V_c x + W_c h_prev)
//   c = f * c_prev + i * c~
//   h = act(c) * o
//
// GRU:
//   r = sigma(b_r + V_r x + W_r h_prev)
//   z = sigma(b_z + V_z x + W_z h_prev)
//   h~ = act(b_c + V_c x + W_c (r * h_prev))
//   h = (1 - z) * h_prev + z * h~

#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "grnn/numerics.hpp"

namespace grnn {

/// Weights of one gate: V (units x input_dim), W (units x units), b (units).
struct GateParams {
  Matrix input_weights;
  Matrix recurrent_weights;
  Vector bias;

  GateParams() = default;
  GateParams(std::size_t input_dim, std::size_t units)
      : input_weights(units, input_dim), recurrent_weights(units, units), bias(units, 0.0) {}

  std::size_t units() const noexcept { return bias.size(); }
  std::size_t input_dim() const noexcept { return input_weights.cols(); }

  /// b + V x + W h
  void pre_activation(std::span<const double> x, std::span<const double> h,
                      std::span<double> out) const noexcept {
    std::copy(bias.begin(), bias.end(), out.begin());
    gemv_acc(input_weights, x, out);
    gemv_acc(recurrent_weights, h, out);
  }

  friend bool operator==(const GateParams&, const GateParams&) = default;
};

enum LstmGate : std::size_t { kForget = 0, kInput = 1, kOutput = 2, kCandidate = 3 };
enum GruGate : std::size_t { kReset = 0, kUpdate = 1, kGruCandidate = 2 };

template <std::size_t NGates>
struct CellParams {
  std::array<GateParams, NGates> gates;

  CellParams() = default;
  CellParams(std::size_t input_dim, std::size_t units) {
    for (auto& g : gates) g = GateParams(input_dim, units);
  }

  std::size_t units() const noexcept { return gates[0].units(); }
  std::size_t input_dim() const noexcept { return gates[0].input_dim(); }

  void check_consistent() const {
    for (const auto& g : gates) {
      if (g.input_weights.rows() != units() || g.input_weights.cols() != input_dim() ||
          g.recurrent_weights.rows() != units() || g.recurrent_weights.cols() != units() ||
          g.bias.size() != units()) {
        throw ShapeError("cell gates have inconsistent shapes");
      }
    }
  }

  friend bool operator==(const CellParams&, const CellParams&) = default;
};

using LstmParams = CellParams<4>;
using GruParams = CellParams<3>;

struct LstmState {
  Vector h;
  Vector c;
  static LstmState zeros(std::size_t units) { return {Vector(units, 0.0), Vector(units, 0.0)}; }
};

struct GruState {
  Vector h;
  static GruState zeros(std::size_t units) { return {Vector(units, 0.0)}; }
};

/// Everything the LSTM backward pass needs from one forward step.
struct LstmTape {
  Vector x, h_prev, c_prev;
  Vector f, i, o;
  Vector candidate_pre, candidate;  // c~ before and after act
  Vector c, act_c;                  // c_t and act(c_t)
  Activation activation = Activation::Tanh;
};

struct GruTape {
  Vector x, h_prev;
  Vector r, z;
  Vector reset_h;                   // r * h_prev
  Vector candidate_pre, candidate;  // h~ before and after act
  Activation activation = Activation::Tanh;
};

/// Gradients w.r.t. the step inputs; parameter gradients are accumulated
/// into the caller's buffer.
struct LstmStepGrads {
  Vector dx, dh_prev, dc_prev;
};
struct GruStepGrads {
  Vector dx, dh_prev;
};

namespace detail {
inline void check_step_shapes(std::size_t input_dim, std::size_t units, std::size_t x_len,
                              std::size_t h_len, const char* what) {
  if (x_len != input_dim || h_len != units) {
    throw ShapeError(std::string(what) + ": got x[" + std::to_string(x_len) + "], h[" +
                     std::to_string(h_len) + "] for cell with input_dim " +
                     std::to_string(input_dim) + ", units " + std::to_string(units));
  }
}
}  // namespace detail

inline std::pair<LstmState, LstmTape> lstm_forward(const LstmParams& p, std::span<const double> x,
                                                   const LstmState& prev,
                                                   Activation act = Activation::Tanh) {
  const std::size_t n = p.units();
  detail::check_step_shapes(p.input_dim(), n, x.size(), prev.h.size(), "lstm_forward");
  if (prev.c.size() != n) throw ShapeError("lstm_forward: cell state length mismatch");

  LstmTape tape;
  tape.activation = act;
  tape.x.assign(x.begin(), x.end());
  tape.h_prev = prev.h;
  tape.c_prev = prev.c;
  tape.f.resize(n);
  tape.i.resize(n);
  tape.o.resize(n);
  tape.candidate_pre.resize(n);
  tape.candidate.resize(n);
  tape.c.resize(n);
  tape.act_c.resize(n);

  p.gates[kForget].pre_activation(x, prev.h, tape.f);
  p.gates[kInput].pre_activation(x, prev.h, tape.i);
  p.gates[kOutput].pre_activation(x, prev.h, tape.o);
  p.gates[kCandidate].pre_activation(x, prev.h, tape.candidate_pre);

  LstmState next{Vector(n), Vector(n)};
  for (std::size_t k = 0; k < n; ++k) {
    tape.f[k] = sigmoid(tape.f[k]);
    tape.i[k] = sigmoid(tape.i[k]);
    tape.o[k] = sigmoid(tape.o[k]);
    tape.candidate[k] = activate(act, tape.candidate_pre[k]);
    tape.c[k] = tape.f[k] * prev.c[k] + tape.i[k] * tape.candidate[k];
    tape.act_c[k] = activate(act, tape.c[k]);
    next.c[k] = tape.c[k];
    next.h[k] = tape.act_c[k] * tape.o[k];
  }
  return {std::move(next), std::move(tape)};
}

/// Backward through one LSTM step. `dh` and `dc` are the total incoming
/// gradients on h_t and c_t. Parameter gradients are added into `grads`.
inline LstmStepGrads lstm_backward(const LstmTape& tape, const LstmParams& p,
                                   std::span<const double> dh, std::span<const double> dc,
                                   LstmParams& grads) {
  const std::size_t n = p.units();
  if (dh.size() != n || dc.size() != n || tape.c.size() != n) {
    throw ShapeError("lstm_backward: gradient length mismatch");
  }
  const Activation act = tape.activation;

  std::array<Vector, 4> dpre;
  for (auto& d : dpre) d.assign(n, 0.0);
  LstmStepGrads out{Vector(p.input_dim(), 0.0), Vector(n, 0.0), Vector(n, 0.0)};

  for (std::size_t k = 0; k < n; ++k) {
    const double dc_total =
        dc[k] + dh[k] * tape.o[k] * activate_grad(act, tape.c[k], tape.act_c[k]);
    dpre[kOutput][k] = dh[k] * tape.act_c[k] * sigmoid_grad_from_output(tape.o[k]);
    dpre[kCandidate][k] =
        dc_total * tape.i[k] * activate_grad(act, tape.candidate_pre[k], tape.candidate[k]);
    dpre[kInput][k] = dc_total * tape.candidate[k] * sigmoid_grad_from_output(tape.i[k]);
    dpre[kForget][k] = dc_total * tape.c_prev[k] * sigmoid_grad_from_output(tape.f[k]);
    out.dc_prev[k] = dc_total * tape.f[k];
  }

  for (std::size_t g = 0; g < 4; ++g) {
    auto& gg = grads.gates[g];
    outer_acc(dpre[g], tape.x, gg.input_weights);
    outer_acc(dpre[g], tape.h_prev, gg.recurrent_weights);
    axpy(1.0, dpre[g], gg.bias);
    gemv_t_acc(p.gates[g].input_weights, dpre[g], out.dx);
    gemv_t_acc(p.gates[g].recurrent_weights, dpre[g], out.dh_prev);
  }
  return out;
}

inline std::pair<GruState, GruTape> gru_forward(const GruParams& p, std::span<const double> x,
                                                const GruState& prev,
                                                Activation act = Activation::Tanh) {
  const std::size_t n = p.units();
  detail::check_step_shapes(p.input_dim(), n, x.size(), prev.h.size(), "gru_forward");

  GruTape tape;
  tape.activation = act;
  tape.x.assign(x.begin(), x.end());
  tape.h_prev = prev.h;
  tape.r.resize(n);
  tape.z.resize(n);
  tape.reset_h.resize(n);
  tape.candidate_pre.resize(n);
  tape.candidate.resize(n);

  p.gates[kReset].pre_activation(x, prev.h, tape.r);
  p.gates[kUpdate].pre_activation(x, prev.h, tape.z);
  for (std::size_t k = 0; k < n; ++k) {
    tape.r[k] = sigmoid(tape.r[k]);
    tape.z[k] = sigmoid(tape.z[k]);
    tape.reset_h[k] = tape.r[k] * prev.h[k];
  }
  p.gates[kGruCandidate].pre_activation(x, tape.reset_h, tape.candidate_pre);

  GruState next{Vector(n)};
  for (std::size_t k = 0; k < n; ++k) {
    tape.candidate[k] = activate(act, tape.candidate_pre[k]);
    next.h[k] = (1.0 - tape.z[k]) * prev.h[k] + tape.z[k] * tape.candidate[k];
  }
  return {std::move(next), std::move(tape)};
}

inline GruStepGrads gru_backward(const GruTape& tape, const GruParams& p,
                                 std::span<const double> dh, GruParams& grads) {
  const std::size_t n = p.units();
  if (dh.size() != n || tape.z.size() != n) {
    throw ShapeError("gru_backward: gradient length mismatch");
  }
  const Activation act = tape.activation;

  Vector d_reset(n, 0.0), d_update(n, 0.0), d_cand(n, 0.0);
  GruStepGrads out{Vector(p.input_dim(), 0.0), Vector(n, 0.0)};

  for (std::size_t k = 0; k < n; ++k) {
    d_update[k] = dh[k] * (tape.candidate[k] - tape.h_prev[k]) * sigmoid_grad_from_output(tape.z[k]);
    d_cand[k] = dh[k] * tape.z[k] * activate_grad(act, tape.candidate_pre[k], tape.candidate[k]);
    out.dh_prev[k] = dh[k] * (1.0 - tape.z[k]);
  }

  // The candidate sees h_prev only through r * h_prev.
  Vector d_reset_h(n, 0.0);
  gemv_t_acc(p.gates[kGruCandidate].recurrent_weights, d_cand, d_reset_h);
  for (std::size_t k = 0; k < n; ++k) {
    d_reset[k] = d_reset_h[k] * tape.h_prev[k] * sigmoid_grad_from_output(tape.r[k]);
    out.dh_prev[k] += d_reset_h[k] * tape.r[k];
  }

  auto& gc = grads.gates[kGruCandidate];
  outer_acc(d_cand, tape.x, gc.input_weights);
  outer_acc(d_cand, tape.reset_h, gc.recurrent_weights);
  axpy(1.0, d_cand, gc.bias);
  gemv_t_acc(p.gates[kGruCandidate].input_weights, d_cand, out.dx);

  const std::array<std::pair<std::size_t, const Vector*>, 2> gated{
      {{kReset, &d_reset}, {kUpdate, &d_update}}};
  for (const auto& [g, d] : gated) {
    auto& gg = grads.gates[g];
    outer_acc(*d, tape.x, gg.input_weights);
    outer_acc(*d, tape.h_prev, gg.recurrent_weights);
    axpy(1.0, *d, gg.bias);
    gemv_t_acc(p.gates[g].input_weights, *d, out.dx);
    gemv_t_acc(p.gates[g].recurrent_weights, *d, out.dh_prev);
  }
  return out;
}

}  // namespace grnn
