// SPDX-License-Identifier: Apache-2.0
//
// Stacked recurrent networks (LSTM, GRU and mixed stacks) with a linear dense
// head on the top layer's final hidden state, plus full backpropagation
// through time.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "grnn/cells.hpp"
#include "grnn/numerics.hpp"

namespace grnn {

enum class CellKind : std::uint8_t { Lstm = 0, Gru = 1 };

inline const char* to_string(CellKind k) { return k == CellKind::Lstm ? "LSTM" : "GRU"; }

struct LayerSpec {
  CellKind kind = CellKind::Lstm;
  std::size_t units = 1;
  Activation activation = Activation::Tanh;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;

  std::size_t layer_input_dim(std::size_t k) const {
    return k == 0 ? input_dim : layers[k - 1].units;
  }

  void validate() const {
    if (layers.empty()) throw ShapeError("network needs at least one recurrent layer");
    if (input_dim == 0 || output_dim == 0) throw ShapeError("network dims must be >= 1");
    for (const auto& l : layers)
      if (l.units == 0) throw ShapeError("layer units must be >= 1");
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

using LayerParams = std::variant<LstmParams, GruParams>;

struct NetworkParams {
  std::vector<LayerParams> layers;
  Matrix head_weights;  // output_dim x last_units
  Vector head_bias;     // output_dim

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Gradients share the parameter layout.
using NetworkGrads = NetworkParams;

/// Zero-filled parameters shaped for `spec`.
inline NetworkParams zero_params(const NetworkSpec& spec) {
  spec.validate();
  NetworkParams p;
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    const auto in = spec.layer_input_dim(k);
    const auto units = spec.layers[k].units;
    if (spec.layers[k].kind == CellKind::Lstm)
      p.layers.emplace_back(LstmParams(in, units));
    else
      p.layers.emplace_back(GruParams(in, units));
  }
  p.head_weights = Matrix(spec.output_dim, spec.layers.back().units);
  p.head_bias.assign(spec.output_dim, 0.0);
  return p;
}

/// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1. The fans
/// are those of the fused kernel that stacks all gates of a cell, so each
/// gate's limit is sqrt(6 / (fan_in + gates * units)).
inline NetworkParams init_params(const NetworkSpec& spec, Rng& rng) {
  NetworkParams p = zero_params(spec);
  for (auto& layer : p.layers) {
    std::visit(
        [&](auto& cell) {
          const std::size_t fused = cell.gates.size() * cell.units();
          const double in_limit = glorot_limit(cell.input_dim(), fused);
          const double rec_limit = glorot_limit(cell.units(), fused);
          for (auto& g : cell.gates) {
            g.input_weights = uniform_matrix(rng, g.units(), g.input_dim(), in_limit);
            g.recurrent_weights = uniform_matrix(rng, g.units(), g.units(), rec_limit);
          }
          if constexpr (std::is_same_v<std::decay_t<decltype(cell)>, LstmParams>) {
            auto& b = cell.gates[kForget].bias;
            std::fill(b.begin(), b.end(), 1.0);
          }
        },
        layer);
  }
  p.head_weights = glorot_uniform(rng, spec.layers.back().units, spec.output_dim);
  return p;
}

/// Calls f(name, span) for every parameter tensor in a fixed canonical order.
/// The order is the serialization order and the optimizer's state order.
template <typename Params, typename F>
  requires std::is_same_v<std::remove_const_t<Params>, NetworkParams>
void for_each_tensor(Params& p, F&& f) {
  static constexpr std::string_view kLstmNames[] = {"f", "i", "o", "c"};
  static constexpr std::string_view kGruNames[] = {"r", "z", "c"};
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    std::visit(
        [&](auto& cell) {
          constexpr bool is_lstm =
              std::is_same_v<std::remove_const_t<std::remove_reference_t<decltype(cell)>>,
                             LstmParams>;
          const std::string prefix =
              "layer" + std::to_string(k) + (is_lstm ? ".lstm." : ".gru.");
          for (std::size_t g = 0; g < cell.gates.size(); ++g) {
            const std::string gate(is_lstm ? kLstmNames[g] : kGruNames[g]);
            auto& gp = cell.gates[g];
            f(prefix + gate + ".V", gp.input_weights.data());
            f(prefix + gate + ".W", gp.recurrent_weights.data());
            f(prefix + gate + ".b", std::span(gp.bias));
          }
        },
        p.layers[k]);
  }
  f(std::string("head.W"), p.head_weights.data());
  f(std::string("head.b"), std::span(p.head_bias));
}

inline std::size_t parameter_count(const NetworkParams& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const std::string&, std::span<const double> t) { n += t.size(); });
  return n;
}

inline void check_params(const NetworkSpec& spec, const NetworkParams& p) {
  if (p.layers.size() != spec.layers.size())
    throw ShapeError("parameter layer count does not match spec");
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    const bool ok = std::visit(
        [&](const auto& cell) {
          constexpr bool is_lstm =
              std::is_same_v<std::decay_t<decltype(cell)>, LstmParams>;
          cell.check_consistent();
          return (is_lstm == (spec.layers[k].kind == CellKind::Lstm)) &&
                 cell.units() == spec.layers[k].units &&
                 cell.input_dim() == spec.layer_input_dim(k);
        },
        p.layers[k]);
    if (!ok) throw ShapeError("layer " + std::to_string(k) + " parameters do not match spec");
  }
  if (p.head_weights.rows() != spec.output_dim ||
      p.head_weights.cols() != spec.layers.back().units || p.head_bias.size() != spec.output_dim)
    throw ShapeError("head parameters do not match spec");
}

using CellTape = std::variant<LstmTape, GruTape>;

struct ForwardTape {
  std::vector<std::vector<CellTape>> steps;  // [layer][t]
  Vector last_hidden;                        // top layer h at the final step
  Vector prediction;

  std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const auto& l : steps) n += l.size();
    return n;
  }
};

namespace detail {

// Runs every layer over the sequence. When `tape` is null nothing is retained.
inline Vector run_forward(const NetworkSpec& spec, const NetworkParams& params,
                          const Matrix& window, ForwardTape* tape) {
  if (window.cols() != spec.input_dim || window.rows() == 0) {
    throw ShapeError("window " + shape_str(window) + " does not match input_dim " +
                     std::to_string(spec.input_dim));
  }
  const std::size_t steps = window.rows();
  if (tape) tape->steps.assign(spec.layers.size(), {});

  // Inputs of the current layer, one row per timestep.
  Matrix inputs = window;
  Vector h;
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    const auto& ls = spec.layers[k];
    Matrix outputs(steps, ls.units);
    if (tape) tape->steps[k].reserve(steps);
    if (ls.kind == CellKind::Lstm) {
      const auto& cell = std::get<LstmParams>(params.layers[k]);
      LstmState state = LstmState::zeros(ls.units);
      for (std::size_t t = 0; t < steps; ++t) {
        auto [next, step_tape] = lstm_forward(cell, inputs.row(t), state, ls.activation);
        std::copy(next.h.begin(), next.h.end(), outputs.row(t).begin());
        state = std::move(next);
        if (tape) tape->steps[k].emplace_back(std::move(step_tape));
      }
      h = std::move(state.h);
    } else {
      const auto& cell = std::get<GruParams>(params.layers[k]);
      GruState state = GruState::zeros(ls.units);
      for (std::size_t t = 0; t < steps; ++t) {
        auto [next, step_tape] = gru_forward(cell, inputs.row(t), state, ls.activation);
        std::copy(next.h.begin(), next.h.end(), outputs.row(t).begin());
        state = std::move(next);
        if (tape) tape->steps[k].emplace_back(std::move(step_tape));
      }
      h = std::move(state.h);
    }
    inputs = std::move(outputs);
  }

  Vector pred = params.head_bias;
  gemv_acc(params.head_weights, h, pred);
  if (tape) {
    tape->last_hidden = std::move(h);
    tape->prediction = pred;
  }
  return pred;
}

}  // namespace detail

/// Initial states are zero for every window.
inline std::pair<Vector, ForwardTape> forward(const NetworkSpec& spec, const NetworkParams& params,
                                              const Matrix& window) {
  ForwardTape tape;
  Vector pred = detail::run_forward(spec, params, window, &tape);
  return {std::move(pred), std::move(tape)};
}

inline Vector predict(const NetworkSpec& spec, const NetworkParams& params, const Matrix& window) {
  return detail::run_forward(spec, params, window, nullptr);
}

/// One scalar prediction per window (output_dim must be 1).
inline Vector predict_batch(const NetworkSpec& spec, const NetworkParams& params,
                            std::span<const Matrix> windows) {
  if (spec.output_dim != 1) throw ShapeError("predict_batch expects a single-output network");
  Vector out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(predict(spec, params, w)[0]);
  return out;
}

inline double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty())
    throw ShapeError("mse_loss: length mismatch (" + std::to_string(pred.size()) + " vs " +
                     std::to_string(target.size()) + ")");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

/// d mse / d pred
inline Vector mse_loss_grad(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("mse_loss_grad: length mismatch");
  Vector g(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

/// Full BPTT. Gradients are added into `grads`, which must be shaped like
/// `params` (see zero_params).
inline void backward_accumulate(const NetworkSpec& spec, const NetworkParams& params,
                                const ForwardTape& tape, std::span<const double> dpred,
                                NetworkGrads& grads) {
  if (dpred.size() != spec.output_dim) throw ShapeError("backward: dpred length mismatch");
  if (tape.steps.size() != spec.layers.size()) throw ShapeError("backward: tape/spec mismatch");

  outer_acc(dpred, tape.last_hidden, grads.head_weights);
  axpy(1.0, dpred, grads.head_bias);

  const std::size_t steps = tape.steps.back().size();
  // Gradient arriving at each timestep's hidden output from the layer above.
  Matrix from_above(steps, spec.layers.back().units);
  {
    Vector top(spec.layers.back().units, 0.0);
    gemv_t_acc(params.head_weights, dpred, top);
    std::copy(top.begin(), top.end(), from_above.row(steps - 1).begin());
  }

  for (std::size_t k = spec.layers.size(); k-- > 0;) {
    const auto& ls = spec.layers[k];
    Matrix to_below(steps, spec.layer_input_dim(k));
    Vector dh_next(ls.units, 0.0);
    if (ls.kind == CellKind::Lstm) {
      const auto& cell = std::get<LstmParams>(params.layers[k]);
      auto& gcell = std::get<LstmParams>(grads.layers[k]);
      Vector dc_next(ls.units, 0.0);
      for (std::size_t t = steps; t-- > 0;) {
        Vector dh(ls.units);
        const auto above = from_above.row(t);
        for (std::size_t j = 0; j < ls.units; ++j) dh[j] = above[j] + dh_next[j];
        auto g = lstm_backward(std::get<LstmTape>(tape.steps[k][t]), cell, dh, dc_next, gcell);
        std::copy(g.dx.begin(), g.dx.end(), to_below.row(t).begin());
        dh_next = std::move(g.dh_prev);
        dc_next = std::move(g.dc_prev);
      }
    } else {
      const auto& cell = std::get<GruParams>(params.layers[k]);
      auto& gcell = std::get<GruParams>(grads.layers[k]);
      for (std::size_t t = steps; t-- > 0;) {
        Vector dh(ls.units);
        const auto above = from_above.row(t);
        for (std::size_t j = 0; j < ls.units; ++j) dh[j] = above[j] + dh_next[j];
        auto g = gru_backward(std::get<GruTape>(tape.steps[k][t]), cell, dh, gcell);
        std::copy(g.dx.begin(), g.dx.end(), to_below.row(t).begin());
        dh_next = std::move(g.dh_prev);
      }
    }
    from_above = std::move(to_below);
  }
}

inline NetworkGrads backward(const NetworkSpec& spec, const NetworkParams& params,
                             const ForwardTape& tape, std::span<const double> dpred) {
  NetworkGrads grads = zero_params(spec);
  backward_accumulate(spec, params, tape, dpred, grads);
  return grads;
}

/// Sets every entry of `p` to zero, keeping shapes.
inline void zero_fill(NetworkParams& p) {
  for_each_tensor(p, [](const std::string&, std::span<double> t) {
    std::fill(t.begin(), t.end(), 0.0);
  });
}

/// Parses architecture labels such as "lstm1", "gru2", "gru-lstm1",
/// "lstm-gru3". A hybrid label repeats its block once per layer: "gru-lstm2"
/// is GRU, LSTM, GRU, LSTM.
inline std::vector<CellKind> architecture_kinds(const std::string& label) {
  std::size_t split = label.find_last_not_of("0123456789");
  if (split == std::string::npos || split + 1 == label.size())
    throw std::invalid_argument("architecture label '" + label + "' must end in a layer count");
  const std::string stem = label.substr(0, split + 1);
  const int depth = std::stoi(label.substr(split + 1));
  if (depth < 1) throw std::invalid_argument("architecture depth must be >= 1");

  std::vector<CellKind> block;
  if (stem == "lstm")
    block = {CellKind::Lstm};
  else if (stem == "gru")
    block = {CellKind::Gru};
  else if (stem == "gru-lstm")
    block = {CellKind::Gru, CellKind::Lstm};
  else if (stem == "lstm-gru")
    block = {CellKind::Lstm, CellKind::Gru};
  else
    throw std::invalid_argument("unknown architecture '" + label + "'");

  std::vector<CellKind> kinds;
  for (int d = 0; d < depth; ++d) kinds.insert(kinds.end(), block.begin(), block.end());
  return kinds;
}

inline NetworkSpec make_spec(const std::string& label, const std::vector<std::size_t>& units,
                             std::size_t input_dim, Activation act = Activation::Tanh) {
  const auto kinds = architecture_kinds(label);
  if (units.size() != kinds.size())
    throw std::invalid_argument("architecture '" + label + "' needs " +
                                std::to_string(kinds.size()) + " unit counts, got " +
                                std::to_string(units.size()));
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.output_dim = 1;
  for (std::size_t k = 0; k < kinds.size(); ++k) spec.layers.push_back({kinds[k], units[k], act});
  spec.validate();
  return spec;
}

}  // namespace grnn
