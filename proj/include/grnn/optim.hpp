// SPDX-License-Identifier: Apache-2.0
//
// First-order optimizers. With gradient g, step t (1-based), learning rate lr:
//
//   SGD:     theta -= lr * g
//   AdaGrad: G += g^2;                      theta -= lr * g / (sqrt(G) + eps)
//   RMSProp: v = rho v + (1 - rho) g^2;     theta -= lr * g / (sqrt(v) + eps)
//   Adam:    m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
//            theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
//   Nadam:   m, v as Adam, then the bias-corrected Nesterov lookahead
//            m_hat = b1 m / (1 - b1^(t+1)) + (1 - b1) g / (1 - b1^t)
//            theta -= lr * m_hat / (sqrt(v / (1 - b2^t)) + eps)
//
// Nadam here has no momentum schedule (mu_t = b1 for all t).

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "grnn/network.hpp"

namespace grnn {

enum class OptimizerKind : std::uint8_t { Sgd, AdaGrad, RmsProp, Adam, Nadam };

inline const char* to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::AdaGrad: return "adagrad";
    case OptimizerKind::RmsProp: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Nadam: return "nadam";
  }
  return "?";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
  for (auto k : {OptimizerKind::Sgd, OptimizerKind::AdaGrad, OptimizerKind::RmsProp,
                 OptimizerKind::Adam, OptimizerKind::Nadam})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

/// Learning rates used when none is configured. AdaGrad's accumulator only
/// grows, so it needs a larger base rate than the others to make progress.
inline double default_learning_rate(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Sgd: return 0.01;
    case OptimizerKind::AdaGrad: return 0.1;
    default: return 0.001;
  }
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Nadam;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double rho = 0.9;

  static OptimizerConfig defaults(OptimizerKind k) {
    OptimizerConfig c;
    c.kind = k;
    c.learning_rate = default_learning_rate(k);
    return c;
  }
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {
    if (!(cfg_.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  }

  const OptimizerConfig& config() const noexcept { return cfg_; }
  std::uint64_t step_count() const noexcept { return step_; }
  const std::vector<Vector>& first_moments() const noexcept { return m_; }
  const std::vector<Vector>& second_moments() const noexcept { return v_; }

  /// Updates a list of tensors in place. Shapes are fixed by the first call.
  void apply(std::span<const std::span<double>> params,
             std::span<const std::span<const double>> grads,
             std::span<const std::string> names = {}) {
    if (params.size() != grads.size()) throw ShapeError("optimizer: tensor count mismatch");
    if (m_.empty() && v_.empty()) init_state(params);
    if (v_.size() != params.size()) throw ShapeError("optimizer: tensor count changed");
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (params[k].size() != grads[k].size() || v_[k].size() != params[k].size())
        throw ShapeError("optimizer: shape mismatch in tensor " + tensor_name(names, k));
      if (!all_finite(grads[k]))
        throw NonFiniteGradient("non-finite gradient in tensor " + tensor_name(names, k));
    }

    ++step_;
    const double t = static_cast<double>(step_);
    const double lr = cfg_.learning_rate;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2, eps = cfg_.epsilon;
    const double bc1 = 1.0 - std::pow(b1, t);
    const double bc1_next = 1.0 - std::pow(b1, t + 1.0);
    const double bc2 = 1.0 - std::pow(b2, t);

    for (std::size_t k = 0; k < params.size(); ++k) {
      auto theta = params[k];
      auto g = grads[k];
      auto& m = m_[k];
      auto& v = v_[k];
      switch (cfg_.kind) {
        case OptimizerKind::Sgd:
          for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * g[i];
          break;
        case OptimizerKind::AdaGrad:
          for (std::size_t i = 0; i < theta.size(); ++i) {
            v[i] += g[i] * g[i];
            theta[i] -= lr * g[i] / (std::sqrt(v[i]) + eps);
          }
          break;
        case OptimizerKind::RmsProp:
          for (std::size_t i = 0; i < theta.size(); ++i) {
            v[i] = cfg_.rho * v[i] + (1.0 - cfg_.rho) * g[i] * g[i];
            theta[i] -= lr * g[i] / (std::sqrt(v[i]) + eps);
          }
          break;
        case OptimizerKind::Adam:
          for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
          }
          break;
        case OptimizerKind::Nadam:
          for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = b1 * m[i] / bc1_next + (1.0 - b1) * g[i] / bc1;
            theta[i] -= lr * m_hat / (std::sqrt(v[i] / bc2) + eps);
          }
          break;
      }
    }
  }

  void apply(NetworkParams& params, const NetworkGrads& grads) {
    std::vector<std::span<double>> p;
    std::vector<std::span<const double>> g;
    std::vector<std::string> names;
    for_each_tensor(params, [&](const std::string& name, std::span<double> t) {
      p.push_back(t);
      names.push_back(name);
    });
    for_each_tensor(grads, [&](const std::string&, std::span<const double> t) { g.push_back(t); });
    apply(p, g, names);
  }

 private:
  static std::string tensor_name(std::span<const std::string> names, std::size_t k) {
    return k < names.size() ? names[k] : "#" + std::to_string(k);
  }

  void init_state(std::span<const std::span<double>> params) {
    const bool needs_m = cfg_.kind == OptimizerKind::Adam || cfg_.kind == OptimizerKind::Nadam;
    for (const auto& t : params) {
      v_.emplace_back(t.size(), 0.0);
      if (needs_m) m_.emplace_back(t.size(), 0.0);
      else m_.emplace_back();
    }
  }

  OptimizerConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
};

inline double global_norm(const NetworkGrads& grads) {
  double s = 0.0;
  for_each_tensor(grads, [&](const std::string&, std::span<const double> t) {
    for (double x : t) s += x * x;
  });
  return std::sqrt(s);
}

/// Rescales all gradients together so their global L2 norm is at most
/// `max_norm`. Direction is preserved.
inline void clip_gradients_inplace(std::span<const std::span<double>> tensors, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("max_norm must be > 0");
  double s = 0.0;
  for (const auto& t : tensors)
    for (double x : t) s += x * x;
  const double norm = std::sqrt(s);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (const auto& t : tensors)
    for (double& x : t) x *= scale;
}

inline NetworkGrads clip_gradients(NetworkGrads grads, double max_norm) {
  std::vector<std::span<double>> ts;
  for_each_tensor(grads, [&](const std::string&, std::span<double> t) { ts.push_back(t); });
  clip_gradients_inplace(ts, max_norm);
  return grads;
}

}  // namespace grnn
