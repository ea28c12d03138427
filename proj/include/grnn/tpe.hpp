// SPDX-License-Identifier: Apache-2.0
//
// Tree-structured Parzen Estimator over a flat space of independent
// dimensions (quantized integers and log-uniform reals).
//
// After a random warm-up, completed trials are split at the gamma quantile of
// the objective into a good set and a bad set. For every dimension a Parzen
// estimator (mixture of truncated Gaussians plus one broad prior component) is
// fitted to each set; candidates are drawn from the good-set estimator and the
// one maximizing l(x) / g(x) is proposed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grnn/numerics.hpp"

namespace grnn {

enum class DistKind { QuantizedUniformInt, LogUniform };

class ParamDist {
 public:
  static ParamDist uniform_int(std::string name, std::int64_t low, std::int64_t high) {
    if (!(low < high))
      throw std::invalid_argument("dist '" + name + "': low must be < high");
    return ParamDist(std::move(name), DistKind::QuantizedUniformInt, static_cast<double>(low),
                     static_cast<double>(high));
  }
  static ParamDist log_uniform(std::string name, double low, double high) {
    if (!(low > 0.0 && low < high))
      throw std::invalid_argument("dist '" + name + "': need 0 < low < high");
    return ParamDist(std::move(name), DistKind::LogUniform, low, high);
  }

  const std::string& name() const noexcept { return name_; }
  DistKind kind() const noexcept { return kind_; }
  double low() const noexcept { return low_; }
  double high() const noexcept { return high_; }
  bool is_integer() const noexcept { return kind_ == DistKind::QuantizedUniformInt; }

  /// Bounds of the space the estimators work in (log space for log-uniform).
  double internal_low() const noexcept { return is_integer() ? low_ : std::log(low_); }
  double internal_high() const noexcept { return is_integer() ? high_ : std::log(high_); }
  double to_internal(double v) const noexcept { return is_integer() ? v : std::log(v); }

  /// Maps an internal-space point back to a legal value.
  double from_internal(double u) const noexcept {
    if (is_integer()) return std::clamp(std::round(u), low_, high_);
    return std::clamp(std::exp(u), low_, high_);
  }

  bool contains(double v) const noexcept {
    if (!(v >= low_ && v <= high_)) return false;
    return !is_integer() || v == std::round(v);
  }

 private:
  ParamDist(std::string name, DistKind kind, double low, double high)
      : name_(std::move(name)), kind_(kind), low_(low), high_(high) {}

  std::string name_;
  DistKind kind_;
  double low_, high_;
};

struct SearchSpace {
  std::vector<ParamDist> dims;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < dims.size(); ++i)
      if (dims[i].name() == name) return i;
    throw std::invalid_argument("no search dimension named '" + name + "'");
  }
};

enum class TrialStatus { Complete, Failed };

struct Trial {
  std::size_t trial_id = 0;
  std::vector<double> values;  // one per SearchSpace dim
  double objective = std::numeric_limits<double>::quiet_NaN();
  TrialStatus status = TrialStatus::Failed;
};

struct TpeConfig {
  std::size_t n_trials = 60;
  std::size_t n_startup_random = 20;
  double gamma = 0.25;
  std::size_t n_ei_candidates = 24;
  double bandwidth_floor = 0.01;  // fraction of the (log-)range
  double prior_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(n_startup_random < n_trials))
      throw std::invalid_argument("n_startup_random must be < n_trials");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0, 1)");
    if (n_ei_candidates == 0) throw std::invalid_argument("n_ei_candidates must be >= 1");
  }
};

inline double sample_prior(const ParamDist& d, Rng& rng) {
  if (d.is_integer())
    return static_cast<double>(
        rng.uniform_int(static_cast<std::int64_t>(d.low()), static_cast<std::int64_t>(d.high())));
  return std::clamp(std::exp(rng.uniform(std::log(d.low()), std::log(d.high()))), d.low(),
                    d.high());
}

/// Mixture of Gaussians truncated to [low, high].
class ParzenEstimator {
 public:
  ParzenEstimator(std::vector<double> observations, double low, double high, double floor_fraction,
                  double prior_weight)
      : low_(low), high_(high) {
    const double range = high - low;
    const double prior_mu = 0.5 * (low + high);

    struct Point {
      double mu, weight;
      bool prior;
    };
    std::vector<Point> pts;
    for (double o : observations) pts.push_back({o, 1.0, false});
    pts.push_back({prior_mu, prior_weight, true});
    std::stable_sort(pts.begin(), pts.end(),
                     [](const Point& a, const Point& b) { return a.mu < b.mu; });

    // Bandwidth: distance to the farther neighbor, clipped to
    // [min_sigma, range]. min_sigma is range / (1 + n) for small sets and
    // never drops below floor * range. The prior component spans the range.
    const double n_obs = static_cast<double>(observations.size());
    const double min_sigma = std::max(floor_fraction, 1.0 / (1.0 + n_obs)) * range;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double sigma = range;
      if (!pts[i].prior && pts.size() > 1) {
        const double left = i > 0 ? pts[i].mu - pts[i - 1].mu : 0.0;
        const double right = i + 1 < pts.size() ? pts[i + 1].mu - pts[i].mu : 0.0;
        sigma = std::clamp(std::max(left, right), min_sigma, range);
      }
      mus_.push_back(pts[i].mu);
      sigmas_.push_back(sigma);
      weights_.push_back(pts[i].weight);
    }

    const double wsum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    for (std::size_t i = 0; i < mus_.size(); ++i) {
      weights_[i] /= wsum;
      const double mass = normal_cdf((high_ - mus_[i]) / sigmas_[i]) -
                          normal_cdf((low_ - mus_[i]) / sigmas_[i]);
      log_norm_.push_back(std::log(weights_[i]) - std::log(std::max(mass, 1e-300)) -
                          std::log(sigmas_[i]) - 0.5 * std::log(2.0 * std::numbers::pi));
    }
  }

  std::size_t components() const noexcept { return mus_.size(); }

  double sample(Rng& rng) const {
    double u = rng.uniform();
    std::size_t k = 0;
    while (k + 1 < weights_.size() && u >= weights_[k]) u -= weights_[k++];
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double x = rng.normal(mus_[k], sigmas_[k]);
      if (x >= low_ && x <= high_) return x;
    }
    return std::clamp(mus_[k], low_, high_);
  }

  double log_density(double x) const {
    auto term = [&](std::size_t i) {
      const double z = (x - mus_[i]) / sigmas_[i];
      return log_norm_[i] - 0.5 * z * z;
    };
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mus_.size(); ++i) best = std::max(best, term(i));
    double s = 0.0;
    for (std::size_t i = 0; i < mus_.size(); ++i) s += std::exp(term(i) - best);
    return best + std::log(s);
  }

 private:
  static double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

  double low_, high_;
  std::vector<double> mus_, sigmas_, weights_, log_norm_;
};

namespace detail {
inline std::vector<const Trial*> completed_sorted(const std::vector<Trial>& history) {
  std::vector<const Trial*> done;
  for (const auto& t : history)
    if (t.status == TrialStatus::Complete && std::isfinite(t.objective)) done.push_back(&t);
  std::stable_sort(done.begin(), done.end(), [](const Trial* a, const Trial* b) {
    if (a->objective != b->objective) return a->objective < b->objective;
    return a->trial_id < b->trial_id;
  });
  return done;
}
}  // namespace detail

/// Size of the good set for `n_complete` finished trials.
inline std::size_t good_count(std::size_t n_complete, double gamma) {
  return static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n_complete)));
}

inline std::vector<double> suggest(const std::vector<Trial>& history, const SearchSpace& space,
                                   const TpeConfig& cfg, Rng& rng) {
  const auto done = detail::completed_sorted(history);
  std::vector<double> values;
  values.reserve(space.dims.size());
  if (done.empty() || done.size() < cfg.n_startup_random) {
    for (const auto& d : space.dims) values.push_back(sample_prior(d, rng));
    return values;
  }

  const std::size_t n_good = good_count(done.size(), cfg.gamma);
  for (std::size_t k = 0; k < space.dims.size(); ++k) {
    const auto& d = space.dims[k];
    std::vector<double> good, bad;
    for (std::size_t i = 0; i < done.size(); ++i) {
      const double u = d.to_internal(done[i]->values.at(k));
      (i < n_good ? good : bad).push_back(u);
    }
    const ParzenEstimator l(good, d.internal_low(), d.internal_high(), cfg.bandwidth_floor,
                            cfg.prior_weight);
    const ParzenEstimator g(bad, d.internal_low(), d.internal_high(), cfg.bandwidth_floor,
                            cfg.prior_weight);
    double best_value = 0.0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cfg.n_ei_candidates; ++c) {
      const double v = d.from_internal(l.sample(rng));
      const double u = d.to_internal(v);
      const double score = l.log_density(u) - g.log_density(u);
      if (c == 0 || score > best_score) {
        best_score = score;
        best_value = v;
      }
    }
    values.push_back(best_value);
  }
  return values;
}

using Objective = std::function<double(const std::vector<double>&)>;

struct OptimizeResult {
  std::optional<Trial> best;  // empty when no trial completed
  std::vector<Trial> history;
};

inline std::optional<Trial> best_trial(const std::vector<Trial>& history) {
  const auto done = detail::completed_sorted(history);
  if (done.empty()) return std::nullopt;
  return *done.front();
}

/// Runs trials until the history holds cfg.n_trials entries. An existing
/// history is resumed. Each trial draws from its own stream split off
/// cfg.seed by trial id, so a resumed run reproduces an uninterrupted one.
/// When `random_search` is set every trial samples the prior.
inline OptimizeResult optimize(const Objective& objective, const SearchSpace& space,
                               const TpeConfig& cfg, std::vector<Trial> history = {},
                               bool random_search = false,
                               const std::function<void(const Trial&)>& on_trial = {}) {
  cfg.validate();
  const Rng root(cfg.seed);
  for (std::size_t id = history.size(); id < cfg.n_trials; ++id) {
    Rng rng = root.split(id);
    Trial t;
    t.trial_id = id;
    if (random_search) {
      for (const auto& d : space.dims) t.values.push_back(sample_prior(d, rng));
    } else {
      t.values = suggest(history, space, cfg, rng);
    }
    try {
      t.objective = objective(t.values);
      t.status = std::isfinite(t.objective) ? TrialStatus::Complete : TrialStatus::Failed;
    } catch (const std::exception&) {
      t.status = TrialStatus::Failed;
    }
    if (t.status == TrialStatus::Failed) t.objective = std::numeric_limits<double>::quiet_NaN();
    history.push_back(t);
    if (on_trial) on_trial(history.back());
  }
  OptimizeResult r;
  r.best = best_trial(history);
  r.history = std::move(history);
  return r;
}

// ---------------------------------------------------------------------------
// Trial log: one JSON object per line.

inline nlohmann::json trial_to_json(const Trial& t, const SearchSpace& space) {
  nlohmann::json values = nlohmann::json::object();
  for (std::size_t k = 0; k < space.dims.size(); ++k) {
    if (space.dims[k].is_integer())
      values[space.dims[k].name()] = static_cast<std::int64_t>(t.values[k]);
    else
      values[space.dims[k].name()] = t.values[k];
  }
  nlohmann::json j{{"trial_id", t.trial_id},
                   {"values", values},
                   {"status", t.status == TrialStatus::Complete ? "complete" : "failed"}};
  j["objective"] = t.status == TrialStatus::Complete ? nlohmann::json(t.objective) : nlohmann::json();
  return j;
}

inline Trial trial_from_json(const nlohmann::json& j, const SearchSpace& space) {
  Trial t;
  t.trial_id = j.at("trial_id").get<std::size_t>();
  const auto& values = j.at("values");
  for (const auto& d : space.dims) t.values.push_back(values.at(d.name()).get<double>());
  t.status = j.at("status").get<std::string>() == "complete" ? TrialStatus::Complete
                                                             : TrialStatus::Failed;
  if (t.status == TrialStatus::Complete) t.objective = j.at("objective").get<double>();
  return t;
}

inline std::vector<Trial> read_trials(std::istream& is, const SearchSpace& space) {
  std::vector<Trial> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(trial_from_json(nlohmann::json::parse(line), space));
    if (out.back().trial_id != out.size() - 1)
      throw std::runtime_error("trial log is not a contiguous sequence starting at 0");
  }
  return out;
}

}  // namespace grnn
