// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch training with early stopping, and the repeated-seed experiment
// protocol that keeps only runs clearing an R2 threshold.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "grnn/data.hpp"
#include "grnn/eval.hpp"
#include "grnn/network.hpp"
#include "grnn/optim.hpp"

namespace grnn {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 5;
  OptimizerConfig optimizer = OptimizerConfig::defaults(OptimizerKind::Nadam);
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::optional<double> clip_norm;
  double min_delta = 1e-12;
  /// Called after every epoch with (epoch, mean loss, current params).
  std::function<void(std::size_t, double, const NetworkParams&)> on_epoch;

  void validate() const {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (patience == 0) throw std::invalid_argument("patience must be >= 1");
    if (max_epochs == 0) throw std::invalid_argument("max_epochs must be >= 1");
    if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  }
};

/// Tracks the best monitored value and signals a stop after `patience`
/// consecutive epochs without a decrease of at least `min_delta`.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience, double min_delta = 1e-12)
      : patience_(patience), min_delta_(min_delta) {}

  /// Records one epoch's loss. Returns true when it is a new best.
  bool update(double loss) {
    ++epoch_;
    if (loss < best_ - min_delta_) {
      best_ = loss;
      best_epoch_ = epoch_;
      wait_ = 0;
      return true;
    }
    ++wait_;
    return false;
  }

  bool should_stop() const noexcept { return wait_ >= patience_; }
  double best() const noexcept { return best_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }  // 1-based
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t epoch_ = 0;
  std::size_t wait_ = 0;
};

struct TrainResult {
  NetworkParams final_params;
  NetworkParams best_params;
  std::vector<double> epoch_losses;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;  // 1-based
  std::uint64_t seed = 0;

  double best_loss() const {
    return *std::min_element(epoch_losses.begin(), epoch_losses.end());
  }
};

/// Trains from a fresh initialization drawn from cfg.seed. The monitored
/// quantity is the mean per-sample training MSE over each epoch; the test
/// split never influences training.
inline TrainResult train(const NetworkSpec& spec, std::span<const Matrix> xs,
                         std::span<const double> ys, const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (xs.empty()) throw TrainingError("training set is empty");
  if (xs.size() != ys.size()) throw ShapeError("train: inputs and targets differ in length");
  if (spec.output_dim != 1) throw ShapeError("train: only single-output networks are supported");
  for (const auto& x : xs)
    if (x.cols() != spec.input_dim) throw ShapeError("train: window width does not match spec");

  const Rng root(cfg.seed);
  Rng init_rng = root.split(0);
  Rng shuffle_rng = root.split(1);

  TrainResult result;
  result.seed = cfg.seed;
  NetworkParams params = init_params(spec, init_rng);
  NetworkGrads grads = zero_params(spec);
  Optimizer opt(cfg.optimizer);
  EarlyStopping stopper(cfg.patience, cfg.min_delta);

  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<std::span<double>> grad_tensors;
  for_each_tensor(grads, [&](const std::string&, std::span<double> t) { grad_tensors.push_back(t); });

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.shuffle) shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      zero_fill(grads);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        auto [pred, tape] = forward(spec, params, xs[idx]);
        const double target[1] = {ys[idx]};
        loss_sum += mse_loss(pred, target);
        Vector dpred = mse_loss_grad(pred, target);
        for (auto& d : dpred) d *= inv_batch;
        backward_accumulate(spec, params, tape, dpred, grads);
      }
      if (!std::isfinite(loss_sum))
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + " (seed " +
                            std::to_string(cfg.seed) + ")");
      if (cfg.clip_norm) clip_gradients_inplace(grad_tensors, *cfg.clip_norm);
      try {
        opt.apply(params, grads);
      } catch (const NonFiniteGradient& e) {
        throw TrainingError(std::string(e.what()) + " in epoch " + std::to_string(epoch) +
                            " (seed " + std::to_string(cfg.seed) + ")");
      }
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    result.epoch_losses.push_back(epoch_loss);
    if (stopper.update(epoch_loss)) result.best_params = params;
    result.stopped_epoch = epoch;
    if (cfg.on_epoch) cfg.on_epoch(epoch, epoch_loss, params);
    if (stopper.should_stop()) break;
  }
  result.best_epoch = stopper.best_epoch();
  result.final_params = std::move(params);
  return result;
}

inline TrainResult train(const NetworkSpec& spec, const WindowedDataset& data,
                         const TrainConfig& cfg) {
  return train(spec, data.train_x, data.train_y, cfg);
}

// ---------------------------------------------------------------------------
// Experiments

/// One seeded training run and how it scored on the test split.
struct RunRecord {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  double train_loss = 0.0;
  EvalReport report;
  bool retained = false;
};

inline void to_json(nlohmann::json& j, const RunRecord& r) {
  j = nlohmann::json{{"seed", r.seed},
                     {"status", r.failed ? "failed" : "complete"},
                     {"stopped_epoch", r.stopped_epoch},
                     {"best_epoch", r.best_epoch},
                     {"retained", r.retained}};
  if (r.failed) {
    j["error"] = r.error;
  } else {
    j["train_loss"] = r.train_loss;
    j["metrics"] = r.report;
  }
}

inline void from_json(const nlohmann::json& j, RunRecord& r) {
  r.seed = j.at("seed").get<std::uint64_t>();
  r.failed = j.at("status").get<std::string>() == "failed";
  r.stopped_epoch = j.value("stopped_epoch", std::size_t{0});
  r.best_epoch = j.value("best_epoch", std::size_t{0});
  r.retained = j.value("retained", false);
  if (r.failed) {
    r.error = j.value("error", "");
  } else {
    r.train_loss = j.at("train_loss").get<double>();
    r.report = j.at("metrics").get<EvalReport>();
  }
}

struct RunArchive {
  std::string label;
  double r2_threshold = 0.90;
  std::vector<RunRecord> runs;          // every seed, in seed order
  std::optional<std::size_t> best;      // index into runs
  std::optional<NetworkParams> best_params;

  std::vector<EvalReport> retained_reports() const {
    std::vector<EvalReport> out;
    for (const auto& r : runs)
      if (r.retained) out.push_back(r.report);
    return out;
  }

  std::size_t retained_count() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(),
                                                  [](const RunRecord& r) { return r.retained; }));
  }

  /// Highest R2 over completed runs, retained or not.
  std::optional<double> best_r2_achieved() const {
    std::optional<double> best_r2;
    for (const auto& r : runs)
      if (!r.failed && (!best_r2 || r.report.r2 > *best_r2)) best_r2 = r.report.r2;
    return best_r2;
  }
};

/// True when `a` ranks ahead of `b`: higher R2, then lower MAPE, then lower
/// RMSE, then lower seed.
inline bool better_run(const RunRecord& a, const RunRecord& b) {
  if (a.report.r2 != b.report.r2) return a.report.r2 > b.report.r2;
  if (a.report.mape != b.report.mape) return a.report.mape < b.report.mape;
  if (a.report.rmse != b.report.rmse) return a.report.rmse < b.report.rmse;
  return a.seed < b.seed;
}

/// Writes one JSON record per run.
inline void write_archive(const RunArchive& a, std::ostream& os) {
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    nlohmann::json j = a.runs[i];
    j["label"] = a.label;
    j["best"] = a.best && *a.best == i;
    os << j.dump() << '\n';
  }
}

inline RunArchive read_archive(std::istream& is) {
  RunArchive a;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    a.label = j.value("label", a.label);
    a.runs.push_back(j.get<RunRecord>());
    if (j.value("best", false)) a.best = a.runs.size() - 1;
  }
  return a;
}

struct ExperimentConfig {
  std::size_t repeats = 48;
  double r2_threshold = 0.90;
  std::size_t threads = 1;
  std::string label;
};

/// Trains with seeds cfg.seed, cfg.seed+1, ... and evaluates each run's best
/// weights on the test split. Runs may execute on several threads; results
/// are always assembled in seed order.
inline RunArchive run_experiment(const NetworkSpec& spec, const WindowedDataset& data,
                                 const TrainConfig& cfg, const ExperimentConfig& exp) {
  if (exp.repeats == 0) throw std::invalid_argument("repeats must be >= 1");
  RunArchive archive;
  archive.label = exp.label;
  archive.r2_threshold = exp.r2_threshold;
  archive.runs.resize(exp.repeats);
  std::vector<std::optional<NetworkParams>> params(exp.repeats);

  auto run_one = [&](std::size_t k) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + k;
    RunRecord& rec = archive.runs[k];
    rec.seed = c.seed;
    try {
      TrainResult tr = train(spec, data, c);
      rec.stopped_epoch = tr.stopped_epoch;
      rec.best_epoch = tr.best_epoch;
      rec.train_loss = tr.best_loss();
      rec.report = evaluate(spec, tr.best_params, data);
      rec.report.seed = c.seed;
      rec.report.label = exp.label;
      rec.retained = rec.report.r2 > exp.r2_threshold;
      params[k] = std::move(tr.best_params);
    } catch (const TrainingError& e) {
      rec.failed = true;
      rec.error = e.what();
    } catch (const MetricError& e) {
      rec.failed = true;
      rec.error = e.what();
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(exp.threads, exp.repeats));
  if (threads == 1) {
    for (std::size_t k = 0; k < exp.repeats; ++k) run_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < exp.repeats; k = next++) run_one(k);
      });
    for (auto& th : pool) th.join();
  }

  for (std::size_t k = 0; k < archive.runs.size(); ++k) {
    const auto& r = archive.runs[k];
    if (!r.retained) continue;
    if (!archive.best || better_run(r, archive.runs[*archive.best])) archive.best = k;
  }
  if (archive.best) archive.best_params = std::move(params[*archive.best]);
  return archive;
}

}  // namespace grnn
