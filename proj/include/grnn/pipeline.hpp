// SPDX-License-Identifier: Apache-2.0
//
// The six pipeline stages behind the command-line tool. Each stage reads its
// inputs from and writes its artifacts under the configured output
// directory:
//
//   prepared/{frame,normalized,normalization}.csv, prepared/summary.txt
//   hpo/<arch>/{trials.jsonl,best.json}
//   train/<arch>/{archive.jsonl,hparams.json,best.model}
//   eval/<arch>.json
//   compare/{normality.txt,welch.txt,tests.jsonl}
//   report/<arch>/predictions.csv, report/metrics.csv

#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grnn/config.hpp"
#include "grnn/model_io.hpp"
#include "grnn/stats.hpp"

namespace grnn {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

namespace detail {

inline std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw PipelineError("cannot write '" + p.string() + "'");
  return os;
}

inline std::ifstream open_in(const fs::path& p, const std::string& hint) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw PipelineError("cannot read '" + p.string() + "'" + (hint.empty() ? "" : "; " + hint));
  return is;
}

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

/// "gru-lstm2" -> ("GRU-LSTM", 2).
inline std::pair<std::string, std::size_t> display_name(const std::string& label) {
  std::size_t digits = label.size();
  while (digits > 0 && std::isdigit(static_cast<unsigned char>(label[digits - 1]))) --digits;
  std::string name = label.substr(0, digits);
  for (auto& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return {name, std::stoul(label.substr(digits))};
}

}  // namespace detail

/// A row in the layout Models / Layers / R2 / MAPE (%) / RMSE / RMSE (ND).
inline std::string performance_row(const EvalReport& r) {
  const auto [name, layers] = detail::display_name(r.label);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %6zu %8.4f %10.4f %12.4f %9.4f", name.c_str(), layers, r.r2,
                r.mape_percent(), r.rmse, r.rmse_nd);
  return buf;
}

inline std::string performance_header() {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %6s %8s %10s %12s %9s", "Models", "Layers", "R2", "MAPE(%)", "RMSE",
                "RMSE(ND)");
  return buf;
}

// ---------------------------------------------------------------------------
// prepare

inline int cmd_prepare(const PipelineConfig& cfg, std::ostream& log) {
  if (cfg.sources.empty()) throw PipelineError("config has no [sources]");
  TimeSeriesFrame frame = ingest(cfg.sources);
  const std::size_t joined = frame.rows();
  if (cfg.indicators) frame = add_indicators(frame, cfg.target);
  frame.validate();
  const auto [norm_frame, norm] = normalize(frame, cfg.fit_on, cfg.train_fraction);
  const auto ds = window(norm_frame, norm, cfg.lookback, cfg.target, cfg.train_fraction);

  const fs::path dir = cfg.out("prepared");
  {
    auto os = detail::open_out(dir / "frame.csv");
    write_frame_csv(frame, os);
  }
  {
    auto os = detail::open_out(dir / "normalized.csv");
    write_frame_csv(norm_frame, os);
  }
  {
    auto os = detail::open_out(dir / "normalization.csv");
    write_normalization(norm, os);
  }

  std::ostringstream summary;
  summary << "rows after join: " << joined << "\n"
          << "rows after indicators: " << frame.rows() << " (" << format_date(frame.dates.front()) << " .. "
          << format_date(frame.dates.back()) << ")\n"
          << "train rows: " << split_point(frame.rows(), cfg.train_fraction)
          << ", test rows: " << frame.rows() - split_point(frame.rows(), cfg.train_fraction) << "\n"
          << "train windows: " << ds.train_x.size() << ", test windows: " << ds.test_x.size()
          << " (lookback " << cfg.lookback << ")\n\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %14s %14s %14s %14s\n", "Feature", "Mean", "Std", "Min", "Max");
  summary << line;
  for (const auto& s : summarize(frame)) {
    std::snprintf(line, sizeof line, "%-10s %14.4f %14.4f %14.4f %14.4f\n", s.name.c_str(), s.mean, s.std,
                  s.min, s.max);
    summary << line;
  }
  auto os = detail::open_out(dir / "summary.txt");
  os << summary.str();
  log << summary.str();
  return 0;
}

/// Reloads the prepared dataset and frames it with the configured lookback.
inline WindowedDataset load_dataset(const PipelineConfig& cfg) {
  const fs::path dir = cfg.out("prepared");
  if (!fs::exists(dir / "normalized.csv"))
    throw PipelineError("no prepared dataset under '" + dir.string() + "'; run prepare first");
  const auto frame = read_frame_csv((dir / "normalized.csv").string());
  const auto norm = read_normalization((dir / "normalization.csv").string());
  return window(frame, norm, cfg.lookback, cfg.target, cfg.train_fraction);
}

// ---------------------------------------------------------------------------
// hpo

/// One units dimension per layer, then learning rate and batch size.
inline SearchSpace search_space(const std::string& arch, const SearchRanges& r) {
  SearchSpace s;
  const auto layers = architecture_kinds(arch).size();
  for (std::size_t k = 0; k < layers; ++k)
    s.dims.push_back(ParamDist::uniform_int("units_" + std::to_string(k), r.units_min, r.units_max));
  s.dims.push_back(ParamDist::log_uniform("learning_rate", r.lr_min, r.lr_max));
  s.dims.push_back(ParamDist::uniform_int("batch_size", r.batch_min, r.batch_max));
  return s;
}

inline HyperParams hyperparams_from_values(const std::vector<double>& v) {
  HyperParams h;
  for (std::size_t k = 0; k + 2 < v.size(); ++k) h.units.push_back(static_cast<std::size_t>(v[k]));
  h.learning_rate = v[v.size() - 2];
  h.batch_size = static_cast<std::size_t>(v.back());
  return h;
}

inline TrainConfig train_config_for(const PipelineConfig& cfg, const HyperParams& h) {
  TrainConfig t = cfg.train;
  t.optimizer.learning_rate = h.learning_rate;
  t.batch_size = h.batch_size;
  return t;
}

/// Objective for one trial: test RMSE in normalized units after a single
/// training run with the fixed HPO seed.
inline double hpo_objective(const PipelineConfig& cfg, const std::string& arch, const WindowedDataset& ds,
                            const HyperParams& h) {
  const auto spec = make_spec(arch, h.units, ds.input_dim(), cfg.activation);
  TrainConfig t = train_config_for(cfg, h);
  t.max_epochs = cfg.hpo_max_epochs;
  t.seed = cfg.tpe.seed;
  const auto result = train(spec, ds, t);
  return evaluate(spec, result.best_params, ds).rmse_nd;
}

inline int cmd_hpo(const PipelineConfig& cfg, const std::string& arch, std::ostream& log) {
  const auto ds = load_dataset(cfg);
  const auto space = search_space(arch, cfg.ranges);
  const fs::path dir = cfg.out("hpo/" + arch);
  const fs::path log_path = dir / "trials.jsonl";

  std::vector<Trial> history;
  if (fs::exists(log_path)) {
    auto is = detail::open_in(log_path, "");
    history = read_trials(is, space);
    if (history.size() > cfg.tpe.n_trials) history.resize(cfg.tpe.n_trials);
    log << "resuming " << arch << " from " << history.size() << " logged trials\n";
  }
  // Rewrite the surviving prefix, then append as trials finish.
  auto trials_out = detail::open_out(log_path);
  for (const auto& t : history) trials_out << trial_to_json(t, space).dump() << '\n';
  trials_out.flush();

  const auto result = optimize(
      [&](const std::vector<double>& v) { return hpo_objective(cfg, arch, ds, hyperparams_from_values(v)); },
      space, cfg.tpe, history, false, [&](const Trial& t) {
        trials_out << trial_to_json(t, space).dump() << '\n';
        trials_out.flush();
        log << "trial " << t.trial_id << ": "
            << (t.status == TrialStatus::Complete ? detail::fmt("%.6f", t.objective) : std::string("failed"))
            << '\n';
      });
  if (!result.best) throw PipelineError("hpo for " + arch + ": no complete trial");

  const HyperParams best = hyperparams_from_values(result.best->values);
  nlohmann::json j = best;
  j["arch"] = arch;
  j["objective"] = result.best->objective;
  j["trial_id"] = result.best->trial_id;
  auto os = detail::open_out(dir / "best.json");
  os << j.dump(2) << '\n';
  log << "best " << arch << ": " << j.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train

inline HyperParams load_hyperparams(const fs::path& p) {
  auto is = detail::open_in(p, "");
  try {
    return nlohmann::json::parse(is).get<HyperParams>();
  } catch (const nlohmann::json::exception& e) {
    throw PipelineError(p.string() + ": " + e.what());
  }
}

/// Explicit file, then the profile's [arch.<label>] section, then HPO output.
inline HyperParams resolve_hyperparams(const PipelineConfig& cfg, const std::string& arch,
                                       const std::optional<fs::path>& file) {
  if (file) return load_hyperparams(*file);
  if (auto it = cfg.fixed.find(arch); it != cfg.fixed.end()) return it->second;
  const fs::path p = cfg.out("hpo/" + arch + "/best.json");
  if (!fs::exists(p))
    throw PipelineError("no hyperparameters for " + arch + ": give a file, add [arch." + arch +
                        "] to the config, or run hpo first");
  return load_hyperparams(p);
}

inline int cmd_train(const PipelineConfig& cfg, const std::string& arch,
                     const std::optional<fs::path>& hparams_file, std::size_t threads, std::ostream& log,
                     std::ostream& err) {
  const auto ds = load_dataset(cfg);
  const HyperParams h = resolve_hyperparams(cfg, arch, hparams_file);
  const auto spec = make_spec(arch, h.units, ds.input_dim(), cfg.activation);
  ExperimentConfig ex = cfg.experiment;
  ex.label = arch;
  ex.threads = threads;
  const RunArchive archive = run_experiment(spec, ds, train_config_for(cfg, h), ex);

  const fs::path dir = cfg.out("train/" + arch);
  {
    auto os = detail::open_out(dir / "archive.jsonl");
    write_archive(archive, os);
  }
  {
    nlohmann::json j = h;
    j["arch"] = arch;
    auto os = detail::open_out(dir / "hparams.json");
    os << j.dump(2) << '\n';
  }
  const fs::path model_path = dir / "best.model";
  fs::remove(model_path);

  std::size_t failed = 0;
  for (const auto& r : archive.runs) failed += r.failed;
  log << arch << ": " << archive.runs.size() << " runs, " << archive.retained_count() << " retained (R2 > "
      << ex.r2_threshold << "), " << failed << " failed\n";
  if (!archive.best) {
    const auto best = archive.best_r2_achieved();
    err << "no qualifying run for " << arch << "; best R2 achieved: "
        << (best ? detail::fmt("%.4f", *best) : std::string("n/a")) << '\n';
    return 2;
  }
  save_model(Model{spec, *archive.best_params, ds.lookback, ds.feature_order, ds.target_name},
             model_path.string());
  const auto& best = archive.runs[*archive.best];
  log << "best seed " << best.seed << " -> " << model_path.string() << '\n'
      << performance_header() << '\n'
      << performance_row(best.report) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

inline Model load_matching_model(const fs::path& path, const WindowedDataset& ds) {
  Model m = load_model(path.string());
  if (m.feature_names != ds.feature_order || m.target != ds.target_name || m.lookback != ds.lookback)
    throw PipelineError("model '" + path.string() + "' was trained on a different dataset layout (features, " +
                        "target or lookback differ)");
  return m;
}

inline int cmd_evaluate(const PipelineConfig& cfg, const std::string& arch, const std::optional<fs::path>& model,
                        std::ostream& log) {
  const auto ds = load_dataset(cfg);
  const fs::path path = model ? *model : cfg.out("train/" + arch + "/best.model");
  const Model m = load_matching_model(path, ds);
  EvalReport r = evaluate(m.spec, m.params, ds);
  r.label = arch;
  const fs::path archive_path = cfg.out("train/" + arch + "/archive.jsonl");
  if (!model && fs::exists(archive_path)) {
    auto is = detail::open_in(archive_path, "");
    const auto a = read_archive(is);
    if (a.best) r.seed = a.runs[*a.best].seed;
  }
  auto os = detail::open_out(cfg.out("eval/" + arch + ".json"));
  os << nlohmann::json(r).dump(2) << '\n';
  log << performance_header() << '\n' << performance_row(r) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// compare

inline RunArchive load_archive(const fs::path& p) {
  auto is = detail::open_in(p, "run train first");
  auto a = read_archive(is);
  if (a.label.empty()) a.label = p.parent_path().filename().string();
  return a;
}

inline int cmd_compare(const PipelineConfig& cfg, std::vector<fs::path> archives, std::ostream& log) {
  if (archives.empty())
    for (const auto& arch : cfg.architectures) archives.push_back(cfg.out("train/" + arch + "/archive.jsonl"));
  if (archives.size() < 2) throw PipelineError("compare needs at least two archives");
  LabeledSamples samples;
  for (const auto& p : archives) {
    const auto a = load_archive(p);
    samples.emplace_back(a.label, a.retained_reports());
  }
  const auto rep = compare_architectures(samples);
  const auto normality = render_normality_table(rep);
  const auto welch = render_welch_table(rep);
  const fs::path dir = cfg.out("compare");
  detail::open_out(dir / "normality.txt") << normality;
  detail::open_out(dir / "welch.txt") << welch;
  {
    auto os = detail::open_out(dir / "tests.jsonl");
    for (const auto& j : comparison_records(rep)) os << j.dump() << '\n';
  }
  log << "D'Agostino-Pearson normality (retained runs)\n" << normality << "\nWelch two-sample t-tests\n" << welch;
  return 0;
}

// ---------------------------------------------------------------------------
// report

inline int cmd_report(const PipelineConfig& cfg, const std::vector<std::string>& archs, std::ostream& log) {
  const auto ds = load_dataset(cfg);
  const fs::path dir = cfg.out("report");
  auto metrics = detail::open_out(dir / "metrics.csv");
  metrics << "label,seed,metric,value\n";
  for (const auto& arch : archs) {
    const fs::path archive_path = cfg.out("train/" + arch + "/archive.jsonl");
    if (fs::exists(archive_path)) {
      for (const auto& r : load_archive(archive_path).retained_reports()) {
        metrics << arch << ',' << r.seed << ",r2," << format_double(r.r2) << '\n'
                << arch << ',' << r.seed << ",rmse," << format_double(r.rmse) << '\n'
                << arch << ',' << r.seed << ",mape," << format_double(r.mape) << '\n'
                << arch << ',' << r.seed << ",rmse_nd," << format_double(r.rmse_nd) << '\n';
      }
    }
    const fs::path model_path = cfg.out("train/" + arch + "/best.model");
    if (!fs::exists(model_path)) {
      log << arch << ": no trained model, predictions skipped\n";
      continue;
    }
    const Model m = load_matching_model(model_path, ds);
    const Vector actual = inverse_transform(ds.test_y, ds.norm, ds.target_name);
    const Vector pred = inverse_transform(predict_batch(m.spec, m.params, ds.test_x), ds.norm, ds.target_name);
    auto os = detail::open_out(dir / arch / "predictions.csv");
    os << "Date,Actual,Predicted\n";
    for (std::size_t i = 0; i < actual.size(); ++i)
      os << format_date(ds.test_dates[i]) << ',' << format_double(actual[i]) << ',' << format_double(pred[i])
         << '\n';
    log << arch << ": " << actual.size() << " test predictions -> " << (dir / arch / "predictions.csv").string()
        << '\n';
  }
  log << "metric distributions -> " << (dir / "metrics.csv").string() << '\n';
  return 0;
}

}  // namespace grnn
