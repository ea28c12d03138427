// SPDX-License-Identifier: Apache-2.0
//
// grnn prepare|hpo|train|evaluate|compare|report --config <path>
//      [--arch <label>] [--repeats N] [--seed S] [--out DIR] [--set section.key=value]...

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grnn/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::vector<std::string> arch;
  std::optional<std::size_t> repeats;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
  std::optional<std::string> hparams;
  std::optional<std::string> model;
  std::vector<std::string> archives;
};

std::size_t thread_cap() {
  const char* env = std::getenv("GRNN_THREADS");
  if (!env || !*env) return 1;
  try {
    return std::max<std::size_t>(1, std::stoul(env));
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("GRNN_THREADS must be a positive integer, got '") + env + "'");
  }
}

grnn::PipelineConfig load(const Options& o) {
  std::vector<std::string> ov = o.overrides;
  if (o.repeats) ov.push_back("experiment.repeats=" + std::to_string(*o.repeats));
  if (o.seed) ov.push_back("experiment.seed=" + std::to_string(*o.seed));
  if (o.out) ov.push_back("experiment.out=" + std::filesystem::absolute(*o.out).string());
  return grnn::load_config(o.config, ov);
}

/// --arch if given, otherwise every architecture the config lists.
std::vector<std::string> targets(const Options& o, const grnn::PipelineConfig& cfg) {
  return o.arch.empty() ? cfg.architectures : o.arch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gated recurrent network forecasting pipeline"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config,-c", o.config, "Pipeline config (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory (overrides experiment.out)");
    sub->add_option("--seed", o.seed, "Global seed (overrides experiment.seed)");
    sub->add_option("--set", o.overrides, "Override any config key: section.key=value");
  };
  auto with_arch = [&](CLI::App* sub) {
    sub->add_option("--arch,-a", o.arch, "Architecture label, e.g. lstm1 or gru-lstm2 (repeatable)");
  };

  auto* prepare = app.add_subcommand("prepare", "Ingest sources, add indicators, normalize and window");
  common(prepare);
  auto* hpo = app.add_subcommand("hpo", "TPE search over units, learning rate and batch size");
  common(hpo);
  with_arch(hpo);
  auto* train = app.add_subcommand("train", "Repeated seeded training and best-model selection");
  common(train);
  with_arch(train);
  train->add_option("--repeats", o.repeats, "Training runs per architecture")->check(CLI::PositiveNumber);
  train->add_option("--hparams", o.hparams, "Hyperparameter JSON (units, learning_rate, batch_size)")
      ->check(CLI::ExistingFile);
  auto* evaluate = app.add_subcommand("evaluate", "Score a saved model on the test split");
  common(evaluate);
  with_arch(evaluate);
  evaluate->add_option("--model", o.model, "Model file (default: the architecture's best.model)")
      ->check(CLI::ExistingFile);
  auto* compare = app.add_subcommand("compare", "Normality and Welch tests across run archives");
  common(compare);
  compare->add_option("archives", o.archives, "archive.jsonl files (default: every configured architecture)");
  auto* report = app.add_subcommand("report", "Export predicted-vs-actual and metric distributions");
  common(report);
  with_arch(report);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load(o);
    if (prepare->parsed()) return grnn::cmd_prepare(cfg, std::cout);
    if (hpo->parsed()) {
      for (const auto& a : targets(o, cfg))
        if (int rc = grnn::cmd_hpo(cfg, a, std::cout); rc != 0) return rc;
      return 0;
    }
    if (train->parsed()) {
      const auto threads = thread_cap();
      const auto arches = targets(o, cfg);
      if (o.hparams && arches.size() != 1) throw std::invalid_argument("--hparams needs exactly one --arch");
      int rc = 0;
      for (const auto& a : arches) {
        std::optional<std::filesystem::path> hp;
        if (o.hparams) hp = *o.hparams;
        rc = std::max(rc, grnn::cmd_train(cfg, a, hp, threads, std::cout, std::cerr));
      }
      return rc;
    }
    if (evaluate->parsed()) {
      const auto arches = targets(o, cfg);
      if (o.model && arches.size() != 1) throw std::invalid_argument("--model needs exactly one --arch");
      for (const auto& a : arches) {
        std::optional<std::filesystem::path> m;
        if (o.model) m = *o.model;
        grnn::cmd_evaluate(cfg, a, m, std::cout);
      }
      return 0;
    }
    if (compare->parsed()) {
      return grnn::cmd_compare(cfg, {o.archives.begin(), o.archives.end()}, std::cout);
    }
    if (report->parsed()) return grnn::cmd_report(cfg, targets(o, cfg), std::cout);
  } catch (const std::exception& e) {
    std::cerr << "grnn: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
