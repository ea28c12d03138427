// SPDX-License-Identifier: Apache-2.0
//
// Pipeline configuration: one INI file with sections, loaded through
// boost::property_tree. Any key can be overridden as section.key=value.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "grnn/data.hpp"
#include "grnn/network.hpp"
#include "grnn/tpe.hpp"
#include "grnn/train.hpp"

namespace grnn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hyperparameters for one architecture, as found by HPO or fixed by a profile.
struct HyperParams {
  std::vector<std::size_t> units;  // one per network layer
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
};

inline void to_json(nlohmann::json& j, const HyperParams& h) {
  j = nlohmann::json{{"units", h.units}, {"learning_rate", h.learning_rate}, {"batch_size", h.batch_size}};
}

inline void from_json(const nlohmann::json& j, HyperParams& h) {
  h.units = j.at("units").get<std::vector<std::size_t>>();
  h.learning_rate = j.at("learning_rate").get<double>();
  h.batch_size = j.at("batch_size").get<std::size_t>();
}

/// Search ranges for the HPO space.
struct SearchRanges {
  std::int64_t units_min = 32, units_max = 512;
  double lr_min = 1e-4, lr_max = 1e-2;
  std::int64_t batch_min = 16, batch_max = 128;
};

struct PipelineConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this

  std::vector<SourceSpec> sources;
  std::string target = "NIFTY";
  bool indicators = true;
  std::size_t lookback = 10;
  double train_fraction = 0.8;
  FitOn fit_on = FitOn::TrainOnly;

  std::vector<std::string> architectures;
  Activation activation = Activation::Tanh;
  TrainConfig train;
  ExperimentConfig experiment;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs";

  TpeConfig tpe;
  SearchRanges ranges;
  std::size_t hpo_max_epochs = 50;

  std::map<std::string, HyperParams> fixed;  // [arch.<label>] sections

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
  }
  std::filesystem::path out(const std::filesystem::path& rel = {}) const {
    return rel.empty() ? resolve(out_dir) : resolve(out_dir) / rel;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(std::move(t));
  return out;
}

template <typename T>
T get(const boost::property_tree::ptree& pt, const std::string& key, T fallback) {
  if (!pt.get_child_optional(key)) return fallback;
  try {
    return pt.get<T>(key);
  } catch (const boost::property_tree::ptree_bad_data&) {
    throw ConfigError("config key '" + key + "' has an invalid value '" + pt.get<std::string>(key) + "'");
  }
}

inline bool get_bool(const boost::property_tree::ptree& pt, const std::string& key, bool fallback) {
  const auto v = pt.get_optional<std::string>(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("config key '" + key + "' must be true or false, got '" + *v + "'");
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + s + "' (expected tanh or relu)");
}

}  // namespace detail

/// Applies `section.key=value` overrides on top of a parsed tree. The key is
/// the part after the last dot, so `arch.lstm1.units=64` edits [arch.lstm1].
inline void apply_overrides(boost::property_tree::ptree& pt, const std::vector<std::string>& overrides) {
  using Path = boost::property_tree::ptree::path_type;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const std::string lhs = detail::trim(o.substr(0, eq));
    const auto dot = lhs.rfind('.');
    if (eq == std::string::npos || dot == std::string::npos || dot == 0 || dot + 1 == lhs.size())
      throw ConfigError("override '" + o + "' must look like section.key=value");
    const std::string section = lhs.substr(0, dot);
    auto& node = pt.get_child_optional(Path(section, '\0')) ? pt.get_child(Path(section, '\0'))
                                                            : pt.add_child(Path(section, '\0'), {});
    node.put(lhs.substr(dot + 1), detail::trim(o.substr(eq + 1)));
  }
}

inline PipelineConfig config_from_tree(const boost::property_tree::ptree& pt,
                                       const std::filesystem::path& base_dir) {
  using detail::get;
  PipelineConfig c;
  c.base_dir = base_dir;

  if (const auto src = pt.get_child_optional("sources")) {
    for (const auto& [name, node] : *src) {
      SourceSpec s;
      s.name = name;
      s.path = c.resolve(node.get_value<std::string>()).string();
      s.value_column = pt.get<std::string>("columns." + name, "Close");
      c.sources.push_back(std::move(s));
    }
  }

  c.target = get<std::string>(pt, "data.target", c.target);
  c.indicators = detail::get_bool(pt, "data.indicators", c.indicators);
  c.lookback = get<std::size_t>(pt, "data.lookback", c.lookback);
  c.train_fraction = get<double>(pt, "data.train_fraction", c.train_fraction);
  c.fit_on = fit_on_from_string(get<std::string>(pt, "data.fit_on", "train_only"));

  c.architectures = detail::split_list(get<std::string>(pt, "experiment.architectures", "lstm1"));
  for (std::size_t i = 0; i < c.architectures.size(); ++i) {
    architecture_kinds(c.architectures[i]);  // validates the label
    for (std::size_t j = 0; j < i; ++j)
      if (c.architectures[i] == c.architectures[j])
        throw ConfigError("architecture '" + c.architectures[i] + "' is listed twice");
  }
  c.experiment.repeats = get<std::size_t>(pt, "experiment.repeats", c.experiment.repeats);
  c.experiment.r2_threshold = get<double>(pt, "experiment.r2_threshold", c.experiment.r2_threshold);
  c.seed = get<std::uint64_t>(pt, "experiment.seed", c.seed);
  c.out_dir = get<std::string>(pt, "experiment.out", c.out_dir.string());

  c.activation = detail::activation_from_string(get<std::string>(pt, "train.activation", "tanh"));
  c.train.optimizer = OptimizerConfig::defaults(
      optimizer_from_string(get<std::string>(pt, "train.optimizer", "nadam")));
  c.train.optimizer.learning_rate = get<double>(pt, "train.learning_rate", c.train.optimizer.learning_rate);
  c.train.batch_size = get<std::size_t>(pt, "train.batch_size", c.train.batch_size);
  c.train.max_epochs = get<std::size_t>(pt, "train.max_epochs", c.train.max_epochs);
  c.train.patience = get<std::size_t>(pt, "train.patience", c.train.patience);
  c.train.shuffle = detail::get_bool(pt, "train.shuffle", c.train.shuffle);
  if (const auto clip = pt.get_optional<double>("train.clip_norm")) c.train.clip_norm = *clip;
  c.train.seed = c.seed;

  c.tpe.n_trials = get<std::size_t>(pt, "hpo.n_trials", c.tpe.n_trials);
  c.tpe.n_startup_random = get<std::size_t>(pt, "hpo.n_startup_random", c.tpe.n_startup_random);
  c.tpe.gamma = get<double>(pt, "hpo.gamma", c.tpe.gamma);
  c.tpe.n_ei_candidates = get<std::size_t>(pt, "hpo.n_ei_candidates", c.tpe.n_ei_candidates);
  c.tpe.bandwidth_floor = get<double>(pt, "hpo.bandwidth_floor", c.tpe.bandwidth_floor);
  c.tpe.seed = get<std::uint64_t>(pt, "hpo.seed", c.seed);
  c.hpo_max_epochs = get<std::size_t>(pt, "hpo.max_epochs", c.hpo_max_epochs);
  c.ranges.units_min = get<std::int64_t>(pt, "hpo.units_min", c.ranges.units_min);
  c.ranges.units_max = get<std::int64_t>(pt, "hpo.units_max", c.ranges.units_max);
  c.ranges.lr_min = get<double>(pt, "hpo.lr_min", c.ranges.lr_min);
  c.ranges.lr_max = get<double>(pt, "hpo.lr_max", c.ranges.lr_max);
  c.ranges.batch_min = get<std::int64_t>(pt, "hpo.batch_min", c.ranges.batch_min);
  c.ranges.batch_max = get<std::int64_t>(pt, "hpo.batch_max", c.ranges.batch_max);

  for (const auto& [section, node] : pt) {
    if (section.rfind("arch.", 0) != 0) continue;
    const std::string label = section.substr(5);
    HyperParams h;
    for (const auto& u : detail::split_list(node.get<std::string>("units", "")))
      h.units.push_back(std::stoul(u));
    if (h.units.size() != architecture_kinds(label).size())
      throw ConfigError("[" + section + "] needs " + std::to_string(architecture_kinds(label).size()) +
                        " units values, got " + std::to_string(h.units.size()));
    h.learning_rate = get<double>(node, "learning_rate", h.learning_rate);
    h.batch_size = get<std::size_t>(node, "batch_size", h.batch_size);
    c.fixed[label] = h;
  }

  c.train.validate();
  c.tpe.validate();
  if (c.lookback == 0) throw ConfigError("data.lookback must be >= 1");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
    throw ConfigError("data.train_fraction must be in (0, 1)");
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path,
                                  const std::vector<std::string>& overrides = {}) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  apply_overrides(pt, overrides);
  return config_from_tree(pt, path.has_parent_path() ? path.parent_path() : ".");
}

}  // namespace grnn
