/*
 * Copyright 2026 The Oversub Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "oversub/config.hpp"

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <string_view>

#include "oversub/baselines.hpp"
#include "oversub/checkpoint.hpp"
#include "oversub/errors.hpp"

namespace oversub {
namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).template get<T>();
}

Json size_to_json(const VmSizeOption& s) {
  return Json{{"cores", s.cores}, {"mem", s.mem}, {"net", s.net}, {"weight", s.weight}};
}

VmSizeOption size_from_json(const Json& j) {
  check_keys(j, {"cores", "mem", "net", "weight"}, "size option");
  VmSizeOption s;
  read(j, "cores", s.cores);
  read(j, "mem", s.mem);
  read(j, "net", s.net);
  read(j, "weight", s.weight);
  return s;
}

Json profile_to_json(const SubscriberProfile& p) {
  Json sizes = Json::array();
  for (const auto& s : p.sizes) sizes.push_back(size_to_json(s));
  return Json{{"arrival_rate", p.arrival_rate},
              {"sizes", sizes},
              {"lifetime",
               {{"kind", std::string(to_string(p.lifetime.kind))},
                {"min_hours", p.lifetime.min_hours},
                {"max_hours", p.lifetime.max_hours},
                {"mean_hours", p.lifetime.mean_hours}}},
              {"shape", std::string(to_string(p.shape))},
              {"mean_usage", p.mean_usage},
              {"amplitude", p.amplitude},
              {"phase", p.phase},
              {"noise_std", p.noise_std},
              {"burst_probability", p.burst_probability},
              {"burst_level", p.burst_level},
              {"initial_vms", p.initial_vms}};
}

SubscriberProfile profile_from_json(const Json& j) {
  check_keys(j,
             {"arrival_rate", "sizes", "lifetime", "shape", "mean_usage", "amplitude", "phase",
              "noise_std", "burst_probability", "burst_level", "initial_vms"},
             "subscriber profile");
  SubscriberProfile p;
  read(j, "arrival_rate", p.arrival_rate);
  if (j.contains("sizes")) {
    p.sizes.clear();
    for (const auto& s : j.at("sizes")) p.sizes.push_back(size_from_json(s));
  }
  if (j.contains("lifetime")) {
    const auto& l = j.at("lifetime");
    check_keys(l, {"kind", "min_hours", "max_hours", "mean_hours"}, "lifetime");
    if (l.contains("kind")) p.lifetime.kind = lifetime_kind_from_string(l.at("kind").get<std::string>());
    read(l, "min_hours", p.lifetime.min_hours);
    read(l, "max_hours", p.lifetime.max_hours);
    read(l, "mean_hours", p.lifetime.mean_hours);
  }
  if (j.contains("shape")) p.shape = usage_shape_from_string(j.at("shape").get<std::string>());
  read(j, "mean_usage", p.mean_usage);
  read(j, "amplitude", p.amplitude);
  read(j, "phase", p.phase);
  read(j, "noise_std", p.noise_std);
  read(j, "burst_probability", p.burst_probability);
  read(j, "burst_level", p.burst_level);
  read(j, "initial_vms", p.initial_vms);
  return p;
}

std::string_view to_string(marl::ConstraintEstimator e) {
  return e == marl::ConstraintEstimator::kBatchMean ? "batch_mean" : "trailing_window";
}

marl::ConstraintEstimator estimator_from_string(std::string_view s) {
  if (s == "batch_mean") return marl::ConstraintEstimator::kBatchMean;
  if (s == "trailing_window") return marl::ConstraintEstimator::kTrailingWindow;
  throw ConfigError("unknown constraint estimator '" + std::string(s) + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <class T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string_view to_string(StartMode mode) { return mode == StartMode::kCold ? "cold" : "warm"; }

StartMode start_mode_from_string(std::string_view name) {
  if (name == "cold") return StartMode::kCold;
  if (name == "warm") return StartMode::kWarm;
  throw ConfigError("unknown start mode '" + std::string(name) + "'");
}

Json to_json(const ClusterConfig& c) {
  return Json{{"num_pms", c.num_pms},
              {"cpu_capacity", c.cpu_capacity},
              {"mem_capacity", c.mem_capacity},
              {"net_capacity", c.net_capacity},
              {"hot_fraction", c.hot_fraction}};
}

ClusterConfig cluster_config_from_json(const Json& j) {
  check_keys(j, {"num_pms", "cpu_capacity", "mem_capacity", "net_capacity", "hot_fraction"},
             "cluster");
  ClusterConfig c;
  try {
    read(j, "num_pms", c.num_pms);
    read(j, "cpu_capacity", c.cpu_capacity);
    read(j, "mem_capacity", c.mem_capacity);
    read(j, "net_capacity", c.net_capacity);
    read(j, "hot_fraction", c.hot_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cluster: ") + e.what());
  }
  c.validate();
  return c;
}

Json to_json(const marl::LearnerConfig& c) {
  return Json{{"gamma", c.gamma},
              {"batch_size", c.batch_size},
              {"memory_capacity", c.memory_capacity},
              {"tau", c.tau},
              {"learning_rate", c.learning_rate},
              {"dual_lr", c.dual_lr},
              {"alpha", c.alpha},
              {"delta", c.delta},
              {"initial_lambda", c.initial_lambda},
              {"freeze_lambda", c.freeze_lambda},
              {"agent_hidden", c.agent_hidden},
              {"cluster_hidden", c.cluster_hidden},
              {"optimization_iterations", c.optimization_iterations},
              {"epsilon_start", c.epsilon_start},
              {"epsilon_end", c.epsilon_end},
              {"epsilon_decay_fraction", c.epsilon_decay_fraction},
              {"estimator", std::string(to_string(c.estimator))},
              {"estimator_window", c.estimator_window},
              {"max_grad_norm", c.max_grad_norm},
              {"resample_training_trace", c.resample_training_trace}};
}

marl::LearnerConfig learner_config_from_json(const Json& j) {
  check_keys(j,
             {"gamma", "batch_size", "memory_capacity", "tau", "learning_rate", "dual_lr",
              "alpha", "delta", "initial_lambda", "freeze_lambda", "agent_hidden",
              "cluster_hidden", "optimization_iterations", "epsilon_start", "epsilon_end",
              "epsilon_decay_fraction", "estimator", "estimator_window", "max_grad_norm",
              "resample_training_trace"},
             "learner");
  marl::LearnerConfig c;
  try {
    read(j, "gamma", c.gamma);
    read(j, "batch_size", c.batch_size);
    read(j, "memory_capacity", c.memory_capacity);
    read(j, "tau", c.tau);
    read(j, "learning_rate", c.learning_rate);
    read(j, "dual_lr", c.dual_lr);
    read(j, "alpha", c.alpha);
    read(j, "delta", c.delta);
    read(j, "initial_lambda", c.initial_lambda);
    read(j, "freeze_lambda", c.freeze_lambda);
    read(j, "agent_hidden", c.agent_hidden);
    read(j, "cluster_hidden", c.cluster_hidden);
    read(j, "optimization_iterations", c.optimization_iterations);
    read(j, "epsilon_start", c.epsilon_start);
    read(j, "epsilon_end", c.epsilon_end);
    read(j, "epsilon_decay_fraction", c.epsilon_decay_fraction);
    if (j.contains("estimator")) c.estimator = estimator_from_string(j.at("estimator").get<std::string>());
    read(j, "estimator_window", c.estimator_window);
    read(j, "max_grad_norm", c.max_grad_norm);
    read(j, "resample_training_trace", c.resample_training_trace);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("learner: ") + e.what());
  }
  c.validate();
  return c;
}

Json to_json(const GeneratorConfig& c) {
  Json profiles = Json::array();
  for (const auto& p : c.profiles) profiles.push_back(profile_to_json(p));
  return Json{{"num_subscribers", c.num_subscribers},
              {"horizon_hours", c.horizon_hours},
              {"rng_seed", c.rng_seed},
              {"profiles", profiles}};
}

GeneratorConfig generator_config_from_json(const Json& j) {
  check_keys(j, {"num_subscribers", "horizon_hours", "rng_seed", "profiles"}, "generator");
  GeneratorConfig c;
  try {
    read(j, "num_subscribers", c.num_subscribers);
    read(j, "horizon_hours", c.horizon_hours);
    read(j, "rng_seed", c.rng_seed);
    if (j.contains("profiles")) {
      for (const auto& p : j.at("profiles")) c.profiles.push_back(profile_from_json(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator: ") + e.what());
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  const int sources = (trace.preset ? 1 : 0) + (trace.generator ? 1 : 0) +
                      (trace.vms_path || trace.usage_path ? 1 : 0);
  if (sources != 1) throw ConfigError("exactly one trace source must be given");
  if (static_cast<bool>(trace.vms_path) != static_cast<bool>(trace.usage_path)) {
    throw ConfigError("file traces need both 'vms' and 'usage'");
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (train_episodes < 0) throw ConfigError("train_episodes must be >= 0");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (baselines.ma_window < 1) throw ConfigError("ma_window must be >= 1");
  if (!(baselines.sl_margin > 0.0)) throw ConfigError("sl_margin must be positive");
  cluster.validate();
  learner.validate();
}

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"trace", "cluster", "env", "learner", "baselines", "train_episodes",
              "eval_episodes", "threads", "seeds", "out_dir"},
             "config");
  RunConfig c;
  try {
    if (!j.contains("trace")) throw ConfigError("config needs a 'trace' section");
    const auto& t = j.at("trace");
    check_keys(t, {"preset", "seed", "vms", "usage", "generator", "generator_file"}, "trace");
    if (t.contains("preset")) c.trace.preset = t.at("preset").get<std::string>();
    if (t.contains("seed")) {
      if (!t.contains("preset")) throw ConfigError("trace.seed only applies to presets");
      c.trace.preset_seed = t.at("seed").get<std::uint64_t>();
    }
    if (t.contains("vms")) c.trace.vms_path = resolve(base_dir, t.at("vms").get<std::string>());
    if (t.contains("usage")) {
      c.trace.usage_path = resolve(base_dir, t.at("usage").get<std::string>());
    }
    if (t.contains("generator") && t.contains("generator_file")) {
      throw ConfigError("exactly one trace source must be given");
    }
    if (t.contains("generator")) c.trace.generator = generator_config_from_json(t.at("generator"));
    if (t.contains("generator_file")) {
      const auto path = resolve(base_dir, t.at("generator_file").get<std::string>());
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot open generator file " + path.string());
      c.trace.generator = generator_config_from_json(Json::parse(in));
    }

    if (j.contains("cluster")) c.cluster = cluster_config_from_json(j.at("cluster"));
    if (j.contains("env")) {
      const auto& e = j.at("env");
      check_keys(e, {"start_mode", "horizon", "delta", "action_set", "reward_scale"}, "env");
      if (e.contains("start_mode")) {
        c.start_mode = start_mode_from_string(e.at("start_mode").get<std::string>());
      }
      read(e, "horizon", c.horizon);
      read(e, "delta", c.delta);
      read(e, "action_set", c.action_set);
      read(e, "reward_scale", c.reward_scale);
    }
    if (j.contains("learner")) {
      if (j.at("learner").contains("delta")) {
        throw ConfigError("set delta under 'env'; the learner shares it");
      }
      c.learner = learner_config_from_json(j.at("learner"));
    }
    c.learner.delta = c.delta;
    if (j.contains("baselines")) {
      const auto& b = j.at("baselines");
      check_keys(b, {"ma_window", "sl_margin"}, "baselines");
      read(b, "ma_window", c.baselines.ma_window);
      read(b, "sl_margin", c.baselines.sl_margin);
    }
    read(j, "train_episodes", c.train_episodes);
    read(j, "eval_episodes", c.eval_episodes);
    read(j, "threads", c.threads);
    read(j, "seeds", c.seeds);
    if (j.contains("out_dir")) c.out_dir = resolve(base_dir, j.at("out_dir").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

Json to_json(const RunConfig& c) {
  Json trace = Json::object();
  if (c.trace.preset) trace["preset"] = *c.trace.preset;
  if (c.trace.preset_seed) trace["seed"] = *c.trace.preset_seed;
  if (c.trace.vms_path) trace["vms"] = c.trace.vms_path->string();
  if (c.trace.usage_path) trace["usage"] = c.trace.usage_path->string();
  if (c.trace.generator) trace["generator"] = to_json(*c.trace.generator);
  Json learner = to_json(c.learner);
  learner.erase("delta");
  return Json{{"trace", trace},
              {"cluster", to_json(c.cluster)},
              {"env",
               {{"start_mode", std::string(to_string(c.start_mode))},
                {"horizon", c.horizon},
                {"delta", c.delta},
                {"action_set", c.action_set},
                {"reward_scale", c.reward_scale}}},
              {"learner", learner},
              {"baselines", {{"ma_window", c.baselines.ma_window}, {"sl_margin", c.baselines.sl_margin}}},
              {"train_episodes", c.train_episodes},
              {"eval_episodes", c.eval_episodes},
              {"threads", c.threads},
              {"seeds", c.seeds},
              {"out_dir", c.out_dir.string()}};
}

std::optional<GeneratorConfig> resolved_generator(const TraceSource& source) {
  if (source.generator) return source.generator;
  if (source.preset) {
    auto g = scenario_preset(*source.preset);
    if (source.preset_seed) g.rng_seed = *source.preset_seed;
    return g;
  }
  return std::nullopt;
}

std::shared_ptr<const TraceSet> build_trace(const TraceSource& source) {
  if (auto g = resolved_generator(source)) {
    return std::make_shared<const TraceSet>(generate_synthetic(*g));
  }
  if (!source.vms_path || !source.usage_path) throw ConfigError("no trace source configured");
  return std::make_shared<const TraceSet>(load_traces(*source.vms_path, *source.usage_path));
}

EnvConfig make_env_config(const RunConfig& config, std::shared_ptr<const TraceSet> trace) {
  EnvConfig e;
  e.cluster = config.cluster;
  e.trace = std::move(trace);
  e.start_mode = config.start_mode;
  e.horizon = config.horizon;
  e.delta = config.delta;
  e.action_set = config.action_set;
  e.reward_scale = config.reward_scale;
  e.validate();
  return e;
}

PolicySpec parse_policy_spec(std::string_view spec) {
  PolicySpec p;
  p.text = std::string(spec);
  const auto colon = spec.find(':');
  const auto head = spec.substr(0, colon);
  const auto arg = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  const bool has_arg = colon != std::string_view::npos;
  if (head == "grid") {
    if (!has_arg) throw ConfigError("grid policy needs a rate, e.g. grid:0.4");
    p.kind = PolicySpec::Kind::kGrid;
    p.rate = parse_number<double>(arg, "grid rate");
    if (!(p.rate > 0.0 && p.rate <= 1.0)) throw ConfigError("grid rate must lie in (0, 1]");
  } else if (head == "ma") {
    p.kind = PolicySpec::Kind::kMovingAverage;
    p.window = has_arg ? parse_number<int>(arg, "moving-average window") : 0;
    if (has_arg && p.window < 1) throw ConfigError("moving-average window must be >= 1");
  } else if (head == "sl") {
    if (has_arg) throw ConfigError("sl takes no argument");
    p.kind = PolicySpec::Kind::kSupervisedMax;
  } else if (head == "c2marl") {
    if (!has_arg || arg.empty()) throw ConfigError("c2marl policy needs a checkpoint path");
    p.kind = PolicySpec::Kind::kLearned;
    p.checkpoint = std::string(arg);
  } else {
    throw ConfigError("unknown policy spec '" + std::string(spec) + "'");
  }
  return p;
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const RunConfig& config,
                                    const TraceSet& training) {
  const double min_rate = config.action_set.front();
  switch (spec.kind) {
    case PolicySpec::Kind::kGrid:
      return std::make_unique<GridPolicy>(spec.rate);
    case PolicySpec::Kind::kMovingAverage:
      return std::make_unique<MovingAveragePolicy>(
          spec.window > 0 ? spec.window : config.baselines.ma_window, min_rate);
    case PolicySpec::Kind::kSupervisedMax:
      return std::make_unique<SupervisedMaxPolicy>(training, config.baselines.sl_margin, min_rate);
    case PolicySpec::Kind::kLearned: {
      const auto state = load_checkpoint(spec.checkpoint);
      if (state.nets.num_agents() != training.num_subscribers()) {
        throw ConfigError("checkpoint was trained for " + std::to_string(state.nets.num_agents()) +
                          " subscribers, trace has " + std::to_string(training.num_subscribers()));
      }
      if (state.action_set != config.action_set) {
        throw ConfigError("checkpoint action set differs from the configured one");
      }
      return std::make_unique<marl::QPolicy>(marl::greedy_policy(state));
    }
  }
  throw ConfigError("unhandled policy kind");
}

}  // namespace oversub
