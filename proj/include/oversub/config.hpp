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

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oversub/cluster.hpp"
#include "oversub/env.hpp"
#include "oversub/learner.hpp"
#include "oversub/policy.hpp"
#include "oversub/trace.hpp"

namespace oversub {

using Json = nlohmann::ordered_json;

/// Where the workload comes from. Exactly one of the three is set.
struct TraceSource {
  std::optional<std::string> preset;
  std::optional<std::uint64_t> preset_seed;  // overrides the preset's own seed
  std::optional<std::filesystem::path> vms_path;
  std::optional<std::filesystem::path> usage_path;
  std::optional<GeneratorConfig> generator;
};

struct BaselineParams {
  int ma_window = 24;
  double sl_margin = 1.05;
};

/// Everything a CLI run needs, independent of the subcommand.
struct RunConfig {
  TraceSource trace;
  ClusterConfig cluster;
  StartMode start_mode = StartMode::kCold;
  int horizon = 0;
  double delta = 1.0 / 40.0;
  std::vector<double> action_set{0.2, 0.3, 0.4, 0.5, 0.6, 1.0};
  double reward_scale = 0.0;
  marl::LearnerConfig learner;
  BaselineParams baselines;
  int train_episodes = 600;
  int eval_episodes = 100;
  int threads = 1;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out_dir = "out";

  void validate() const;
};

/// Parses a config document. Unknown keys anywhere raise ConfigError; relative
/// trace paths are resolved against `base_dir`.
RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
Json to_json(const RunConfig& config);

Json to_json(const ClusterConfig& c);
ClusterConfig cluster_config_from_json(const Json& j);
Json to_json(const marl::LearnerConfig& c);
marl::LearnerConfig learner_config_from_json(const Json& j);
Json to_json(const GeneratorConfig& c);
GeneratorConfig generator_config_from_json(const Json& j);

std::string_view to_string(StartMode mode);
StartMode start_mode_from_string(std::string_view name);

/// Builds (or loads) the workload named by `source`.
std::shared_ptr<const TraceSet> build_trace(const TraceSource& source);
/// The generator config a source resolves to; nullopt for file sources.
std::optional<GeneratorConfig> resolved_generator(const TraceSource& source);

EnvConfig make_env_config(const RunConfig& config, std::shared_ptr<const TraceSet> trace);

/// `grid:<rate>` | `ma:<window>` | `sl` | `c2marl:<checkpoint path>`.
struct PolicySpec {
  enum class Kind { kGrid, kMovingAverage, kSupervisedMax, kLearned };
  Kind kind = Kind::kGrid;
  double rate = 1.0;
  int window = 24;
  std::filesystem::path checkpoint;
  std::string text;
};

PolicySpec parse_policy_spec(std::string_view spec);

/// Instantiates `spec`. SL is fitted on `training`.
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const RunConfig& config,
                                    const TraceSet& training);

}  // namespace oversub
