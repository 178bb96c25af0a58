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
#include <span>
#include <string>
#include <vector>

#include "oversub/env.hpp"
#include "oversub/policy.hpp"

namespace oversub {

/// What one evaluation episode produced.
struct EpisodeMetrics {
  std::vector<int> pm_hot_counts;
  int hot_cluster_count = 0;
  double requested = 0.0;
  double assigned = 0.0;
  int drops = 0;

  int max_pm_hot_count() const;
  /// 100 * (1 - assigned / requested); 0 for an episode without placements.
  double s_cores() const;
};

/// True iff count / T >= delta (with a small slack for rounding in delta * T).
bool violates(int count, int horizon, double delta);

/// Pooled over episodes: 100 * (1 - sum assigned / sum requested).
/// Throws NoPlacements when nothing was requested.
double s_cores(std::span<const EpisodeMetrics> episodes);

/// 100 * max over PMs of the fraction of episodes in which that PM violates.
double pm_hot_r(std::span<const EpisodeMetrics> episodes, double delta, int horizon);

/// 100 * fraction of episodes in which the hot-cluster count violates.
double c_hot_r(std::span<const EpisodeMetrics> episodes, double delta, int horizon);

/// (100 - pm_hot_r) / 100 >= alpha.
bool safety_indicator(double pm_hot_r, double alpha);

inline constexpr double kSafetyLevels[] = {0.75, 0.85, 0.95};

struct EvalReport {
  std::string policy;
  std::string config_digest;
  int episodes = 0;
  int horizon = 0;
  double delta = 0.0;
  double s_cores_mean = 0.0;  // pooled
  double s_cores_std = 0.0;   // across episodes
  double pm_hot_r = 0.0;
  double c_hot_r = 0.0;
  std::vector<bool> safety;   // aligned with kSafetyLevels
  int drops = 0;
  std::vector<EpisodeMetrics> per_episode;
};

/// Stable hex digest of the parts of `config` that shape an evaluation.
std::string config_digest(const EnvConfig& config);

/// Seed for evaluation episode `index` derived from `seed`.
std::uint64_t episode_seed(std::uint64_t seed, int index);

/// Plays one episode of `policy` on `env` from its current reset state.
EpisodeMetrics play_episode(const Policy& policy, Environment& env);

/// Runs `episodes` episodes, each on a fresh Gaussian resample of the
/// configured trace. Results do not depend on `threads`.
EvalReport evaluate(const Policy& policy, const EnvConfig& config, int episodes,
                    std::uint64_t seed, int threads = 1);

/// Writes the report JSON and the per-episode CSV.
void write_report(const EvalReport& report, const std::filesystem::path& json_path,
                  const std::filesystem::path& csv_path);

}  // namespace oversub
