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

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "oversub/cluster.hpp"
#include "oversub/trace.hpp"

namespace oversub {

enum class StartMode { kCold, kWarm };

/// Per-agent observation layout: 7 resource components, then the hour.
inline constexpr int kAgentResourceFeatures = 7;
inline constexpr int kAgentObsSize = kAgentResourceFeatures + 2;

/// Size of the cluster vector for `num_agents` subscribers.
constexpr int cluster_obs_size(int num_agents) { return kAgentResourceFeatures * num_agents + 2; }

struct EnvConfig {
  ClusterConfig cluster;
  std::shared_ptr<const TraceSet> trace;
  StartMode start_mode = StartMode::kCold;
  int horizon = 0;  // T; <= 0 uses the trace horizon
  double delta = 1.0 / 40.0;
  std::vector<double> action_set{0.2, 0.3, 0.4, 0.5, 0.6, 1.0};
  double reward_scale = 0.0;  // Z; <= 0 means K * B

  void validate() const;
  int episode_length() const;
  double normalizer() const;
  int num_agents() const { return trace ? trace->num_subscribers() : 0; }
};

/// o^i = (cpu_assigned, cpu_requested_live, mem_reserved, net_reserved,
///        cpu_request_now, mem_request_now, net_request_now, hour_sin, hour_cos)
using AgentObservation = std::array<double, kAgentObsSize>;

struct Observation {
  int hour = 0;
  std::vector<AgentObservation> agents;
  std::vector<double> cluster;  // first 7 components of every agent, then sin/cos
  std::vector<int> masks;       // 1 iff the agent has a CPU request now

  bool operator==(const Observation&) const = default;
};

struct StepInfo {
  std::vector<int> hot;  // per-PM indicator at this step
  double requested_now = 0.0;
  double assigned_now = 0.0;
  double assigned_total = 0.0;
  double remaining_total = 0.0;
  int drops = 0;
};

struct StepResult {
  double reward = 0.0;
  int constraint_cost = 0;  // hot-cluster indicator
  Observation next_observation;
  bool done = false;
  StepInfo info;
};

/// Running per-episode tallies kept by the environment.
struct EpisodeTally {
  std::vector<int> pm_hot_counts;
  int cluster_hot_count = 0;
  double requested = 0.0;
  double assigned = 0.0;
  double remaining_sum = 0.0;  // sum over steps of remaining cores
  double reward_sum = 0.0;
  int drops = 0;
};

/// Hourly oversubscription environment over one trace.
///
/// Not thread-safe; give each thread its own instance. The trace is shared
/// read-only.
class Environment {
 public:
  explicit Environment(EnvConfig config);

  /// Cold start empties the cluster; warm start first places every VM the
  /// trace marks as already running (created_at < 0) at rate 1.0.
  Observation reset(std::uint64_t rng_seed);
  /// Replaces the trace (same subscribers) and resets.
  Observation reset(std::uint64_t rng_seed, std::shared_ptr<const TraceSet> trace);

  /// One hour: departures, then arrivals at action_set[a^i] per subscriber,
  /// then usage and hot detection.
  StepResult step(std::span<const int> action_indices);
  /// Same as step() with free-form rates in (0, 1] per subscriber.
  StepResult step_rates(std::span<const double> rates);

  int t() const noexcept { return t_; }
  bool done() const noexcept { return t_ >= config_.episode_length(); }
  const EnvConfig& config() const noexcept { return config_; }
  const TraceSet& trace() const noexcept { return *config_.trace; }
  const Cluster& cluster() const noexcept { return cluster_; }
  const Observation& observation() const noexcept { return obs_; }
  const EpisodeTally& tally() const noexcept { return tally_; }
  std::uint64_t episode_seed() const noexcept { return seed_; }

 private:
  void place(std::size_t vm_index, double rate);
  void remove(std::size_t vm_index);
  Observation observe() const;

  EnvConfig config_;
  Cluster cluster_;
  int t_ = 0;
  std::uint64_t seed_ = 0;
  Observation obs_;
  EpisodeTally tally_;
  std::vector<std::vector<std::size_t>> departures_;
  std::vector<char> placed_;
  // Per-subscriber live sums: assigned cpu, requested cpu, mem, net.
  std::vector<std::array<double, 4>> live_;
};

/// C_c = max_k C_k.
int constraint_cost_cluster(std::span<const int> hot);

/// (sin, cos) of the hour of day on the unit circle.
std::pair<double, double> hour_encoding(int t);

}  // namespace oversub
