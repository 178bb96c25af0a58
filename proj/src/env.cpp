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

#include "oversub/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oversub/errors.hpp"

namespace oversub {

void EnvConfig::validate() const {
  cluster.validate();
  if (!trace) throw ConfigError("environment needs a trace");
  const int len = episode_length();
  if (len < 1) throw ConfigError("horizon must be >= 1");
  if (len > trace->horizon()) throw ConfigError("horizon exceeds the trace horizon");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  if (action_set.empty()) throw ConfigError("action_set is empty");
  for (std::size_t i = 0; i < action_set.size(); ++i) {
    if (!(action_set[i] > 0.0 && action_set[i] <= 1.0)) {
      throw ConfigError("action rates must lie in (0, 1]");
    }
    if (i > 0 && !(action_set[i] > action_set[i - 1])) {
      throw ConfigError("action_set must be strictly increasing");
    }
  }
  if (action_set.back() != 1.0) throw ConfigError("action_set must contain 1.0");
  if (reward_scale < 0.0 || !std::isfinite(reward_scale)) {
    throw ConfigError("reward_scale must be positive (or 0 for K*B)");
  }
}

int EnvConfig::episode_length() const {
  if (horizon > 0) return horizon;
  return trace ? trace->horizon() : 0;
}

double EnvConfig::normalizer() const {
  return reward_scale > 0.0 ? reward_scale : cluster.total_cpu();
}

Environment::Environment(EnvConfig config)
    : config_(std::move(config)), cluster_((config_.validate(), config_.cluster)) {
  reset(0);
}

Observation Environment::reset(std::uint64_t rng_seed, std::shared_ptr<const TraceSet> trace) {
  if (!trace) throw ConfigError("environment needs a trace");
  if (trace->num_subscribers() != config_.num_agents()) {
    throw ConfigError("replacement trace has a different number of subscribers");
  }
  config_.trace = std::move(trace);
  config_.validate();
  return reset(rng_seed);
}

Observation Environment::reset(std::uint64_t rng_seed) {
  seed_ = rng_seed;
  const auto& trace = *config_.trace;
  const int len = config_.episode_length();
  cluster_ = Cluster(config_.cluster);
  t_ = 0;
  tally_ = EpisodeTally{};
  tally_.pm_hot_counts.assign(static_cast<std::size_t>(config_.cluster.num_pms), 0);
  placed_.assign(trace.vms().size(), 0);
  live_.assign(static_cast<std::size_t>(trace.num_subscribers()), {0.0, 0.0, 0.0, 0.0});

  departures_.assign(static_cast<std::size_t>(len), {});
  for (std::size_t i = 0; i < trace.vms().size(); ++i) {
    const auto& d = trace.vms()[i].deleted_at;
    if (d && *d >= 0 && *d < len) departures_[static_cast<std::size_t>(*d)].push_back(i);
  }

  if (config_.start_mode == StartMode::kWarm) {
    auto pre = trace.preexisting();
    std::stable_sort(pre.begin(), pre.end(), [&](std::size_t a, std::size_t b) {
      return trace.vms()[a].created_at < trace.vms()[b].created_at;
    });
    for (const auto i : pre) {
      if (trace.vms()[i].end_hour(trace.horizon()) <= 0) continue;
      try {
        place(i, 1.0);
      } catch (const NoFeasiblePm& e) {
        throw ResetError(std::string("warm start does not fit the cluster: ") + e.what());
      }
    }
  }
  obs_ = observe();
  return obs_;
}

void Environment::place(std::size_t vm_index, double rate) {
  const auto& vm = config_.trace->vms()[vm_index];
  cluster_.best_fit_place(vm, rate, vm_index);
  placed_[vm_index] = 1;
  auto& s = live_[static_cast<std::size_t>(vm.subscriber_id)];
  s[0] += rate * vm.requested_cores;
  s[1] += vm.requested_cores;
  s[2] += vm.requested_mem;
  s[3] += vm.requested_net;
}

void Environment::remove(std::size_t vm_index) {
  const auto& vm = config_.trace->vms()[vm_index];
  const double released = cluster_.delete_vm(vm.vm_id);
  placed_[vm_index] = 0;
  auto& s = live_[static_cast<std::size_t>(vm.subscriber_id)];
  s[0] = std::max(0.0, s[0] - released);
  s[1] = std::max(0.0, s[1] - vm.requested_cores);
  s[2] = std::max(0.0, s[2] - vm.requested_mem);
  s[3] = std::max(0.0, s[3] - vm.requested_net);
}

StepResult Environment::step(std::span<const int> action_indices) {
  if (static_cast<int>(action_indices.size()) != config_.num_agents()) {
    throw ConfigError("expected one action per subscriber");
  }
  std::vector<double> rates(action_indices.size());
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const int a = action_indices[i];
    if (a < 0 || a >= static_cast<int>(config_.action_set.size())) {
      throw ConfigError("action index out of range");
    }
    rates[i] = config_.action_set[static_cast<std::size_t>(a)];
  }
  return step_rates(rates);
}

StepResult Environment::step_rates(std::span<const double> rates) {
  if (done()) throw Error("step() called on a finished episode");
  if (static_cast<int>(rates.size()) != config_.num_agents()) {
    throw ConfigError("expected one rate per subscriber");
  }
  for (const double r : rates) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("rates must lie in (0, 1]");
  }
  const auto& trace = *config_.trace;
  StepResult result;

  for (const auto i : departures_[static_cast<std::size_t>(t_)]) {
    if (placed_[i]) remove(i);
  }

  for (const auto i : trace.arrivals_at(t_)) {
    const auto& vm = trace.vms()[i];
    const double rate = rates[static_cast<std::size_t>(vm.subscriber_id)];
    try {
      place(i, rate);
    } catch (const NoFeasiblePm&) {
      ++result.info.drops;
      continue;
    }
    result.info.requested_now += vm.requested_cores;
    result.info.assigned_now += rate * vm.requested_cores;
  }

  const auto usage = actual_usage_per_pm(cluster_, trace, t_);
  result.info.hot = hot_indicators(usage, config_.cluster);
  result.constraint_cost = constraint_cost_cluster(result.info.hot);
  result.reward = (result.info.requested_now - result.info.assigned_now) / config_.normalizer();
  std::tie(result.info.assigned_total, result.info.remaining_total) = totals(cluster_);

  for (std::size_t k = 0; k < result.info.hot.size(); ++k) {
    tally_.pm_hot_counts[k] += result.info.hot[k];
  }
  tally_.cluster_hot_count += result.constraint_cost;
  tally_.requested += result.info.requested_now;
  tally_.assigned += result.info.assigned_now;
  tally_.remaining_sum += result.info.remaining_total;
  tally_.reward_sum += result.reward;
  tally_.drops += result.info.drops;

  ++t_;
  result.done = done();
  obs_ = observe();
  result.next_observation = obs_;
  return result;
}

Observation Environment::observe() const {
  const auto& trace = *config_.trace;
  const auto n = static_cast<std::size_t>(trace.num_subscribers());
  Observation obs;
  obs.hour = t_;
  obs.agents.assign(n, AgentObservation{});
  obs.masks.assign(n, 0);
  std::vector<std::array<double, 3>> request(n, {0.0, 0.0, 0.0});
  if (t_ < config_.episode_length()) {
    for (const auto i : trace.arrivals_at(t_)) {
      const auto& vm = trace.vms()[i];
      auto& r = request[static_cast<std::size_t>(vm.subscriber_id)];
      r[0] += vm.requested_cores;
      r[1] += vm.requested_mem;
      r[2] += vm.requested_net;
    }
  }
  const auto [hs, hc] = hour_encoding(t_);
  obs.cluster.reserve(static_cast<std::size_t>(cluster_obs_size(static_cast<int>(n))));
  for (std::size_t i = 0; i < n; ++i) {
    auto& o = obs.agents[i];
    o = {live_[i][0], live_[i][1], live_[i][2], live_[i][3],
         request[i][0], request[i][1], request[i][2], hs, hc};
    obs.masks[i] = request[i][0] > 0.0 ? 1 : 0;
    obs.cluster.insert(obs.cluster.end(), o.begin(), o.begin() + kAgentResourceFeatures);
  }
  obs.cluster.push_back(hs);
  obs.cluster.push_back(hc);
  return obs;
}

int constraint_cost_cluster(std::span<const int> hot) {
  int c = 0;
  for (const int h : hot) c = std::max(c, h);
  return c;
}

std::pair<double, double> hour_encoding(int t) {
  const int h = ((t % kHoursPerDay) + kHoursPerDay) % kHoursPerDay;
  const double angle = 2.0 * std::numbers::pi * h / kHoursPerDay;
  return {std::sin(angle), std::cos(angle)};
}

}  // namespace oversub
