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

#include "oversub/cluster.hpp"

#include <algorithm>
#include <cmath>

#include "oversub/errors.hpp"

namespace oversub {
namespace {

// Absorbs rounding in rate * cores so exact fits are not rejected.
constexpr double kFitSlack = 1e-9;

double sum_in_order(const std::vector<std::string>& ids,
                    const std::unordered_map<std::string, Placement>& placements,
                    double Placement::*field) {
  double total = 0.0;
  for (const auto& id : ids) total += placements.at(id).*field;
  return total;
}

}  // namespace

void ClusterConfig::validate() const {
  if (num_pms <= 0) throw ConfigError("num_pms must be positive");
  if (!(cpu_capacity > 0.0) || !(mem_capacity > 0.0) || !(net_capacity > 0.0)) {
    throw ConfigError("PM capacities must be positive");
  }
  if (!(hot_fraction > 0.0 && hot_fraction <= 1.0)) {
    throw ConfigError("hot_fraction must lie in (0, 1]");
  }
}

Cluster::Cluster(ClusterConfig config) : config_(config) {
  config_.validate();
  pms_.resize(static_cast<std::size_t>(config_.num_pms));
}

int Cluster::best_fit_place(const VmRecord& vm, double rate, std::size_t trace_index) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("oversubscription rate must lie in (0, 1]");
  if (placements_.contains(vm.vm_id)) {
    throw ValidationError("vm '" + vm.vm_id + "' is already placed");
  }
  const double need = rate * vm.requested_cores;
  int best = -1;
  double best_left = 0.0;
  for (std::size_t k = 0; k < pms_.size(); ++k) {
    const auto& pm = pms_[k];
    const double left = config_.cpu_capacity - (pm.cpu + need);
    if (left < -kFitSlack) continue;
    if (pm.mem + vm.requested_mem > config_.mem_capacity + kFitSlack) continue;
    if (pm.net + vm.requested_net > config_.net_capacity + kFitSlack) continue;
    if (best < 0 || left < best_left) {
      best = static_cast<int>(k);
      best_left = left;
    }
  }
  if (best < 0) {
    throw NoFeasiblePm("no PM can host vm '" + vm.vm_id + "' (" + std::to_string(need) +
                       " cores)");
  }
  Placement p{vm.vm_id,        best,         vm.subscriber_id, vm.requested_cores, need,
              vm.requested_mem, vm.requested_net, trace_index};
  auto& pm = pms_[static_cast<std::size_t>(best)];
  pm.cpu += p.assigned_cores;
  pm.mem += p.reserved_mem;
  pm.net += p.reserved_net;
  pm.vm_ids.push_back(vm.vm_id);
  placements_.emplace(vm.vm_id, std::move(p));
  return best;
}

double Cluster::delete_vm(const std::string& vm_id) {
  const auto it = placements_.find(vm_id);
  if (it == placements_.end()) throw UnknownVm("vm '" + vm_id + "' is not placed");
  const double released = it->second.assigned_cores;
  auto& pm = pms_[static_cast<std::size_t>(it->second.pm_index)];
  pm.vm_ids.erase(std::find(pm.vm_ids.begin(), pm.vm_ids.end(), vm_id));
  placements_.erase(it);
  pm.cpu = sum_in_order(pm.vm_ids, placements_, &Placement::assigned_cores);
  pm.mem = sum_in_order(pm.vm_ids, placements_, &Placement::reserved_mem);
  pm.net = sum_in_order(pm.vm_ids, placements_, &Placement::reserved_net);
  return released;
}

std::vector<double> actual_usage_per_pm(const Cluster& cluster, const TraceSet& trace, int t) {
  std::vector<double> usage(cluster.pms().size(), 0.0);
  for (std::size_t k = 0; k < cluster.pms().size(); ++k) {
    double sum = 0.0;
    for (const auto& id : cluster.pms()[k].vm_ids) {
      const auto& p = cluster.placements().at(id);
      std::optional<double> rate;
      if (p.trace_index != kNoTraceIndex) {
        rate = trace.usage_rate(p.trace_index, t);
      } else if (const auto idx = trace.find(id)) {
        rate = trace.usage_rate(*idx, t);
      }
      if (rate) sum += *rate * p.requested_cores;
    }
    usage[k] = sum;
  }
  return usage;
}

std::vector<int> hot_indicators(std::span<const double> usage, const ClusterConfig& config) {
  std::vector<int> hot(usage.size(), 0);
  const double threshold = config.hot_threshold();
  for (std::size_t k = 0; k < usage.size(); ++k) hot[k] = usage[k] >= threshold ? 1 : 0;
  return hot;
}

std::pair<double, double> totals(const Cluster& cluster) {
  double assigned = 0.0;
  for (const auto& pm : cluster.pms()) assigned += pm.cpu;
  return {assigned, cluster.config().total_cpu() - assigned};
}

}  // namespace oversub
