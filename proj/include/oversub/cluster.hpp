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

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "oversub/trace.hpp"

namespace oversub {

struct ClusterConfig {
  int num_pms = 500;
  double cpu_capacity = 96.0;  // cores per PM
  double mem_capacity = 768.0;  // GB per PM
  double net_capacity = 40000.0;  // Mbps per PM
  double hot_fraction = 0.6;  // PM is hot once usage >= hot_fraction * cpu_capacity

  double hot_threshold() const noexcept { return hot_fraction * cpu_capacity; }
  double total_cpu() const noexcept { return num_pms * cpu_capacity; }
  void validate() const;
};

inline constexpr std::size_t kNoTraceIndex = std::numeric_limits<std::size_t>::max();

struct Placement {
  std::string vm_id;
  int pm_index = 0;
  int subscriber_id = 0;
  double requested_cores = 0.0;
  double assigned_cores = 0.0;
  double reserved_mem = 0.0;
  double reserved_net = 0.0;
  std::size_t trace_index = kNoTraceIndex;  // row in the TraceSet, when known

  bool operator==(const Placement&) const = default;
};

struct PmLoad {
  double cpu = 0.0;
  double mem = 0.0;
  double net = 0.0;
  std::vector<std::string> vm_ids;  // placement order

  bool operator==(const PmLoad&) const = default;
};

/// K physical machines plus the live placements on them.
///
/// PM totals are always the left-to-right sum of their placements in
/// placement order, so deleting a VM restores the exact floating-point state
/// that existed before it was placed.
class Cluster {
 public:
  explicit Cluster(ClusterConfig config);

  const ClusterConfig& config() const noexcept { return config_; }
  const std::vector<PmLoad>& pms() const noexcept { return pms_; }
  const std::unordered_map<std::string, Placement>& placements() const noexcept {
    return placements_;
  }
  std::size_t num_placements() const noexcept { return placements_.size(); }

  /// Best-fit: the feasible PM with the least CPU left after placement,
  /// lowest index on ties. Throws NoFeasiblePm (cluster untouched) when no PM
  /// has room for CPU, memory and network at once.
  int best_fit_place(const VmRecord& vm, double rate, std::size_t trace_index = kNoTraceIndex);

  /// Removes a placement and returns the cores it had been assigned.
  double delete_vm(const std::string& vm_id);

  bool operator==(const Cluster& other) const {
    return pms_ == other.pms_ && placements_ == other.placements_;
  }

 private:
  ClusterConfig config_;
  std::vector<PmLoad> pms_;
  std::unordered_map<std::string, Placement> placements_;
};

/// Entry k: sum of usage_rate(vm, t) * requested_cores over VMs on PM k.
std::vector<double> actual_usage_per_pm(const Cluster& cluster, const TraceSet& trace, int t);

/// Entry k is 1 iff usage[k] >= hot_fraction * cpu_capacity.
std::vector<int> hot_indicators(std::span<const double> usage, const ClusterConfig& config);

/// (assigned cores over all PMs, K * B - assigned).
std::pair<double, double> totals(const Cluster& cluster);

}  // namespace oversub
