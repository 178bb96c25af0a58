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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace oversub {

inline constexpr int kHoursPerDay = 24;

/// One VM request as seen in the workload log.
///
/// Hours are whole-hour indices relative to the episode start; a negative
/// `created_at` marks a VM that was already running when the episode began
/// (used by warm starts).
struct VmRecord {
  std::string vm_id;
  int subscriber_id = 0;
  int created_at = 0;
  std::optional<int> deleted_at;  // empty = still running at the end of the log
  double requested_cores = 0.0;
  double requested_mem = 0.0;
  double requested_net = 0.0;

  /// First hour at which the VM is gone. Open-ended VMs live until `horizon`.
  int end_hour(int horizon) const noexcept { return deleted_at.value_or(horizon); }
};

struct UsagePoint {
  int hour = 0;
  double usage_rate = 0.0;  // fraction of requested cores actually used
};

struct UsageSeries {
  std::string vm_id;
  std::vector<UsagePoint> points;
};

struct HourlyStat {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};

/// Immutable workload: VM records, their hourly usage, and per
/// subscriber x hour-of-day usage statistics.
class TraceSet {
 public:
  TraceSet() = default;

  /// Validates and indexes the inputs. Usage series may arrive in any order
  /// and may omit VMs; points are sorted by hour.
  ///
  /// `horizon` <= 0 derives T from the data (latest deletion, usage hour or
  /// creation hour, plus one).
  static TraceSet build(std::vector<VmRecord> vms, std::vector<UsageSeries> usage,
                        int horizon = 0);

  const std::vector<VmRecord>& vms() const noexcept { return vms_; }
  /// Aligned with vms(): usage()[i] belongs to vms()[i].
  const std::vector<UsageSeries>& usage() const noexcept { return usage_; }
  int num_subscribers() const noexcept { return num_subscribers_; }
  int horizon() const noexcept { return horizon_; }

  /// Usage rate of VM `vm_index` at `hour`, or nullopt when the log has no
  /// point there.
  std::optional<double> usage_rate(std::size_t vm_index, int hour) const;

  std::optional<std::size_t> find(const std::string& vm_id) const;

  /// Indices of VMs created at `hour`, in log order. Valid for hour in [0, T).
  const std::vector<std::size_t>& arrivals_at(int hour) const;
  /// Indices of VMs with created_at < 0, in log order.
  const std::vector<std::size_t>& preexisting() const noexcept { return preexisting_; }

  const HourlyStat& hourly_stat(int subscriber, int hour_of_day) const;
  const std::vector<std::array<HourlyStat, kHoursPerDay>>& hourly_stats() const noexcept {
    return hourly_stats_;
  }

  /// Same records, replaced usage. Statistics are carried over unchanged so
  /// repeated resampling draws from the original distribution.
  TraceSet with_usage(std::vector<UsageSeries> usage) const;

  std::size_t total_usage_points() const noexcept;

 private:
  void index();
  void compute_stats();

  std::vector<VmRecord> vms_;
  std::vector<UsageSeries> usage_;
  int num_subscribers_ = 0;
  int horizon_ = 0;
  std::vector<std::array<HourlyStat, kHoursPerDay>> hourly_stats_;

  // dense_[i][h - dense_origin_[i]]; NaN where the log has no point.
  std::vector<std::vector<double>> dense_;
  std::vector<int> dense_origin_;
  std::vector<std::vector<std::size_t>> arrivals_;
  std::vector<std::size_t> preexisting_;
  std::unordered_map<std::string, std::size_t> id_index_;
};

/// Reads `vms.csv` and `usage.csv` (schemas in the README).
TraceSet load_traces(const std::filesystem::path& vms_path,
                     const std::filesystem::path& usage_path);

void write_traces(const TraceSet& trace, const std::filesystem::path& vms_path,
                  const std::filesystem::path& usage_path);

// ---------------------------------------------------------------------------
// Synthetic generation

enum class UsageShape { kDiurnalSine, kConstant, kBursty };

std::string_view to_string(UsageShape shape);
UsageShape usage_shape_from_string(std::string_view name);

enum class LifetimeKind { kFixed, kUniform, kGeometric };

std::string_view to_string(LifetimeKind kind);
LifetimeKind lifetime_kind_from_string(std::string_view name);

/// Lifetime in whole hours. kFixed uses min_hours; kUniform draws from
/// [min_hours, max_hours]; kGeometric has mean `mean_hours` and support >= 1.
struct LifetimeDistribution {
  LifetimeKind kind = LifetimeKind::kFixed;
  int min_hours = 1;
  int max_hours = 1;
  double mean_hours = 1.0;
};

struct VmSizeOption {
  double cores = 1.0;
  double mem = 0.0;
  double net = 0.0;
  double weight = 1.0;
};

struct SubscriberProfile {
  double arrival_rate = 1.0;  // Poisson mean of arrivals per hour
  std::vector<VmSizeOption> sizes{VmSizeOption{}};
  LifetimeDistribution lifetime;
  UsageShape shape = UsageShape::kConstant;
  double mean_usage = 0.3;
  double amplitude = 0.0;  // sine amplitude around mean_usage
  double phase = 0.0;      // radians; peak at hour 6 when phase = 0
  double noise_std = 0.0;
  double burst_probability = 0.0;  // bursty: chance an hour runs at burst_level
  double burst_level = 1.0;
  int initial_vms = 0;  // VMs already running at hour 0 (warm start)
};

struct GeneratorConfig {
  int num_subscribers = 1;
  int horizon_hours = 120;
  std::vector<SubscriberProfile> profiles;  // one per subscriber
  std::uint64_t rng_seed = 0;

  /// Throws ConfigError on a malformed config.
  void validate() const;
};

/// Noise-free usage level of `profile` at `hour` (before clipping).
double shape_level(const SubscriberProfile& profile, int hour);

/// Draws a trace. Arrivals within an hour are shuffled across subscribers so
/// that log order interleaves them the way sub-hour timestamps would.
TraceSet generate_synthetic(const GeneratorConfig& config);

/// Named workload presets: "staggered_peaks" and "low_duration".
GeneratorConfig scenario_preset(std::string_view name);

/// Redraws every usage point from the Gaussian of its subscriber x
/// hour-of-day cell, clipped to [0, 1].
TraceSet resample_for_eval(const TraceSet& trace, std::uint64_t rng_seed);

}  // namespace oversub
