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

#include <string>
#include <vector>

#include "oversub/policy.hpp"
#include "oversub/trace.hpp"

namespace oversub {

/// Same static rate for every subscriber at every step.
class GridPolicy : public Policy {
 public:
  explicit GridPolicy(double rate);

  std::string name() const override;
  std::vector<double> rates(const Environment& env, const Observation& obs) const override;
  double rate() const noexcept { return rate_; }

 private:
  double rate_;
};

/// Mean usage rate of `subscriber` over its usage points with hour in
/// [t - window, t), clipped to [min_rate, 1]. 1.0 when there is no history.
double ma_rate(const TraceSet& trace, int subscriber, int t, int window, double min_rate);

/// Moving-average policy over the history of the trace being played.
class MovingAveragePolicy : public Policy {
 public:
  explicit MovingAveragePolicy(int window = 24, double min_rate = 0.2);

  std::string name() const override;
  std::vector<double> rates(const Environment& env, const Observation& obs) const override;
  int window() const noexcept { return window_; }

 private:
  int window_;
  double min_rate_;
};

/// Per subscriber: max observed usage rate times `margin`, clipped to
/// [min_rate, 1]. Throws MissingSubscriberHistory when a subscriber has no
/// usage point.
std::vector<double> sl_rates(const TraceSet& training, double margin = 1.05,
                             double min_rate = 0.2);

/// Fixed per-subscriber rates fitted once on a training trace.
class SupervisedMaxPolicy : public Policy {
 public:
  SupervisedMaxPolicy(const TraceSet& training, double margin = 1.05, double min_rate = 0.2);

  std::string name() const override { return "sl"; }
  std::vector<double> rates(const Environment& env, const Observation& obs) const override;
  const std::vector<double>& fitted() const noexcept { return rates_; }

 private:
  std::vector<double> rates_;
};

}  // namespace oversub
