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

#include "oversub/baselines.hpp"

#include <algorithm>
#include <charconv>

#include "oversub/errors.hpp"

namespace oversub {
namespace {

std::string format_rate(double r) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, r);
  return std::string(buf, res.ptr);
}

}  // namespace

GridPolicy::GridPolicy(double rate) : rate_(rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("grid rate must lie in (0, 1]");
}

std::string GridPolicy::name() const { return "grid:" + format_rate(rate_); }

std::vector<double> GridPolicy::rates(const Environment& env, const Observation&) const {
  return std::vector<double>(static_cast<std::size_t>(env.config().num_agents()), rate_);
}

double ma_rate(const TraceSet& trace, int subscriber, int t, int window, double min_rate) {
  if (window < 1) throw ConfigError("moving-average window must be >= 1");
  double sum = 0.0;
  std::size_t count = 0;
  const auto& vms = trace.vms();
  const auto& usage = trace.usage();
  for (std::size_t i = 0; i < vms.size(); ++i) {
    if (vms[i].subscriber_id != subscriber) continue;
    if (vms[i].created_at >= t || vms[i].end_hour(trace.horizon()) <= t - window) continue;
    for (const auto& p : usage[i].points) {
      if (p.hour >= t) break;
      if (p.hour < t - window) continue;
      sum += p.usage_rate;
      ++count;
    }
  }
  if (count == 0) return 1.0;
  return std::clamp(sum / static_cast<double>(count), min_rate, 1.0);
}

MovingAveragePolicy::MovingAveragePolicy(int window, double min_rate)
    : window_(window), min_rate_(min_rate) {
  if (window < 1) throw ConfigError("moving-average window must be >= 1");
  if (!(min_rate > 0.0 && min_rate <= 1.0)) throw ConfigError("min rate must lie in (0, 1]");
}

std::string MovingAveragePolicy::name() const { return "ma:" + std::to_string(window_); }

std::vector<double> MovingAveragePolicy::rates(const Environment& env, const Observation&) const {
  const int n = env.config().num_agents();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = ma_rate(env.trace(), i, env.t(), window_, min_rate_);
  }
  return out;
}

std::vector<double> sl_rates(const TraceSet& training, double margin, double min_rate) {
  if (!(margin > 0.0)) throw ConfigError("SL margin must be positive");
  const auto n = static_cast<std::size_t>(training.num_subscribers());
  std::vector<double> best(n, -1.0);
  const auto& vms = training.vms();
  for (std::size_t i = 0; i < vms.size(); ++i) {
    auto& b = best[static_cast<std::size_t>(vms[i].subscriber_id)];
    for (const auto& p : training.usage()[i].points) b = std::max(b, p.usage_rate);
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (best[s] < 0.0) {
      throw MissingSubscriberHistory("subscriber " + std::to_string(s) + " has no usage history");
    }
    best[s] = std::clamp(best[s] * margin, min_rate, 1.0);
  }
  return best;
}

SupervisedMaxPolicy::SupervisedMaxPolicy(const TraceSet& training, double margin,
                                         double min_rate)
    : rates_(sl_rates(training, margin, min_rate)) {}

std::vector<double> SupervisedMaxPolicy::rates(const Environment& env, const Observation&) const {
  if (static_cast<int>(rates_.size()) != env.config().num_agents()) {
    throw ConfigError("SL policy was fitted for a different number of subscribers");
  }
  return rates_;
}

}  // namespace oversub
