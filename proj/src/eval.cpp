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

#include "oversub/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include <spdlog/spdlog.h>

#include "oversub/errors.hpp"

namespace oversub {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

int EpisodeMetrics::max_pm_hot_count() const {
  return pm_hot_counts.empty() ? 0 : *std::max_element(pm_hot_counts.begin(), pm_hot_counts.end());
}

double EpisodeMetrics::s_cores() const {
  return requested > 0.0 ? 100.0 * (1.0 - assigned / requested) : 0.0;
}

bool violates(int count, int horizon, double delta) {
  return static_cast<double>(count) >= delta * horizon - 1e-9;
}

double s_cores(std::span<const EpisodeMetrics> episodes) {
  double req = 0.0;
  double asg = 0.0;
  for (const auto& e : episodes) {
    req += e.requested;
    asg += e.assigned;
  }
  if (!(req > 0.0)) throw NoPlacements("no cores were requested in the evaluated episodes");
  return 100.0 * (1.0 - asg / req);
}

double pm_hot_r(std::span<const EpisodeMetrics> episodes, double delta, int horizon) {
  if (episodes.empty()) throw Error("pm_hot_r needs at least one episode");
  std::size_t num_pms = 0;
  for (const auto& e : episodes) num_pms = std::max(num_pms, e.pm_hot_counts.size());
  std::size_t worst = 0;
  for (std::size_t k = 0; k < num_pms; ++k) {
    std::size_t n = 0;
    for (const auto& e : episodes) {
      if (k < e.pm_hot_counts.size() && violates(e.pm_hot_counts[k], horizon, delta)) ++n;
    }
    worst = std::max(worst, n);
  }
  return 100.0 * static_cast<double>(worst) / static_cast<double>(episodes.size());
}

double c_hot_r(std::span<const EpisodeMetrics> episodes, double delta, int horizon) {
  if (episodes.empty()) throw Error("c_hot_r needs at least one episode");
  std::size_t n = 0;
  for (const auto& e : episodes) {
    if (violates(e.hot_cluster_count, horizon, delta)) ++n;
  }
  return 100.0 * static_cast<double>(n) / static_cast<double>(episodes.size());
}

bool safety_indicator(double pm_hot_r, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  return (100.0 - pm_hot_r) / 100.0 >= alpha - 1e-12;
}

std::string config_digest(const EnvConfig& config) {
  std::ostringstream os;
  os.precision(17);
  const auto& c = config.cluster;
  os << c.num_pms << '|' << c.cpu_capacity << '|' << c.mem_capacity << '|' << c.net_capacity
     << '|' << c.hot_fraction << '|' << static_cast<int>(config.start_mode) << '|'
     << config.episode_length() << '|' << config.delta << '|' << config.normalizer();
  for (const double a : config.action_set) os << '|' << a;
  if (config.trace) {
    const auto& t = *config.trace;
    os << '|' << t.num_subscribers() << '|' << t.horizon() << '|' << t.vms().size() << '|'
       << t.total_usage_points();
    for (const auto& vm : t.vms()) {
      os << '|' << vm.vm_id << ',' << vm.created_at << ',' << vm.end_hour(t.horizon()) << ','
         << vm.requested_cores;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
  return buf;
}

std::uint64_t episode_seed(std::uint64_t seed, int index) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(index));
}

EpisodeMetrics play_episode(const Policy& policy, Environment& env) {
  while (!env.done()) {
    env.step_rates(policy.rates(env, env.observation()));
  }
  const auto& tally = env.tally();
  EpisodeMetrics m;
  m.pm_hot_counts = tally.pm_hot_counts;
  m.hot_cluster_count = tally.cluster_hot_count;
  m.requested = tally.requested;
  m.assigned = tally.assigned;
  m.drops = tally.drops;
  return m;
}

EvalReport evaluate(const Policy& policy, const EnvConfig& config, int episodes,
                    std::uint64_t seed, int threads) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  config.validate();
  EvalReport report;
  report.policy = policy.name();
  report.config_digest = config_digest(config);
  report.episodes = episodes;
  report.horizon = config.episode_length();
  report.delta = config.delta;
  report.per_episode.resize(static_cast<std::size_t>(episodes));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      Environment env(config);
      for (int e = next++; e < episodes; e = next++) {
        const auto s = episode_seed(seed, e);
        env.reset(s, std::make_shared<const TraceSet>(resample_for_eval(*config.trace, s)));
        report.per_episode[static_cast<std::size_t>(e)] = play_episode(policy, env);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = episodes;
    }
  };
  const int n = std::clamp(threads, 1, episodes);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  const auto& eps = report.per_episode;
  report.s_cores_mean = s_cores(eps);
  double mean = 0.0;
  for (const auto& e : eps) mean += e.s_cores();
  mean /= episodes;
  double var = 0.0;
  for (const auto& e : eps) var += (e.s_cores() - mean) * (e.s_cores() - mean);
  report.s_cores_std = std::sqrt(var / episodes);
  report.pm_hot_r = pm_hot_r(eps, config.delta, report.horizon);
  report.c_hot_r = c_hot_r(eps, config.delta, report.horizon);
  for (const double a : kSafetyLevels) report.safety.push_back(safety_indicator(report.pm_hot_r, a));
  for (const auto& e : eps) report.drops += e.drops;
  if (report.drops > 0) {
    spdlog::warn("{}: {} VM placements were dropped during evaluation", report.policy,
                 report.drops);
  }
  return report;
}

void write_report(const EvalReport& report, const std::filesystem::path& json_path,
                  const std::filesystem::path& csv_path) {
  nlohmann::ordered_json j;
  j["policy"] = report.policy;
  j["config_digest"] = report.config_digest;
  j["E"] = report.episodes;
  j["s_cores_mean"] = report.s_cores_mean;
  j["s_cores_std"] = report.s_cores_std;
  j["pm_hot_r"] = report.pm_hot_r;
  j["c_hot_r"] = report.c_hot_r;
  nlohmann::ordered_json safety;
  for (std::size_t i = 0; i < report.safety.size(); ++i) {
    char key[16];
    std::snprintf(key, sizeof key, "%.2f", kSafetyLevels[i]);
    safety[key] = static_cast<bool>(report.safety[i]);
  }
  j["safety"] = safety;
  j["drops"] = report.drops;
  {
    std::ofstream out(json_path);
    if (!out) throw Error("cannot write " + json_path.string());
    out << j.dump(2) << '\n';
  }
  std::ofstream csv(csv_path);
  if (!csv) throw Error("cannot write " + csv_path.string());
  csv << "episode,s_cores,max_pm_hot_count,hot_cluster_count,drops\n";
  csv.precision(17);
  for (std::size_t e = 0; e < report.per_episode.size(); ++e) {
    const auto& m = report.per_episode[e];
    csv << e << ',' << m.s_cores() << ',' << m.max_pm_hot_count() << ',' << m.hot_cluster_count
        << ',' << m.drops << '\n';
  }
}

}  // namespace oversub
