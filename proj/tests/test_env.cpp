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

#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "oversub/cluster.hpp"
#include "oversub/env.hpp"
#include "oversub/errors.hpp"

using namespace oversub;

namespace {

VmRecord rec(const std::string& id, int sub, int created, std::optional<int> deleted, double cores,
             double mem = 1.0, double net = 1.0) {
  VmRecord r;
  r.vm_id = id;
  r.subscriber_id = sub;
  r.created_at = created;
  r.deleted_at = deleted;
  r.requested_cores = cores;
  r.requested_mem = mem;
  r.requested_net = net;
  return r;
}

EnvConfig config_for(std::shared_ptr<const TraceSet> trace, int pms = 2, double b = 100.0) {
  EnvConfig e;
  e.cluster.num_pms = pms;
  e.cluster.cpu_capacity = b;
  e.cluster.mem_capacity = 1000.0;
  e.cluster.net_capacity = 1000.0;
  e.cluster.hot_fraction = 0.6;
  e.trace = std::move(trace);
  return e;
}

std::shared_ptr<const TraceSet> random_trace(std::uint64_t seed, int subs = 2, int horizon = 24) {
  GeneratorConfig g;
  g.num_subscribers = subs;
  g.horizon_hours = horizon;
  g.rng_seed = seed;
  for (int i = 0; i < subs; ++i) {
    SubscriberProfile p;
    p.arrival_rate = 4.0;
    p.sizes = {VmSizeOption{2, 4, 10, 1}, VmSizeOption{8, 16, 40, 1}};
    p.lifetime = LifetimeDistribution{LifetimeKind::kUniform, 1, 5, 3.0};
    p.shape = UsageShape::kDiurnalSine;
    p.mean_usage = 0.4;
    p.amplitude = 0.3;
    p.phase = i * 2.0;
    p.noise_std = 0.1;
    p.initial_vms = 3;
    g.profiles.push_back(p);
  }
  return std::make_shared<const TraceSet>(generate_synthetic(g));
}

}  // namespace

TEST_CASE("hour encoding") {
  auto [s0, c0] = hour_encoding(0);
  CHECK(s0 == 0.0);
  CHECK(c0 == 1.0);
  auto [s6, c6] = hour_encoding(6);
  CHECK(s6 == doctest::Approx(1.0));
  CHECK(std::abs(c6) < 1e-12);
  CHECK(hour_encoding(24) == hour_encoding(0));
  CHECK(hour_encoding(30) == hour_encoding(6));
}

TEST_CASE("constraint cost is the max over PMs") {
  CHECK(constraint_cost_cluster(std::vector<int>{0, 0, 0}) == 0);
  CHECK(constraint_cost_cluster(std::vector<int>{0, 1, 0}) == 1);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    std::vector<int> v(5);
    for (auto& x : v) x = std::bernoulli_distribution(0.2)(rng) ? 1 : 0;
    const int c = constraint_cost_cluster(v);
    for (const int x : v) CHECK(c >= x);
  }
}

TEST_CASE("cold reset starts empty at hour zero") {
  auto trace = random_trace(1);
  Environment env(config_for(trace, 8));
  const auto obs = env.reset(3);
  CHECK(env.t() == 0);
  CHECK(env.cluster().num_placements() == 0);
  CHECK(totals(env.cluster()).first == 0.0);
  for (const auto& o : obs.agents) {
    for (int f = 0; f < 4; ++f) CHECK(o[static_cast<std::size_t>(f)] == 0.0);
    CHECK(o[7] == 0.0);
    CHECK(o[8] == 1.0);
  }
  CHECK(obs.cluster.size() == static_cast<std::size_t>(cluster_obs_size(2)));
  CHECK(env.reset(3) == obs);
}

TEST_CASE("warm reset places pre-existing VMs at full rate") {
  std::vector<VmRecord> vms{rec("old", 0, -2, 3, 8.0), rec("new", 0, 1, 4, 4.0)};
  auto trace = std::make_shared<const TraceSet>(TraceSet::build(vms, {}, 6));
  auto cfg = config_for(trace);
  cfg.start_mode = StartMode::kWarm;
  Environment env(cfg);
  const auto obs = env.reset(0);
  CHECK(totals(env.cluster()).first == 8.0);
  CHECK(obs.agents[0][0] == 8.0);
  CHECK(obs.agents[0][1] == 8.0);

  cfg.cluster.cpu_capacity = 4.0;
  CHECK_THROWS_AS(Environment{cfg}, ResetError);
}

TEST_CASE("one arrival gives the documented reward") {
  std::vector<VmRecord> vms{rec("a", 0, 0, 2, 10.0)};
  auto trace = std::make_shared<const TraceSet>(TraceSet::build(vms, {}, 3));
  auto cfg = config_for(trace);
  cfg.reward_scale = 100.0;
  cfg.action_set = {0.2, 0.4, 1.0};
  Environment env(cfg);
  const auto r = env.step(std::vector<int>{1});
  CHECK(r.reward == doctest::Approx(0.06));
  CHECK(r.info.requested_now == 10.0);
  CHECK(r.info.assigned_now == doctest::Approx(4.0));
  CHECK(r.next_observation.agents[0][0] == doctest::Approx(4.0));
  // Empty step afterwards.
  const auto r2 = env.step(std::vector<int>{0});
  CHECK(r2.reward == 0.0);
  CHECK(r2.info.requested_now == 0.0);
  // The VM departs at hour 2.
  env.step(std::vector<int>{0});
  CHECK(env.cluster().num_placements() == 0);
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(std::vector<int>{0}), Error);
}

TEST_CASE("two subscribers sharing a PM make the cluster hot") {
  std::vector<VmRecord> vms{rec("a", 0, 0, 1, 50.0), rec("b", 1, 0, 1, 50.0)};
  std::vector<UsageSeries> usage{{"a", {{0, 0.8}}}, {"b", {{0, 0.6}}}};
  auto trace = std::make_shared<const TraceSet>(TraceSet::build(vms, usage, 1));
  Environment env(config_for(trace));
  const auto r = env.step_rates(std::vector<double>{0.5, 0.5});
  // Both land on PM 0; combined usage 40 + 30 = 70 >= 60.
  CHECK(env.cluster().placements().at("b").pm_index == 0);
  CHECK(r.info.hot == std::vector<int>{1, 0});
  CHECK(r.constraint_cost == 1);
  CHECK(r.done);
}

TEST_CASE("masks follow the current CPU requests") {
  std::vector<VmRecord> vms{rec("a", 0, 0, 2, 4.0), rec("b", 1, 1, 2, 4.0)};
  auto trace = std::make_shared<const TraceSet>(TraceSet::build(vms, {}, 2));
  Environment env(config_for(trace));
  CHECK(env.observation().masks == std::vector<int>{1, 0});
  CHECK(env.observation().agents[0][4] == 4.0);
  const auto r = env.step(std::vector<int>{0, 0});
  CHECK(r.next_observation.masks == std::vector<int>{0, 1});
}

TEST_CASE("infeasible arrivals are dropped and counted") {
  std::vector<VmRecord> vms{rec("a", 0, 0, 2, 80.0), rec("b", 0, 0, 2, 80.0)};
  auto trace = std::make_shared<const TraceSet>(TraceSet::build(vms, {}, 2));
  Environment env(config_for(trace, 1));
  const auto r = env.step_rates(std::vector<double>{1.0});
  CHECK(r.info.drops == 1);
  CHECK(env.tally().drops == 1);
  CHECK(r.info.requested_now == 80.0);
}

TEST_CASE("full-rate episodes earn nothing") {
  auto trace = random_trace(4);
  auto cfg = config_for(trace, 16);
  Environment env(cfg);
  const int full = static_cast<int>(cfg.action_set.size()) - 1;
  while (!env.done()) {
    const auto r = env.step(std::vector<int>(2, full));
    CHECK(r.reward == 0.0);
  }
  CHECK(env.tally().requested == env.tally().assigned);
  CHECK(env.tally().drops == 0);
}

TEST_CASE("episode invariants under random actions") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto trace = random_trace(seed);
    auto cfg = config_for(trace, 6, 40.0);
    cfg.start_mode = seed % 2 == 0 ? StartMode::kCold : StartMode::kWarm;
    Environment env(cfg);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(cfg.action_set.size()) - 1);
    int steps = 0;
    while (!env.done()) {
      const int t = env.t();
      const auto r = env.step(std::vector<int>{pick(rng), pick(rng)});
      ++steps;
      CHECK(r.done == (t + 1 == cfg.episode_length()));
      CHECK(r.constraint_cost == constraint_cost_cluster(r.info.hot));
      for (const auto& o : r.next_observation.agents) {
        for (int f = 0; f < kAgentResourceFeatures; ++f) CHECK(o[static_cast<std::size_t>(f)] >= 0.0);
      }
      for (std::size_t i = 0; i < r.next_observation.masks.size(); ++i) {
        CHECK(r.next_observation.masks[i] == (r.next_observation.agents[i][4] > 0.0 ? 1 : 0));
      }
    }
    CHECK(steps == cfg.episode_length());
    for (const int k : env.tally().pm_hot_counts) CHECK(k <= env.tally().cluster_hot_count);
    CHECK(env.tally().assigned <= env.tally().requested);
  }
}

TEST_CASE("stepping is deterministic given seed and actions") {
  auto trace = random_trace(9);
  auto cfg = config_for(trace, 6, 40.0);
  auto run = [&] {
    Environment env(cfg);
    env.reset(5);
    std::mt19937_64 rng(2);
    std::vector<double> rewards;
    while (!env.done()) {
      std::uniform_int_distribution<int> pick(0, 5);
      rewards.push_back(env.step(std::vector<int>{pick(rng), pick(rng)}).reward);
    }
    return std::pair{rewards, env.tally().pm_hot_counts};
  };
  CHECK(run() == run());
}

TEST_CASE("environment config validation") {
  auto trace = random_trace(1);
  auto cfg = config_for(trace);
  cfg.action_set = {0.2, 0.5};
  CHECK_THROWS_AS(Environment{cfg}, ConfigError);
  cfg.action_set = {0.5, 0.2, 1.0};
  CHECK_THROWS_AS(Environment{cfg}, ConfigError);
  cfg.action_set = {0.2, 1.0};
  cfg.delta = 0.0;
  CHECK_THROWS_AS(Environment{cfg}, ConfigError);
  cfg.delta = 0.025;
  cfg.horizon = trace->horizon() + 1;
  CHECK_THROWS_AS(Environment{cfg}, ConfigError);
}
