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

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oversub/errors.hpp"
#include "oversub/trace.hpp"
#include "test_util.hpp"

using namespace oversub;
using oversub::testing::TempDir;
using oversub::testing::read_file;
using oversub::testing::write_file;

namespace {

const char* kVmsHeader = "vm_id,subscriber_id,created_at,deleted_at,requested_cores,requested_mem,requested_net\n";
const char* kUsageHeader = "vm_id,hour,usage_rate\n";

GeneratorConfig constant_config(double mean, double noise) {
  GeneratorConfig g;
  g.num_subscribers = 1;
  g.horizon_hours = 48;
  g.rng_seed = 3;
  SubscriberProfile p;
  p.arrival_rate = 3.0;
  p.lifetime = LifetimeDistribution{LifetimeKind::kUniform, 1, 4, 2.0};
  p.shape = UsageShape::kConstant;
  p.mean_usage = mean;
  p.noise_std = noise;
  g.profiles = {p};
  return g;
}

}  // namespace

TEST_CASE("load_traces reads a minimal trace") {
  TempDir dir;
  write_file(dir / "vms.csv", std::string(kVmsHeader) + "vm0,0,0,2,4,16,100\n");
  write_file(dir / "usage.csv", std::string(kUsageHeader) + "vm0,0,0.5\nvm0,1,0.25\n");
  const auto t = load_traces(dir / "vms.csv", dir / "usage.csv");
  CHECK(t.num_subscribers() == 1);
  REQUIRE(t.vms().size() == 1);
  CHECK(t.total_usage_points() == 2);
  CHECK(t.vms()[0].requested_cores == 4.0);
  CHECK(t.usage_rate(0, 0).value() == 0.5);
  CHECK(t.usage_rate(0, 1).value() == 0.25);
  CHECK_FALSE(t.usage_rate(0, 2).has_value());
  CHECK(t.horizon() == 2);
}

TEST_CASE("load_traces rejects usage outside the VM lifetime") {
  TempDir dir;
  write_file(dir / "vms.csv", std::string(kVmsHeader) + "vm0,0,0,2,4,16,100\n");
  write_file(dir / "usage.csv", std::string(kUsageHeader) + "vm0,5,0.5\n");
  CHECK_THROWS_AS(load_traces(dir / "vms.csv", dir / "usage.csv"), ValidationError);
}

TEST_CASE("load_traces rejects usage rates above one") {
  TempDir dir;
  write_file(dir / "vms.csv", std::string(kVmsHeader) + "vm0,0,0,2,4,16,100\n");
  write_file(dir / "usage.csv", std::string(kUsageHeader) + "vm0,0,1.3\n");
  CHECK_THROWS_AS(load_traces(dir / "vms.csv", dir / "usage.csv"), ValidationError);
}

TEST_CASE("load_traces reports the line of a malformed row") {
  TempDir dir;
  write_file(dir / "vms.csv",
             std::string(kVmsHeader) + "vm0,0,0,2,4,16,100\nvm1,0,zero,2,4,16,100\n");
  write_file(dir / "usage.csv", kUsageHeader);
  try {
    load_traces(dir / "vms.csv", dir / "usage.csv");
    FAIL("expected a ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("load_traces checks headers and record invariants") {
  TempDir dir;
  write_file(dir / "usage.csv", kUsageHeader);
  SUBCASE("wrong header") {
    write_file(dir / "vms.csv", "id,sub\nvm0,0\n");
    CHECK_THROWS_AS(load_traces(dir / "vms.csv", dir / "usage.csv"), ParseError);
  }
  SUBCASE("deletion before creation") {
    write_file(dir / "vms.csv", std::string(kVmsHeader) + "vm0,0,3,3,4,16,100\n");
    CHECK_THROWS_AS(load_traces(dir / "vms.csv", dir / "usage.csv"), ValidationError);
  }
  SUBCASE("non-positive cores") {
    write_file(dir / "vms.csv", std::string(kVmsHeader) + "vm0,0,0,2,0,16,100\n");
    CHECK_THROWS_AS(load_traces(dir / "vms.csv", dir / "usage.csv"), ValidationError);
  }
  SUBCASE("duplicate vm id") {
    write_file(dir / "vms.csv",
               std::string(kVmsHeader) + "vm0,0,0,2,4,16,100\nvm0,0,1,2,4,16,100\n");
    CHECK_THROWS_AS(load_traces(dir / "vms.csv", dir / "usage.csv"), ValidationError);
  }
  SUBCASE("usage for an unknown vm") {
    write_file(dir / "vms.csv", std::string(kVmsHeader) + "vm0,0,0,2,4,16,100\n");
    write_file(dir / "usage.csv", std::string(kUsageHeader) + "vm9,0,0.1\n");
    CHECK_THROWS_AS(load_traces(dir / "vms.csv", dir / "usage.csv"), ValidationError);
  }
}

TEST_CASE("open-ended VMs run to the horizon") {
  TempDir dir;
  write_file(dir / "vms.csv",
             std::string(kVmsHeader) + "vm0,0,0,,4,16,100\nvm1,1,1,5,2,8,50\n");
  write_file(dir / "usage.csv", std::string(kUsageHeader) + "vm0,4,0.5\n");
  const auto t = load_traces(dir / "vms.csv", dir / "usage.csv");
  CHECK(t.horizon() == 5);
  CHECK_FALSE(t.vms()[0].deleted_at.has_value());
  CHECK(t.vms()[0].end_hour(t.horizon()) == 5);
  CHECK(t.num_subscribers() == 2);
}

TEST_CASE("write_traces round-trips through load_traces") {
  TempDir dir;
  const auto a = generate_synthetic(scenario_preset("staggered_peaks"));
  write_traces(a, dir / "vms.csv", dir / "usage.csv");
  const auto b = load_traces(dir / "vms.csv", dir / "usage.csv");
  REQUIRE(a.vms().size() == b.vms().size());
  for (std::size_t i = 0; i < a.vms().size(); ++i) {
    CHECK(a.vms()[i].vm_id == b.vms()[i].vm_id);
    CHECK(a.vms()[i].created_at == b.vms()[i].created_at);
    CHECK(a.vms()[i].deleted_at == b.vms()[i].deleted_at);
    CHECK(a.vms()[i].requested_cores == b.vms()[i].requested_cores);
    REQUIRE(a.usage()[i].points.size() == b.usage()[i].points.size());
    for (std::size_t k = 0; k < a.usage()[i].points.size(); ++k) {
      CHECK(a.usage()[i].points[k].hour == b.usage()[i].points[k].hour);
      CHECK(a.usage()[i].points[k].usage_rate == b.usage()[i].points[k].usage_rate);
    }
  }
  // Writing the loaded trace again gives the same bytes.
  write_traces(b, dir / "vms2.csv", dir / "usage2.csv");
  CHECK(read_file(dir / "vms.csv") == read_file(dir / "vms2.csv"));
  CHECK(read_file(dir / "usage.csv") == read_file(dir / "usage2.csv"));
}

TEST_CASE("generation is deterministic per seed") {
  TempDir dir;
  const auto g = scenario_preset("staggered_peaks");
  write_traces(generate_synthetic(g), dir / "a_vms.csv", dir / "a_usage.csv");
  write_traces(generate_synthetic(g), dir / "b_vms.csv", dir / "b_usage.csv");
  CHECK(read_file(dir / "a_vms.csv") == read_file(dir / "b_vms.csv"));
  CHECK(read_file(dir / "a_usage.csv") == read_file(dir / "b_usage.csv"));
  auto other = g;
  other.rng_seed += 1;
  write_traces(generate_synthetic(other), dir / "c_vms.csv", dir / "c_usage.csv");
  CHECK(read_file(dir / "a_usage.csv") != read_file(dir / "c_usage.csv"));
}

TEST_CASE("noiseless constant shape gives the mean everywhere") {
  const auto t = generate_synthetic(constant_config(0.3, 0.0));
  REQUIRE(t.total_usage_points() > 0);
  for (const auto& s : t.usage()) {
    for (const auto& p : s.points) CHECK(p.usage_rate == 0.3);
  }
}

TEST_CASE("anti-phase sine subscribers peak twelve hours apart") {
  const auto t = generate_synthetic(scenario_preset("staggered_peaks"));
  REQUIRE(t.num_subscribers() == 2);
  // Independent per-hour means computed from the raw points.
  std::array<std::array<double, 24>, 2> sum{};
  std::array<std::array<int, 24>, 2> count{};
  for (std::size_t i = 0; i < t.vms().size(); ++i) {
    const auto s = static_cast<std::size_t>(t.vms()[i].subscriber_id);
    for (const auto& p : t.usage()[i].points) {
      sum[s][static_cast<std::size_t>(p.hour % 24)] += p.usage_rate;
      ++count[s][static_cast<std::size_t>(p.hour % 24)];
    }
  }
  std::array<int, 2> peak{};
  for (std::size_t s = 0; s < 2; ++s) {
    double best = -1.0;
    for (std::size_t h = 0; h < 24; ++h) {
      REQUIRE(count[s][h] > 0);
      const double m = sum[s][h] / count[s][h];
      if (m > best) {
        best = m;
        peak[s] = static_cast<int>(h);
      }
    }
    CHECK(best <= 0.5 + 0.05);
  }
  CHECK((peak[1] - peak[0] + 24) % 24 == 12);
}

TEST_CASE("generated usage stays in [0, 1] and inside VM lifetimes") {
  auto g = constant_config(0.9, 0.5);
  g.profiles[0].initial_vms = 5;
  const auto t = generate_synthetic(g);
  CHECK(t.preexisting().size() == 5);
  for (std::size_t i = 0; i < t.vms().size(); ++i) {
    const auto& vm = t.vms()[i];
    for (const auto& p : t.usage()[i].points) {
      CHECK(p.usage_rate >= 0.0);
      CHECK(p.usage_rate <= 1.0);
      CHECK(p.hour >= vm.created_at);
      CHECK(p.hour < vm.end_hour(t.horizon()));
    }
  }
}

TEST_CASE("generator rejects empty configs") {
  auto g = constant_config(0.3, 0.0);
  g.num_subscribers = 0;
  g.profiles.clear();
  CHECK_THROWS_AS(generate_synthetic(g), ConfigError);
  auto h = constant_config(0.3, 0.0);
  h.horizon_hours = 0;
  CHECK_THROWS_AS(generate_synthetic(h), ConfigError);
}

TEST_CASE("scenario presets") {
  const auto sp = scenario_preset("staggered_peaks");
  CHECK(sp.num_subscribers == 2);
  REQUIRE(sp.profiles.size() == 2);
  CHECK(sp.profiles[0].shape == UsageShape::kDiurnalSine);
  CHECK(sp.profiles[0].phase == 0.0);
  CHECK(sp.profiles[1].phase == doctest::Approx(std::numbers::pi));
  CHECK(sp.profiles[0].mean_usage + sp.profiles[0].amplitude <= 0.5);

  const auto ld = scenario_preset("low_duration");
  CHECK(ld.num_subscribers == 1);
  CHECK(ld.profiles[0].lifetime.kind == LifetimeKind::kFixed);
  CHECK(ld.profiles[0].lifetime.min_hours == 2);
  CHECK(ld.profiles[0].burst_level > 0.8);
  const auto t = generate_synthetic(ld);
  for (const auto& vm : t.vms()) {
    if (vm.deleted_at) CHECK(*vm.deleted_at - vm.created_at == 2);
  }

  CHECK_THROWS_AS(scenario_preset("foo"), UnknownScenario);
}

TEST_CASE("resampling with zero spread returns the cell means") {
  // Constant usage has zero spread per cell.
  const auto t = generate_synthetic(constant_config(0.3, 0.0));
  const auto r = resample_for_eval(t, 11);
  for (const auto& s : r.usage()) {
    for (const auto& p : s.points) CHECK(p.usage_rate == doctest::Approx(0.3).epsilon(1e-12));
  }
}

TEST_CASE("resampling clips to [0, 1]") {
  const auto t = generate_synthetic(constant_config(0.9, 0.5));
  bool saw_one = false;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = resample_for_eval(t, seed);
    for (const auto& s : r.usage()) {
      for (const auto& p : s.points) {
        CHECK(p.usage_rate >= 0.0);
        CHECK(p.usage_rate <= 1.0);
        saw_one = saw_one || p.usage_rate == 1.0;
      }
    }
  }
  CHECK(saw_one);
}

TEST_CASE("resampling keeps records and varies usage with the seed") {
  const auto t = generate_synthetic(scenario_preset("staggered_peaks"));
  const auto a = resample_for_eval(t, 1);
  const auto b = resample_for_eval(t, 2);
  const auto a2 = resample_for_eval(t, 1);
  REQUIRE(a.vms().size() == t.vms().size());
  bool differs = false;
  for (std::size_t i = 0; i < t.vms().size(); ++i) {
    CHECK(a.vms()[i].vm_id == t.vms()[i].vm_id);
    CHECK(b.vms()[i].created_at == t.vms()[i].created_at);
    REQUIRE(a.usage()[i].points.size() == t.usage()[i].points.size());
    for (std::size_t k = 0; k < a.usage()[i].points.size(); ++k) {
      differs = differs || a.usage()[i].points[k].usage_rate != b.usage()[i].points[k].usage_rate;
      CHECK(a.usage()[i].points[k].usage_rate == a2.usage()[i].points[k].usage_rate);
    }
  }
  CHECK(differs);
  // Statistics come from the original trace, not the draw.
  CHECK(a.hourly_stat(0, 6).mean == t.hourly_stat(0, 6).mean);
}

TEST_CASE("hourly statistics match a direct computation") {
  const auto t = generate_synthetic(scenario_preset("staggered_peaks"));
  for (int s = 0; s < 2; ++s) {
    for (int h : {0, 6, 13}) {
      std::vector<double> v;
      for (std::size_t i = 0; i < t.vms().size(); ++i) {
        if (t.vms()[i].subscriber_id != s) continue;
        for (const auto& p : t.usage()[i].points) {
          if (p.hour % 24 == h) v.push_back(p.usage_rate);
        }
      }
      double mean = 0.0;
      for (const double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (const double x : v) var += (x - mean) * (x - mean);
      const auto& cell = t.hourly_stat(s, h);
      CHECK(cell.count == v.size());
      CHECK(cell.mean == doctest::Approx(mean).epsilon(1e-12));
      CHECK(cell.stddev == doctest::Approx(std::sqrt(var / static_cast<double>(v.size()))).epsilon(1e-9));
    }
  }
}
