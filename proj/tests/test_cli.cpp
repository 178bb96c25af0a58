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
#include <string>
#include <vector>

#include "commands.hpp"
#include "json.hpp"
#include "oversub/checkpoint.hpp"
#include "oversub/config.hpp"
#include "oversub/errors.hpp"
#include "test_util.hpp"

using namespace oversub;
using oversub::testing::read_file;
using oversub::testing::TempDir;
using oversub::testing::write_file;

namespace {

Json small_config() {
  return Json::parse(R"({
    "trace": {"preset": "staggered_peaks"},
    "cluster": {"num_pms": 24},
    "env": {"delta": 0.025},
    "learner": {"alpha": 0.95, "agent_hidden": [8], "cluster_hidden": [8],
                "optimization_iterations": 2},
    "train_episodes": 1,
    "eval_episodes": 2,
    "seeds": [0]
  })");
}

std::filesystem::path write_config(const TempDir& dir, const Json& j,
                                   const std::string& name = "run.json") {
  const auto p = dir / name;
  write_file(p, j.dump(2));
  return p;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "oversub");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return tools::run_cli(static_cast<int>(argv.size()), argv.data());
}

int count_lines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("run config parsing") {
  const auto c = run_config_from_json(small_config());
  CHECK(c.trace.preset == "staggered_peaks");
  CHECK(c.cluster.num_pms == 24);
  CHECK(c.learner.delta == 0.025);
  CHECK(c.learner.agent_hidden == std::vector<int>{8});
  CHECK(c.seeds == std::vector<std::uint64_t>{0});

  SUBCASE("unknown keys are rejected") {
    auto j = small_config();
    j["learner"]["learning_rat"] = 0.1;
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
    j = small_config();
    j["extra"] = 1;
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  }
  SUBCASE("exactly one trace source") {
    auto j = small_config();
    j["trace"]["vms"] = "a.csv";
    j["trace"]["usage"] = "b.csv";
    CHECK_THROWS_AS(run_config_from_json(j).validate(), ConfigError);
    j["trace"] = Json::object();
    CHECK_THROWS_AS(run_config_from_json(j).validate(), ConfigError);
  }
  SUBCASE("seeds must be non-empty") {
    auto j = small_config();
    j["seeds"] = Json::array();
    CHECK_THROWS_AS(run_config_from_json(j).validate(), ConfigError);
  }
  SUBCASE("round trip") {
    const auto again = run_config_from_json(to_json(c));
    CHECK(to_json(again) == to_json(c));
  }
}

TEST_CASE("policy spec grammar") {
  auto g = parse_policy_spec("grid:0.4");
  CHECK(g.kind == PolicySpec::Kind::kGrid);
  CHECK(g.rate == 0.4);
  auto m = parse_policy_spec("ma:12");
  CHECK(m.kind == PolicySpec::Kind::kMovingAverage);
  CHECK(m.window == 12);
  CHECK(parse_policy_spec("sl").kind == PolicySpec::Kind::kSupervisedMax);
  auto l = parse_policy_spec("c2marl:out/ck.json");
  CHECK(l.kind == PolicySpec::Kind::kLearned);
  CHECK(l.checkpoint == "out/ck.json");
  for (const char* bad : {"", "grid", "grid:x", "grid:0", "grid:1.5", "ma:0", "sl:1", "c2marl:",
                          "dqn:1"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_policy_spec(bad), ConfigError);
  }
  CHECK(tools::policy_label("c2marl:a/b.json") != tools::policy_label("grid:0.4"));
  CHECK(tools::policy_label("c2marl:a/b.json").find('/') == std::string::npos);
}

TEST_CASE("generate writes identical files twice and creates directories") {
  TempDir dir;
  const auto cfg = write_config(dir, small_config());
  const auto a = dir / "nested" / "a";
  const auto b = dir / "b";
  REQUIRE(run({"generate", "--config", cfg.string(), "--out", a.string()}) == 0);
  REQUIRE(run({"generate", "--config", cfg.string(), "--out", b.string()}) == 0);
  CHECK(std::filesystem::exists(a / "vms.csv"));
  CHECK(read_file(a / "vms.csv") == read_file(b / "vms.csv"));
  CHECK(read_file(a / "usage.csv") == read_file(b / "usage.csv"));
  const auto manifest = Json::parse(read_file(a / "manifest_generate.json"));
  CHECK(manifest.at("seeds") == Json::array({0}));
  CHECK(manifest.contains("resolved_generator"));
  const auto loaded = load_traces(a / "vms.csv", a / "usage.csv");
  CHECK(loaded.num_subscribers() == 2);
}

TEST_CASE("train writes checkpoint, curves and summary per seed") {
  TempDir dir;
  const auto cfg = write_config(dir, small_config());
  const auto out = dir / "train";
  REQUIRE(run({"train", "--config", cfg.string(), "--out", out.string()}) == 0);
  CHECK(std::filesystem::exists(out / "checkpoint_seed0.json"));
  const auto curves = read_file(out / "curves_seed0.csv");
  CHECK(curves.rfind("episode,cum_reward,remaining_cores,hot_cluster_count,lambda,epsilon\n", 0) ==
        0);
  CHECK(count_lines(curves) == 2);
  const auto summary = Json::parse(read_file(out / "summary_seed0.json"));
  CHECK(summary.at("c").get<double>() == doctest::Approx(0.00125));

  const auto three = dir / "three";
  REQUIRE(run({"train", "--config", cfg.string(), "--out", three.string(), "--seed", "1,2,3"}) ==
          0);
  for (int s : {1, 2, 3}) {
    CHECK(std::filesystem::exists(three / ("checkpoint_seed" + std::to_string(s) + ".json")));
  }

  SUBCASE("the checkpoint evaluates as a policy") {
    const auto eval_out = dir / "eval";
    const auto spec = "c2marl:" + (out / "checkpoint_seed0.json").string();
    CHECK(run({"evaluate", "--config", cfg.string(), "--out", eval_out.string(), "--policy",
               spec}) == 0);
  }
}

TEST_CASE("training is reproducible from the manifest") {
  TempDir dir;
  const auto cfg = write_config(dir, small_config());
  const auto a = dir / "a";
  REQUIRE(run({"train", "--config", cfg.string(), "--out", a.string()}) == 0);
  const auto b = dir / "b";
  REQUIRE(run({"train", "--config", (a / "manifest_train.json").string(), "--out", b.string()}) ==
          0);
  CHECK(read_file(a / "curves_seed0.csv") == read_file(b / "curves_seed0.csv"));
  CHECK(read_file(a / "checkpoint_seed0.json") == read_file(b / "checkpoint_seed0.json"));
}

TEST_CASE("evaluate baselines") {
  TempDir dir;
  const auto cfg = write_config(dir, small_config());
  const auto out = dir / "eval";
  REQUIRE(run({"evaluate", "--config", cfg.string(), "--out", out.string(), "--policy",
               "grid:0.4", "--episodes", "1"}) == 0);
  std::vector<std::filesystem::path> reports;
  for (const auto& e : std::filesystem::directory_iterator(out)) {
    if (e.path().extension() == ".json" && e.path().filename().string().rfind("eval_", 0) == 0) {
      reports.push_back(e.path());
    }
  }
  REQUIRE(reports.size() == 1);
  const auto j = Json::parse(read_file(reports[0]));
  CHECK(j.at("s_cores_mean").get<double>() == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(j.at("s_cores_std").get<double>() == 0.0);
  CHECK(j.at("E") == 1);
}

TEST_CASE("corrupted or mismatched checkpoints are rejected") {
  TempDir dir;
  const auto cfg = write_config(dir, small_config());
  write_file(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.json"), CheckpointVersionMismatch);
  CHECK(run({"evaluate", "--config", cfg.string(), "--out", (dir / "o").string(), "--policy",
             "c2marl:" + (dir / "bad.json").string()}) != 0);

  REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "t").string()}) == 0);
  auto ck = Json::parse(read_file(dir / "t" / "checkpoint_seed0.json"));
  ck["version"] = kCheckpointVersion + 1;
  write_file(dir / "future.json", ck.dump());
  CHECK_THROWS_AS(load_checkpoint(dir / "future.json"), CheckpointVersionMismatch);
  ck = Json::parse(read_file(dir / "t" / "checkpoint_seed0.json"));
  ck["theta"].erase(0);
  write_file(dir / "short.json", ck.dump());
  CHECK_THROWS_AS(load_checkpoint(dir / "short.json"), CheckpointVersionMismatch);
}

TEST_CASE("compare") {
  TempDir dir;
  const auto cfg = write_config(dir, small_config());
  const auto out = dir / "cmp";
  REQUIRE(run({"compare", "--config", cfg.string(), "--out", out.string(), "--policy", "grid:0.2",
               "--policy", "grid:0.4", "--policy", "grid:0.6", "--policy", "grid:0.4"}) == 0);
  const auto csv = read_file(out / "compare.csv");
  std::vector<std::string> rows;
  std::stringstream ss(csv);
  for (std::string line; std::getline(ss, line);) rows.push_back(line);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].rfind("Method,PM-Hot-R,PM-Hot-R_std,S-Cores,S-Cores_std,C-Hot-R,0.75,0.85,0.95", 0) ==
        0);
  auto s_cores = [](const std::string& row) {
    std::stringstream rs(row);
    std::string cell;
    for (int i = 0; i < 4; ++i) std::getline(rs, cell, ',');
    return std::stod(cell);
  };
  CHECK(s_cores(rows[1]) == doctest::Approx(80.0));
  CHECK(s_cores(rows[2]) == doctest::Approx(60.0));
  CHECK(s_cores(rows[3]) == doctest::Approx(40.0));
  CHECK(rows[2].substr(rows[2].find(',')) == rows[4].substr(rows[4].find(',')));
}

TEST_CASE("usage errors") {
  TempDir dir;
  const auto cfg = write_config(dir, small_config());
  CHECK(run({"compare", "--config", cfg.string()}) != 0);
  CHECK(run({"frobnicate"}) != 0);
  CHECK_THROWS_AS(tools::cmd_compare(tools::CommandOptions{cfg, dir / "x", {}, {}, {}, {}, {}, false}),
                  ConfigError);
  auto j = small_config();
  j["learner"]["bogus"] = 1;
  const auto bad = write_config(dir, j, "bad.json");
  CHECK(run({"train", "--config", bad.string(), "--out", (dir / "y").string()}) != 0);
}
