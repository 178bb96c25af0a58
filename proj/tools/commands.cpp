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

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "oversub/checkpoint.hpp"
#include "oversub/config.hpp"
#include "oversub/errors.hpp"
#include "oversub/eval.hpp"
#include "oversub/learner.hpp"
#include "svg.hpp"

namespace oversub::tools {
namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;

/// Accepts either a run config or a manifest written by an earlier run.
RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("kind") && j.at("kind") == "manifest") {
    return run_config_from_json(j.at("config"), path.parent_path());
  }
  return run_config_from_json(j, path.parent_path());
}

RunConfig resolve(const CommandOptions& opts) {
  RunConfig c = load_config(opts.config);
  if (!opts.seeds.empty()) c.seeds = opts.seeds;
  if (opts.episodes) {
    c.train_episodes = *opts.episodes;
    c.eval_episodes = *opts.episodes;
  }
  if (opts.alpha) c.learner.alpha = *opts.alpha;
  if (opts.threads) c.threads = *opts.threads;
  if (opts.out) c.out_dir = *opts.out;
  c.validate();
  fs::create_directories(c.out_dir);
  return c;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_manifest(const RunConfig& c, const std::string& command, const Json& extra,
                    const std::vector<fs::path>& outputs) {
  Json files = Json::array();
  for (const auto& p : outputs) files.push_back(p.filename().string());
  Json m{{"kind", "manifest"},
         {"manifest_version", kManifestVersion},
         {"command", command},
         {"config", to_json(c)},
         {"seeds", c.seeds},
         {"outputs", files}};
  if (const auto g = resolved_generator(c.trace)) m["resolved_generator"] = to_json(*g);
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_json(c.out_dir / ("manifest_" + command + ".json"), m);
}

std::string seed_suffix(std::uint64_t seed) { return "_seed" + std::to_string(seed); }

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
/// failure.
template <class Fn>
void fan_out(std::size_t n, int threads, Fn fn) {
  std::exception_ptr failure;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(threads), 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

std::string substitute_seed(std::string text, std::uint64_t seed) {
  const std::string key = "{seed}";
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key)) {
    text.replace(pos, key.size(), std::to_string(seed));
  }
  return text;
}

struct SeedRun {
  std::uint64_t seed = 0;
  EvalReport report;
};

/// Evaluates `spec` once per configured seed on the shared training trace.
std::vector<SeedRun> evaluate_spec(const std::string& spec, const RunConfig& c,
                                   const std::shared_ptr<const TraceSet>& trace) {
  const auto env = make_env_config(c, trace);
  std::vector<SeedRun> runs(c.seeds.size());
  // Episodes already fan out inside evaluate(); seeds run in sequence.
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    const auto seed = c.seeds[i];
    const auto parsed = parse_policy_spec(substitute_seed(spec, seed));
    const auto policy = make_policy(parsed, c, *trace);
    runs[i].seed = seed;
    runs[i].report = evaluate(*policy, env, c.eval_episodes, seed, c.threads);
    runs[i].report.policy = spec;
  }
  return runs;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (const double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

spdlog::level::level_enum log_level_from_env() {
  const char* v = std::getenv("OVERSUB_LOG");
  if (v == nullptr || *v == '\0') return spdlog::level::info;
  const auto lvl = spdlog::level::from_str(v);
  // from_str maps unknown names to off; only accept an explicit "off".
  if (lvl == spdlog::level::off && std::string(v) != "off") return spdlog::level::info;
  return lvl;
}

}  // namespace

std::string policy_label(const std::string& spec) {
  std::string text = spec;
  if (spec.rfind("c2marl:", 0) == 0) text = "c2marl_" + fs::path(spec.substr(7)).stem().string();
  std::string out;
  for (const char ch : text) {
    out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-') ? ch : '_';
  }
  return out;
}

int cmd_generate(const CommandOptions& opts) {
  const RunConfig c = resolve(opts);
  auto g = resolved_generator(c.trace);
  if (!g) throw ConfigError("generate needs a preset or generator trace source");
  if (!opts.seeds.empty()) g->rng_seed = opts.seeds.front();
  const TraceSet trace = generate_synthetic(*g);
  const auto vms = c.out_dir / "vms.csv";
  const auto usage = c.out_dir / "usage.csv";
  write_traces(trace, vms, usage);
  write_manifest(c, "generate", Json{{"generator_seed", g->rng_seed}, {"generator", to_json(*g)}},
                 {vms, usage});
  spdlog::info("wrote {} VMs over {} hours for {} subscribers to {}", trace.vms().size(),
               trace.horizon(), trace.num_subscribers(), c.out_dir.string());
  return kExitOk;
}

int cmd_train(const CommandOptions& opts) {
  const RunConfig c = resolve(opts);
  const auto trace = build_trace(c.trace);
  const auto env_config = make_env_config(c, trace);
  std::vector<fs::path> outputs(c.seeds.size() * 3);
  std::mutex log_mu;

  fan_out(c.seeds.size(), c.threads, [&](std::size_t i) {
    const auto seed = c.seeds[i];
    Environment env(env_config);
    auto state = marl::make_learner(c.learner, env_config, seed);
    const int every = std::max(1, c.train_episodes / 10);
    const auto curves = marl::train(state, env, c.train_episodes, [&](const marl::CurvePoint& p) {
      if (p.episode % every == 0) {
        std::lock_guard lock(log_mu);
        spdlog::info("seed {} episode {}: reward {:.4f} hot {} lambda {:.4f} eps {:.3f}", seed,
                     p.episode, p.cum_reward, p.hot_cluster_count, p.lambda, p.epsilon);
      }
    });

    const auto suffix = seed_suffix(seed);
    const auto ckpt = c.out_dir / ("checkpoint" + suffix + ".json");
    const auto curves_path = c.out_dir / ("curves" + suffix + ".csv");
    const auto summary_path = c.out_dir / ("summary" + suffix + ".json");
    save_checkpoint(state, ckpt);
    {
      std::ofstream out(curves_path);
      if (!out) throw Error("cannot write " + curves_path.string());
      out.precision(17);
      out << "episode,cum_reward,remaining_cores,hot_cluster_count,lambda,epsilon\n";
      for (const auto& p : curves) {
        out << p.episode << ',' << p.cum_reward << ',' << p.remaining_cores << ','
            << p.hot_cluster_count << ',' << p.lambda << ',' << p.epsilon << '\n';
      }
    }
    const std::size_t tail = std::min<std::size_t>(100, curves.size());
    double tail_hot = 0.0;
    double tail_reward = 0.0;
    for (std::size_t k = curves.size() - tail; k < curves.size(); ++k) {
      tail_hot += curves[k].hot_cluster_count;
      tail_reward += curves[k].cum_reward;
    }
    write_json(summary_path,
               Json{{"seed", seed},
                    {"episodes", c.train_episodes},
                    {"alpha", c.learner.alpha},
                    {"delta", c.learner.delta},
                    {"c", c.learner.constraint_bound()},
                    {"final_lambda", state.lambda},
                    {"optimizer_steps", state.optimizer_steps},
                    {"final_window", tail},
                    {"final_hot_cluster_mean", tail > 0 ? tail_hot / static_cast<double>(tail) : 0.0},
                    {"final_cum_reward_mean", tail > 0 ? tail_reward / static_cast<double>(tail) : 0.0},
                    {"checkpoint", ckpt.filename().string()},
                    {"curves", curves_path.filename().string()}});
    if (opts.plots) {
      std::vector<double> reward;
      std::vector<double> hot;
      for (const auto& p : curves) {
        reward.push_back(p.cum_reward);
        hot.push_back(p.hot_cluster_count);
      }
      write_line_svg(c.out_dir / ("curves" + suffix + ".svg"), "Training reward (seed " + std::to_string(seed) + ")",
                     "cumulative reward", {{"reward", reward}});
      write_line_svg(c.out_dir / ("hot_cluster" + suffix + ".svg"),
                     "Hot cluster count (seed " + std::to_string(seed) + ")", "hot hours",
                     {{"hot cluster count", hot}});
    }
    outputs[3 * i] = ckpt;
    outputs[3 * i + 1] = curves_path;
    outputs[3 * i + 2] = summary_path;
  });
  write_manifest(c, "train", Json{{"episodes", c.train_episodes}}, outputs);
  return kExitOk;
}

int cmd_evaluate(const CommandOptions& opts) {
  if (opts.policies.size() != 1) throw ConfigError("evaluate takes exactly one --policy");
  const RunConfig c = resolve(opts);
  const auto trace = build_trace(c.trace);
  const auto& spec = opts.policies.front();
  const auto runs = evaluate_spec(spec, c, trace);
  std::vector<fs::path> outputs;
  int drops = 0;
  for (const auto& r : runs) {
    const auto base = "eval_" + policy_label(spec) + seed_suffix(r.seed);
    const auto json_path = c.out_dir / (base + ".json");
    const auto csv_path = c.out_dir / (base + ".csv");
    write_report(r.report, json_path, csv_path);
    outputs.push_back(json_path);
    outputs.push_back(csv_path);
    drops += r.report.drops;
    spdlog::info("{} seed {}: S-Cores {:.2f}% PM-Hot-R {:.2f}% C-Hot-R {:.2f}% drops {}", spec,
                 r.seed, r.report.s_cores_mean, r.report.pm_hot_r, r.report.c_hot_r, r.report.drops);
  }
  write_manifest(c, "evaluate", Json{{"policy", spec}, {"episodes", c.eval_episodes}}, outputs);
  return drops == 0 ? kExitOk : kExitDrops;
}

int cmd_compare(const CommandOptions& opts) {
  if (opts.policies.empty()) throw ConfigError("compare needs at least one --policy");
  const RunConfig c = resolve(opts);
  const auto trace = build_trace(c.trace);
  const auto table_path = c.out_dir / "compare.csv";
  std::ofstream table(table_path);
  if (!table) throw Error("cannot write " + table_path.string());
  table << "Method,PM-Hot-R,PM-Hot-R_std,S-Cores,S-Cores_std,C-Hot-R,0.75,0.85,0.95,drops\n";
  table.precision(10);

  std::vector<fs::path> outputs{table_path};
  std::vector<std::string> methods;
  Series scores{"S-Cores", {}};
  Series pmhot{"PM-Hot-R", {}};
  std::vector<Series> hot_lines;
  int drops = 0;
  for (const auto& spec : opts.policies) {
    const auto runs = evaluate_spec(spec, c, trace);
    std::vector<double> pm;
    std::vector<double> sc;
    std::vector<double> ch;
    int spec_drops = 0;
    for (const auto& r : runs) {
      pm.push_back(r.report.pm_hot_r);
      sc.push_back(r.report.s_cores_mean);
      ch.push_back(r.report.c_hot_r);
      spec_drops += r.report.drops;
      const auto base = "compare_" + policy_label(spec) + seed_suffix(r.seed);
      write_report(r.report, c.out_dir / (base + ".json"), c.out_dir / (base + ".csv"));
      outputs.push_back(c.out_dir / (base + ".json"));
      outputs.push_back(c.out_dir / (base + ".csv"));
    }
    const auto [pm_mean, pm_std] = mean_std(pm);
    const auto [sc_mean, sc_std] = mean_std(sc);
    const auto ch_mean = mean_std(ch).first;
    table << '"' << spec << '"' << ',' << pm_mean << ',' << pm_std << ',' << sc_mean << ','
          << sc_std << ',' << ch_mean;
    for (const double a : kSafetyLevels) table << ',' << (safety_indicator(pm_mean, a) ? "yes" : "no");
    table << ',' << spec_drops << '\n';
    drops += spec_drops;
    methods.push_back(spec);
    scores.values.push_back(sc_mean);
    pmhot.values.push_back(pm_mean);
    Series line{spec, {}};
    for (const auto& e : runs.front().report.per_episode) line.values.push_back(e.hot_cluster_count);
    hot_lines.push_back(std::move(line));
    spdlog::info("{}: S-Cores {:.2f}% PM-Hot-R {:.2f}% C-Hot-R {:.2f}%", spec, sc_mean, pm_mean,
                 ch_mean);
  }
  table.close();
  if (opts.plots) {
    write_bar_svg(c.out_dir / "compare.svg", "S-Cores and PM-Hot-R (%)", methods, {scores, pmhot});
    write_line_svg(c.out_dir / "compare_hot_cluster.svg", "Hot cluster count per evaluation episode",
                   "hot hours", hot_lines);
    outputs.push_back(c.out_dir / "compare.svg");
    outputs.push_back(c.out_dir / "compare_hot_cluster.svg");
  }
  write_manifest(c, "compare", Json{{"policies", opts.policies}, {"episodes", c.eval_episodes}},
                 outputs);
  return drops == 0 ? kExitOk : kExitDrops;
}

int run_cli(int argc, char** argv) {
  spdlog::set_level(log_level_from_env());
  CLI::App app{"Cloud oversubscription simulator and constrained multi-agent learner"};
  app.require_subcommand(1);
  CommandOptions opts;
  std::string seeds_text;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "Run config JSON (or a manifest)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out, "Output directory (created if missing)");
    sub->add_option("--seed", seeds_text, "Comma-separated seeds");
    sub->add_option("--threads", opts.threads, "Worker threads");
  };
  auto* gen = app.add_subcommand("generate", "Write a synthetic trace as vms.csv and usage.csv");
  add_common(gen);
  auto* tr = app.add_subcommand("train", "Train the learner once per seed");
  add_common(tr);
  tr->add_option("--episodes", opts.episodes, "Training episodes")->check(CLI::NonNegativeNumber);
  tr->add_option("--alpha", opts.alpha, "Safety preference in (0, 1)");
  tr->add_flag("--plots", opts.plots, "Also write SVG training curves");
  auto* ev = app.add_subcommand("evaluate", "Evaluate one policy on resampled traces");
  add_common(ev);
  ev->add_option("--episodes", opts.episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  ev->add_option("--alpha", opts.alpha, "Safety preference in (0, 1)");
  ev->add_option("--policy", opts.policies,
                 "grid:<rate> | ma:<window> | sl | c2marl:<checkpoint> ({seed} is substituted)")
      ->required();
  auto* cmp = app.add_subcommand("compare", "Evaluate several policies on identical seeds");
  add_common(cmp);
  cmp->add_option("--episodes", opts.episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  cmp->add_option("--alpha", opts.alpha, "Safety preference in (0, 1)");
  cmp->add_option("--policy", opts.policies, "Policy spec; repeat for several")->required();
  cmp->add_flag("--plots", opts.plots, "Also write SVG charts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (!seeds_text.empty()) {
      std::stringstream ss(seeds_text);
      for (std::string item; std::getline(ss, item, ',');) {
        std::size_t used = 0;
        const auto v = std::stoull(item, &used);
        if (used != item.size()) throw ConfigError("invalid seed '" + item + "'");
        opts.seeds.push_back(v);
      }
    }
    if (*gen) return cmd_generate(opts);
    if (*tr) return cmd_train(opts);
    if (*ev) return cmd_evaluate(opts);
    if (*cmp) return cmd_compare(opts);
  } catch (const std::invalid_argument&) {
    spdlog::error("invalid --seed list '{}'", seeds_text);
  } catch (const std::out_of_range&) {
    spdlog::error("seed out of range in '{}'", seeds_text);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
  }
  return kExitError;
}

}  // namespace oversub::tools
