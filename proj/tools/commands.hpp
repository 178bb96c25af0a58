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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace oversub::tools {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDrops = 3;

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::vector<std::uint64_t> seeds;  // empty: use the config's seeds
  std::optional<int> episodes;
  std::optional<double> alpha;
  std::vector<std::string> policies;
  std::optional<int> threads;
  bool plots = false;
};

/// Each command returns a process exit code and throws oversub::Error on
/// failure.
int cmd_generate(const CommandOptions& opts);
int cmd_train(const CommandOptions& opts);
int cmd_evaluate(const CommandOptions& opts);
int cmd_compare(const CommandOptions& opts);

/// Parses argv, dispatches, and maps errors to exit codes.
int run_cli(int argc, char** argv);

/// File-name-safe form of a policy spec.
std::string policy_label(const std::string& spec);

}  // namespace oversub::tools
