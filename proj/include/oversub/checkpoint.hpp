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

#include <filesystem>

#include "oversub/learner.hpp"

namespace oversub {

inline constexpr int kCheckpointVersion = 1;

/// Writes hyperparameters, lambda, network shapes, online and target
/// parameters, and the RNG state as JSON.
void save_checkpoint(const marl::LearnerState& state, const std::filesystem::path& path);

/// Restores a learner saved by save_checkpoint (empty replay, fresh Adam
/// moments). Any unreadable, truncated or mismatched file raises
/// CheckpointVersionMismatch.
marl::LearnerState load_checkpoint(const std::filesystem::path& path);

}  // namespace oversub
