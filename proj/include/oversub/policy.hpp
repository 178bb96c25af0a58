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

#include <memory>
#include <string>
#include <vector>

#include "oversub/env.hpp"

namespace oversub {

/// A frozen oversubscription policy. Implementations must be safe to call
/// concurrently from several environments.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Oversubscription rate in (0, 1] for every subscriber at the current
  /// step of `env`.
  virtual std::vector<double> rates(const Environment& env, const Observation& obs) const = 0;
};

}  // namespace oversub
