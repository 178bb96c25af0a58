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
#include <string>
#include <utility>
#include <vector>

namespace oversub::tools {

struct Series {
  std::string label;
  std::vector<double> values;
};

/// Line chart of several series over a shared integer x axis.
void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::string& y_label, const std::vector<Series>& series);

/// Grouped bar chart: one group per category, one bar per series.
void write_bar_svg(const std::filesystem::path& path, const std::string& title,
                   const std::vector<std::string>& categories, const std::vector<Series>& series);

}  // namespace oversub::tools
