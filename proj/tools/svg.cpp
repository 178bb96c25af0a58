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

#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "oversub/errors.hpp"

namespace oversub::tools {
namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 400;
constexpr double kLeft = 60;
constexpr double kRight = 160;
constexpr double kTop = 40;
constexpr double kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void open_svg(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(title) << "</text>\n";
}

void axes(std::ostringstream& os, double lo, double hi) {
  const double x0 = kLeft;
  const double y0 = kHeight - kBottom;
  os << "<line x1=\"" << x0 << "\" y1=\"" << kTop << "\" x2=\"" << x0 << "\" y2=\"" << y0
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << kWidth - kRight << "\" y2=\""
     << y0 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const double y = y0 - (y0 - kTop) * i / 4.0;
    os << "<text x=\"" << x0 - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << v
       << "</text>\n";
  }
}

void legend(std::ostringstream& os, const std::vector<Series>& series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = kTop + 18.0 * static_cast<double>(i);
    os << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
       << kColors[i % std::size(kColors)] << "\"/>\n"
       << "<text x=\"" << kWidth - kRight + 28 << "\" y=\"" << y + 9 << "\">"
       << escape(series[i].label) << "</text>\n";
  }
}

void save(const std::filesystem::path& path, const std::ostringstream& os) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << os.str() << "</svg>\n";
}

std::pair<double, double> value_range(const std::vector<Series>& series, bool from_zero) {
  double lo = from_zero ? 0.0 : INFINITY;
  double hi = from_zero ? 0.0 : -INFINITY;
  for (const auto& s : series) {
    for (const double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (hi <= lo) hi = lo + 1.0;
  return {lo, hi};
}

}  // namespace

void write_line_svg(const std::filesystem::path& path, const std::string& title,
                    const std::string& y_label, const std::vector<Series>& series) {
  std::ostringstream os;
  os.precision(6);
  open_svg(os, title);
  const auto [lo, hi] = value_range(series, false);
  axes(os, lo, hi);
  std::size_t n = 1;
  for (const auto& s : series) n = std::max(n, s.values.size());
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  for (std::size_t i = 0; i < series.size(); ++i) {
    os << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << kColors[i % std::size(kColors)]
       << "\" points=\"";
    const auto& v = series[i].values;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double x = kLeft + plot_w * (n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.0);
      const double y = kHeight - kBottom - plot_h * (v[k] - lo) / (hi - lo);
      os << x << ',' << y << ' ';
    }
    os << "\"/>\n";
  }
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\">episode</text>\n"
     << "<text x=\"14\" y=\"" << kTop + plot_h / 2 << "\" transform=\"rotate(-90 14 "
     << kTop + plot_h / 2 << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  legend(os, series);
  save(path, os);
}

void write_bar_svg(const std::filesystem::path& path, const std::string& title,
                   const std::vector<std::string>& categories, const std::vector<Series>& series) {
  std::ostringstream os;
  os.precision(6);
  open_svg(os, title);
  const auto [lo, hi] = value_range(series, true);
  axes(os, lo, hi);
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double group_w = plot_w / std::max<std::size_t>(1, categories.size());
  const double bar_w = group_w * 0.8 / std::max<std::size_t>(1, series.size());
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = kLeft + group_w * static_cast<double>(c) + group_w * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = c < series[s].values.size() ? series[s].values[c] : 0.0;
      const double h = plot_h * (v - lo) / (hi - lo);
      os << "<rect x=\"" << gx + bar_w * static_cast<double>(s) << "\" y=\""
         << kHeight - kBottom - h << "\" width=\"" << bar_w << "\" height=\"" << h
         << "\" fill=\"" << kColors[s % std::size(kColors)] << "\"/>\n";
    }
    os << "<text x=\"" << gx + group_w * 0.4 << "\" y=\"" << kHeight - kBottom + 16
       << "\" text-anchor=\"middle\">" << escape(categories[c]) << "</text>\n";
  }
  legend(os, series);
  save(path, os);
}

}  // namespace oversub::tools
