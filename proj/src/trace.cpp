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

#include "oversub/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "oversub/errors.hpp"

namespace oversub {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int hour_of_day(int hour) { return ((hour % kHoursPerDay) + kHoursPerDay) % kHoursPerDay; }

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view field, const std::string& file, std::size_t line,
               const char* column) {
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last) {
    throw ParseError(file, line,
                     std::string("bad ") + column + " value '" + std::string(field) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// TraceSet

TraceSet TraceSet::build(std::vector<VmRecord> vms, std::vector<UsageSeries> usage,
                         int horizon) {
  TraceSet t;
  std::unordered_map<std::string, std::size_t> by_id;
  by_id.reserve(vms.size());
  int max_sub = -1;
  std::unordered_set<int> subs;
  int derived_horizon = 1;
  for (std::size_t i = 0; i < vms.size(); ++i) {
    const auto& vm = vms[i];
    if (!by_id.emplace(vm.vm_id, i).second) {
      throw ValidationError("duplicate vm_id '" + vm.vm_id + "'");
    }
    if (vm.subscriber_id < 0) {
      throw ValidationError("negative subscriber_id for vm '" + vm.vm_id + "'");
    }
    if (!(vm.requested_cores > 0.0) || !std::isfinite(vm.requested_cores)) {
      throw ValidationError("requested_cores must be > 0 for vm '" + vm.vm_id + "'");
    }
    if (!(vm.requested_mem >= 0.0) || !(vm.requested_net >= 0.0) ||
        !std::isfinite(vm.requested_mem) || !std::isfinite(vm.requested_net)) {
      throw ValidationError("negative mem/net request for vm '" + vm.vm_id + "'");
    }
    if (vm.deleted_at && *vm.deleted_at <= vm.created_at) {
      throw ValidationError("vm '" + vm.vm_id + "' deleted_at <= created_at");
    }
    subs.insert(vm.subscriber_id);
    max_sub = std::max(max_sub, vm.subscriber_id);
    derived_horizon = std::max(derived_horizon, vm.created_at + 1);
    if (vm.deleted_at) derived_horizon = std::max(derived_horizon, *vm.deleted_at);
  }
  if (static_cast<int>(subs.size()) != max_sub + 1) {
    throw ValidationError("subscriber ids must be contiguous from 0");
  }

  // Merge usage series onto VM order.
  std::vector<UsageSeries> aligned(vms.size());
  for (std::size_t i = 0; i < vms.size(); ++i) aligned[i].vm_id = vms[i].vm_id;
  for (auto& series : usage) {
    const auto it = by_id.find(series.vm_id);
    if (it == by_id.end()) {
      throw ValidationError("usage references unknown vm '" + series.vm_id + "'");
    }
    auto& dst = aligned[it->second].points;
    dst.insert(dst.end(), series.points.begin(), series.points.end());
  }
  for (const auto& series : aligned) {
    for (const auto& p : series.points) derived_horizon = std::max(derived_horizon, p.hour + 1);
  }
  t.horizon_ = horizon > 0 ? horizon : derived_horizon;

  for (std::size_t i = 0; i < vms.size(); ++i) {
    auto& points = aligned[i].points;
    std::sort(points.begin(), points.end(),
              [](const UsagePoint& a, const UsagePoint& b) { return a.hour < b.hour; });
    const auto& vm = vms[i];
    const int end = vm.end_hour(t.horizon_);
    for (std::size_t k = 0; k < points.size(); ++k) {
      const auto& p = points[k];
      if (p.hour < vm.created_at || p.hour >= end) {
        throw ValidationError("usage of vm '" + vm.vm_id + "' at hour " +
                              std::to_string(p.hour) + " outside its lifetime [" +
                              std::to_string(vm.created_at) + ", " + std::to_string(end) + ")");
      }
      if (!(p.usage_rate >= 0.0 && p.usage_rate <= 1.0)) {
        throw ValidationError("usage_rate of vm '" + vm.vm_id + "' at hour " +
                              std::to_string(p.hour) + " outside [0, 1]");
      }
      if (k > 0 && points[k - 1].hour == p.hour) {
        throw ValidationError("duplicate usage point for vm '" + vm.vm_id + "' at hour " +
                              std::to_string(p.hour));
      }
    }
  }

  t.vms_ = std::move(vms);
  t.usage_ = std::move(aligned);
  t.num_subscribers_ = max_sub + 1;
  t.index();
  t.compute_stats();
  return t;
}

void TraceSet::index() {
  dense_.assign(vms_.size(), {});
  dense_origin_.assign(vms_.size(), 0);
  arrivals_.assign(static_cast<std::size_t>(horizon_), {});
  preexisting_.clear();
  id_index_.clear();
  for (std::size_t i = 0; i < vms_.size(); ++i) {
    const auto& vm = vms_[i];
    id_index_.emplace(vm.vm_id, i);
    const int end = std::min(vm.end_hour(horizon_), horizon_);
    const int origin = vm.created_at;
    dense_origin_[i] = origin;
    dense_[i].assign(static_cast<std::size_t>(std::max(0, end - origin)), kNaN);
    for (const auto& p : usage_[i].points) {
      if (p.hour < end) dense_[i][static_cast<std::size_t>(p.hour - origin)] = p.usage_rate;
    }
    if (vm.created_at < 0) {
      preexisting_.push_back(i);
    } else if (vm.created_at < horizon_) {
      arrivals_[static_cast<std::size_t>(vm.created_at)].push_back(i);
    }
  }
}

void TraceSet::compute_stats() {
  hourly_stats_.assign(static_cast<std::size_t>(num_subscribers_), {});
  // Two passes: means first, then squared deviations, so constant cells get
  // exactly zero spread.
  std::vector<std::array<double, kHoursPerDay>> acc(hourly_stats_.size());
  auto for_each_point = [&](auto fn) {
    for (std::size_t i = 0; i < vms_.size(); ++i) {
      const auto sub = static_cast<std::size_t>(vms_[i].subscriber_id);
      for (const auto& p : usage_[i].points) {
        fn(sub, static_cast<std::size_t>(hour_of_day(p.hour)), p.usage_rate);
      }
    }
  };
  for (auto& a : acc) a.fill(0.0);
  for_each_point([&](std::size_t sub, std::size_t h, double u) {
    acc[sub][h] += u;
    ++hourly_stats_[sub][h].count;
  });
  for (std::size_t s = 0; s < hourly_stats_.size(); ++s) {
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
      auto& cell = hourly_stats_[s][h];
      if (cell.count > 0) cell.mean = acc[s][h] / static_cast<double>(cell.count);
    }
  }
  for (auto& a : acc) a.fill(0.0);
  for_each_point([&](std::size_t sub, std::size_t h, double u) {
    const double d = u - hourly_stats_[sub][h].mean;
    acc[sub][h] += d * d;
  });
  for (std::size_t s = 0; s < hourly_stats_.size(); ++s) {
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
      auto& cell = hourly_stats_[s][h];
      if (cell.count > 0) cell.stddev = std::sqrt(acc[s][h] / static_cast<double>(cell.count));
    }
  }
}

std::optional<double> TraceSet::usage_rate(std::size_t vm_index, int hour) const {
  const auto& row = dense_.at(vm_index);
  const int offset = hour - dense_origin_[vm_index];
  if (offset < 0 || offset >= static_cast<int>(row.size())) return std::nullopt;
  const double v = row[static_cast<std::size_t>(offset)];
  if (std::isnan(v)) return std::nullopt;
  return v;
}

std::optional<std::size_t> TraceSet::find(const std::string& vm_id) const {
  const auto it = id_index_.find(vm_id);
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::size_t>& TraceSet::arrivals_at(int hour) const {
  return arrivals_.at(static_cast<std::size_t>(hour));
}

const HourlyStat& TraceSet::hourly_stat(int subscriber, int hour_of_day_index) const {
  return hourly_stats_.at(static_cast<std::size_t>(subscriber))
      .at(static_cast<std::size_t>(hour_of_day(hour_of_day_index)));
}

TraceSet TraceSet::with_usage(std::vector<UsageSeries> usage) const {
  TraceSet t = build(vms_, std::move(usage), horizon_);
  t.hourly_stats_ = hourly_stats_;
  return t;
}

std::size_t TraceSet::total_usage_points() const noexcept {
  std::size_t n = 0;
  for (const auto& s : usage_) n += s.points.size();
  return n;
}

// ---------------------------------------------------------------------------
// CSV I/O

TraceSet load_traces(const std::filesystem::path& vms_path,
                     const std::filesystem::path& usage_path) {
  const std::string vms_file = vms_path.string();
  const std::string usage_file = usage_path.string();
  std::ifstream vin(vms_path);
  if (!vin) throw Error("cannot open " + vms_file);
  std::ifstream uin(usage_path);
  if (!uin) throw Error("cannot open " + usage_file);

  std::vector<VmRecord> vms;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(vin, line)) {
    ++lineno;
    const auto view = trim_cr(line);
    if (header) {
      header = false;
      if (view != "vm_id,subscriber_id,created_at,deleted_at,requested_cores,requested_mem,"
                  "requested_net") {
        throw ParseError(vms_file, lineno, "unexpected header");
      }
      continue;
    }
    if (view.empty()) continue;
    const auto f = split_csv(view);
    if (f.size() != 7) throw ParseError(vms_file, lineno, "expected 7 fields");
    VmRecord vm;
    vm.vm_id = std::string(f[0]);
    if (vm.vm_id.empty()) throw ParseError(vms_file, lineno, "empty vm_id");
    vm.subscriber_id = parse_number<int>(f[1], vms_file, lineno, "subscriber_id");
    vm.created_at = parse_number<int>(f[2], vms_file, lineno, "created_at");
    if (!f[3].empty()) vm.deleted_at = parse_number<int>(f[3], vms_file, lineno, "deleted_at");
    vm.requested_cores = parse_number<double>(f[4], vms_file, lineno, "requested_cores");
    vm.requested_mem = parse_number<double>(f[5], vms_file, lineno, "requested_mem");
    vm.requested_net = parse_number<double>(f[6], vms_file, lineno, "requested_net");
    vms.push_back(std::move(vm));
  }
  if (header) throw ParseError(vms_file, 1, "missing header");

  std::vector<UsageSeries> usage;
  std::unordered_map<std::string, std::size_t> series_index;
  lineno = 0;
  header = true;
  while (std::getline(uin, line)) {
    ++lineno;
    const auto view = trim_cr(line);
    if (header) {
      header = false;
      if (view != "vm_id,hour,usage_rate") throw ParseError(usage_file, lineno, "unexpected header");
      continue;
    }
    if (view.empty()) continue;
    const auto f = split_csv(view);
    if (f.size() != 3) throw ParseError(usage_file, lineno, "expected 3 fields");
    UsagePoint p;
    p.hour = parse_number<int>(f[1], usage_file, lineno, "hour");
    p.usage_rate = parse_number<double>(f[2], usage_file, lineno, "usage_rate");
    if (!(p.usage_rate >= 0.0 && p.usage_rate <= 1.0)) {
      throw ValidationError(usage_file + ":" + std::to_string(lineno) + ": usage_rate " +
                            std::string(f[2]) + " outside [0, 1]");
    }
    const std::string id(f[0]);
    auto [it, inserted] = series_index.emplace(id, usage.size());
    if (inserted) usage.push_back(UsageSeries{id, {}});
    usage[it->second].points.push_back(p);
  }
  if (header) throw ParseError(usage_file, 1, "missing header");

  return TraceSet::build(std::move(vms), std::move(usage));
}

void write_traces(const TraceSet& trace, const std::filesystem::path& vms_path,
                  const std::filesystem::path& usage_path) {
  std::ofstream vout(vms_path);
  if (!vout) throw Error("cannot write " + vms_path.string());
  vout << "vm_id,subscriber_id,created_at,deleted_at,requested_cores,requested_mem,"
          "requested_net\n";
  for (const auto& vm : trace.vms()) {
    vout << vm.vm_id << ',' << vm.subscriber_id << ',' << vm.created_at << ',';
    if (vm.deleted_at) vout << *vm.deleted_at;
    vout << ',' << format_double(vm.requested_cores) << ',' << format_double(vm.requested_mem)
         << ',' << format_double(vm.requested_net) << '\n';
  }
  std::ofstream uout(usage_path);
  if (!uout) throw Error("cannot write " + usage_path.string());
  uout << "vm_id,hour,usage_rate\n";
  for (const auto& series : trace.usage()) {
    for (const auto& p : series.points) {
      uout << series.vm_id << ',' << p.hour << ',' << format_double(p.usage_rate) << '\n';
    }
  }
  if (!vout || !uout) throw Error("write failed for trace files");
}

// ---------------------------------------------------------------------------
// Generation

std::string_view to_string(UsageShape shape) {
  switch (shape) {
    case UsageShape::kDiurnalSine: return "diurnal_sine";
    case UsageShape::kConstant: return "constant";
    case UsageShape::kBursty: return "bursty";
  }
  return "constant";
}

UsageShape usage_shape_from_string(std::string_view name) {
  if (name == "diurnal_sine") return UsageShape::kDiurnalSine;
  if (name == "constant") return UsageShape::kConstant;
  if (name == "bursty") return UsageShape::kBursty;
  throw ConfigError("unknown usage shape '" + std::string(name) + "'");
}

std::string_view to_string(LifetimeKind kind) {
  switch (kind) {
    case LifetimeKind::kFixed: return "fixed";
    case LifetimeKind::kUniform: return "uniform";
    case LifetimeKind::kGeometric: return "geometric";
  }
  return "fixed";
}

LifetimeKind lifetime_kind_from_string(std::string_view name) {
  if (name == "fixed") return LifetimeKind::kFixed;
  if (name == "uniform") return LifetimeKind::kUniform;
  if (name == "geometric") return LifetimeKind::kGeometric;
  throw ConfigError("unknown lifetime kind '" + std::string(name) + "'");
}

void GeneratorConfig::validate() const {
  if (num_subscribers <= 0) throw ConfigError("num_subscribers must be positive");
  if (horizon_hours <= 0) throw ConfigError("horizon_hours must be positive");
  if (static_cast<int>(profiles.size()) != num_subscribers) {
    throw ConfigError("expected one profile per subscriber");
  }
  for (const auto& p : profiles) {
    if (!(p.arrival_rate >= 0.0)) throw ConfigError("arrival_rate must be non-negative");
    if (!(p.mean_usage >= 0.0 && p.mean_usage <= 1.0)) {
      throw ConfigError("mean_usage must lie in [0, 1]");
    }
    if (!(p.amplitude >= 0.0) || !(p.noise_std >= 0.0)) {
      throw ConfigError("amplitude and noise_std must be non-negative");
    }
    if (!(p.burst_probability >= 0.0 && p.burst_probability <= 1.0) ||
        !(p.burst_level >= 0.0 && p.burst_level <= 1.0)) {
      throw ConfigError("burst_probability and burst_level must lie in [0, 1]");
    }
    if (p.initial_vms < 0) throw ConfigError("initial_vms must be non-negative");
    if (p.sizes.empty()) throw ConfigError("each profile needs at least one VM size");
    double total_weight = 0.0;
    for (const auto& s : p.sizes) {
      if (!(s.cores > 0.0) || !(s.mem >= 0.0) || !(s.net >= 0.0) || !(s.weight >= 0.0)) {
        throw ConfigError("VM sizes need cores > 0 and non-negative mem/net/weight");
      }
      total_weight += s.weight;
    }
    if (!(total_weight > 0.0)) throw ConfigError("VM size weights sum to zero");
    const auto& l = p.lifetime;
    switch (l.kind) {
      case LifetimeKind::kFixed:
        if (l.min_hours < 1) throw ConfigError("fixed lifetime must be >= 1 hour");
        break;
      case LifetimeKind::kUniform:
        if (l.min_hours < 1 || l.max_hours < l.min_hours) {
          throw ConfigError("uniform lifetime needs 1 <= min_hours <= max_hours");
        }
        break;
      case LifetimeKind::kGeometric:
        if (!(l.mean_hours >= 1.0)) throw ConfigError("geometric lifetime mean must be >= 1");
        break;
    }
  }
}

double shape_level(const SubscriberProfile& p, int hour) {
  switch (p.shape) {
    case UsageShape::kDiurnalSine: {
      const double angle = 2.0 * std::numbers::pi * hour_of_day(hour) / kHoursPerDay;
      return p.mean_usage + p.amplitude * std::sin(angle + p.phase);
    }
    case UsageShape::kConstant:
    case UsageShape::kBursty:
      return p.mean_usage;
  }
  return p.mean_usage;
}

namespace {

int draw_lifetime(const LifetimeDistribution& l, std::mt19937_64& rng) {
  switch (l.kind) {
    case LifetimeKind::kFixed: return l.min_hours;
    case LifetimeKind::kUniform:
      return std::uniform_int_distribution<int>(l.min_hours, l.max_hours)(rng);
    case LifetimeKind::kGeometric:
      // Support {1, 2, ...} with the requested mean.
      return 1 + std::geometric_distribution<int>(1.0 / l.mean_hours)(rng);
  }
  return l.min_hours;
}

double draw_usage(const SubscriberProfile& p, int hour, std::mt19937_64& rng) {
  double level = shape_level(p, hour);
  if (p.shape == UsageShape::kBursty &&
      std::bernoulli_distribution(p.burst_probability)(rng)) {
    level = p.burst_level;
  }
  if (p.noise_std > 0.0) level += std::normal_distribution<double>(0.0, p.noise_std)(rng);
  return std::clamp(level, 0.0, 1.0);
}

}  // namespace

TraceSet generate_synthetic(const GeneratorConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.rng_seed);
  const int horizon = config.horizon_hours;

  std::vector<std::discrete_distribution<std::size_t>> size_pick;
  for (const auto& p : config.profiles) {
    std::vector<double> w;
    for (const auto& s : p.sizes) w.push_back(s.weight);
    size_pick.emplace_back(w.begin(), w.end());
  }

  std::vector<VmRecord> vms;
  std::vector<UsageSeries> usage;
  auto emit = [&](int sub, int created, int lifetime) {
    const auto& p = config.profiles[static_cast<std::size_t>(sub)];
    const auto& size = p.sizes[size_pick[static_cast<std::size_t>(sub)](rng)];
    VmRecord vm;
    vm.vm_id = "vm" + std::to_string(vms.size());
    vm.subscriber_id = sub;
    vm.created_at = created;
    const int end = created + lifetime;
    if (end < horizon) vm.deleted_at = end;
    vm.requested_cores = size.cores;
    vm.requested_mem = size.mem;
    vm.requested_net = size.net;
    UsageSeries series{vm.vm_id, {}};
    for (int h = std::max(created, 0); h < std::min(end, horizon); ++h) {
      series.points.push_back(UsagePoint{h, draw_usage(p, h, rng)});
    }
    vms.push_back(std::move(vm));
    usage.push_back(std::move(series));
  };

  // Pre-existing VMs: created before hour 0, still alive at hour 0.
  for (int sub = 0; sub < config.num_subscribers; ++sub) {
    const auto& p = config.profiles[static_cast<std::size_t>(sub)];
    for (int j = 0; j < p.initial_vms; ++j) {
      const int lifetime = std::max(2, draw_lifetime(p.lifetime, rng));
      const int age = std::uniform_int_distribution<int>(1, lifetime - 1)(rng);
      emit(sub, -age, lifetime);
    }
  }

  std::vector<int> arrivals;
  for (int t = 0; t < horizon; ++t) {
    arrivals.clear();
    for (int sub = 0; sub < config.num_subscribers; ++sub) {
      const double rate = config.profiles[static_cast<std::size_t>(sub)].arrival_rate;
      const int n = rate > 0.0 ? std::poisson_distribution<int>(rate)(rng) : 0;
      arrivals.insert(arrivals.end(), static_cast<std::size_t>(n), sub);
    }
    std::shuffle(arrivals.begin(), arrivals.end(), rng);
    for (const int sub : arrivals) {
      emit(sub, t, draw_lifetime(config.profiles[static_cast<std::size_t>(sub)].lifetime, rng));
    }
  }

  // Subscribers that never emitted a VM would break the contiguous-id
  // invariant; that is a config problem, not a data problem.
  std::vector<bool> seen(static_cast<std::size_t>(config.num_subscribers), false);
  for (const auto& vm : vms) seen[static_cast<std::size_t>(vm.subscriber_id)] = true;
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw ConfigError("a subscriber produced no VMs; raise its arrival_rate or initial_vms");
  }
  return TraceSet::build(std::move(vms), std::move(usage), horizon);
}

GeneratorConfig scenario_preset(std::string_view name) {
  GeneratorConfig config;
  config.horizon_hours = 120;
  config.rng_seed = 7;
  if (name == "staggered_peaks") {
    config.num_subscribers = 2;
    SubscriberProfile p;
    p.arrival_rate = 60.0;
    p.sizes = {VmSizeOption{2, 4, 100, 1}, VmSizeOption{4, 8, 200, 1},
               VmSizeOption{8, 16, 400, 1}};
    p.lifetime = LifetimeDistribution{LifetimeKind::kFixed, 1, 1, 1.0};
    p.shape = UsageShape::kDiurnalSine;
    p.mean_usage = 0.0;
    p.amplitude = 0.5;
    p.noise_std = 0.02;
    p.phase = 0.0;
    config.profiles.push_back(p);
    p.phase = std::numbers::pi;
    config.profiles.push_back(p);
    return config;
  }
  if (name == "low_duration") {
    config.num_subscribers = 1;
    SubscriberProfile p;
    p.arrival_rate = 30.0;
    p.sizes = {VmSizeOption{2, 8, 100, 1}, VmSizeOption{4, 16, 200, 1},
               VmSizeOption{8, 32, 400, 1}};
    p.lifetime = LifetimeDistribution{LifetimeKind::kFixed, 2, 2, 2.0};
    p.shape = UsageShape::kBursty;
    p.mean_usage = 0.3;
    p.noise_std = 0.1;
    p.burst_probability = 0.15;
    p.burst_level = 0.9;
    config.profiles.push_back(p);
    return config;
  }
  throw UnknownScenario(std::string(name));
}

TraceSet resample_for_eval(const TraceSet& trace, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::vector<UsageSeries> usage = trace.usage();
  std::size_t fallbacks = 0;
  for (std::size_t i = 0; i < usage.size(); ++i) {
    const int sub = trace.vms()[i].subscriber_id;
    for (auto& p : usage[i].points) {
      const auto& cell = trace.hourly_stat(sub, p.hour);
      if (cell.count == 0) {
        ++fallbacks;
        continue;
      }
      double v = cell.mean;
      if (cell.stddev > 0.0) v = std::normal_distribution<double>(cell.mean, cell.stddev)(rng);
      p.usage_rate = std::clamp(v, 0.0, 1.0);
    }
  }
  if (fallbacks > 0) {
    spdlog::warn("resample_for_eval: {} usage points had an empty statistics cell and were kept",
                 fallbacks);
  }
  return trace.with_usage(std::move(usage));
}

}  // namespace oversub
