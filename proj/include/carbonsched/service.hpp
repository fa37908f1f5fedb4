#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "carbonsched/errors.hpp"
#include "carbonsched/model.hpp"
#include "carbonsched/workload.hpp"

namespace carbonsched {

// The demo service: one /avg operation offered in three flavours that trade
// accuracy for work by sampling every step-th element.

// Mean of data[0], data[step], data[2*step], ... rounded half to even.
// "round" differs across ecosystems, so the rule is pinned here and in the
// README; the integer arithmetic below is exact for any inputs.
inline std::int64_t approx_average(std::span<const std::int64_t> data, int step) {
  if (data.empty()) throw ValidationError("average of empty data");
  if (step < 1) throw ValidationError("step must be at least 1");
  std::int64_t sum = 0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < data.size(); i += static_cast<std::size_t>(step)) {
    sum += data[i];
    ++count;
  }
  std::int64_t floor_q = sum / count;
  if (sum % count != 0 && sum < 0) --floor_q;      // true floor; count > 0
  const std::int64_t rem = sum - floor_q * count;  // in [0, count)
  if (2 * rem < count) return floor_q;
  if (2 * rem > count) return floor_q + 1;
  return floor_q % 2 == 0 ? floor_q : floor_q + 1;
}

// Distance of the step-approximated average from the exact one, in percent.
// Defined as 0 when both are 0 and 100 when only the exact average is 0.
inline double strategy_error_pct(std::span<const std::int64_t> data, int step) {
  const std::int64_t approx = approx_average(data, step);
  const std::int64_t exact = approx_average(data, 1);
  if (exact == 0) return approx == 0 ? 0.0 : 100.0;
  return 100.0 * static_cast<double>(std::abs(approx - exact)) /
         static_cast<double>(std::abs(exact));
}

// The three pinned strategy flavours.
struct ServiceStrategy {
  std::string name;
  int step;
};

inline const std::vector<ServiceStrategy>& service_strategies() {
  static const std::vector<ServiceStrategy> strategies = {
      {"LOW_POWER", 4}, {"MEDIUM_POWER", 2}, {"HIGH_POWER", 1}};
  return strategies;
}

inline int strategy_step(const std::string& name) {
  for (const auto& s : service_strategies()) {
    if (s.name == name) return s.step;
  }
  throw ValidationError("unknown strategy '" + name + "'");
}

// ---- schedule file ----

// JSON schedule produced by `solve`: strategy names keyed by slot start time
// expressed in hours (0, 0.5, ..., 23.5 for a 30-minute day).
struct ScheduleFile {
  int slot_duration_minutes = 30;
  std::vector<std::string> entries;  // entries[i] = strategy name for slot i

  int num_slots() const { return static_cast<int>(entries.size()); }
};

inline std::string slot_key(int slot, int slot_duration_minutes) {
  const double hours = static_cast<double>(slot) * slot_duration_minutes / 60.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", hours);
  return buf;
}

struct TimeOfDay {
  int hour = 0;
  int minute = 0;
};

inline TimeOfDay current_time_of_day() {
  using std::chrono::system_clock;
  const std::time_t now = system_clock::to_time_t(system_clock::now());
  std::tm local{};
  localtime_r(&now, &local);
  return TimeOfDay{local.tm_hour, local.tm_min};
}

// The forced strategy wins when present; otherwise the schedule entry whose
// key is hour + 0.5 * floor(minute/30) (generalized to the schedule's slot
// duration). A lookup past the schedule's last slot is an error.
inline std::string lookup_strategy(const ScheduleFile& schedule, TimeOfDay now,
                                   const std::optional<std::string>& force = std::nullopt) {
  if (force) {
    strategy_step(*force);  // throws on unknown names
    return *force;
  }
  const int minutes = now.hour * 60 + now.minute;
  const int slot = minutes / schedule.slot_duration_minutes;
  if (slot < 0 || slot >= schedule.num_slots())
    throw ValidationError("schedule has no entry for key " +
                          slot_key(slot, schedule.slot_duration_minutes));
  return schedule.entries[static_cast<std::size_t>(slot)];
}

inline std::string schedule_to_json(const ScheduleFile& schedule) {
  nlohmann::ordered_json doc;
  doc["slot_duration_minutes"] = schedule.slot_duration_minutes;
  nlohmann::ordered_json assignment = nlohmann::ordered_json::object();
  for (int i = 0; i < schedule.num_slots(); ++i)
    assignment[slot_key(i, schedule.slot_duration_minutes)] =
        schedule.entries[static_cast<std::size_t>(i)];
  doc["assignment"] = assignment;
  return doc.dump(2) + "\n";
}

inline ScheduleFile schedule_from_json(const std::string& text, const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + " is not valid JSON: " + e.what());
  }
  ScheduleFile schedule;
  try {
    schedule.slot_duration_minutes = doc.at("slot_duration_minutes").get<int>();
    if (schedule.slot_duration_minutes <= 0 || schedule.slot_duration_minutes > 1440)
      throw ParseError(origin + ": slot duration out of range");
    const auto& assignment = doc.at("assignment");
    const int t = static_cast<int>(assignment.size());
    if (t == 0) throw ParseError(origin + ": empty assignment");
    schedule.entries.resize(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) {
      const std::string key = slot_key(i, schedule.slot_duration_minutes);
      if (!assignment.contains(key)) throw ParseError(origin + ": missing key '" + key + "'");
      schedule.entries[static_cast<std::size_t>(i)] = assignment[key].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": " + e.what());
  }
  return schedule;
}

inline ScheduleFile load_schedule(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return schedule_from_json(text, path.string());
}

inline void save_schedule(const std::filesystem::path& path, const ScheduleFile& schedule) {
  detail::write_file_atomic(path, schedule_to_json(schedule));
}

// Builds the schedule for an assignment using the catalog's strategy names.
inline ScheduleFile schedule_from_assignment(const Horizon& horizon, const StrategyCatalog& catalog,
                                             const Assignment& assignment) {
  require_valid(horizon, catalog, assignment);
  ScheduleFile schedule;
  schedule.slot_duration_minutes = horizon.slot_duration_minutes;
  schedule.entries.reserve(assignment.choices.size());
  for (int j : assignment.choices) schedule.entries.push_back(catalog.at(j).name);
  return schedule;
}

// ---- dataset ----

inline std::vector<std::int64_t> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::int64_t> data;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    data.push_back(detail::parse_int(line, "dataset line " + std::to_string(n)));
  }
  if (data.empty()) throw ParseError(path.string() + ": dataset is empty");
  return data;
}

// ---- benchmarking ----

struct BenchmarkEntry {
  StrategyProfile profile;          // measured values, fixed-point
  double mean_service_time_ms = 0;  // unrounded measurement
};

// Times approx_average per strategy over the given dataset and pairs it with
// the measured output error. The resulting catalog is valid optimizer input
// (service times are floored at 0.1 ms, the fixed-point resolution).
inline std::vector<BenchmarkEntry> benchmark_strategies(std::span<const std::int64_t> dataset,
                                                        int trials) {
  if (trials < 1) throw ValidationError("trials must be at least 1");
  std::vector<BenchmarkEntry> entries;
  volatile std::int64_t sink = 0;
  int id = 0;
  for (const auto& strat : service_strategies()) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    for (int n = 0; n < trials; ++n) sink = approx_average(dataset, strat.step);
    const auto stop = clock::now();
    (void)sink;
    const double total_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    BenchmarkEntry entry;
    entry.mean_service_time_ms = total_ms / trials;
    entry.profile.id = id++;
    entry.profile.name = strat.name;
    entry.profile.mean_service_time_dms =
        std::max<std::int64_t>(1, std::llround(entry.mean_service_time_ms * 10.0));
    entry.profile.mean_error_dpct = std::llround(strategy_error_pct(dataset, strat.step) * 10.0);
    entries.push_back(std::move(entry));
  }
  return entries;
}

inline StrategyCatalog catalog_from_benchmark(const std::vector<BenchmarkEntry>& entries) {
  StrategyCatalog catalog;
  for (const auto& e : entries) catalog.strategies.push_back(e.profile);
  validate_catalog(catalog);
  return catalog;
}

}  // namespace carbonsched
