#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "carbonsched/carbon_api.hpp"
#include "carbonsched/errors.hpp"
#include "carbonsched/model.hpp"
#include "carbonsched/optimizer.hpp"
#include "carbonsched/policies.hpp"
#include "carbonsched/rng.hpp"
#include "carbonsched/workload.hpp"

namespace carbonsched {

// Replays assignments against actual carbon/demand series and runs the
// full multi-day, multi-profile experiment grid.

struct SlotOutcome {
  int slot = 0;
  int strategy_id = 0;
  std::int64_t actual_requests = 0;
  std::int64_t actual_intensity = 0;
  double emissions_g = 0.0;
  std::int64_t error_contribution_dpct = 0;
};

struct SimulationReport {
  std::string name;
  std::vector<SlotOutcome> per_slot;
  double emissions_g = 0.0;
  std::int64_t scaled_emission_dms = 0;
  std::int64_t weighted_error_dpct = 0;
  // Both readings of "average error": request-weighted, and the plain mean
  // of each slot's strategy error.
  double weighted_avg_error_pct = 0.0;
  double per_slot_mean_error_pct = 0.0;
  std::optional<double> baseline_emissions_g;
  std::optional<double> reduction_pct;
};

// Deterministic analytical replay: each slot contributes its strategy's mean
// error per request and mean service time per request.
inline SimulationReport simulate_day(const Horizon& actual_horizon, const Assignment& assignment,
                                     const StrategyCatalog& catalog, const EmissionParams& params) {
  require_valid(actual_horizon, catalog, assignment);
  if (params.server_power_watts <= 0) throw ValidationError("server power must be positive");

  SimulationReport report;
  std::int64_t slot_error_sum_dpct = 0;
  for (int i = 0; i < actual_horizon.num_slots(); ++i) {
    const auto& slot = actual_horizon.slots[static_cast<std::size_t>(i)];
    const int j = assignment.choices[static_cast<std::size_t>(i)];
    const auto& strat = catalog.at(j);
    SlotOutcome out;
    out.slot = i;
    out.strategy_id = j;
    out.actual_requests = slot.requests;
    out.actual_intensity = slot.carbon_intensity_g_per_kwh;
    const std::int64_t scaled =
        slot.requests * slot.carbon_intensity_g_per_kwh * strat.mean_service_time_dms;
    out.emissions_g = emissions_g_from_scaled(scaled, params);
    out.error_contribution_dpct = slot.requests * strat.mean_error_dpct;
    report.scaled_emission_dms += scaled;
    report.weighted_error_dpct += out.error_contribution_dpct;
    slot_error_sum_dpct += strat.mean_error_dpct;
    report.per_slot.push_back(out);
  }
  report.emissions_g = emissions_g_from_scaled(report.scaled_emission_dms, params);
  report.weighted_avg_error_pct =
      avg_error_pct_from_weighted(report.weighted_error_dpct, total_requests(actual_horizon));
  report.per_slot_mean_error_pct =
      static_cast<double>(slot_error_sum_dpct) / (10.0 * actual_horizon.num_slots());
  return report;
}

// Simulates every named assignment and stamps each report with its reduction
// relative to the named baseline (0% when the baseline emits nothing).
inline std::vector<SimulationReport> compare_policies(
    const Horizon& actual_horizon, const std::vector<std::pair<std::string, Assignment>>& assignments,
    const StrategyCatalog& catalog, const EmissionParams& params, const std::string& baseline_name) {
  std::vector<SimulationReport> reports;
  reports.reserve(assignments.size());
  const SimulationReport* baseline = nullptr;
  for (const auto& [name, assignment] : assignments) {
    reports.push_back(simulate_day(actual_horizon, assignment, catalog, params));
    reports.back().name = name;
  }
  for (std::size_t k = 0; k < assignments.size(); ++k) {
    if (assignments[k].first == baseline_name) baseline = &reports[k];
  }
  if (baseline == nullptr) throw ValidationError("baseline policy '" + baseline_name + "' not in list");
  for (auto& report : reports) {
    report.baseline_emissions_g = baseline->emissions_g;
    report.reduction_pct = baseline->emissions_g > 0.0
                               ? 100.0 * (1.0 - report.emissions_g / baseline->emissions_g)
                               : 0.0;
  }
  return reports;
}

// ---- experiment grid ----

struct ExperimentProfile {
  std::string name;
  RequestProfileSpec spec;
};

struct ExperimentConfig {
  std::vector<std::string> days;        // CSV paths, or dates resolved in fixtures_dir
  std::filesystem::path fixtures_dir;   // where YYYY-MM-DD day entries resolve
  StrategyCatalog catalog;
  std::vector<ExperimentProfile> profiles;
  std::vector<std::string> policies;    // of: always-low always-medium always-high naive optimal
  std::vector<std::int64_t> epsilons_dpct;
  EmissionParams params;
  NaiveThresholds thresholds;
  double perturb_pct = 5.0;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "results";
  std::string baseline = "always-high";
};

// One (day, profile, policy) cell.
struct ExperimentCell {
  std::string day;
  std::string profile;
  std::string policy;
  bool feasible = true;
  // actual-horizon outcome
  double emissions_g = 0.0;
  double weighted_error_pct = 0.0;
  double slot_mean_error_pct = 0.0;
  double reduction_pct = 0.0;
  // forecast-horizon outcome (what the solver promised)
  double forecast_emissions_g = 0.0;
  double forecast_weighted_error_pct = 0.0;
  double forecast_reduction_pct = 0.0;
};

struct ExperimentSummaryRow {
  std::string profile;
  std::string policy;
  int days_counted = 0;
  double mean_error_weighted_pct = 0.0;
  double mean_error_slotwise_pct = 0.0;
  double mean_reduction_pct = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentCell> cells;
  std::vector<ExperimentSummaryRow> summary;
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t base, const std::string& day,
                                 const std::string& profile, const char* purpose) {
  const std::string tag = day + "/" + profile + "/" + purpose;
  SplitMix64 rng(base ^ fnv1a64(tag.data(), tag.size()));
  return rng.next_u64();
}

inline std::string format_pct(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::int64_t role_id(const StrategyCatalog& catalog, int role) {
  std::vector<int> order(static_cast<std::size_t>(catalog.size()));
  for (int j = 0; j < catalog.size(); ++j) order[static_cast<std::size_t>(j)] = j;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return catalog.at(a).mean_service_time_dms < catalog.at(b).mean_service_time_dms;
  });
  return order.at(static_cast<std::size_t>(role));
}

}  // namespace detail

inline std::string optimal_policy_name(std::int64_t epsilon_dpct) {
  return "optimal-" + detail::format_fixed1(epsilon_dpct);
}

// Runs the whole grid: for each (day, profile) build the forecast horizon,
// solve every epsilon on forecasts, perturb requests into actuals, simulate
// every policy on the actual horizon, and aggregate means per (profile,
// policy) across days. Writes summary.csv plus one detail CSV per (day,
// profile) under output_dir. Sequential and fully deterministic: per-day
// seeds derive from (config seed, day, profile name).
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  if (config.days.empty()) throw ValidationError("experiment needs at least one day");
  if (config.profiles.empty()) throw ValidationError("experiment needs at least one profile");
  validate_catalog(config.catalog);

  // Baseline must be simulated even when not listed as a policy.
  std::vector<std::string> policies = config.policies;
  if (std::find(policies.begin(), policies.end(), config.baseline) == policies.end())
    policies.insert(policies.begin(), config.baseline);

  ExperimentResult result;
  fs::create_directories(config.output_dir);

  struct Key {
    std::string profile;
    std::string policy;
  };
  std::vector<Key> order;  // stable (profile, policy) ordering for the summary

  for (const auto& profile : config.profiles) {
    for (const auto& policy : policies) {
      if (policy == "optimal") {
        for (auto eps : config.epsilons_dpct) order.push_back({profile.name, optimal_policy_name(eps)});
      } else {
        order.push_back({profile.name, policy});
      }
    }
  }

  for (const auto& day_entry : config.days) {
    const bool is_path = day_entry.find('/') != std::string::npos ||
                         day_entry.size() < 10 || day_entry.find(".csv") != std::string::npos;
    CarbonSeries carbon;
    if (is_path) {
      carbon = load_carbon_csv(day_entry);
    } else {
      FetchOptions fetch;
      fetch.cache_dir = config.fixtures_dir;
      carbon = fetch_carbon_day(day_entry, fetch);  // offline: fixture or error
    }
    const std::string day = carbon.date;
    const int t = static_cast<int>(carbon.slots.size());

    for (const auto& profile : config.profiles) {
      RequestProfileSpec spec = profile.spec;
      spec.seed = detail::derive_seed(config.seed, day, profile.name, "profile");
      const auto forecast_requests = generate_profile(spec, t);
      const auto actual_requests =
          perturb_series(forecast_requests, config.perturb_pct,
                         detail::derive_seed(config.seed, day, profile.name, "perturb"));

      std::vector<RequestRecord> records(static_cast<std::size_t>(t));
      for (int i = 0; i < t; ++i) {
        records[static_cast<std::size_t>(i)].forecast = forecast_requests[static_cast<std::size_t>(i)];
        records[static_cast<std::size_t>(i)].actual = actual_requests[static_cast<std::size_t>(i)];
      }
      const Horizon forecast_horizon = build_horizon(carbon, records, SeriesSource::Forecast);
      const Horizon actual_horizon = build_horizon(carbon, records, SeriesSource::ActualOrForecast);

      // Build every assignment on the forecast horizon.
      const StrategyCatalog& catalog = config.catalog;
      std::vector<std::pair<std::string, Assignment>> assignments;
      std::vector<std::string> infeasible_policies;
      for (const auto& policy : policies) {
        if (policy == "always-low") {
          assignments.emplace_back(policy, always_policy(forecast_horizon, catalog,
                                                         static_cast<int>(detail::role_id(catalog, 0))));
        } else if (policy == "always-medium") {
          assignments.emplace_back(policy, always_policy(forecast_horizon, catalog,
                                                         static_cast<int>(detail::role_id(catalog, 1))));
        } else if (policy == "always-high") {
          assignments.emplace_back(policy,
                                   always_policy(forecast_horizon, catalog,
                                                 static_cast<int>(detail::role_id(catalog, catalog.size() - 1))));
        } else if (policy == "naive") {
          NaiveThresholds thresholds = config.thresholds;
          assignments.emplace_back(policy, naive_policy(forecast_horizon, catalog, thresholds));
        } else if (policy == "optimal") {
          const auto solved = solve_multi(forecast_horizon, catalog, config.epsilons_dpct, config.params);
          for (std::size_t k = 0; k < solved.size(); ++k) {
            const std::string name = optimal_policy_name(config.epsilons_dpct[k]);
            if (solved[k].status == SolveStatus::Optimal) assignments.emplace_back(name, solved[k].assignment);
            else infeasible_policies.push_back(name);
          }
        } else {
          throw ValidationError("unknown policy '" + policy + "'");
        }
      }

      const auto reports = compare_policies(actual_horizon, assignments, catalog, config.params,
                                            config.baseline);
      // Forecast-side metrics for the same assignments.
      const auto forecast_reports = compare_policies(forecast_horizon, assignments, catalog,
                                                     config.params, config.baseline);

      for (std::size_t k = 0; k < reports.size(); ++k) {
        ExperimentCell cell;
        cell.day = day;
        cell.profile = profile.name;
        cell.policy = reports[k].name;
        cell.emissions_g = reports[k].emissions_g;
        cell.weighted_error_pct = reports[k].weighted_avg_error_pct;
        cell.slot_mean_error_pct = reports[k].per_slot_mean_error_pct;
        cell.reduction_pct = *reports[k].reduction_pct;
        cell.forecast_emissions_g = forecast_reports[k].emissions_g;
        cell.forecast_weighted_error_pct = forecast_reports[k].weighted_avg_error_pct;
        cell.forecast_reduction_pct = *forecast_reports[k].reduction_pct;
        result.cells.push_back(cell);
      }
      for (const auto& name : infeasible_policies) {
        ExperimentCell cell;
        cell.day = day;
        cell.profile = profile.name;
        cell.policy = name;
        cell.feasible = false;
        result.cells.push_back(cell);
      }
    }
  }

  // Aggregate means per (profile, policy) over feasible days.
  for (const auto& key : order) {
    ExperimentSummaryRow row;
    row.profile = key.profile;
    row.policy = key.policy;
    for (const auto& cell : result.cells) {
      if (cell.profile != key.profile || cell.policy != key.policy || !cell.feasible) continue;
      ++row.days_counted;
      row.mean_error_weighted_pct += cell.weighted_error_pct;
      row.mean_error_slotwise_pct += cell.slot_mean_error_pct;
      row.mean_reduction_pct += cell.reduction_pct;
    }
    if (row.days_counted > 0) {
      row.mean_error_weighted_pct /= row.days_counted;
      row.mean_error_slotwise_pct /= row.days_counted;
      row.mean_reduction_pct /= row.days_counted;
    }
    result.summary.push_back(row);
  }

  // summary.csv
  std::string summary = "profile,policy,mean_error_weighted_pct,mean_error_slotwise_pct,mean_reduction_pct\n";
  for (const auto& row : result.summary) {
    summary += row.profile + "," + row.policy + ",";
    if (row.days_counted > 0) {
      summary += detail::format_pct(row.mean_error_weighted_pct) + "," +
                 detail::format_pct(row.mean_error_slotwise_pct) + "," +
                 detail::format_pct(row.mean_reduction_pct);
    } else {
      summary += ",,";
    }
    summary += "\n";
  }
  detail::write_file_atomic(config.output_dir / "summary.csv", summary);

  // Per-day detail CSVs, one per (day, profile).
  std::string current_key;
  std::string detail_csv;
  auto flush_detail = [&]() {
    if (!current_key.empty())
      detail::write_file_atomic(config.output_dir / ("detail-" + current_key + ".csv"), detail_csv);
  };
  for (const auto& cell : result.cells) {
    const std::string key = cell.day + "-" + cell.profile;
    if (key != current_key) {
      flush_detail();
      current_key = key;
      detail_csv =
          "day,profile,policy,status,emissions_g,weighted_error_pct,slot_mean_error_pct,"
          "reduction_pct,forecast_emissions_g,forecast_weighted_error_pct,forecast_reduction_pct\n";
    }
    detail_csv += cell.day + "," + cell.profile + "," + cell.policy + ",";
    if (cell.feasible) {
      detail_csv += "ok," + detail::format_pct(cell.emissions_g) + "," +
                    detail::format_pct(cell.weighted_error_pct) + "," +
                    detail::format_pct(cell.slot_mean_error_pct) + "," +
                    detail::format_pct(cell.reduction_pct) + "," +
                    detail::format_pct(cell.forecast_emissions_g) + "," +
                    detail::format_pct(cell.forecast_weighted_error_pct) + "," +
                    detail::format_pct(cell.forecast_reduction_pct);
    } else {
      detail_csv += "infeasible,,,,,,,";
    }
    detail_csv += "\n";
  }
  flush_detail();

  return result;
}

// Converts a percent value from a config/flag into decipercent, rejecting
// anything finer than one decimal digit.
inline std::int64_t epsilon_pct_to_dpct(double epsilon_pct) {
  if (epsilon_pct < 0) throw ValidationError("epsilon must be nonnegative");
  const double scaled = epsilon_pct * 10.0;
  const std::int64_t rounded = std::llround(scaled);
  if (std::abs(scaled - static_cast<double>(rounded)) > 1e-6)
    throw ValidationError("epsilon supports at most one fractional digit, got " +
                          std::to_string(epsilon_pct));
  return rounded;
}

// Experiment spec file. Paths inside the file resolve relative to the file's
// own directory. Example:
// {
//   "days": ["2023-01-15", "data/extra-day.csv"],
//   "fixtures_dir": "fixtures/carbon",
//   "strategies_csv": "fixtures/strategies.csv",
//   "profiles": [
//     {"name": "peaky", "kind": "peaky", "base_level": 200, "peak_level": 1000},
//     {"name": "stable-300", "kind": "stable", "base_level": 300}
//   ],
//   "policies": ["always-low", "always-medium", "naive", "optimal"],
//   "epsilons_pct": [1, 2, 4, 8],
//   "power_watts": 50,
//   "naive_thresholds": {"low_max_g_per_kwh": 150, "moderate_max_g_per_kwh": 250},
//   "perturb_pct": 5,
//   "seed": 7,
//   "output_dir": "results",
//   "baseline": "always-high"
// }
inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + " is not valid JSON: " + e.what());
  }
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto resolve = [&](const std::string& p) {
    return fs::path(p).is_absolute() ? fs::path(p) : base / p;
  };

  ExperimentConfig config;
  try {
    for (const auto& day : doc.at("days")) {
      std::string entry = day.get<std::string>();
      if (entry.find(".csv") != std::string::npos) entry = resolve(entry).string();
      config.days.push_back(entry);
    }
    if (doc.contains("fixtures_dir")) config.fixtures_dir = resolve(doc["fixtures_dir"].get<std::string>());
    config.catalog = load_strategies_csv(resolve(doc.at("strategies_csv").get<std::string>()));
    for (const auto& p : doc.at("profiles")) {
      ExperimentProfile profile;
      profile.name = p.at("name").get<std::string>();
      const std::string kind = p.at("kind").get<std::string>();
      if (kind == "stable") profile.spec.kind = ProfileKind::Stable;
      else if (kind == "peaky") profile.spec.kind = ProfileKind::Peaky;
      else throw ParseError("profile kind must be 'stable' or 'peaky', got '" + kind + "'");
      profile.spec.base_level = p.at("base_level").get<std::int64_t>();
      if (p.contains("peak_level")) profile.spec.peak_level = p["peak_level"].get<std::int64_t>();
      if (p.contains("peak_slots")) profile.spec.peak_slots = p["peak_slots"].get<std::vector<int>>();
      if (p.contains("peak_width_slots")) profile.spec.peak_width_slots = p["peak_width_slots"].get<int>();
      if (p.contains("noise_pct")) profile.spec.noise_pct = p["noise_pct"].get<double>();
      config.profiles.push_back(std::move(profile));
    }
    config.policies = doc.at("policies").get<std::vector<std::string>>();
    for (const auto& eps : doc.at("epsilons_pct"))
      config.epsilons_dpct.push_back(epsilon_pct_to_dpct(eps.get<double>()));
    if (doc.contains("power_watts")) config.params.server_power_watts = doc["power_watts"].get<double>();
    if (doc.contains("naive_thresholds")) {
      const auto& th = doc["naive_thresholds"];
      if (th.contains("low_max_g_per_kwh"))
        config.thresholds.low_max_g_per_kwh = th["low_max_g_per_kwh"].get<std::int64_t>();
      if (th.contains("moderate_max_g_per_kwh"))
        config.thresholds.moderate_max_g_per_kwh = th["moderate_max_g_per_kwh"].get<std::int64_t>();
      if (th.contains("max_expected_requests"))
        config.thresholds.max_expected_requests = th["max_expected_requests"].get<std::int64_t>();
    }
    if (doc.contains("perturb_pct")) config.perturb_pct = doc["perturb_pct"].get<double>();
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("output_dir")) config.output_dir = resolve(doc["output_dir"].get<std::string>());
    if (doc.contains("baseline")) config.baseline = doc["baseline"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config;
}

}  // namespace carbonsched
