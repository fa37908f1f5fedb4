#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "carbonsched/errors.hpp"

namespace carbonsched {

// Service times and error rates are stored as integers scaled by 10
// ("dms" = tenths of a millisecond, "dpct" = tenths of a percent).
// One decimal is all the inputs carry, and exact integer arithmetic keeps
// the set of emission-minimal assignments well-defined.

// One service variant: how long it runs and how wrong it is, on average.
struct StrategyProfile {
  int id = 0;
  std::string name;
  std::int64_t mean_service_time_dms = 0;  // d_j, tenths of ms, > 0
  std::int64_t mean_error_dpct = 0;        // e_j, tenths of %, >= 0
};

struct StrategyCatalog {
  std::vector<StrategyProfile> strategies;

  int size() const { return static_cast<int>(strategies.size()); }
  const StrategyProfile& at(int id) const { return strategies.at(static_cast<std::size_t>(id)); }

  std::int64_t min_error_dpct() const {
    std::int64_t m = strategies.front().mean_error_dpct;
    for (const auto& s : strategies) m = std::min(m, s.mean_error_dpct);
    return m;
  }
  std::int64_t max_error_dpct() const {
    std::int64_t m = strategies.front().mean_error_dpct;
    for (const auto& s : strategies) m = std::max(m, s.mean_error_dpct);
    return m;
  }
};

// Per-slot forecast: how many requests arrive and how dirty the grid is.
struct SlotForecast {
  int index = 0;
  std::int64_t requests = 0;                  // r_i, >= 0
  std::int64_t carbon_intensity_g_per_kwh = 0;  // c_i, >= 0
};

struct Horizon {
  int slot_duration_minutes = 30;
  std::vector<SlotForecast> slots;

  int num_slots() const { return static_cast<int>(slots.size()); }
};

// One strategy id per slot; choices[i] = j is the one-hot row x_i with x_ij = 1.
struct Assignment {
  std::vector<int> choices;
};

struct EmissionParams {
  double server_power_watts = 50.0;
};

struct Metrics {
  double emissions_g = 0.0;                // grams CO2-eq over the horizon
  std::int64_t weighted_error_dpct = 0;    // sum_i r_i * e_{j(i)}, exact
  double avg_error_pct = 0.0;              // weighted mean error, percent
};

// grams = (sum_i c_i * r_i * d_dms) * watts / kDmsWattsPerGramKwh:
// dms -> ms is /10, W*ms -> J is /1000, J -> kWh is /3.6e6.
inline constexpr double kDmsWattsPerGramKwh = 3.6e10;

enum class ViolationKind { WrongLength, BadStrategyId };

struct Violation {
  ViolationKind kind;
  int slot;  // -1 for horizon-level violations
  std::string message;
};

inline std::int64_t total_requests(const Horizon& horizon) {
  std::int64_t total = 0;
  for (const auto& slot : horizon.slots) total += slot.requests;
  return total;
}

inline void validate_catalog(const StrategyCatalog& catalog) {
  if (catalog.strategies.empty()) throw ValidationError("catalog must contain at least one strategy");
  for (int j = 0; j < catalog.size(); ++j) {
    const auto& s = catalog.strategies[static_cast<std::size_t>(j)];
    if (s.id != j)
      throw ValidationError("catalog ids must be 0..s-1 in order, got id " + std::to_string(s.id) +
                            " at position " + std::to_string(j));
    if (s.mean_service_time_dms <= 0)
      throw ValidationError("strategy " + std::to_string(j) + " has non-positive service time");
    if (s.mean_error_dpct < 0)
      throw ValidationError("strategy " + std::to_string(j) + " has negative error");
  }
}

// Also rejects horizons whose worst-case emission sum would not fit in a
// signed 64-bit accumulator (sum_i c_i*r_i*d_max must stay below 2^62).
inline void validate_horizon(const Horizon& horizon, const StrategyCatalog& catalog) {
  if (horizon.slots.empty()) throw ValidationError("horizon must contain at least one slot");
  if (horizon.slot_duration_minutes <= 0) throw ValidationError("slot duration must be positive");
  __int128 load_sum = 0;  // sum of c_i * r_i
  for (int i = 0; i < horizon.num_slots(); ++i) {
    const auto& slot = horizon.slots[static_cast<std::size_t>(i)];
    if (slot.index != i)
      throw ValidationError("slot indices must be contiguous from 0, got " +
                            std::to_string(slot.index) + " at position " + std::to_string(i));
    if (slot.requests < 0) throw ValidationError("negative request count at slot " + std::to_string(i));
    if (slot.carbon_intensity_g_per_kwh < 0)
      throw ValidationError("negative carbon intensity at slot " + std::to_string(i));
    load_sum += static_cast<__int128>(slot.requests) * slot.carbon_intensity_g_per_kwh;
  }
  __int128 d_max = 0;
  __int128 e_max = 0;
  __int128 req_sum = 0;
  for (const auto& s : catalog.strategies) {
    d_max = std::max<__int128>(d_max, s.mean_service_time_dms);
    e_max = std::max<__int128>(e_max, s.mean_error_dpct);
  }
  for (const auto& slot : horizon.slots) req_sum += slot.requests;
  constexpr __int128 kLimit = static_cast<__int128>(1) << 62;
  if (load_sum * d_max >= kLimit || req_sum * e_max >= kLimit)
    throw ValidationError("horizon too large: worst-case emission or error sum would overflow 64-bit arithmetic");
}

inline std::vector<Violation> validate_assignment(const Horizon& horizon,
                                                  const StrategyCatalog& catalog,
                                                  const Assignment& assignment) {
  std::vector<Violation> violations;
  const int t = horizon.num_slots();
  const int got = static_cast<int>(assignment.choices.size());
  if (got != t) {
    violations.push_back({ViolationKind::WrongLength, -1,
                          "assignment has " + std::to_string(got) + " entries, horizon has " +
                              std::to_string(t) + " slots"});
  }
  const int s = catalog.size();
  const int checked = std::min(got, t);
  for (int i = 0; i < checked; ++i) {
    const int j = assignment.choices[static_cast<std::size_t>(i)];
    if (j < 0 || j >= s) {
      violations.push_back({ViolationKind::BadStrategyId, i,
                            "strategy id " + std::to_string(j) + " at slot " + std::to_string(i) +
                                " is outside [0, " + std::to_string(s) + ")"});
    }
  }
  return violations;
}

inline void require_valid(const Horizon& horizon, const StrategyCatalog& catalog,
                          const Assignment& assignment) {
  validate_catalog(catalog);
  validate_horizon(horizon, catalog);
  auto violations = validate_assignment(horizon, catalog, assignment);
  if (!violations.empty()) throw ValidationError(violations.front().message);
}

// Exact integer objective of the emission level: sum_i c_i * r_i * d_{j(i)}
// in (g/kWh) * requests * dms. Optimality comparisons happen on this value,
// never on floating-point grams.
inline std::int64_t scaled_emission_dms(const Horizon& horizon, const StrategyCatalog& catalog,
                                        const Assignment& assignment) {
  std::int64_t total = 0;
  for (int i = 0; i < horizon.num_slots(); ++i) {
    const auto& slot = horizon.slots[static_cast<std::size_t>(i)];
    const auto& strat = catalog.at(assignment.choices[static_cast<std::size_t>(i)]);
    total += slot.requests * slot.carbon_intensity_g_per_kwh * strat.mean_service_time_dms;
  }
  return total;
}

inline std::int64_t weighted_error_dpct(const Horizon& horizon, const StrategyCatalog& catalog,
                                        const Assignment& assignment) {
  std::int64_t total = 0;
  for (int i = 0; i < horizon.num_slots(); ++i) {
    const auto& slot = horizon.slots[static_cast<std::size_t>(i)];
    const auto& strat = catalog.at(assignment.choices[static_cast<std::size_t>(i)]);
    total += slot.requests * strat.mean_error_dpct;
  }
  return total;
}

inline double emissions_g_from_scaled(std::int64_t scaled_dms, const EmissionParams& params) {
  return static_cast<double>(scaled_dms) * params.server_power_watts / kDmsWattsPerGramKwh;
}

inline double avg_error_pct_from_weighted(std::int64_t weighted_dpct, std::int64_t total_reqs) {
  if (total_reqs <= 0) return 0.0;
  return static_cast<double>(weighted_dpct) / (10.0 * static_cast<double>(total_reqs));
}

inline Metrics compute_metrics(const Horizon& horizon, const StrategyCatalog& catalog,
                               const Assignment& assignment, const EmissionParams& params) {
  require_valid(horizon, catalog, assignment);
  if (params.server_power_watts <= 0) throw ValidationError("server power must be positive");
  Metrics m;
  const std::int64_t scaled = scaled_emission_dms(horizon, catalog, assignment);
  m.weighted_error_dpct = weighted_error_dpct(horizon, catalog, assignment);
  m.emissions_g = emissions_g_from_scaled(scaled, params);
  m.avg_error_pct = avg_error_pct_from_weighted(m.weighted_error_dpct, total_requests(horizon));
  return m;
}

// Right-hand side of the error constraint: epsilon * sum_i r_i, in
// request-decipercent. The double sum collapses because each slot picks
// exactly one strategy.
inline std::int64_t error_budget_dpct(const Horizon& horizon, std::int64_t epsilon_dpct) {
  if (epsilon_dpct < 0) throw ValidationError("epsilon must be nonnegative");
  return epsilon_dpct * total_requests(horizon);
}

}  // namespace carbonsched
