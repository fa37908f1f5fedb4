#pragma once

#include <cstdint>
#include <vector>

#include "carbonsched/errors.hpp"
#include "carbonsched/model.hpp"

namespace carbonsched {

// Baseline assignment policies the optimizer is compared against.

struct NaiveThresholds {
  // Carbon-intensity bands, g/kWh. "low" means c_i <= low_max (inclusive).
  std::int64_t low_max_g_per_kwh = 150;
  std::int64_t moderate_max_g_per_kwh = 250;
  // Reference for the 1/3 and 2/3 request cutoffs; 0 means "use the horizon
  // maximum", which is the default the CLI and experiment runner apply.
  std::int64_t max_expected_requests = 0;
};

inline Assignment always_policy(const Horizon& horizon, const StrategyCatalog& catalog,
                                int strategy_id) {
  validate_catalog(catalog);
  if (strategy_id < 0 || strategy_id >= catalog.size())
    throw ValidationError("strategy id " + std::to_string(strategy_id) + " is outside [0, " +
                          std::to_string(catalog.size()) + ")");
  return Assignment{std::vector<int>(static_cast<std::size_t>(horizon.num_slots()), strategy_id)};
}

// Threshold policy: high power when the grid is clean and the slot is quiet,
// medium when both are moderate, low otherwise. Strategy roles follow
// ascending mean service time (low, medium, high); the catalog must hold
// exactly three strategies.
//
// Request cutoffs are strict ("below 1/3") and evaluated exactly as
// 3*r_i < max_expected and 3*r_i < 2*max_expected; intensity bands are
// inclusive upper bounds.
inline Assignment naive_policy(const Horizon& horizon, const StrategyCatalog& catalog,
                               const NaiveThresholds& thresholds) {
  validate_catalog(catalog);
  if (catalog.size() != 3)
    throw ValidationError("naive policy needs exactly 3 strategies, catalog has " +
                          std::to_string(catalog.size()));
  if (thresholds.low_max_g_per_kwh > thresholds.moderate_max_g_per_kwh)
    throw ValidationError("naive thresholds: low_max must not exceed moderate_max");

  std::int64_t max_expected = thresholds.max_expected_requests;
  if (max_expected == 0) {
    for (const auto& slot : horizon.slots) max_expected = std::max(max_expected, slot.requests);
  }
  if (max_expected <= 0) throw ValidationError("naive policy: max expected requests must be positive");

  // Role ids by ascending service time; ties keep catalog order.
  int low_id = 0, medium_id = 1, high_id = 2;
  std::vector<int> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return catalog.at(a).mean_service_time_dms < catalog.at(b).mean_service_time_dms;
  });
  low_id = order[0];
  medium_id = order[1];
  high_id = order[2];

  Assignment assignment;
  assignment.choices.reserve(static_cast<std::size_t>(horizon.num_slots()));
  for (const auto& slot : horizon.slots) {
    const std::int64_t c = slot.carbon_intensity_g_per_kwh;
    const std::int64_t r3 = 3 * slot.requests;
    int pick = low_id;
    if (c <= thresholds.low_max_g_per_kwh && r3 < max_expected) pick = high_id;
    else if (c <= thresholds.moderate_max_g_per_kwh && r3 < 2 * max_expected) pick = medium_id;
    assignment.choices.push_back(pick);
  }
  return assignment;
}

}  // namespace carbonsched
