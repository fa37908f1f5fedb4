#pragma once

#include <cstdint>
#include <vector>

#include "carbonsched/model.hpp"
#include "carbonsched/rng.hpp"

namespace testutil {

// The six-slot running example used across the suites:
// r = [350,500,1000,750,400,100], c = [260,350,220,530,610,1100],
// strategies (ms, %): low 35.3/13.4, medium 66.3/4.5, high 100.2/0.
inline carbonsched::Horizon example_horizon() {
  carbonsched::Horizon horizon;
  const std::int64_t r[] = {350, 500, 1000, 750, 400, 100};
  const std::int64_t c[] = {260, 350, 220, 530, 610, 1100};
  for (int i = 0; i < 6; ++i) horizon.slots.push_back({i, r[i], c[i]});
  return horizon;
}

inline carbonsched::StrategyCatalog example_catalog() {
  carbonsched::StrategyCatalog catalog;
  catalog.strategies = {
      {0, "LOW_POWER", 353, 134},
      {1, "MEDIUM_POWER", 663, 45},
      {2, "HIGH_POWER", 1002, 0},
  };
  return catalog;
}

struct RandomInstance {
  carbonsched::Horizon horizon;
  carbonsched::StrategyCatalog catalog;
  std::int64_t epsilon_dpct = 0;
};

// Small random instances for oracle cross-checks: t <= 8, s <= 4,
// r <= 10^4, c <= 2000, one-decimal d/e, epsilon in [0, 20]%.
inline RandomInstance random_instance(std::uint64_t seed) {
  carbonsched::SplitMix64 rng(seed);
  RandomInstance inst;
  const int t = 1 + static_cast<int>(rng.next_u64() % 8);
  const int s = 1 + static_cast<int>(rng.next_u64() % 4);
  for (int i = 0; i < t; ++i) {
    carbonsched::SlotForecast slot;
    slot.index = i;
    slot.requests = static_cast<std::int64_t>(rng.next_u64() % 10001);
    slot.carbon_intensity_g_per_kwh = static_cast<std::int64_t>(rng.next_u64() % 2001);
    inst.horizon.slots.push_back(slot);
  }
  for (int j = 0; j < s; ++j) {
    carbonsched::StrategyProfile p;
    p.id = j;
    p.name = "S" + std::to_string(j);
    p.mean_service_time_dms = 1 + static_cast<std::int64_t>(rng.next_u64() % 2000);
    p.mean_error_dpct = static_cast<std::int64_t>(rng.next_u64() % 300);
    inst.catalog.strategies.push_back(std::move(p));
  }
  inst.epsilon_dpct = static_cast<std::int64_t>(rng.next_u64() % 201);
  return inst;
}

}  // namespace testutil
