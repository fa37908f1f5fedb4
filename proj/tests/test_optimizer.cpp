#include <catch2/catch_amalgamated.hpp>

#include "carbonsched/optimizer.hpp"
#include "carbonsched/rng.hpp"
#include "helpers.hpp"

using namespace carbonsched;
using testutil::example_catalog;
using testutil::example_horizon;
using testutil::random_instance;

TEST_CASE("solve reproduces the running example for all three epsilons") {
  const auto horizon = example_horizon();
  const auto catalog = example_catalog();
  const EmissionParams params;

  SECTION("epsilon = 0 selects the zero-error strategy everywhere") {
    const auto result = solve(horizon, catalog, 0, params);
    REQUIRE(result.status == SolveStatus::Optimal);
    REQUIRE(result.assignment.choices == std::vector<int>{2, 2, 2, 2, 2, 2});
    REQUIRE(result.metrics.avg_error_pct == 0.0);
    REQUIRE(result.metrics.emissions_g == Catch::Approx(1.7221875).margin(1e-9));
  }

  SECTION("epsilon = 15% selects the low-power strategy everywhere") {
    const auto result = solve(horizon, catalog, 150, params);
    REQUIRE(result.status == SolveStatus::Optimal);
    REQUIRE(result.assignment.choices == std::vector<int>{0, 0, 0, 0, 0, 0});
    REQUIRE(result.metrics.emissions_g == Catch::Approx(0.60671875).margin(1e-9));
  }

  SECTION("epsilon = 5% mixes strategies as high,medium,high,low,medium,low") {
    const auto result = solve(horizon, catalog, 50, params);
    REQUIRE(result.status == SolveStatus::Optimal);
    REQUIRE(result.assignment.choices == std::vector<int>{2, 1, 2, 0, 1, 0});
    REQUIRE(result.metrics.emissions_g == Catch::Approx(1.067453).margin(1e-4));
    REQUIRE(result.metrics.avg_error_pct == Catch::Approx(4.980645).margin(1e-5));
  }
}

TEST_CASE("brute force matches the running example") {
  const auto horizon = example_horizon();
  const auto catalog = example_catalog();
  const auto result = brute_force_solve(horizon, catalog, 50, EmissionParams{});
  REQUIRE(result.status == SolveStatus::Optimal);
  REQUIRE(result.assignment.choices == std::vector<int>{2, 1, 2, 0, 1, 0});
}

TEST_CASE("single slot picks the cheapest strategy within budget") {
  Horizon horizon;
  horizon.slots.push_back({0, 100, 500});
  const auto catalog = example_catalog();
  // epsilon = 5%: low (13.4%) is out, medium (4.5%) is the cheapest feasible.
  const auto result = brute_force_solve(horizon, catalog, 50, EmissionParams{});
  REQUIRE(result.assignment.choices == std::vector<int>{1});
  const auto dp = solve(horizon, catalog, 50, EmissionParams{});
  REQUIRE(dp.assignment.choices == result.assignment.choices);
}

TEST_CASE("solve and brute force agree on 500 random instances") {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto inst = random_instance(seed);
    const EmissionParams params;
    const auto fast = solve(inst.horizon, inst.catalog, inst.epsilon_dpct, params);
    const auto slow = brute_force_solve(inst.horizon, inst.catalog, inst.epsilon_dpct, params);

    INFO("seed " << seed);
    REQUIRE(fast.status == slow.status);
    if (fast.status != SolveStatus::Optimal) continue;
    // Identical objective pair and identical tie-broken choices vector.
    REQUIRE(fast.scaled_emission_dms == slow.scaled_emission_dms);
    REQUIRE(fast.metrics.weighted_error_dpct == slow.metrics.weighted_error_dpct);
    REQUIRE(fast.assignment.choices == slow.assignment.choices);
  }
}

TEST_CASE("dense and memoized DP paths both match the oracle") {
  // Smaller requests keep the dense table quick; both modes must agree with
  // the enumeration on status, objective pair, and tie-broken choices.
  for (std::uint64_t seed = 500; seed < 650; ++seed) {
    auto inst = random_instance(seed);
    for (auto& slot : inst.horizon.slots) slot.requests %= 400;
    const EmissionParams params;
    const auto slow = brute_force_solve(inst.horizon, inst.catalog, inst.epsilon_dpct, params);

    for (DpMode mode : {DpMode::Dense, DpMode::Memoized}) {
      SolverOptions options;
      options.dp_mode = mode;
      const auto fast = solve(inst.horizon, inst.catalog, inst.epsilon_dpct, params, options);
      INFO("seed " << seed << " mode " << (mode == DpMode::Dense ? "dense" : "memoized"));
      REQUIRE(fast.status == slow.status);
      if (fast.status != SolveStatus::Optimal) continue;
      REQUIRE(fast.scaled_emission_dms == slow.scaled_emission_dms);
      REQUIRE(fast.metrics.weighted_error_dpct == slow.metrics.weighted_error_dpct);
      REQUIRE(fast.assignment.choices == slow.assignment.choices);
    }
  }
}

TEST_CASE("dense and memoized DP paths agree on a day-length horizon") {
  SplitMix64 rng(42);
  Horizon horizon;
  for (int i = 0; i < 48; ++i)
    horizon.slots.push_back({i, 200 + static_cast<std::int64_t>(rng.next_u64() % 800),
                             30 + static_cast<std::int64_t>(rng.next_u64() % 300)});
  const auto catalog = example_catalog();
  for (std::int64_t eps : {10, 20, 40, 80}) {
    SolverOptions dense;
    dense.dp_mode = DpMode::Dense;
    SolverOptions memo;
    memo.dp_mode = DpMode::Memoized;
    const auto a = solve(horizon, catalog, eps, EmissionParams{}, dense);
    const auto b = solve(horizon, catalog, eps, EmissionParams{}, memo);
    REQUIRE(a.status == SolveStatus::Optimal);
    REQUIRE(a.assignment.choices == b.assignment.choices);
    REQUIRE(a.scaled_emission_dms == b.scaled_emission_dms);
  }
}

TEST_CASE("feasibility invariant: optimal results respect the budget exactly") {
  for (std::uint64_t seed = 1000; seed < 1200; ++seed) {
    const auto inst = random_instance(seed);
    const auto result = solve(inst.horizon, inst.catalog, inst.epsilon_dpct, EmissionParams{});
    const std::int64_t budget = error_budget_dpct(inst.horizon, inst.epsilon_dpct);
    const std::int64_t min_total = inst.catalog.min_error_dpct() * total_requests(inst.horizon);
    INFO("seed " << seed);
    if (result.status == SolveStatus::Optimal) {
      REQUIRE(result.metrics.weighted_error_dpct <= budget);
      REQUIRE(min_total <= budget);
    } else {
      REQUIRE(min_total > budget);
    }
  }
}

TEST_CASE("optimal emission is nonincreasing in epsilon") {
  for (std::uint64_t seed = 2000; seed < 2030; ++seed) {
    auto inst = random_instance(seed);
    std::int64_t previous = -1;
    for (std::int64_t eps = 0; eps <= 150; eps += 10) {
      const auto result = solve(inst.horizon, inst.catalog, eps, EmissionParams{});
      if (result.status != SolveStatus::Optimal) continue;
      REQUIRE(result.metrics.weighted_error_dpct <= error_budget_dpct(inst.horizon, eps));
      if (previous >= 0) REQUIRE(result.scaled_emission_dms <= previous);
      previous = result.scaled_emission_dms;
    }
  }
}

TEST_CASE("zero budget with a zero-error strategy collapses per slot") {
  for (std::uint64_t seed = 3000; seed < 3050; ++seed) {
    auto inst = random_instance(seed);
    inst.catalog.strategies.front().mean_error_dpct = 0;  // guarantee feasibility
    for (auto& slot : inst.horizon.slots) slot.requests = 1 + slot.requests;  // r_i > 0
    const auto result = solve(inst.horizon, inst.catalog, 0, EmissionParams{});
    REQUIRE(result.status == SolveStatus::Optimal);
    for (int i = 0; i < inst.horizon.num_slots(); ++i) {
      const int j = result.assignment.choices[static_cast<std::size_t>(i)];
      REQUIRE(inst.catalog.at(j).mean_error_dpct == 0);
      // Among zero-error strategies, the per-slot emission-minimal one.
      const auto& slot = inst.horizon.slots[static_cast<std::size_t>(i)];
      for (const auto& other : inst.catalog.strategies) {
        if (other.mean_error_dpct != 0) continue;
        REQUIRE(slot.requests * slot.carbon_intensity_g_per_kwh *
                    inst.catalog.at(j).mean_service_time_dms <=
                slot.requests * slot.carbon_intensity_g_per_kwh * other.mean_service_time_dms);
      }
    }
  }
}

TEST_CASE("infeasible epsilon is a status, not an exception") {
  const auto horizon = example_horizon();
  StrategyCatalog catalog;
  catalog.strategies = {{0, "A", 100, 50}, {1, "B", 200, 45}};  // min error 4.5%
  const auto result = solve(horizon, catalog, 10, EmissionParams{});  // epsilon = 1%
  REQUIRE(result.status == SolveStatus::Infeasible);
  REQUIRE(result.assignment.choices.empty());
}

TEST_CASE("determinism: identical inputs give identical results") {
  const auto inst = random_instance(77);
  const auto a = solve(inst.horizon, inst.catalog, inst.epsilon_dpct, EmissionParams{});
  const auto b = solve(inst.horizon, inst.catalog, inst.epsilon_dpct, EmissionParams{});
  REQUIRE(a.assignment.choices == b.assignment.choices);
  REQUIRE(a.scaled_emission_dms == b.scaled_emission_dms);
  REQUIRE(a.metrics.emissions_g == b.metrics.emissions_g);
}

TEST_CASE("solve_multi answers every epsilon from one sweep") {
  const auto horizon = example_horizon();
  const auto catalog = example_catalog();
  const std::int64_t epsilons[] = {0, 50, 150};
  const auto results = solve_multi(horizon, catalog, epsilons, EmissionParams{});
  REQUIRE(results.size() == 3);
  REQUIRE(results[0].assignment.choices == std::vector<int>{2, 2, 2, 2, 2, 2});
  REQUIRE(results[1].assignment.choices == std::vector<int>{2, 1, 2, 0, 1, 0});
  REQUIRE(results[2].assignment.choices == std::vector<int>{0, 0, 0, 0, 0, 0});
}

TEST_CASE("caps guard oversized instances") {
  SolverOptions tiny;
  tiny.enumeration_cap = 10;
  const auto horizon = example_horizon();
  const auto catalog = example_catalog();  // 3^6 = 729 > 10
  REQUIRE_THROWS_AS(brute_force_solve(horizon, catalog, 50, EmissionParams{}, tiny),
                    InstanceTooLargeError);

  SolverOptions small_dp;
  small_dp.state_cap = 4;
  REQUIRE_THROWS_AS(solve(horizon, catalog, 50, EmissionParams{}, small_dp),
                    InstanceTooLargeError);
}

TEST_CASE("budget beyond the vacuity bound is clamped losslessly") {
  const auto horizon = example_horizon();
  const auto catalog = example_catalog();
  // 1000% tolerated error: constraint vacuous, same answer as epsilon = 15%.
  const auto big = solve(horizon, catalog, 10000, EmissionParams{});
  const auto at15 = solve(horizon, catalog, 150, EmissionParams{});
  REQUIRE(big.assignment.choices == at15.assignment.choices);
}
