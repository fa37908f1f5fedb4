#include <catch2/catch_amalgamated.hpp>

#include "carbonsched/model.hpp"
#include "carbonsched/rng.hpp"
#include "helpers.hpp"

using namespace carbonsched;
using testutil::example_catalog;
using testutil::example_horizon;

TEST_CASE("compute_metrics reproduces the running example") {
  const auto horizon = example_horizon();
  const auto catalog = example_catalog();
  const EmissionParams params;

  SECTION("all-high emits 1.7222 g with zero error") {
    const Assignment all_high{{2, 2, 2, 2, 2, 2}};
    const auto m = compute_metrics(horizon, catalog, all_high, params);
    REQUIRE(m.emissions_g == Catch::Approx(1.7221875).margin(1e-9));
    REQUIRE(m.weighted_error_dpct == 0);
    REQUIRE(m.avg_error_pct == 0.0);
  }

  SECTION("all-low emits 0.6067 g at 13.4% error") {
    const Assignment all_low{{0, 0, 0, 0, 0, 0}};
    const auto m = compute_metrics(horizon, catalog, all_low, params);
    REQUIRE(m.emissions_g == Catch::Approx(0.60671875).margin(1e-9));
    REQUIRE(m.avg_error_pct == Catch::Approx(13.4).margin(1e-9));
  }

  SECTION("the epsilon=5% assignment emits 1.0675 g at 4.98% error") {
    const Assignment mixed{{2, 1, 2, 0, 1, 0}};
    const auto m = compute_metrics(horizon, catalog, mixed, params);
    REQUIRE(m.emissions_g == Catch::Approx(1.067453472).margin(1e-6));
    REQUIRE(m.weighted_error_dpct == 154400);
    REQUIRE(m.avg_error_pct == Catch::Approx(4.980645).margin(1e-5));
  }
}

TEST_CASE("zero-demand horizon produces zero metrics") {
  Horizon horizon;
  horizon.slots.push_back({0, 0, 900});
  const auto catalog = example_catalog();
  const auto m = compute_metrics(horizon, catalog, Assignment{{0}}, EmissionParams{});
  REQUIRE(m.emissions_g == 0.0);
  REQUIRE(m.avg_error_pct == 0.0);
}

TEST_CASE("error budget follows epsilon times total requests") {
  const auto horizon = example_horizon();  // sum r = 3100
  REQUIRE(error_budget_dpct(horizon, 50) == 155000);
  REQUIRE(error_budget_dpct(horizon, 0) == 0);
  REQUIRE(error_budget_dpct(horizon, 150) == 465000);
  REQUIRE_THROWS_AS(error_budget_dpct(horizon, -1), ValidationError);
}

TEST_CASE("validate_assignment reports structured violations") {
  const auto horizon = example_horizon();
  const auto catalog = example_catalog();

  REQUIRE(validate_assignment(horizon, catalog, Assignment{{2, 2, 2, 2, 2, 2}}).empty());

  const auto short_result = validate_assignment(horizon, catalog, Assignment{{0, 0, 0, 0, 0}});
  REQUIRE(short_result.size() == 1);
  REQUIRE(short_result[0].kind == ViolationKind::WrongLength);

  Horizon two_slots;
  two_slots.slots.push_back({0, 10, 10});
  two_slots.slots.push_back({1, 10, 10});
  const auto bad_id = validate_assignment(two_slots, catalog, Assignment{{0, 3}});
  REQUIRE(bad_id.size() == 1);
  REQUIRE(bad_id[0].kind == ViolationKind::BadStrategyId);
  REQUIRE(bad_id[0].slot == 1);
}

TEST_CASE("compute_metrics rejects invalid input") {
  const auto horizon = example_horizon();
  const auto catalog = example_catalog();
  REQUIRE_THROWS_AS(compute_metrics(horizon, catalog, Assignment{{0, 1}}, EmissionParams{}),
                    ValidationError);
  REQUIRE_THROWS_AS(compute_metrics(horizon, catalog, Assignment{{9, 0, 0, 0, 0, 0}},
                                    EmissionParams{}),
                    ValidationError);

  Horizon overflow;
  overflow.slots.push_back({0, 1'000'000'000, 2'000'000'000});
  REQUIRE_THROWS_AS(compute_metrics(overflow, catalog, Assignment{{0}}, EmissionParams{}),
                    ValidationError);
}

TEST_CASE("metrics properties on random assignments") {
  SplitMix64 rng(0xC0FFEE);
  const auto catalog = example_catalog();

  for (int trial = 0; trial < 50; ++trial) {
    Horizon horizon;
    const int t = 1 + static_cast<int>(rng.next_u64() % 12);
    for (int i = 0; i < t; ++i)
      horizon.slots.push_back({i, static_cast<std::int64_t>(rng.next_u64() % 2000),
                               static_cast<std::int64_t>(rng.next_u64() % 1200)});
    Assignment assignment;
    for (int i = 0; i < t; ++i)
      assignment.choices.push_back(static_cast<int>(rng.next_u64() % 3));

    EmissionParams params;
    const auto m1 = compute_metrics(horizon, catalog, assignment, params);
    const auto m2 = compute_metrics(horizon, catalog, assignment, params);
    REQUIRE(m1.emissions_g == m2.emissions_g);
    REQUIRE(m1.weighted_error_dpct == m2.weighted_error_dpct);

    // Emissions scale linearly with power.
    EmissionParams doubled{2 * params.server_power_watts};
    const auto md = compute_metrics(horizon, catalog, assignment, doubled);
    REQUIRE(md.emissions_g == Catch::Approx(2 * m1.emissions_g).margin(1e-15));

    // Weighted error is invariant under permuting slots with their choices.
    Horizon reversed_h;
    Assignment reversed_a;
    for (int i = t - 1; i >= 0; --i) {
      SlotForecast slot = horizon.slots[static_cast<std::size_t>(i)];
      slot.index = static_cast<int>(reversed_h.slots.size());
      reversed_h.slots.push_back(slot);
      reversed_a.choices.push_back(assignment.choices[static_cast<std::size_t>(i)]);
    }
    const auto mr = compute_metrics(reversed_h, catalog, reversed_a, params);
    REQUIRE(mr.weighted_error_dpct == m1.weighted_error_dpct);
  }
}

TEST_CASE("constant assignments realize exactly the strategy error") {
  const auto horizon = example_horizon();
  const auto catalog = example_catalog();
  for (int j = 0; j < catalog.size(); ++j) {
    Assignment all_j{std::vector<int>(6, j)};
    const auto m = compute_metrics(horizon, catalog, all_j, EmissionParams{});
    const double expected = static_cast<double>(catalog.at(j).mean_error_dpct) / 10.0;
    REQUIRE(m.avg_error_pct == Catch::Approx(expected).margin(1e-12));
  }
}

TEST_CASE("catalog and horizon invariants are enforced") {
  StrategyCatalog empty;
  REQUIRE_THROWS_AS(validate_catalog(empty), ValidationError);

  StrategyCatalog bad_ids;
  bad_ids.strategies = {{1, "A", 10, 0}};
  REQUIRE_THROWS_AS(validate_catalog(bad_ids), ValidationError);

  StrategyCatalog zero_time;
  zero_time.strategies = {{0, "A", 0, 0}};
  REQUIRE_THROWS_AS(validate_catalog(zero_time), ValidationError);

  Horizon gap;
  gap.slots.push_back({0, 1, 1});
  gap.slots.push_back({2, 1, 1});
  REQUIRE_THROWS_AS(validate_horizon(gap, example_catalog()), ValidationError);

  Horizon empty_h;
  REQUIRE_THROWS_AS(validate_horizon(empty_h, example_catalog()), ValidationError);
}
