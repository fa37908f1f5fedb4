#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "carbonsched/errors.hpp"
#include "carbonsched/model.hpp"

namespace carbonsched {

// Exact solver for the slot/strategy assignment problem: among assignments
// whose request-weighted error stays within the epsilon budget, find those
// with minimal total emissions, and among those one with minimal weighted
// error. Both levels are handled as one lexicographic comparison on the
// exact integer pair (scaled emission, weighted error); ties are broken by
// the lexicographically smallest choices vector so that any two conforming
// implementations return bit-identical assignments.

enum class SolveStatus { Optimal, Infeasible };

struct SolveResult {
  Assignment assignment;
  Metrics metrics;
  SolveStatus status = SolveStatus::Infeasible;
  std::int64_t scaled_emission_dms = 0;  // exact integer objective, optimal only
};

// The DP state space is indexed by the error budget. Two equivalent
// enumerations of the same recurrence are available: a dense table (best for
// long horizons with modest budgets) and a memoized map over reachable
// states (best for short horizons whose budgets are huge). Auto picks by
// estimated work; results are identical either way.
enum class DpMode { Auto, Dense, Memoized };

struct SolverOptions {
  // Upper bound on DP cells, t * (budget + 1) after gcd scaling. The budget
  // is first clamped losslessly to the spend of the budget-free optimum,
  // beyond which the constraint cannot bind; instances still over the cap
  // are rejected.
  std::int64_t state_cap = 100'000'000;
  // Upper bound on s^t for brute_force_solve.
  std::int64_t enumeration_cap = 10'000'000;
  DpMode dp_mode = DpMode::Auto;
};

namespace detail {

inline constexpr std::int64_t kUnreachable = std::numeric_limits<std::int64_t>::max();

struct DpInstance {
  int t = 0;
  int s = 0;
  std::vector<std::int64_t> err;  // err[i*s + j] = r_i * e_j (request-dpct)
  std::vector<std::int64_t> em;   // em[i*s + j]  = c_i * r_i * d_j (dms scale)
  std::int64_t min_total_err = 0;
  std::int64_t gcd_err = 1;       // gcd of all error increments
  // Budget-free lexicographic optimum (per-slot argmin) and its error spend.
  std::vector<int> free_choice;
  std::int64_t free_err = 0;

  std::int64_t err_at(int i, int j) const { return err[static_cast<std::size_t>(i) * s + j]; }
  std::int64_t em_at(int i, int j) const { return em[static_cast<std::size_t>(i) * s + j]; }
};

inline DpInstance build_instance(const Horizon& horizon, const StrategyCatalog& catalog) {
  DpInstance inst;
  inst.t = horizon.num_slots();
  inst.s = catalog.size();
  inst.err.resize(static_cast<std::size_t>(inst.t) * inst.s);
  inst.em.resize(static_cast<std::size_t>(inst.t) * inst.s);
  std::int64_t g = 0;
  for (int i = 0; i < inst.t; ++i) {
    const auto& slot = horizon.slots[static_cast<std::size_t>(i)];
    std::int64_t best_em = kUnreachable, best_er = kUnreachable, min_err = kUnreachable;
    int best_j = 0;
    for (int j = 0; j < inst.s; ++j) {
      const auto& strat = catalog.at(j);
      const std::size_t k = static_cast<std::size_t>(i) * inst.s + j;
      inst.err[k] = slot.requests * strat.mean_error_dpct;
      inst.em[k] = slot.requests * slot.carbon_intensity_g_per_kwh * strat.mean_service_time_dms;
      g = std::gcd(g, inst.err[k]);
      min_err = std::min(min_err, inst.err[k]);
      if (inst.em[k] < best_em || (inst.em[k] == best_em && inst.err[k] < best_er)) {
        best_em = inst.em[k];
        best_er = inst.err[k];
        best_j = j;
      }
    }
    inst.min_total_err += min_err;
    inst.free_choice.push_back(best_j);
    inst.free_err += best_er;
  }
  inst.gcd_err = g == 0 ? 1 : g;
  return inst;
}

inline SolveResult finish(const Horizon& horizon, const StrategyCatalog& catalog,
                          const EmissionParams& params, Assignment assignment) {
  SolveResult result;
  result.status = SolveStatus::Optimal;
  result.scaled_emission_dms = scaled_emission_dms(horizon, catalog, assignment);
  result.metrics = compute_metrics(horizon, catalog, assignment, params);
  result.assignment = std::move(assignment);
  return result;
}

// Dense bottom-up enumeration: backward over slots, one choice row per slot.
inline std::vector<Assignment> solve_dense(const DpInstance& inst,
                                           std::span<const std::int64_t> budgets,
                                           std::int64_t budget_max) {
  const int t = inst.t;
  const int s = inst.s;
  const std::int64_t g = inst.gcd_err;
  const std::int64_t width = budget_max / g + 1;

  std::vector<std::int64_t> em_next(static_cast<std::size_t>(width), 0);
  std::vector<std::int64_t> er_next(static_cast<std::size_t>(width), 0);
  std::vector<std::int64_t> em_cur(static_cast<std::size_t>(width));
  std::vector<std::int64_t> er_cur(static_cast<std::size_t>(width));
  std::vector<std::uint8_t> choice(static_cast<std::size_t>(t) * width);

  std::vector<std::int64_t> slot_serr(static_cast<std::size_t>(s));
  std::vector<std::int64_t> slot_err(static_cast<std::size_t>(s));
  std::vector<std::int64_t> slot_em(static_cast<std::size_t>(s));

  for (int i = t - 1; i >= 0; --i) {
    for (int j = 0; j < s; ++j) {
      slot_err[static_cast<std::size_t>(j)] = inst.err_at(i, j);
      slot_serr[static_cast<std::size_t>(j)] = inst.err_at(i, j) / g;
      slot_em[static_cast<std::size_t>(j)] = inst.em_at(i, j);
    }
    std::uint8_t* choice_row = choice.data() + static_cast<std::size_t>(i) * width;
    for (std::int64_t b = 0; b < width; ++b) {
      std::int64_t best_em = kUnreachable;
      std::int64_t best_er = kUnreachable;
      std::uint8_t best_j = 0;
      for (int j = 0; j < s; ++j) {
        const std::int64_t serr = slot_serr[static_cast<std::size_t>(j)];
        if (serr > b) continue;
        const std::int64_t tail_em = em_next[static_cast<std::size_t>(b - serr)];
        if (tail_em == kUnreachable) continue;
        const std::int64_t cand_em = slot_em[static_cast<std::size_t>(j)] + tail_em;
        const std::int64_t cand_er =
            slot_err[static_cast<std::size_t>(j)] + er_next[static_cast<std::size_t>(b - serr)];
        if (cand_em < best_em || (cand_em == best_em && cand_er < best_er)) {
          best_em = cand_em;
          best_er = cand_er;
          best_j = static_cast<std::uint8_t>(j);
        }
      }
      em_cur[static_cast<std::size_t>(b)] = best_em;
      er_cur[static_cast<std::size_t>(b)] = best_er;
      choice_row[b] = best_j;
    }
    std::swap(em_cur, em_next);
    std::swap(er_cur, er_next);
  }

  std::vector<Assignment> out;
  for (const std::int64_t budget : budgets) {
    Assignment assignment;
    if (em_next[static_cast<std::size_t>(budget / g)] != kUnreachable) {
      assignment.choices.resize(static_cast<std::size_t>(t));
      std::int64_t b = budget / g;
      for (int i = 0; i < t; ++i) {
        const std::uint8_t j = choice[static_cast<std::size_t>(i) * width + b];
        assignment.choices[static_cast<std::size_t>(i)] = j;
        b -= inst.err_at(i, j) / g;
      }
    }
    out.push_back(std::move(assignment));
  }
  return out;
}

// Memoized top-down enumeration of the same recurrence, keyed by remaining
// budget; only reachable states are materialized.
class MemoSolver {
public:
  MemoSolver(const DpInstance& inst, std::int64_t state_cap)
      : inst_(inst), state_cap_(state_cap), memo_(static_cast<std::size_t>(inst.t)) {}

  Assignment reconstruct(std::int64_t budget) {
    Assignment assignment;
    if (best_suffix(0, budget).em == kUnreachable) return assignment;
    std::int64_t b = budget;
    for (int i = 0; i < inst_.t; ++i) {
      const int j = best_suffix(i, b).j;
      assignment.choices.push_back(j);
      b -= inst_.err_at(i, j);
    }
    return assignment;
  }

private:
  struct Entry {
    std::int64_t em = kUnreachable;
    std::int64_t er = kUnreachable;
    int j = 0;
  };

  Entry best_suffix(int i, std::int64_t budget) {
    if (i == inst_.t) return Entry{0, 0, 0};
    // States differing only below the increment gcd are identical.
    const std::int64_t key = budget / inst_.gcd_err;
    auto& level = memo_[static_cast<std::size_t>(i)];
    if (auto it = level.find(key); it != level.end()) return it->second;
    Entry best;
    for (int j = 0; j < inst_.s; ++j) {
      const std::int64_t err = inst_.err_at(i, j);
      if (err > budget) continue;
      const Entry tail = best_suffix(i + 1, budget - err);
      if (tail.em == kUnreachable) continue;
      const std::int64_t cand_em = inst_.em_at(i, j) + tail.em;
      const std::int64_t cand_er = err + tail.er;
      if (cand_em < best.em || (cand_em == best.em && cand_er < best.er)) {
        best.em = cand_em;
        best.er = cand_er;
        best.j = j;
      }
    }
    if (++states_ > state_cap_)
      throw InstanceTooLargeError("DP state count exceeds cap " + std::to_string(state_cap_));
    level.emplace(key, best);
    return best;
  }

  const DpInstance& inst_;
  std::int64_t state_cap_;
  std::int64_t states_ = 0;
  std::vector<std::unordered_map<std::int64_t, Entry>> memo_;
};

}  // namespace detail

// Solves one instance for several epsilon budgets at once. The DP state
// space is indexed by error budget, so a single sweep at the largest budget
// answers every smaller one; run_experiment relies on this to price all
// epsilons in one pass per (day, profile).
inline std::vector<SolveResult> solve_multi(const Horizon& horizon, const StrategyCatalog& catalog,
                                            std::span<const std::int64_t> epsilons_dpct,
                                            const EmissionParams& params,
                                            const SolverOptions& options = {}) {
  validate_catalog(catalog);
  validate_horizon(horizon, catalog);
  if (params.server_power_watts <= 0) throw ValidationError("server power must be positive");
  if (catalog.size() > 255) throw InstanceTooLargeError("more than 255 strategies");
  for (auto eps : epsilons_dpct) {
    if (eps < 0) throw ValidationError("epsilon must be nonnegative");
  }

  const auto inst = detail::build_instance(horizon, catalog);
  std::vector<SolveResult> results(epsilons_dpct.size());

  // Budgets at or above the budget-free optimum's spend take that optimum
  // directly: it is feasible there, and every assignment matching its
  // objective pair spends the same error, so the tie-break set is unchanged.
  // Budgets below the cheapest possible spend are infeasible. Only the rest
  // need the DP, and the largest such budget bounds its state space.
  std::vector<std::int64_t> dp_budgets;
  std::vector<std::size_t> dp_slots;
  std::int64_t budget_max = 0;
  for (std::size_t k = 0; k < epsilons_dpct.size(); ++k) {
    const std::int64_t budget = error_budget_dpct(horizon, epsilons_dpct[k]);
    if (budget >= inst.free_err) {
      results[k] = detail::finish(horizon, catalog, params, Assignment{inst.free_choice});
    } else if (budget < inst.min_total_err) {
      results[k] = SolveResult{};  // infeasible
    } else {
      dp_budgets.push_back(budget);
      dp_slots.push_back(k);
      budget_max = std::max(budget_max, budget);
    }
  }
  if (dp_budgets.empty()) return results;

  const std::int64_t width = budget_max / inst.gcd_err + 1;
  const __int128 dense_cells = static_cast<__int128>(inst.t) * width;

  DpMode mode = options.dp_mode;
  if (mode == DpMode::Auto) {
    // Reachable-state bound for the memoized path: at most s^i states at
    // slot i, and never more than the dense row width.
    __int128 memo_states = 0;
    __int128 level = 1;
    for (int i = 0; i < inst.t; ++i) {
      level = std::min<__int128>(level * inst.s, width);
      memo_states += level;
    }
    // Hash lookups cost roughly an order of magnitude more than dense cells.
    mode = (memo_states * 16 < dense_cells) ? DpMode::Memoized : DpMode::Dense;
  }

  std::vector<Assignment> assignments;
  if (mode == DpMode::Dense) {
    if (dense_cells > options.state_cap)
      throw InstanceTooLargeError("DP state count " + std::to_string(inst.t) + " x " +
                                  std::to_string(width) + " exceeds cap " +
                                  std::to_string(options.state_cap));
    assignments = detail::solve_dense(inst, dp_budgets, budget_max);
  } else {
    detail::MemoSolver solver(inst, options.state_cap);
    for (const std::int64_t budget : dp_budgets) assignments.push_back(solver.reconstruct(budget));
  }

  for (std::size_t n = 0; n < dp_slots.size(); ++n) {
    if (assignments[n].choices.empty()) results[dp_slots[n]] = SolveResult{};
    else results[dp_slots[n]] = detail::finish(horizon, catalog, params, std::move(assignments[n]));
  }
  return results;
}

inline SolveResult solve(const Horizon& horizon, const StrategyCatalog& catalog,
                         std::int64_t epsilon_dpct, const EmissionParams& params,
                         const SolverOptions& options = {}) {
  const std::int64_t eps[1] = {epsilon_dpct};
  return solve_multi(horizon, catalog, eps, params, options)[0];
}

// Exhaustive oracle: walks all s^t assignments in lexicographic choices
// order and keeps the first one that strictly improves the exact
// (scaled emission, weighted error) pair. Deliberately shares no code with
// the DP above beyond the domain types.
inline SolveResult brute_force_solve(const Horizon& horizon, const StrategyCatalog& catalog,
                                     std::int64_t epsilon_dpct, const EmissionParams& params,
                                     const SolverOptions& options = {}) {
  validate_catalog(catalog);
  validate_horizon(horizon, catalog);
  if (epsilon_dpct < 0) throw ValidationError("epsilon must be nonnegative");

  const int t = horizon.num_slots();
  const int s = catalog.size();
  std::int64_t count = 1;
  for (int i = 0; i < t && count <= options.enumeration_cap; ++i) {
    if (count > options.enumeration_cap / s) count = options.enumeration_cap + 1;
    else count *= s;
  }
  if (count > options.enumeration_cap)
    throw InstanceTooLargeError("s^t exceeds enumeration cap " +
                                std::to_string(options.enumeration_cap));

  const std::int64_t budget = error_budget_dpct(horizon, epsilon_dpct);
  std::vector<int> current(static_cast<std::size_t>(t), 0);
  std::vector<int> best;
  std::int64_t best_em = 0;
  std::int64_t best_er = 0;
  bool found = false;

  while (true) {
    std::int64_t em = 0;
    std::int64_t er = 0;
    for (int i = 0; i < t; ++i) {
      const auto& slot = horizon.slots[static_cast<std::size_t>(i)];
      const auto& strat = catalog.at(current[static_cast<std::size_t>(i)]);
      em += slot.requests * slot.carbon_intensity_g_per_kwh * strat.mean_service_time_dms;
      er += slot.requests * strat.mean_error_dpct;
    }
    if (er <= budget && (!found || em < best_em || (em == best_em && er < best_er))) {
      best = current;
      best_em = em;
      best_er = er;
      found = true;
    }
    int pos = t - 1;
    while (pos >= 0 && current[static_cast<std::size_t>(pos)] == s - 1) {
      current[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++current[static_cast<std::size_t>(pos)];
  }

  if (!found) return SolveResult{};
  return detail::finish(horizon, catalog, params, Assignment{std::move(best)});
}

}  // namespace carbonsched
