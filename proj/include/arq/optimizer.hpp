// Constrained nonconvex search over per-round powers and rates.
//
// Both the objective and the average-power constraint depend on the stop
// distribution, in which the candidate powers appear, so feasibility is
// re-derived per candidate from a fresh stop_distribution evaluation.
// The search is a coarse exhaustive grid followed by derivative-free
// simplex polish from the best cells. Uniform-power candidates at the
// budget (and, for variable-length INR, fixed-length ladders) are always
// injected into the final pool, so the optimizer never returns less than
// the uniform baseline. Hard rejection handles the constraint: uniform
// power at the budget is always feasible, so the feasible set is never
// empty. Ties break toward the lexicographically smallest power vector.

#pragma once

#include <optional>
#include <vector>

#include "arq/analytic.hpp"
#include "arq/model.hpp"

namespace arq {

enum class Objective { MaxLongTerm, MaxDelayLimited, MinOutage };

struct SearchBounds {
    double power_lo_scale = 1.0 / 16.0;  // grid spans [P*lo_scale, P*hi_scale], log-spaced
    double power_hi_scale = 8.0;
    double rate_lo = 0.05;  // npcu, linear spacing
    double rate_hi = 4.0;
};

struct OptProblem {
    Objective objective = Objective::MaxLongTerm;
    ArqConfig config;
    double power_budget = 1.0;        // average power P, linear
    std::optional<double> fixed_rate; // required for MinOutage
    SearchBounds bounds;
    int grid_points = 16;  // per dimension
    bool refine = true;    // simplex polish of the best grid cells
    bool uniform_power = false;  // restrict search to P_m all equal
    int threads = 0;

    // Evaluation settings: `eval` scores the final candidate pool and the
    // reported result, `search_eval` scores grid/polish candidates. When
    // unset they are chosen from the scenario (cheap nested quadrature for
    // short-Lc searches).
    std::optional<AnalyticSettings> eval;
    std::optional<AnalyticSettings> search_eval;
};

struct OptResult {
    PowerPolicy powers;
    RatePolicy rates;
    double objective_value = 0.0;
    double achieved_avg_power = 0.0;
    uint64_t evaluations = 0;
};

struct Feasibility {
    bool feasible = false;
    double avg_power = 0.0;
};

Feasibility feasibility(const PowerPolicy& pp, const RatePolicy& rp, const ArqConfig& config,
                        double power_budget, const AnalyticSettings& settings = {});

OptResult solve(const OptProblem& problem);

// One solve per budget, in the given order. When cache_path is nonempty,
// finished budgets are persisted as JSON and reused on the next call.
std::vector<OptResult> pareto_sweep(const OptProblem& problem, const std::vector<double>& budgets,
                                    const std::string& cache_path = "");

}  // namespace arq
