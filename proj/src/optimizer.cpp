#include "arq/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace arq {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

AnalyticSettings report_settings(const ArqConfig& c) { return analysis_settings(c); }

AnalyticSettings search_settings(const ArqConfig& c) {
    AnalyticSettings s;
    if (c.scenario == Scenario::ShortLc) {
        if (c.max_retx <= 3) {
            s.integration.method = IntegrationMethod::NestedQuadrature;
            s.integration.quad_nodes = 16;
        } else {
            s.integration.points = uint64_t{1} << 12;
            s.integration.replicas = 4;
        }
    }
    return s;
}

struct Scored {
    double value = kNegInf;  // maximized value (negated outage for MinOutage)
    double phi = 0.0;
    bool feasible = false;
};

double natural_objective(Objective obj, double value) {
    return obj == Objective::MinOutage ? -value : value;
}

Scored score(const OptProblem& prob, const PowerPolicy& pp, const RatePolicy& rp,
             const AnalyticSettings& settings, std::atomic<uint64_t>& evals) {
    Scored s;
    StopDistribution sd;
    try {
        sd = stop_distribution(prob.config, pp, rp, settings);
    } catch (const std::exception&) {
        return s;  // solver failure on a degenerate candidate: rejected
    }
    evals.fetch_add(1, std::memory_order_relaxed);
    s.phi = avg_power(sd, pp, rp);
    s.feasible = s.phi <= prob.power_budget * (1.0 + 1e-9);
    if (!s.feasible) return s;
    switch (prob.objective) {
        case Objective::MaxLongTerm: s.value = long_term_throughput(sd, rp); break;
        case Objective::MaxDelayLimited: s.value = delay_limited_throughput(sd, rp); break;
        case Objective::MinOutage: s.value = -sd.outage; break;
    }
    return s;
}

// Search-space coordinates: log-powers first, then rates (one rate for
// fixed-length ladders, a full ladder for variable-length INR).
struct Space {
    const OptProblem* prob;
    int rounds;
    int n_power;  // 1 when uniform_power, else rounds
    int n_rate;   // 0 when fixed_rate, 1 fixed-length, rounds variable ladder

    explicit Space(const OptProblem& p)
        : prob(&p),
          rounds(p.config.rounds()),
          n_power(p.uniform_power ? 1 : p.config.rounds()),
          n_rate(p.fixed_rate ? 0
                              : (p.config.protocol == Protocol::InrVariable ? p.config.rounds()
                                                                            : 1)) {}

    int dims() const { return n_power + n_rate; }

    bool decode(const std::vector<double>& x, PowerPolicy& pp, RatePolicy& rp) const {
        const double p_lo = prob->power_budget * prob->bounds.power_lo_scale * (1.0 - 1e-12);
        const double p_hi = prob->power_budget * prob->bounds.power_hi_scale * (1.0 + 1e-12);
        pp.powers.resize(static_cast<size_t>(rounds));
        for (int i = 0; i < rounds; ++i) {
            double p = std::exp(x[prob->uniform_power ? 0 : i]);
            if (!(p >= p_lo && p <= p_hi)) return false;  // search box
            // log round trips and polish steps leave candidates a hair off
            // the budget point; such powers are numerically indistinguishable
            // from it, so report them as the budget exactly
            if (std::fabs(p - prob->power_budget) <= 1e-9 * prob->power_budget)
                p = prob->power_budget;
            pp.powers[i] = p;
        }
        if (prob->config.protocol == Protocol::Basic &&
            prob->config.scenario == Scenario::LongLc) {
            for (int i = 1; i < rounds; ++i)
                if (pp.powers[i] < pp.powers[i - 1]) return false;  // ordering constraint
        }
        if (prob->fixed_rate) {
            rp = RatePolicy::fixed_length(*prob->fixed_rate, rounds);
            return true;
        }
        const double r_lo = prob->bounds.rate_lo * (1.0 - 1e-12);
        const double r_hi = prob->bounds.rate_hi * (1.0 + 1e-12);
        if (prob->config.protocol == Protocol::InrVariable) {
            std::vector<double> ladder(x.begin() + n_power, x.end());
            for (int i = 0; i < rounds; ++i) {
                if (!(ladder[i] >= r_lo && ladder[i] <= r_hi)) return false;
                if (i > 0 && !(ladder[i] < ladder[i - 1])) return false;
            }
            rp = RatePolicy::variable(std::move(ladder));
            return true;
        }
        const double rate = x[n_power];
        if (!(rate >= r_lo && rate <= r_hi)) return false;
        rp = RatePolicy::fixed_length(rate, rounds);
        return true;
    }
};

// Deterministic Nelder-Mead maximization; invalid candidates score -inf.
std::pair<std::vector<double>, double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
    const std::vector<double>& step, int max_iter) {
    const size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> val(n + 1);
    for (size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
    for (size_t i = 0; i <= n; ++i) val[i] = f(pts[i]);

    auto order = [&] {
        std::vector<size_t> idx(n + 1);
        for (size_t i = 0; i <= n; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return val[a] > val[b]; });
        std::vector<std::vector<double>> p2(n + 1);
        std::vector<double> v2(n + 1);
        for (size_t i = 0; i <= n; ++i) { p2[i] = pts[idx[i]]; v2[i] = val[idx[i]]; }
        pts.swap(p2); val.swap(v2);
    };
    order();

    for (int it = 0; it < max_iter; ++it) {
        if (std::isfinite(val[0]) && std::isfinite(val[n]) &&
            std::fabs(val[0] - val[n]) < 1e-12 * (1.0 + std::fabs(val[0])))
            break;
        std::vector<double> centroid(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);
        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (size_t j = 0; j < n; ++j) p[j] = centroid[j] + t * (pts[n][j] - centroid[j]);
            return p;
        };
        auto reflected = blend(-1.0);
        const double fr = f(reflected);
        if (fr > val[0]) {
            auto expanded = blend(-2.0);
            const double fe = f(expanded);
            if (fe > fr) { pts[n] = expanded; val[n] = fe; }
            else { pts[n] = reflected; val[n] = fr; }
        } else if (fr > val[n - 1]) {
            pts[n] = reflected; val[n] = fr;
        } else {
            auto contracted = blend(0.5);
            const double fc = f(contracted);
            if (fc > val[n]) { pts[n] = contracted; val[n] = fc; }
            else {
                for (size_t i = 1; i <= n; ++i) {
                    for (size_t j = 0; j < n; ++j)
                        pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                    val[i] = f(pts[i]);
                }
            }
        }
        order();
    }
    return {pts[0], val[0]};
}

struct Candidate {
    PowerPolicy pp;
    RatePolicy rp;
};

bool lexicographically_before(const Candidate& a, const Candidate& b) {
    if (a.pp.powers != b.pp.powers) return a.pp.powers < b.pp.powers;
    return a.rp.equiv_rates < b.rp.equiv_rates;
}

uint64_t problem_hash(const OptProblem& p) {
    uint64_t h = hash_combine(uint64_t{0x0b71}, static_cast<uint64_t>(p.objective), p.config);
    h = hash_combine(h, bits_of(p.power_budget), bits_of(p.fixed_rate.value_or(-1.0)),
                     bits_of(p.bounds.power_lo_scale), bits_of(p.bounds.power_hi_scale),
                     bits_of(p.bounds.rate_lo), bits_of(p.bounds.rate_hi),
                     static_cast<uint64_t>(p.grid_points), static_cast<uint64_t>(p.refine),
                     static_cast<uint64_t>(p.uniform_power));
    const AnalyticSettings ev = p.eval.value_or(report_settings(p.config));
    h = hash_combine(h, static_cast<uint64_t>(ev.integration.method), ev.integration.points,
                     ev.integration.seed, static_cast<uint64_t>(ev.integration.quad_nodes));
    return h;
}

}  // namespace

Feasibility feasibility(const PowerPolicy& pp, const RatePolicy& rp, const ArqConfig& config,
                        double power_budget, const AnalyticSettings& settings) {
    const StopDistribution sd = stop_distribution(config, pp, rp, settings);
    const double phi = avg_power(sd, pp, rp);
    return {phi <= power_budget * (1.0 + 1e-9), phi};
}

OptResult solve(const OptProblem& prob) {
    if (prob.config.max_retx > 4)
        throw std::invalid_argument("solve: dimensionality guard admits M <= 4 only");
    if (prob.objective == Objective::MinOutage && !prob.fixed_rate)
        throw std::invalid_argument("solve: MinOutage requires fixed_rate");
    if (!(prob.power_budget > 0.0) || !(prob.bounds.power_lo_scale > 0.0) ||
        !std::isfinite(prob.bounds.power_hi_scale) || !(prob.bounds.rate_lo > 0.0) ||
        !std::isfinite(prob.bounds.rate_hi))
        throw std::invalid_argument("solve: budget and search bounds must be positive and finite");
    const int rounds = prob.config.rounds();

    const AnalyticSettings eval = prob.eval.value_or(report_settings(prob.config));
    const AnalyticSettings search = prob.search_eval.value_or(search_settings(prob.config));
    std::atomic<uint64_t> evals{0};

    const Space space(prob);

    // Grid axes: log-spaced powers (budget appended for the uniform search),
    // linearly spaced rates.
    int k = std::max(2, prob.grid_points);
    std::vector<std::vector<double>> axes;
    {
        uint64_t total = 1;
        auto build = [&](int points) {
            axes.clear();
            std::vector<double> paxis(static_cast<size_t>(points));
            const double lo = prob.power_budget * prob.bounds.power_lo_scale;
            const double hi = prob.power_budget * prob.bounds.power_hi_scale;
            for (int i = 0; i < points; ++i)
                paxis[i] = std::log(lo) + (std::log(hi) - std::log(lo)) * i / (points - 1);
            if (prob.uniform_power) paxis.push_back(std::log(prob.power_budget));
            for (int d = 0; d < space.n_power; ++d) axes.push_back(paxis);
            std::vector<double> raxis(static_cast<size_t>(points));
            for (int i = 0; i < points; ++i)
                raxis[i] = prob.bounds.rate_lo +
                           (prob.bounds.rate_hi - prob.bounds.rate_lo) * i / (points - 1);
            for (int d = 0; d < space.n_rate; ++d) axes.push_back(raxis);
            total = 1;
            for (const auto& a : axes) total *= a.size();
        };
        build(k);
        while (total > (uint64_t{1} << 21) && k > 4) {
            k = std::max(4, (k * 3) / 4);
            build(k);
        }
    }
    uint64_t total = 1;
    for (const auto& a : axes) total *= a.size();

    auto decode_flat = [&](uint64_t flat, std::vector<double>& x) {
        for (int d = space.dims() - 1; d >= 0; --d) {
            const uint64_t n = axes[d].size();
            x[d] = axes[d][flat % n];
            flat /= n;
        }
    };

    std::vector<double> grid_value(total, kNegInf);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 256) \
    num_threads(prob.threads > 0 ? prob.threads : omp_get_max_threads())
#endif
    for (int64_t flat = 0; flat < static_cast<int64_t>(total); ++flat) {
        std::vector<double> x(space.dims());
        decode_flat(static_cast<uint64_t>(flat), x);
        PowerPolicy pp;
        RatePolicy rp;
        if (!space.decode(x, pp, rp)) continue;
        const Scored s = score(prob, pp, rp, search, evals);
        if (s.feasible) grid_value[flat] = s.value;
    }

    // Deterministic top-K cells (value desc, flat index asc).
    const int top_k = 8;
    std::vector<uint64_t> best;
    for (uint64_t flat = 0; flat < total; ++flat) {
        if (grid_value[flat] == kNegInf) continue;
        best.push_back(flat);
        std::sort(best.begin(), best.end(), [&](uint64_t a, uint64_t b) {
            if (grid_value[a] != grid_value[b]) return grid_value[a] > grid_value[b];
            return a < b;
        });
        if (best.size() > static_cast<size_t>(top_k)) best.resize(top_k);
    }

    std::vector<Candidate> pool;
    auto push_x = [&](const std::vector<double>& x) {
        Candidate c;
        if (space.decode(x, c.pp, c.rp)) pool.push_back(std::move(c));
    };
    for (uint64_t flat : best) {
        std::vector<double> x(space.dims());
        decode_flat(flat, x);
        push_x(x);
    }

    if (prob.refine && !best.empty()) {
        std::vector<double> step(space.dims());
        for (int d = 0; d < space.dims(); ++d) {
            const auto& a = axes[d];
            step[d] = a.size() > 1 ? 0.5 * (a[1] - a[0]) : 0.1;
        }
        auto objective_at = [&](const std::vector<double>& x) {
            PowerPolicy pp;
            RatePolicy rp;
            if (!space.decode(x, pp, rp)) return kNegInf;
            const Scored s = score(prob, pp, rp, search, evals);
            return s.feasible ? s.value : kNegInf;
        };
        std::vector<std::vector<double>> polished(best.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) \
    num_threads(prob.threads > 0 ? prob.threads : omp_get_max_threads())
#endif
        for (int64_t i = 0; i < static_cast<int64_t>(best.size()); ++i) {
            std::vector<double> x0(space.dims());
            decode_flat(best[i], x0);
            polished[i] = nelder_mead(objective_at, x0, step, 250).first;
        }
        for (const auto& x : polished) push_x(x);
    }

    // Baseline injections: uniform powers at the budget, across the rate
    // grid, a dense rate scan and a golden-section rate. For variable-length
    // INR the corresponding fixed-length ladders are injected as well, so the
    // variable-rate search never loses to its fixed-length restriction.
    {
        const auto uniform_pp = PowerPolicy::uniform(prob.power_budget, rounds);
        std::vector<double> rates;
        if (prob.fixed_rate) {
            rates.push_back(*prob.fixed_rate);
        } else {
            for (int i = 0; i < 65; ++i)
                rates.push_back(prob.bounds.rate_lo +
                                (prob.bounds.rate_hi - prob.bounds.rate_lo) * i / 64.0);
            // golden-section on the uniform-power rate profile
            double lo = prob.bounds.rate_lo, hi = prob.bounds.rate_hi;
            const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
            auto rate_value = [&](double r) {
                const Scored s = score(prob, uniform_pp, RatePolicy::fixed_length(r, rounds),
                                       search, evals);
                return s.value;
            };
            double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
            double f1 = rate_value(x1), f2 = rate_value(x2);
            for (int it = 0; it < 80 && hi - lo > 1e-10; ++it) {
                if (f1 < f2) {
                    lo = x1; x1 = x2; f1 = f2;
                    x2 = lo + gr * (hi - lo); f2 = rate_value(x2);
                } else {
                    hi = x2; x2 = x1; f2 = f1;
                    x1 = hi - gr * (hi - lo); f1 = rate_value(x1);
                }
            }
            rates.push_back(0.5 * (lo + hi));
        }
        for (double r : rates) {
            Candidate c{uniform_pp, RatePolicy::fixed_length(r, rounds)};
            if (prob.config.protocol == Protocol::InrVariable) {
                std::vector<double> ladder(static_cast<size_t>(rounds));
                for (int m = 1; m <= rounds; ++m) ladder[m - 1] = r / m;
                c.rp = RatePolicy::variable(std::move(ladder));
            }
            pool.push_back(std::move(c));
        }
    }

    // Final selection at reporting precision.
    OptResult result;
    bool have = false;
    Scored best_scored;
    Candidate best_cand;
    for (const auto& c : pool) {
        const Scored s = score(prob, c.pp, c.rp, eval, evals);
        if (!s.feasible) continue;
        const bool better =
            !have || s.value > best_scored.value ||
            (s.value == best_scored.value && lexicographically_before(c, best_cand));
        if (better) {
            have = true;
            best_scored = s;
            best_cand = c;
        }
    }
    if (!have) throw std::runtime_error("solve: empty feasible pool (cannot happen with uniform injection)");

    // Post-hoc re-validation with a fresh evaluation.
    const Feasibility post = feasibility(best_cand.pp, best_cand.rp, prob.config,
                                         prob.power_budget, eval);
    if (!post.feasible) throw std::logic_error("solve: selected candidate failed re-validation");

    result.powers = best_cand.pp;
    result.rates = best_cand.rp;
    result.objective_value = natural_objective(prob.objective, best_scored.value);
    result.achieved_avg_power = post.avg_power;
    result.evaluations = evals.load();
    return result;
}

std::vector<OptResult> pareto_sweep(const OptProblem& problem, const std::vector<double>& budgets,
                                    const std::string& cache_path) {
    nlohmann::json cache = nlohmann::json::object();
    if (!cache_path.empty()) {
        std::ifstream in(cache_path);
        if (in) {
            try {
                in >> cache;
            } catch (const std::exception&) {
                cache = nlohmann::json::object();
            }
        }
        if (!cache.is_object()) cache = nlohmann::json::object();
    }

    std::vector<OptResult> results;
    results.reserve(budgets.size());
    for (double budget : budgets) {
        OptProblem p = problem;
        p.power_budget = budget;
        const std::string key = std::to_string(problem_hash(p));
        if (!cache_path.empty() && cache.contains(key)) {
            const auto& e = cache[key];
            OptResult r;
            r.powers.powers = e["powers"].get<std::vector<double>>();
            RatePolicy rp;
            rp.equiv_rates = e["rates"].get<std::vector<double>>();
            rp.initial_rate = rp.equiv_rates.front();
            r.rates = rp;
            r.objective_value = e["objective_value"].get<double>();
            r.achieved_avg_power = e["avg_power"].get<double>();
            r.evaluations = e["evaluations"].get<uint64_t>();
            results.push_back(std::move(r));
            continue;
        }
        OptResult r = solve(p);
        if (!cache_path.empty()) {
            cache[key] = {{"budget", budget},
                          {"powers", r.powers.powers},
                          {"rates", r.rates.equiv_rates},
                          {"objective_value", r.objective_value},
                          {"avg_power", r.achieved_avg_power},
                          {"evaluations", r.evaluations}};
            std::ofstream out(cache_path);
            out << cache.dump(1) << "\n";
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace arq
