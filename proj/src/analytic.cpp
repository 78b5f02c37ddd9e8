#include "arq/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "arq/rng.hpp"

namespace arq {
namespace {

constexpr double kPi = 3.14159265358979323846;

double pow_int(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

double cumulative_power(const PowerPolicy& pp, int m) {
    double s = 0.0;
    for (int n = 0; n < m; ++n) s += pp.powers[n];
    return s;
}

// Root of sum_{n<=m} weights[n] log(1 + g powers[n]) = target. The left side
// is 0 at g=0 and strictly increasing, so the root is unique; bracketing
// bisection plus a few guarded Newton steps drives the residual to ~1e-14.
double solve_accumulated_threshold(const std::vector<double>& powers,
                                   const std::vector<double>& weights, int m, double target,
                                   const DeltaSolverSettings& st) {
    if (!(st.abs_tol > 0.0) || !(st.rel_tol > 0.0) || !(st.bracket_growth > 1.0))
        throw std::invalid_argument("threshold solver: tolerances must be positive");
    auto value = [&](double g) {
        double s = 0.0;
        for (int n = 0; n < m; ++n) s += weights[n] * std::log1p(g * powers[n]);
        return s;
    };
    auto slope = [&](double g) {
        double s = 0.0;
        for (int n = 0; n < m; ++n) s += weights[n] * powers[n] / (1.0 + g * powers[n]);
        return s;
    };

    double lo = 0.0, hi = 1.0;
    int grow = 0;
    while (value(hi) < target) {
        lo = hi;
        hi *= st.bracket_growth;
        if (++grow > 4096) {
            std::ostringstream os;
            os << "threshold solver: no bracket, target=" << target << " value(" << hi
               << ")=" << value(hi);
            throw std::runtime_error(os.str());
        }
    }
    int it = 0;
    while (hi - lo > st.abs_tol + st.rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (value(mid) < target) lo = mid; else hi = mid;
        if (++it > st.max_iter) break;
    }
    double g = 0.5 * (lo + hi);
    for (int polish = 0; polish < 8; ++polish) {
        const double r = value(g) - target;
        if (std::fabs(r) <= 1e-14 * std::max(1.0, target)) break;
        if (r > 0.0) hi = std::min(hi, g); else lo = std::max(lo, g);
        const double d = slope(g);
        double next = d > 0.0 ? g - r / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        g = next;
    }
    const double resid = std::fabs(value(g) - target);
    if (!(resid <= 100.0 * st.rel_tol * std::max(1.0, target))) {
        std::ostringstream os;
        os << "threshold solver: residual " << resid << " with bracket [" << lo << "," << hi
           << "] after " << it << " bisections";
        throw std::runtime_error(os.str());
    }
    return g;
}

// ---------------------------------------------------------------------------
// quadrature / quasi-random machinery for short-Lc probabilities

struct QuadRule {
    std::vector<double> x, w;  // nodes and weights on [0,1]
};

QuadRule gauss_legendre_01(int n) {
    QuadRule r{std::vector<double>(n), std::vector<double>(n)};
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 64; ++iter) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) < 1e-15) break;
        }
        r.x[i] = 0.5 * (1.0 - z);
        r.x[n - 1 - i] = 0.5 * (1.0 + z);
        const double w = 1.0 / ((1.0 - z * z) * pp * pp);
        r.w[i] = w;
        r.w[n - 1 - i] = w;
    }
    return r;
}

const QuadRule& gl_rule(int n) {
    thread_local std::map<int, QuadRule> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_legendre_01(n)).first;
    return it->second;
}

// Gains at the quadrature nodes, cached per (distribution, node count).
const std::vector<double>& node_gains(const FadingDistribution& d, int nodes) {
    using Key = std::tuple<int, double, double, double, int>;
    thread_local std::map<Key, std::vector<double>> cache;
    const Key key{static_cast<int>(d.kind()), d.n_shape(), d.w_scale(), d.fixed_gain(), nodes};
    auto it = cache.find(key);
    if (it == cache.end()) {
        if (cache.size() > 64) cache.clear();
        const QuadRule& rule = gl_rule(nodes);
        std::vector<double> g(rule.x.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = d.quantile(rule.x[i]);
        it = cache.emplace(key, std::move(g)).first;
    }
    return it->second;
}

// Additive Kronecker sequence direction numbers (generalized golden ratio).
std::vector<double> kronecker_alphas(int dims) {
    double x = 1.5;
    for (int i = 0; i < 200; ++i) {
        const double f = std::pow(x, dims + 1) - x - 1.0;
        const double df = (dims + 1) * std::pow(x, dims) - 1.0;
        const double nx = x - f / df;
        if (std::fabs(nx - x) < 1e-16) { x = nx; break; }
        x = nx;
    }
    std::vector<double> a(dims);
    double inv = 1.0;
    for (int j = 0; j < dims; ++j) {
        inv /= x;
        a[j] = inv;
    }
    return a;
}

template <typename F>
IntegralEstimate qmc_integrate(int dims, const ShortLcIntegration& integ, uint64_t stream_key,
                               F&& f) {
    const int replicas = std::max(1, integ.replicas);
    const uint64_t per_replica = std::max<uint64_t>(1, integ.points / replicas);
    const std::vector<double> alphas = kronecker_alphas(dims);
    std::vector<double> estimates(replicas, 0.0);
    std::vector<double> x(dims);
    for (int r = 0; r < replicas; ++r) {
        RngStream shift_rng(hash_combine(integ.seed, stream_key, static_cast<uint64_t>(r)));
        for (int j = 0; j < dims; ++j) x[j] = shift_rng.next_unit();
        double acc = 0.0;
        for (uint64_t k = 0; k < per_replica; ++k) {
            for (int j = 0; j < dims; ++j) {
                x[j] += alphas[j];
                if (x[j] >= 1.0) x[j] -= 1.0;
            }
            acc += f(x);
        }
        estimates[r] = acc / static_cast<double>(per_replica);
    }
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= replicas;
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    IntegralEstimate out;
    out.value = mean;
    out.stderr_est = replicas > 1 ? std::sqrt(var / (replicas * (replicas - 1.0))) : 0.0;
    return out;
}

// Integrand of the short-Lc decodability probability for round m: given the
// first m-1 gains, the last round is integrated in closed form through the
// gain law, which removes the indicator discontinuity.
struct ShortLcTail {
    const ArqConfig* config;
    const PowerPolicy* pp;
    double rate;
    int m;

    double operator()(const std::vector<double>& gains) const {
        const auto& P = pp->powers;
        double t;
        if (config->protocol == Protocol::Rtd) {
            double s = 0.0;
            for (int n = 0; n + 1 < m; ++n) s += gains[n] * P[n];
            const double rem = std::expm1(rate) - s;
            t = rem <= 0.0 ? 0.0 : rem / P[m - 1];
        } else {  // fixed-length INR
            double s = 0.0;
            for (int n = 0; n + 1 < m; ++n) s += std::log1p(gains[n] * P[n]);
            const double rem = rate - s;
            t = rem <= 0.0 ? 0.0 : std::expm1(rem) / P[m - 1];
        }
        return 1.0 - config->fading.prob_below(t);
    }
};

IntegralEstimate short_lc_pr_first(const ArqConfig& config, const PowerPolicy& pp,
                                   const RatePolicy& rp, int m, const AnalyticSettings& settings) {
    const double R = rp.initial_rate;
    const ShortLcTail tail{&config, &pp, R, m};
    const int dims = m - 1;
    if (dims == 0) {
        return {tail({}), 0.0};
    }
    const ShortLcIntegration& integ = settings.integration;
    if (integ.method == IntegrationMethod::QuasiRandom && integ.points < 1024)
        throw std::invalid_argument("quasi-random integration needs at least 2^10 points");
    if (integ.method == IntegrationMethod::NestedQuadrature) {
        if (dims > 3)
            throw std::invalid_argument("NestedQuadrature supports at most 4 rounds");
        const QuadRule& rule = gl_rule(integ.quad_nodes);
        const std::vector<double>& gains = node_gains(config.fading, integ.quad_nodes);
        const int n = integ.quad_nodes;
        std::vector<int> idx(dims, 0);
        std::vector<double> g(dims);
        double acc = 0.0;
        while (true) {
            double w = 1.0;
            for (int j = 0; j < dims; ++j) {
                g[j] = gains[idx[j]];
                w *= rule.w[idx[j]];
            }
            acc += w * tail(g);
            int j = 0;
            for (; j < dims; ++j) {
                if (++idx[j] < n) break;
                idx[j] = 0;
            }
            if (j == dims) break;
        }
        return {acc, 0.0};
    }
    uint64_t key = hash_combine(uint64_t{0x51c2}, config);
    key = hash_combine(key, pp);
    key = hash_combine(key, rp);
    key = hash_combine(key, static_cast<uint64_t>(m));
    std::vector<double> g(dims);
    return qmc_integrate(dims, integ, key, [&](const std::vector<double>& u) {
        for (int j = 0; j < dims; ++j) g[j] = config.fading.quantile(u[j]);
        return tail(g);
    });
}

void check_engine_inputs(const ArqConfig& config, const PowerPolicy& pp, const RatePolicy& rp) {
    const int rounds = config.rounds();
    if (config.max_retx < 0) throw std::invalid_argument("max_retx must be >= 0");
    if (pp.rounds() != rounds || rp.rounds() != rounds)
        throw std::invalid_argument("policy length differs from max_retx+1");
    if (config.protocol == Protocol::InrVariable && config.scenario == Scenario::ShortLc)
        throw std::invalid_argument("variable-length short-Lc unsupported");
}

struct PrTables {
    std::vector<double> pr, pr_first;
    double stderr_est = 0.0;
};

IntegralEstimate decodable_within(const ArqConfig& config, const PowerPolicy& pp,
                                  const RatePolicy& rp, int m, const AnalyticSettings& settings) {
    const auto& fading = config.fading;
    const double R = rp.initial_rate;
    if (config.scenario == Scenario::LongLc) {
        double threshold;
        switch (config.protocol) {
            case Protocol::Rtd:
                threshold = std::expm1(R) / cumulative_power(pp, m);
                break;
            case Protocol::Basic:
                threshold = std::expm1(R) / pp.powers[m - 1];
                break;
            case Protocol::InrFixed: {
                const std::vector<double> ones(static_cast<size_t>(m), 1.0);
                threshold = solve_accumulated_threshold(pp.powers, ones, m, R, settings.delta);
                break;
            }
            case Protocol::InrVariable:
            default:
                threshold = delta_m(rp, pp, m, settings.delta);
                break;
        }
        return {1.0 - fading.prob_below(threshold), 0.0};
    }
    // short-Lc
    if (config.protocol == Protocol::Basic) {
        double not_yet = 1.0;
        for (int n = 1; n <= m; ++n)
            not_yet *= fading.prob_below(std::expm1(R) / pp.powers[n - 1]);
        return {1.0 - not_yet, 0.0};
    }
    return short_lc_pr_first(config, pp, rp, m, settings);
}

PrTables build_tables(const ArqConfig& config, const PowerPolicy& pp, const RatePolicy& rp,
                      const AnalyticSettings& settings) {
    check_engine_inputs(config, pp, rp);
    const int rounds = config.rounds();
    PrTables t;
    t.pr_first.resize(rounds);
    t.pr.resize(rounds);
    for (int m = 1; m <= rounds; ++m) {
        const IntegralEstimate est = decodable_within(config, pp, rp, m, settings);
        t.stderr_est = std::max(t.stderr_est, est.stderr_est);
        double v = std::clamp(est.value, 0.0, 1.0);
        if (m > 1) v = std::max(v, t.pr_first[m - 2]);  // integration noise guard
        t.pr_first[m - 1] = v;
        t.pr[m - 1] = v - (m > 1 ? t.pr_first[m - 2] : 0.0);
    }
    return t;
}

// Stop ladder: fold the noise-free decode probabilities through the feedback
// bit error process. A packet stops at round m <= M when the received bit of
// round m is the first received ACK; it stops at M+1 unconditionally.
StopDistribution ladder(const PrTables& t, double p_b, int rounds) {
    const double q = 1.0 - p_b;
    const int M = rounds - 1;
    StopDistribution sd;
    sd.pr_m = t.pr;
    sd.pr_a.resize(rounds);
    sd.pr_s.resize(rounds);
    for (int m = 1; m <= rounds; ++m) {
        double s = 0.0;
        if (m <= M) {
            // decoded at n: true NACKs 1..n-1 received, true ACKs n..m-1
            // flipped, true ACK at m received
            for (int n = 1; n <= m; ++n)
                s += t.pr[n - 1] * pow_int(q, n) * pow_int(p_b, m - n);
            sd.pr_s[m - 1] = s;
            // never decoded: true NACKs 1..m-1 received, NACK at m flipped
            sd.pr_a[m - 1] = s + (1.0 - t.pr_first[m - 1]) * pow_int(q, m - 1) * p_b;
        } else {
            // final round: no feedback bit after it
            for (int n = 1; n <= rounds; ++n)
                s += t.pr[n - 1] * pow_int(q, n - 1) * pow_int(p_b, rounds - n);
            sd.pr_s[m - 1] = s;
            sd.pr_a[m - 1] = s + (1.0 - t.pr_first[rounds - 1]) * pow_int(q, M);
        }
    }
    double outage = 1.0;
    for (int m = 1; m <= rounds; ++m) outage -= pow_int(q, m - 1) * t.pr[m - 1];
    sd.outage = std::clamp(outage, 0.0, 1.0);

    double mass = 0.0;
    for (double a : sd.pr_a) mass += a;
    if (std::fabs(mass - 1.0) >= 1e-9)
        throw std::logic_error("stop distribution mass deviates from 1 beyond 1e-9");
    for (double& a : sd.pr_a) a /= mass;
    return sd;
}

}  // namespace

double delta_m(const RatePolicy& rp, const PowerPolicy& pp, int m,
               const DeltaSolverSettings& settings) {
    if (m < 1 || m > rp.rounds() || m > pp.rounds())
        throw std::invalid_argument("delta_m: round index out of range");
    std::vector<double> weights(static_cast<size_t>(m));
    for (int n = 1; n <= m; ++n) weights[n - 1] = rp.inv_rate_step(n);
    return solve_accumulated_threshold(pp.powers, weights, m, 1.0, settings);
}

double pr_m(const ArqConfig& config, const PowerPolicy& pp, const RatePolicy& rp, int m,
            const AnalyticSettings& settings) {
    if (m < 1 || m > config.rounds()) throw std::invalid_argument("pr_m: round out of range");
    const PrTables t = build_tables(config, pp, rp, settings);
    return t.pr[m - 1];
}

double pr_first_m(const ArqConfig& config, const PowerPolicy& pp, const RatePolicy& rp, int m,
                  const AnalyticSettings& settings) {
    return pr_first_m_estimate(config, pp, rp, m, settings).value;
}

IntegralEstimate pr_first_m_estimate(const ArqConfig& config, const PowerPolicy& pp,
                                     const RatePolicy& rp, int m,
                                     const AnalyticSettings& settings) {
    if (m < 1 || m > config.rounds())
        throw std::invalid_argument("pr_first_m: round out of range");
    check_engine_inputs(config, pp, rp);
    IntegralEstimate est = decodable_within(config, pp, rp, m, settings);
    est.value = std::clamp(est.value, 0.0, 1.0);
    return est;
}

StopDistribution stop_distribution(const ArqConfig& config, const PowerPolicy& pp,
                                   const RatePolicy& rp, const AnalyticSettings& settings) {
    const PrTables t = build_tables(config, pp, rp, settings);
    return ladder(t, config.p_b, config.rounds());
}

double long_term_throughput(const StopDistribution& sd, const RatePolicy& rp) {
    double den = 0.0;
    for (int m = 1; m <= sd.rounds(); ++m) den += sd.pr_a[m - 1] / rp.equiv_rates[m - 1];
    return (1.0 - sd.outage) / den;
}

double avg_power(const StopDistribution& sd, const PowerPolicy& pp, const RatePolicy& rp) {
    double den = 0.0, num = 0.0, stopped_before = 0.0;
    for (int m = 1; m <= sd.rounds(); ++m) {
        den += sd.pr_a[m - 1] / rp.equiv_rates[m - 1];
        num += pp.powers[m - 1] * rp.inv_rate_step(m) * (1.0 - stopped_before);
        stopped_before += sd.pr_a[m - 1];
    }
    return num / den;
}

double delay_limited_throughput(const StopDistribution& sd, const RatePolicy& rp) {
    double s = 0.0;
    for (int m = 1; m <= sd.rounds(); ++m) s += rp.equiv_rates[m - 1] * sd.pr_s[m - 1];
    return s;
}

double feedback_load(const StopDistribution& sd) {
    const int M = sd.rounds() - 1;
    double b = 0.0;
    for (int m = 1; m <= M; ++m) b += m * sd.pr_a[m - 1];
    b += M * sd.pr_a[M];
    return b;
}

double expected_rounds(const StopDistribution& sd) {
    double r = 0.0;
    for (int m = 1; m <= sd.rounds(); ++m) r += m * sd.pr_a[m - 1];
    return r;
}

double c_metric(const ArqConfig& config, const PowerPolicy& pp, const RatePolicy& rp,
                const AnalyticSettings& settings) {
    for (double p : pp.powers)
        if (p != pp.powers.front())
            throw std::invalid_argument("c_metric requires uniform power");
    const PrTables t = build_tables(config, pp, rp, settings);
    const int M = config.max_retx;
    const double p_b = config.p_b;
    const double q = 1.0 - p_b;
    double c = 0.0;
    for (int j = 0; j <= M; ++j) c += pow_int(p_b, j);
    for (int m = 1; m <= M; ++m) {
        const double alpha_m = 1.0 - t.pr_first[m - 1];
        double tail = 0.0;
        for (int j = 0; j <= M - m; ++j) tail += pow_int(p_b, j);
        c += (1.0 - 2.0 * p_b) * pow_int(q, m - 1) * tail * alpha_m;
    }
    return c;
}

double open_loop_throughput(const FadingDistribution& fading, double rate, double power) {
    if (rate <= 0.0) return 0.0;
    return rate * (1.0 - fading.prob_below(std::expm1(rate) / power));
}

PerformanceReport derive_report(const StopDistribution& sd, const PowerPolicy& pp,
                                const RatePolicy& rp) {
    PerformanceReport r;
    r.eta_lt = long_term_throughput(sd, rp);
    r.eta_dl = delay_limited_throughput(sd, rp);
    r.avg_power = avg_power(sd, pp, rp);
    r.feedback_load = feedback_load(sd);
    r.expected_rounds = expected_rounds(sd);
    r.outage = sd.outage;
    return r;
}

PerformanceReport analytic_report(const ArqConfig& config, const PowerPolicy& pp,
                                  const RatePolicy& rp, const AnalyticSettings& settings) {
    return derive_report(stop_distribution(config, pp, rp, settings), pp, rp);
}

AnalyticSettings analysis_settings(const ArqConfig& config) {
    AnalyticSettings s;
    if (config.scenario == Scenario::ShortLc) {
        if (config.max_retx <= 3) {
            s.integration.method = IntegrationMethod::NestedQuadrature;
            s.integration.quad_nodes = 64;
        } else {
            s.integration.points = uint64_t{1} << 16;
        }
    }
    return s;
}

}  // namespace arq
