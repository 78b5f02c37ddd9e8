// Acceptance suite. Each criterion prints one PASS/FAIL line; the heavy
// Monte-Carlo-vs-analytic verification grid is computed once and shared.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "arq/experiment.hpp"
#include "arq/montecarlo.hpp"
#include "arq/optimizer.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace arq;

namespace {

constexpr uint64_t kPackets = 1000000;
constexpr uint64_t kSeed = 777;

struct Criterion {
    std::string id;
    bool pass = true;
    int checks = 0;
    std::vector<std::string> failures;

    explicit Criterion(std::string name) : id(std::move(name)) {}
    void expect(bool ok, const std::string& what) {
        ++checks;
        if (!ok) {
            pass = false;
            if (failures.size() < 10) failures.push_back(what);
        }
    }
    void finish(const std::string& extra = "") {
        std::printf("[criterion %s] %s (%d checks%s%s)\n", id.c_str(), pass ? "PASS" : "FAIL",
                    checks, extra.empty() ? "" : ", ", extra.c_str());
        for (const auto& f : failures) std::printf("    failed: %s\n", f.c_str());
        std::fflush(stdout);
        CHECK_MESSAGE(pass, id);
    }
};

struct GridCell {
    Protocol proto;
    Scenario sc;
    int max_retx;
    double p_b, snr_db, n_shape;
    ArqConfig cfg;
    PowerPolicy pp;
    RatePolicy rp;
    StopDistribution sd;
    PerformanceReport ar;
    McReport mc;

    std::string label() const {
        std::ostringstream os;
        os << to_string(proto) << "/" << to_string(sc) << " M=" << max_retx << " pb=" << p_b
           << " snr=" << snr_db << " N=" << n_shape;
        return os.str();
    }
};

struct Grid {
    std::vector<GridCell> cells;
    double wall_seconds = 0.0;
};

// The shared verification grid: {basic, rtd, inr-fixed} x {long, short}
// x M in {1,2} x p_b in {0, 0.05, 0.2} x SNR in {0, 5, 10} dB x N in {1,2},
// uniform power, R = 0.4, one million packets per cell.
const Grid& grid() {
    static const Grid g = [] {
        Grid out;
        const auto t0 = std::chrono::steady_clock::now();
        for (Protocol proto : {Protocol::Basic, Protocol::Rtd, Protocol::InrFixed})
            for (Scenario sc : {Scenario::LongLc, Scenario::ShortLc})
                for (int M : {1, 2})
                    for (double pb : {0.0, 0.05, 0.2})
                        for (double snr : {0.0, 5.0, 10.0})
                            for (double n : {1.0, 2.0}) {
                                GridCell c;
                                c.proto = proto;
                                c.sc = sc;
                                c.max_retx = M;
                                c.p_b = pb;
                                c.snr_db = snr;
                                c.n_shape = n;
                                c.cfg.protocol = proto;
                                c.cfg.scenario = sc;
                                c.cfg.max_retx = M;
                                c.cfg.p_b = pb;
                                c.cfg.fading = FadingDistribution::nakagami(n, 1.0);
                                c.pp = PowerPolicy::uniform(db_to_linear(snr), M + 1);
                                c.rp = RatePolicy::fixed_length(0.4, M + 1);
                                out.cells.push_back(std::move(c));
                            }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (int64_t i = 0; i < static_cast<int64_t>(out.cells.size()); ++i) {
            GridCell& c = out.cells[i];
            c.sd = stop_distribution(c.cfg, c.pp, c.rp, analysis_settings(c.cfg));
            c.ar = derive_report(c.sd, c.pp, c.rp);
            const uint64_t cell_seed =
                hash_combine(kSeed, static_cast<uint64_t>(c.proto),
                             static_cast<uint64_t>(c.sc), static_cast<uint64_t>(c.max_retx),
                             bits_of(c.p_b), bits_of(c.snr_db), bits_of(c.n_shape));
            c.mc = estimate_report(c.cfg, c.pp, c.rp, kPackets, cell_seed, 1);
        }
        out.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }();
    return g;
}

const GridCell* find_cell(Protocol proto, Scenario sc, int M, double pb, double snr, double n) {
    for (const auto& c : grid().cells)
        if (c.proto == proto && c.sc == sc && c.max_retx == M && c.p_b == pb &&
            c.snr_db == snr && c.n_shape == n)
            return &c;
    return nullptr;
}

// Golden-section rate maximizing the uniform-power long-term throughput.
double best_uniform_rate(const ArqConfig& cfg, double power) {
    const auto settings = analysis_settings(cfg);
    auto value = [&](double r) {
        const auto rp = RatePolicy::fixed_length(r, cfg.rounds());
        const auto pp = PowerPolicy::uniform(power, cfg.rounds());
        return long_term_throughput(stop_distribution(cfg, pp, rp, settings), rp);
    };
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.05, hi = 4.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = value(x1), f2 = value(x2);
    while (hi - lo > 1e-9) {
        if (f1 < f2) {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + gr * (hi - lo); f2 = value(x2);
        } else {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - gr * (hi - lo); f1 = value(x1);
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("protocol,", 0) == 0) continue;
        std::vector<std::string> fields;
        std::istringstream is(line);
        std::string f;
        while (std::getline(is, f, ',')) fields.push_back(f);
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace

TEST_CASE("criterion 1: Monte Carlo oracle equivalence across the grid") {
    Criterion crit("1 oracle-equivalence");
    const Grid& g = grid();
    for (const auto& c : g.cells) {
        // empirical standard errors collapse when no rare event lands in the
        // sample; the comparison also admits the error the estimate would
        // have under the analytic hypothesis
        const HypothesisErrors he = hypothesis_stderrs(c.sd, c.pp, c.rp, kPackets);
        auto within = [&](const char* name, double analytic, double mc, double se,
                          double se_h0) {
            std::ostringstream os;
            os << c.label() << " " << name << ": analytic=" << analytic << " mc=" << mc
               << " se=" << se;
            crit.expect(std::fabs(analytic - mc) <= 4.0 * std::max(se, se_h0) + 1e-9,
                        os.str());
        };
        within("outage", c.ar.outage, c.mc.report.outage, c.mc.stderrs.outage,
               he.report.outage);
        within("eta_lt", c.ar.eta_lt, c.mc.report.eta_lt, c.mc.stderrs.eta_lt,
               he.report.eta_lt);
        within("eta_dl", c.ar.eta_dl, c.mc.report.eta_dl, c.mc.stderrs.eta_dl,
               he.report.eta_dl);
        within("avg_power", c.ar.avg_power, c.mc.report.avg_power, c.mc.stderrs.avg_power,
               he.report.avg_power);
        within("fb_load", c.ar.feedback_load, c.mc.report.feedback_load,
               c.mc.stderrs.feedback_load, he.report.feedback_load);
        within("exp_rounds", c.ar.expected_rounds, c.mc.report.expected_rounds,
               c.mc.stderrs.expected_rounds, he.report.expected_rounds);
        for (int m = 0; m < c.cfg.rounds(); ++m) {
            within("pr_a", c.sd.pr_a[m], c.mc.stop.pr_a[m], c.mc.se_pr_a[m], he.pr_a[m]);
            within("pr_s", c.sd.pr_s[m], c.mc.stop.pr_s[m], c.mc.se_pr_s[m], he.pr_s[m]);
        }
    }
    crit.expect(g.wall_seconds < 600.0, "grid exceeded the ten-minute budget");
    std::ostringstream timing;
    timing << g.cells.size() << " cells x 1e6 packets in " << g.wall_seconds << "s";
    crit.finish(timing.str());
}

TEST_CASE("criterion 2: exact stop-distribution identities") {
    Criterion crit("2 exact-identities");
    const double tol = 1e-9;
    for (const auto& c : grid().cells) {
        double sum_a = 0.0, sum_s = 0.0, sum_m = 0.0;
        for (int m = 0; m < c.cfg.rounds(); ++m) {
            sum_a += c.sd.pr_a[m];
            sum_s += c.sd.pr_s[m];
            crit.expect(c.sd.pr_s[m] <= c.sd.pr_a[m] + tol, c.label() + " pr_s > pr_a");
            if (m < c.cfg.max_retx) sum_m += c.sd.pr_m[m];
        }
        crit.expect(std::fabs(sum_a - 1.0) <= tol, c.label() + " sum pr_a != 1");
        crit.expect(std::fabs(sum_s - (1.0 - c.sd.outage)) <= tol,
                    c.label() + " sum pr_s != 1 - outage");
        crit.expect(std::fabs(c.ar.expected_rounds - c.ar.feedback_load - c.sd.pr_a.back()) <=
                        tol,
                    c.label() + " rounds != load + Pr(A_last)");
        crit.expect(std::fabs(c.ar.avg_power - db_to_linear(c.snr_db)) <=
                        tol * db_to_linear(c.snr_db),
                    c.label() + " uniform avg power != budget");
        if (c.p_b == 0.0) {
            for (int m = 0; m < c.cfg.max_retx; ++m)
                crit.expect(std::fabs(c.sd.pr_a[m] - c.sd.pr_m[m]) <= tol,
                            c.label() + " pr_a != pr_m at p_b=0");
            crit.expect(std::fabs(c.sd.pr_a.back() - (1.0 - sum_m)) <= tol,
                        c.label() + " last-round mass at p_b=0");
        }
    }
    crit.finish();
}

TEST_CASE("criterion 3: INR dominates RTD at identical fixed-length policies") {
    Criterion crit("3 inr-dominance");
    for (const auto& c : grid().cells) {
        if (c.proto != Protocol::Rtd) continue;
        const GridCell* inr =
            find_cell(Protocol::InrFixed, c.sc, c.max_retx, c.p_b, c.snr_db, c.n_shape);
        REQUIRE(inr != nullptr);
        crit.expect(inr->ar.eta_lt >= c.ar.eta_lt - 1e-9,
                    c.label() + " INR long-term throughput below RTD");
        crit.expect(inr->ar.outage <= c.ar.outage + 1e-9,
                    c.label() + " INR outage above RTD");
    }
    crit.finish();
}

TEST_CASE("criterion 4: RTD and INR coincide at -30 dB") {
    Criterion crit("4 low-snr-equivalence");
    const double power = db_to_linear(-30.0), rate = 1e-3;
    for (int M : {1, 2}) {
        for (double pb : {0.0, 0.1}) {
            for (double n : {1.0, 2.0}) {
                ArqConfig cfg;
                cfg.max_retx = M;
                cfg.p_b = pb;
                cfg.fading = FadingDistribution::nakagami(n, 1.0);
                const auto pp = PowerPolicy::uniform(power, M + 1);
                const auto rp = RatePolicy::fixed_length(rate, M + 1);
                cfg.protocol = Protocol::Rtd;
                const auto a = derive_report(stop_distribution(cfg, pp, rp), pp, rp);
                cfg.protocol = Protocol::InrFixed;
                const auto b = derive_report(stop_distribution(cfg, pp, rp), pp, rp);
                std::ostringstream os;
                os << "M=" << M << " pb=" << pb << " N=" << n;
                crit.expect(std::fabs(a.eta_lt - b.eta_lt) / b.eta_lt <= 0.01,
                            os.str() + " eta_lt");
                crit.expect(std::fabs(a.eta_dl - b.eta_dl) / b.eta_dl <= 0.01,
                            os.str() + " eta_dl");
                crit.expect(std::fabs(a.outage - b.outage) / b.outage <= 0.01,
                            os.str() + " outage");
            }
        }
    }
    crit.finish();
}

TEST_CASE("criterion 5: delay-limited bound and throughput rate bound") {
    Criterion crit("5 throughput-bounds");
    for (const auto& c : grid().cells) {
        crit.expect(c.ar.eta_dl >= (1.0 - c.ar.outage) * c.ar.eta_lt - 1e-12,
                    c.label() + " eta_dl bound");
        double bound = 0.0;
        for (int m = 0; m < c.cfg.rounds(); ++m)
            bound += c.rp.equiv_rates[m] * c.sd.pr_a[m];
        crit.expect(c.ar.eta_lt <= bound + 1e-12, c.label() + " rate bound");
    }
    crit.finish();
}

TEST_CASE("criterion 6: matched-rate construction and short-Lc stop-count ordering") {
    Criterion crit("6 matched-rates");
    // long-Lc: matched variable-length ladder reproduces the RTD stop law
    for (int M : {1, 2}) {
        for (double pb : {0.0, 0.05, 0.2}) {
            for (double snr : {0.0, 5.0, 10.0}) {
                for (double n : {1.0, 2.0}) {
                    ArqConfig cfg;
                    cfg.protocol = Protocol::Rtd;
                    cfg.max_retx = M;
                    cfg.p_b = pb;
                    cfg.fading = FadingDistribution::nakagami(n, 1.0);
                    const double power = db_to_linear(snr);
                    const auto pp = PowerPolicy::uniform(power, M + 1);
                    const double r_hat = best_uniform_rate(cfg, power);
                    const auto rp_rtd = RatePolicy::fixed_length(r_hat, M + 1);
                    const auto sd_rtd = stop_distribution(cfg, pp, rp_rtd);
                    cfg.protocol = Protocol::InrVariable;
                    const auto rp_inr = RatePolicy::threshold_matched(r_hat, M + 1);
                    const auto sd_inr = stop_distribution(cfg, pp, rp_inr);
                    std::ostringstream os;
                    os << "M=" << M << " pb=" << pb << " snr=" << snr << " N=" << n;
                    for (int m = 0; m <= M; ++m)
                        crit.expect(std::fabs(sd_inr.pr_a[m] - sd_rtd.pr_a[m]) <= 1e-9,
                                    os.str() + " ladder mismatch");
                    crit.expect(long_term_throughput(sd_inr, rp_inr) >=
                                    long_term_throughput(sd_rtd, rp_rtd) - 1e-12,
                                os.str() + " INR throughput below RTD");
                }
            }
        }
    }
    // short-Lc fixed length: INR stops no later and fails no more often
    for (double rate : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        for (double snr : {-5.0, 0.0, 5.0, 10.0}) {
            ArqConfig cfg;
            cfg.protocol = Protocol::InrFixed;
            cfg.scenario = Scenario::ShortLc;
            cfg.max_retx = 1;
            cfg.p_b = 0.1;
            cfg.fading = FadingDistribution::nakagami(2.0, 1.0);
            const auto settings = analysis_settings(cfg);
            const auto pp = PowerPolicy::uniform(db_to_linear(snr), 2);
            const auto rp = RatePolicy::fixed_length(rate, 2);
            const double c_inr = c_metric(cfg, pp, rp, settings);
            const double out_inr = stop_distribution(cfg, pp, rp, settings).outage;
            cfg.protocol = Protocol::Rtd;
            const double c_rtd = c_metric(cfg, pp, rp, settings);
            const double out_rtd = stop_distribution(cfg, pp, rp, settings).outage;
            std::ostringstream os;
            os << "R=" << rate << " snr=" << snr;
            crit.expect(c_inr <= c_rtd + 1e-9, os.str() + " stop-count ordering");
            crit.expect(out_inr <= out_rtd + 1e-9, os.str() + " outage ordering");
        }
    }
    crit.finish();
}

TEST_CASE("criterion 7: short-Lc maps onto a randomized long-Lc system") {
    Criterion crit("7 short-long-mapping");
    std::ostringstream extra;
    for (Protocol proto : {Protocol::Rtd, Protocol::InrFixed}) {
        const auto eq = map_short_to_long(FadingDistribution::nakagami(2.0, 1.0),
                                          db_to_linear(0.0), 1, 0.4, proto, 0.1, kPackets,
                                          hash_combine(kSeed, uint64_t{0x60}, uint64_t(proto)));
        const double d_out =
            std::fabs(eq.native_short.report.outage - eq.mapped_long.report.outage);
        const double se_out =
            std::hypot(eq.native_short.stderrs.outage, eq.mapped_long.stderrs.outage);
        const double d_lt =
            std::fabs(eq.native_short.report.eta_lt - eq.mapped_long.report.eta_lt);
        const double se_lt =
            std::hypot(eq.native_short.stderrs.eta_lt, eq.mapped_long.stderrs.eta_lt);
        const std::string tag = to_string(proto);
        crit.expect(d_out <= 4.0 * se_out + 1e-9, tag + " outage mismatch");
        crit.expect(d_lt <= 4.0 * se_lt + 1e-9, tag + " eta_lt mismatch");
        for (double ks : eq.ks_accumulated_info)
            crit.expect(ks < 0.03, tag + " accumulated-information KS too large");
        // the mapped system must spend a different average power
        crit.expect(std::fabs(eq.mapped_avg_power - eq.uniform_power) >
                        10.0 * eq.mapped_long.stderrs.avg_power,
                    tag + " mapped average power indistinguishable from P");
        extra << tag << ": Phi=" << eq.mapped_avg_power << " vs P=" << eq.uniform_power << "  ";
    }
    crit.finish(extra.str());
}

TEST_CASE("criterion 8: optimizer dominance over the uniform policy") {
    Criterion crit("8 optimizer-dominance");
    const auto t0 = std::chrono::steady_clock::now();
    const auto& cells = grid().cells;
    std::vector<std::string> messages(cells.size());
    std::vector<char> ok_dl(cells.size(), 1), ok_out(cells.size(), 1), ok_ord(cells.size(), 1);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int64_t i = 0; i < static_cast<int64_t>(cells.size()); ++i) {
        const auto& c = cells[i];
        OptProblem prob;
        prob.config = c.cfg;
        prob.power_budget = db_to_linear(c.snr_db);
        prob.threads = 1;

        prob.objective = Objective::MaxDelayLimited;
        const OptResult dl = solve(prob);
        ok_dl[i] = dl.objective_value >= c.ar.eta_dl - 1e-9 ? 1 : 0;

        prob.objective = Objective::MinOutage;
        prob.fixed_rate = 0.4;
        const OptResult out = solve(prob);
        ok_out[i] = out.objective_value <= c.ar.outage + 1e-9 ? 1 : 0;

        if (c.proto == Protocol::Basic && c.sc == Scenario::LongLc) {
            for (size_t m = 1; m < out.powers.powers.size(); ++m)
                if (out.powers.powers[m] < out.powers.powers[m - 1]) ok_ord[i] = 0;
            for (size_t m = 1; m < dl.powers.powers.size(); ++m)
                if (dl.powers.powers[m] < dl.powers.powers[m - 1]) ok_ord[i] = 0;
        }
        messages[i] = c.label();
    }
    for (size_t i = 0; i < cells.size(); ++i) {
        crit.expect(ok_dl[i] == 1, messages[i] + " optimized eta_dl below uniform");
        crit.expect(ok_out[i] == 1, messages[i] + " optimized outage above uniform");
        crit.expect(ok_ord[i] == 1, messages[i] + " basic ARQ powers not nondecreasing");
    }
    std::ostringstream timing;
    timing << "432 solves in "
           << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
           << "s";
    crit.finish(timing.str());
}

TEST_CASE("criterion 9: figure-family trends") {
    Criterion crit("9 figure-trends");

    // throughput vs p_b is nonincreasing (uniform power, 0 dB, M=1, rate at
    // its noise-free optimum)
    for (Protocol proto : {Protocol::Rtd, Protocol::InrFixed}) {
        ArqConfig cfg;
        cfg.protocol = proto;
        cfg.max_retx = 1;
        cfg.fading = FadingDistribution::nakagami(2.0, 1.0);
        const double r_hat = best_uniform_rate(cfg, 1.0);
        const auto pp = PowerPolicy::uniform(1.0, 2);
        const auto rp = RatePolicy::fixed_length(r_hat, 2);
        double prev_lt = 1e300, prev_dl = 1e300;
        for (double pb : {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3}) {
            cfg.p_b = pb;
            const auto sd = stop_distribution(cfg, pp, rp);
            const double lt = long_term_throughput(sd, rp);
            const double dl = delay_limited_throughput(sd, rp);
            crit.expect(lt <= prev_lt + 1e-12 && dl <= prev_dl + 1e-12,
                        std::string(to_string(proto)) + " throughput not nonincreasing in p_b");
            prev_lt = lt;
            prev_dl = dl;
        }
    }

    // INR-RTD gap positive and nonincreasing in p_b (uniform power, 0 dB)
    {
        const auto pp = PowerPolicy::uniform(1.0, 2);
        const auto rp = RatePolicy::fixed_length(0.7, 2);
        double prev_gap_lt = 1e300, prev_gap_dl = 1e300;
        for (double pb : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}) {
            ArqConfig cfg;
            cfg.max_retx = 1;
            cfg.p_b = pb;
            cfg.fading = FadingDistribution::nakagami(2.0, 1.0);
            cfg.protocol = Protocol::Rtd;
            const auto sr = stop_distribution(cfg, pp, rp);
            cfg.protocol = Protocol::InrFixed;
            const auto si = stop_distribution(cfg, pp, rp);
            const double gap_lt = long_term_throughput(si, rp) - long_term_throughput(sr, rp);
            const double gap_dl =
                delay_limited_throughput(si, rp) - delay_limited_throughput(sr, rp);
            crit.expect(gap_lt >= -1e-12 && gap_dl >= -1e-12, "INR-RTD gap negative");
            crit.expect(gap_lt <= prev_gap_lt + 1e-12 && gap_dl <= prev_gap_dl + 1e-12,
                        "INR-RTD gap not nonincreasing in p_b");
            prev_gap_lt = gap_lt;
            prev_gap_dl = gap_dl;
        }
    }

    // variable-length coding never loses to fixed-length INR (3 dB, M=1,
    // uniform power, rates optimized within each discipline)
    for (double pb : {0.0, 0.1, 0.2, 0.3}) {
        OptProblem prob;
        prob.objective = Objective::MaxLongTerm;
        prob.config.protocol = Protocol::InrFixed;
        prob.config.max_retx = 1;
        prob.config.p_b = pb;
        prob.config.fading = FadingDistribution::nakagami(2.0, 1.0);
        prob.power_budget = db_to_linear(3.0);
        prob.uniform_power = true;
        const OptResult fixed = solve(prob);
        prob.config.protocol = Protocol::InrVariable;
        const OptResult variable = solve(prob);
        std::ostringstream os;
        os << "pb=" << pb << " variable " << variable.objective_value << " vs fixed "
           << fixed.objective_value;
        crit.expect(variable.objective_value >= fixed.objective_value - 1e-12,
                    "variable-length INR lost to fixed: " + os.str());
    }

    // optimized outage dominates uniform outage and its relative gain fades
    // when the feedback noise rises (RTD, M=1, R=0.4, 10+ dB)
    for (double snr : {10.0, 15.0, 20.0}) {
        double gap[2];
        int k = 0;
        for (double pb : {0.0, 0.05}) {
            ArqConfig cfg;
            cfg.protocol = Protocol::Rtd;
            cfg.max_retx = 1;
            cfg.p_b = pb;
            cfg.fading = FadingDistribution::nakagami(2.0, 1.0);
            const double power = db_to_linear(snr);
            const double uniform_outage =
                stop_distribution(cfg, PowerPolicy::uniform(power, 2),
                                  RatePolicy::fixed_length(0.4, 2))
                    .outage;
            OptProblem prob;
            prob.objective = Objective::MinOutage;
            prob.config = cfg;
            prob.power_budget = power;
            prob.fixed_rate = 0.4;
            const OptResult res = solve(prob);
            crit.expect(res.objective_value <= uniform_outage + 1e-15,
                        "optimized outage above uniform");
            gap[k++] = (uniform_outage - res.objective_value) / uniform_outage;
        }
        std::ostringstream os;
        os << "snr=" << snr << " gap(0)=" << gap[0] << " gap(0.05)=" << gap[1];
        crit.expect(gap[1] < gap[0], "power-allocation gain did not shrink: " + os.str());
    }

    // outage-inflation boundary p_b is nonincreasing in SNR (uniform power)
    {
        ExperimentSpec spec;
        spec.protocols = {Protocol::InrFixed};
        spec.n_values = {1.0, 2.0, 4.0};
        spec.snr_db_values = {0.0, 5.0, 10.0, 15.0, 20.0};
        spec.fixed_rate = 0.4;
        spec.out_path = "/tmp/arq_acceptance_beta.csv";
        beta_region(spec, 5.0, RunOptions{});
        const auto rows = read_csv_rows(spec.out_path);
        double prev = 1e300;
        std::string prev_n = "";
        for (const auto& r : rows) {
            if (r[10] == "undefined") continue;
            const double b = std::stod(r[9]);
            if (r[4] != prev_n) prev = 1e300;  // new fading-order curve
            crit.expect(b <= prev + 2e-3, "beta boundary rose with SNR (N=" + r[4] + ")");
            prev = b;
            prev_n = r[4];
        }
        std::remove(spec.out_path.c_str());
    }

    // usefulness boundary p_b is nonincreasing in SNR
    {
        ExperimentSpec spec;
        spec.protocols = {Protocol::InrFixed};
        spec.n_values = {1.0};
        spec.snr_db_values = {-5.0, 0.0, 2.5, 5.0, 7.5, 10.0, 15.0};
        spec.fixed_rate = 1.0;
        spec.out_path = "/tmp/arq_acceptance_useful.csv";
        usefulness_region(spec, RunOptions{});
        const auto rows = read_csv_rows(spec.out_path);
        double prev = 1e300;
        for (const auto& r : rows) {
            double b;
            if (r[10] == "always_useful") b = 0.5;
            else if (r[10] == "never_useful") b = 0.0;
            else b = std::stod(r[9]);
            crit.expect(b <= prev + 2e-3, "usefulness boundary rose with SNR at " + r[6] + "dB");
            prev = b;
        }
        std::remove(spec.out_path.c_str());
    }

    crit.finish();
}

TEST_CASE("criterion 10: numerical hygiene") {
    Criterion crit("10 numerical-hygiene");

    // accumulated-information superadditivity over random nonnegative tuples
    {
        RngStream rng(2026);
        for (int i = 0; i < 10000; ++i) {
            const double a = 20.0 * rng.next_unit(), b = 20.0 * rng.next_unit();
            const double x = 20.0 * rng.next_unit(), y = 20.0 * rng.next_unit();
            crit.expect(std::log1p(a * x) + std::log1p(b * y) >=
                            std::log1p(a * x + b * y) - 1e-12,
                        "log superadditivity violated");
        }
    }

    // threshold-solver residuals on random ladders
    {
        RngStream rng(424242);
        for (int trial = 0; trial < 1000; ++trial) {
            const int rounds = 1 + static_cast<int>(rng.next_u64() % 5);
            std::vector<double> ladder(rounds), powers(rounds);
            double r = 0.1 + 3.9 * rng.next_unit();
            for (int i = 0; i < rounds; ++i) {
                ladder[i] = r;
                r *= 0.3 + 0.6 * rng.next_unit();
                powers[i] = std::pow(10.0, -2.0 + 5.0 * rng.next_unit());
            }
            const auto rp = RatePolicy::variable(ladder);
            const auto pp = PowerPolicy{powers};
            const int m = 1 + static_cast<int>(rng.next_u64() % rounds);
            const double d = delta_m(rp, pp, m);
            double theta = 0.0;
            for (int n = 1; n <= m; ++n)
                theta += rp.inv_rate_step(n) * std::log1p(d * powers[n - 1]);
            crit.expect(std::fabs(theta - 1.0) <= 1e-10, "threshold residual above 1e-10");
        }
    }

    // doubling the quasi-random points moves estimates less than 3x their
    // estimated integration error
    {
        const auto pp = PowerPolicy::uniform(1.0, 3);
        const auto rp = RatePolicy::fixed_length(0.4, 3);
        for (Protocol proto : {Protocol::Rtd, Protocol::InrFixed}) {
            ArqConfig cfg;
            cfg.protocol = proto;
            cfg.scenario = Scenario::ShortLc;
            cfg.max_retx = 2;
            cfg.fading = FadingDistribution::nakagami(2.0, 1.0);
            AnalyticSettings coarse;
            coarse.integration.points = uint64_t{1} << 14;
            AnalyticSettings fine = coarse;
            fine.integration.points = uint64_t{1} << 15;
            for (int m = 2; m <= 3; ++m) {
                const auto a = pr_first_m_estimate(cfg, pp, rp, m, coarse);
                const auto b = pr_first_m_estimate(cfg, pp, rp, m, fine);
                crit.expect(a.stderr_est > 0.0, "missing integration error estimate");
                crit.expect(std::fabs(a.value - b.value) < 3.0 * a.stderr_est,
                            "integration drift beyond 3x the estimated error");
            }
        }
    }
    crit.finish();
}
