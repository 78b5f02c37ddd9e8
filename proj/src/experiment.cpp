#include "arq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "arq/montecarlo.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace arq {
namespace {

// ---------------------------------------------------------------------------
// spec file parsing

[[noreturn]] void parse_fail(const std::string& origin, int line, const std::string& what) {
    std::ostringstream os;
    os << origin << ":" << line << ": " << what;
    throw std::invalid_argument(os.str());
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& origin, int line, const std::string& v) {
    std::string body = v;
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') parse_fail(origin, line, "unterminated list");
        body = body.substr(1, body.size() - 2);
    }
    std::vector<std::string> items;
    std::string item;
    std::stringstream ss(body);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    if (items.empty()) parse_fail(origin, line, "empty value list");
    return items;
}

double parse_double(const std::string& origin, int line, const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') parse_fail(origin, line, "not a number: '" + s + "'");
    return v;
}

ExperimentSpec parse_spec(std::istream& in, const std::string& origin) {
    ExperimentSpec spec;
    bool r_set = false;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        raw = trim(raw);
        if (raw.empty()) continue;
        const auto eq = raw.find('=');
        if (eq == std::string::npos) parse_fail(origin, line, "expected key = value");
        std::string key = trim(raw.substr(0, eq));
        const std::string value = trim(raw.substr(eq + 1));
        if (value.empty()) parse_fail(origin, line, "missing value for '" + key + "'");
        if (key.rfind("grid.", 0) == 0) key = key.substr(5);

        auto doubles = [&] {
            std::vector<double> out;
            for (const auto& s : split_list(origin, line, value))
                out.push_back(parse_double(origin, line, s));
            return out;
        };
        auto ints = [&] {
            std::vector<int> out;
            for (double d : doubles()) {
                if (d != std::floor(d)) parse_fail(origin, line, "expected integer list");
                out.push_back(static_cast<int>(d));
            }
            return out;
        };

        if (key == "name") {
            spec.name = value;
        } else if (key == "engine") {
            if (value == "analytic") spec.engine = Engine::Analytic;
            else if (value == "mc") spec.engine = Engine::MonteCarlo;
            else if (value == "both") spec.engine = Engine::Both;
            else parse_fail(origin, line, "engine must be analytic|mc|both");
        } else if (key == "mc_packets") {
            const double v = parse_double(origin, line, value);
            spec.mc_packets = static_cast<uint64_t>(v);
        } else if (key == "seed") {
            spec.seed = static_cast<uint64_t>(parse_double(origin, line, value));
        } else if (key == "out") {
            spec.out_path = value;
        } else if (key == "R") {
            spec.fixed_rate = parse_double(origin, line, value);
            r_set = true;
        } else if (key == "objective") {
            if (value == "none") spec.optimize = OptimizeMode::None;
            else if (value == "max_lt") spec.optimize = OptimizeMode::MaxLongTerm;
            else if (value == "max_dl") spec.optimize = OptimizeMode::MaxDelayLimited;
            else if (value == "min_outage") spec.optimize = OptimizeMode::MinOutage;
            else parse_fail(origin, line, "objective must be none|max_lt|max_dl|min_outage");
        } else if (key == "protocol") {
            spec.protocols.clear();
            for (const auto& s : split_list(origin, line, value)) {
                if (s == "basic") spec.protocols.push_back(Protocol::Basic);
                else if (s == "rtd") spec.protocols.push_back(Protocol::Rtd);
                else if (s == "inr") spec.protocols.push_back(Protocol::InrFixed);
                else parse_fail(origin, line, "protocol must be basic|rtd|inr");
            }
        } else if (key == "scenario") {
            spec.scenarios.clear();
            for (const auto& s : split_list(origin, line, value)) {
                if (s == "long") spec.scenarios.push_back(Scenario::LongLc);
                else if (s == "short") spec.scenarios.push_back(Scenario::ShortLc);
                else parse_fail(origin, line, "scenario must be long|short");
            }
        } else if (key == "coding") {
            spec.codings.clear();
            for (const auto& s : split_list(origin, line, value)) {
                if (s == "fixed") spec.codings.push_back(Coding::Fixed);
                else if (s == "variable") spec.codings.push_back(Coding::Variable);
                else parse_fail(origin, line, "coding must be fixed|variable");
            }
        } else if (key == "M") {
            spec.m_values = ints();
            for (int m : spec.m_values)
                if (m < 0) parse_fail(origin, line, "M must be >= 0");
        } else if (key == "N") {
            spec.n_values = doubles();
            for (double n : spec.n_values)
                if (n < 0.0) parse_fail(origin, line, "N must be >= 0 (0 = deterministic)");
        } else if (key == "w") {
            spec.w_values = doubles();
        } else if (key == "snr_db") {
            spec.snr_db_values = doubles();
        } else if (key == "p_b") {
            spec.pb_values = doubles();
            for (double p : spec.pb_values)
                if (p < 0.0 || p > 1.0) parse_fail(origin, line, "p_b must lie in [0,1]");
        } else {
            parse_fail(origin, line, "unknown key '" + key + "'");
        }
    }
    if (spec.protocols.empty() || spec.scenarios.empty() || spec.codings.empty() ||
        spec.m_values.empty() || spec.n_values.empty() || spec.w_values.empty() ||
        spec.snr_db_values.empty() || spec.pb_values.empty())
        parse_fail(origin, line, "empty experiment grid");
    for (Coding c : spec.codings)
        if (c == Coding::Variable) {
            for (Protocol p : spec.protocols)
                if (p != Protocol::InrFixed)
                    parse_fail(origin, line, "coding=variable applies to protocol inr only");
            for (Scenario s : spec.scenarios)
                if (s == Scenario::ShortLc)
                    parse_fail(origin, line, "coding=variable is unsupported under scenario short");
        }
    if (spec.optimize == OptimizeMode::None && !r_set)
        parse_fail(origin, line, "objective none requires a fixed rate R");
    if (spec.optimize == OptimizeMode::MinOutage && !r_set)
        parse_fail(origin, line, "objective min_outage requires a fixed rate R");
    return spec;
}

// ---------------------------------------------------------------------------
// cells and rows

struct Cell {
    Protocol base_protocol;  // Basic/Rtd/InrFixed
    Scenario scenario;
    Coding coding;
    int max_retx;
    double n_shape, w, snr_db, p_b;

    Protocol protocol() const {
        if (base_protocol == Protocol::InrFixed && coding == Coding::Variable)
            return Protocol::InrVariable;
        return base_protocol;
    }
    ArqConfig config() const {
        ArqConfig c;
        c.protocol = protocol();
        c.max_retx = max_retx;
        c.scenario = scenario;
        c.p_b = p_b;
        c.fading = n_shape == 0.0 ? FadingDistribution::deterministic(w)
                                  : FadingDistribution::nakagami(n_shape, w);
        return c;
    }
    uint64_t derive_seed(uint64_t master) const {
        return hash_combine(master, static_cast<uint64_t>(protocol()),
                            static_cast<uint64_t>(scenario), static_cast<uint64_t>(max_retx),
                            bits_of(n_shape), bits_of(w), bits_of(snr_db), bits_of(p_b));
    }
    const char* protocol_name() const {
        switch (base_protocol) {
            case Protocol::Basic: return "basic";
            case Protocol::Rtd: return "rtd";
            default: return "inr";
        }
    }
};

std::vector<Cell> enumerate_cells(const ExperimentSpec& spec) {
    std::vector<Cell> cells;
    for (Protocol p : spec.protocols)
        for (Scenario s : spec.scenarios)
            for (Coding c : spec.codings)
                for (int m : spec.m_values)
                    for (double n : spec.n_values)
                        for (double w : spec.w_values)
                            for (double snr : spec.snr_db_values)
                                for (double pb : spec.pb_values)
                                    cells.push_back(Cell{p, s, c, m, n, w, snr, pb});
    return cells;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// Re-asserted before each row is written; all of these are structural
// identities of the stop distribution and its derived metrics.
void assert_row_invariants(const StopDistribution& sd, const PerformanceReport& r,
                           const RatePolicy& rp) {
    const double tol = 1e-9;
    double sum_a = 0.0, sum_s = 0.0, bound = 0.0;
    for (int m = 1; m <= sd.rounds(); ++m) {
        sum_a += sd.pr_a[m - 1];
        sum_s += sd.pr_s[m - 1];
        bound += rp.equiv_rates[m - 1] * sd.pr_a[m - 1];
        if (sd.pr_s[m - 1] > sd.pr_a[m - 1] + 1e-12)
            throw InvariantViolation("row invariant: Pr(S_m) exceeds Pr(A_m)");
    }
    if (std::fabs(sum_a - 1.0) > tol)
        throw InvariantViolation("row invariant: stop probabilities do not sum to 1");
    if (std::fabs(sum_s - (1.0 - sd.outage)) > tol)
        throw InvariantViolation("row invariant: success-stop mass != 1 - outage");
    if (std::fabs((r.expected_rounds - r.feedback_load) - sd.pr_a.back()) > tol)
        throw InvariantViolation("row invariant: rounds/feedback-load identity broken");
    if (r.eta_dl < (1.0 - r.outage) * r.eta_lt - tol)
        throw InvariantViolation("row invariant: delay-limited throughput bound broken");
    if (r.eta_lt > bound + tol)
        throw InvariantViolation("row invariant: long-term throughput exceeds rate bound");
}

std::string format_row(const Cell& cell, const char* engine, double rate,
                       const PowerPolicy& pp, const PerformanceReport& r,
                       const PerformanceReport* se, uint64_t n_packets, uint64_t seed) {
    std::ostringstream os;
    os << cell.protocol_name() << ',' << to_string(cell.scenario) << ','
       << (cell.coding == Coding::Fixed ? "fixed" : "variable") << ',' << cell.max_retx << ','
       << fmt(cell.n_shape) << ',' << fmt(cell.w) << ',' << fmt(cell.snr_db) << ','
       << fmt(cell.p_b) << ',' << engine << ',' << fmt(rate);
    for (int i = 0; i < 5; ++i)
        os << ',' << (i < pp.rounds() ? fmt(pp.powers[i]) : std::string());
    os << ',' << fmt(r.eta_lt) << ',' << fmt(r.eta_dl) << ',' << fmt(r.outage) << ','
       << fmt(r.avg_power) << ',' << fmt(r.feedback_load) << ',' << fmt(r.expected_rounds);
    if (se)
        os << ',' << fmt(se->eta_lt) << ',' << fmt(se->eta_dl) << ',' << fmt(se->outage) << ','
           << n_packets;
    else
        os << ",,,,";
    os << ',' << seed << '\n';
    return os.str();
}

struct PolicyChoice {
    PowerPolicy pp;
    RatePolicy rp;
};

// Rate/power selection for a cell: uniform at the budget unless an
// optimization objective is set.
PolicyChoice choose_policy(const ExperimentSpec& spec, const Cell& cell, int threads) {
    const ArqConfig cfg = cell.config();
    const double budget = db_to_linear(cell.snr_db);
    if (spec.optimize == OptimizeMode::None) {
        return {PowerPolicy::uniform(budget, cfg.rounds()),
                cfg.protocol == Protocol::InrVariable
                    ? RatePolicy::variable([&] {
                          std::vector<double> l(static_cast<size_t>(cfg.rounds()));
                          for (int m = 1; m <= cfg.rounds(); ++m) l[m - 1] = *spec.fixed_rate / m;
                          return l;
                      }())
                    : RatePolicy::fixed_length(*spec.fixed_rate, cfg.rounds())};
    }
    OptProblem prob;
    prob.config = cfg;
    prob.power_budget = budget;
    prob.threads = threads;
    switch (spec.optimize) {
        case OptimizeMode::MaxLongTerm: prob.objective = Objective::MaxLongTerm; break;
        case OptimizeMode::MaxDelayLimited: prob.objective = Objective::MaxDelayLimited; break;
        default: prob.objective = Objective::MinOutage; break;
    }
    if (spec.optimize == OptimizeMode::MinOutage || spec.fixed_rate)
        prob.fixed_rate = spec.fixed_rate;
    const OptResult res = solve(prob);
    return {res.powers, res.rates};
}

struct OutputWriter {
    std::string path;
    std::ofstream out;
    std::vector<std::string> kept_rows;  // complete rows found when resuming

    OutputWriter(const std::string& p, bool resume, const std::string& header) : path(p) {
        std::string keep;
        if (resume) {
            std::ifstream in(path);
            if (in) {
                std::string content((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
                // drop any incomplete trailing line
                const auto last_nl = content.find_last_of('\n');
                if (last_nl != std::string::npos) content = content.substr(0, last_nl + 1);
                else content.clear();
                if (!content.empty()) {
                    std::istringstream is(content);
                    std::string first;
                    std::getline(is, first);
                    if (first + "\n" != header)
                        throw std::runtime_error("resume: header mismatch in " + path);
                    std::string line;
                    while (std::getline(is, line)) kept_rows.push_back(line);
                    keep = content;
                }
            }
        }
        out.open(path, std::ios::trunc | std::ios::binary);
        if (!out) throw std::runtime_error("cannot open output path " + path);
        if (!keep.empty()) {
            out << keep;
        } else {
            out << header;
        }
    }
};

}  // namespace

const char* const kCsvHeader =
    "protocol,scenario,coding,M,N,w,snr_db,p_b,engine,R,P1,P2,P3,P4,P5,"
    "eta_lt,eta_dl,outage,avg_power,fb_load,exp_rounds,"
    "se_eta_lt,se_eta_dl,se_outage,n_packets,seed\n";

ExperimentSpec parse_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read spec file " + path);
    return parse_spec(in, path);
}

ExperimentSpec parse_spec_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    return parse_spec(in, origin);
}

size_t run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
    const uint64_t master_seed = options.seed.value_or(spec.seed);
    const uint64_t packets = options.packets.value_or(spec.mc_packets);
    if ((spec.engine != Engine::Analytic) && packets < 1000)
        throw std::invalid_argument("mc_packets must be >= 1e3");
    const std::string path = options.out_override.empty() ? spec.out_path : options.out_override;
    if (path.empty()) throw std::invalid_argument("no output path configured");

    const std::vector<Cell> cells = enumerate_cells(spec);

    // one unit per (cell, engine) in deterministic order
    struct Unit { size_t cell; bool mc; };
    std::vector<Unit> units;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (spec.engine != Engine::MonteCarlo) units.push_back({i, false});
        if (spec.engine != Engine::Analytic) units.push_back({i, true});
    }

    OutputWriter writer(path, options.resume, kCsvHeader);
    const size_t first_unit = std::min(writer.kept_rows.size(), units.size());
    // resumed rows must belong to this spec's cells, in this grid order
    for (size_t u = 0; u < first_unit; ++u) {
        const Cell& cell = cells[units[u].cell];
        std::ostringstream prefix;
        prefix << cell.protocol_name() << ',' << to_string(cell.scenario) << ','
               << (cell.coding == Coding::Fixed ? "fixed" : "variable") << ',' << cell.max_retx
               << ',' << fmt(cell.n_shape) << ',' << fmt(cell.w) << ',' << fmt(cell.snr_db)
               << ',' << fmt(cell.p_b) << ',' << (units[u].mc ? "mc" : "analytic") << ',';
        if (writer.kept_rows[u].rfind(prefix.str(), 0) != 0)
            throw std::runtime_error("resume: row " + std::to_string(u + 1) + " in " + path +
                                     " does not match this spec's cell order");
    }

    std::vector<std::string> rows(units.size());
    std::exception_ptr failure;
    const bool outer_parallel = units.size() - first_unit >= 4;
    const int inner_threads = outer_parallel ? 1 : options.threads;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (outer_parallel) \
    num_threads(options.threads > 0 ? options.threads : omp_get_max_threads())
#endif
    for (int64_t u = static_cast<int64_t>(first_unit); u < static_cast<int64_t>(units.size());
         ++u) {
        try {
            const Cell& cell = cells[units[u].cell];
            const ArqConfig cfg = cell.config();
            const uint64_t cell_seed = cell.derive_seed(master_seed);
            const PolicyChoice pol = choose_policy(spec, cell, inner_threads);
            if (units[u].mc) {
                const McReport mc = estimate_report(cfg, pol.pp, pol.rp, packets, cell_seed,
                                                    inner_threads);
                assert_row_invariants(mc.stop, mc.report, pol.rp);
                rows[u] = format_row(cell, "mc", pol.rp.initial_rate, pol.pp, mc.report,
                                     &mc.stderrs, packets, cell_seed);
            } else {
                const StopDistribution sd =
                    stop_distribution(cfg, pol.pp, pol.rp, analysis_settings(cfg));
                const PerformanceReport r = derive_report(sd, pol.pp, pol.rp);
                assert_row_invariants(sd, r, pol.rp);
                rows[u] = format_row(cell, "analytic", pol.rp.initial_rate, pol.pp, r, nullptr,
                                     0, cell_seed);
            }
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    for (size_t u = first_unit; u < units.size(); ++u) writer.out << rows[u];
    writer.out.flush();
    return units.size();
}

namespace {

// Shared machinery for the region commands: evaluate a cell's metric as a
// function of p_b with everything else pinned.
double outage_at(const ExperimentSpec& spec, const Cell& base, double p_b, int threads) {
    Cell cell = base;
    cell.p_b = p_b;
    const ArqConfig cfg = cell.config();
    const PolicyChoice pol = choose_policy(spec, cell, threads);
    return stop_distribution(cfg, pol.pp, pol.rp, analysis_settings(cfg)).outage;
}

double eta_lt_at(const ExperimentSpec& spec, const Cell& base, double p_b, int threads) {
    Cell cell = base;
    cell.p_b = p_b;
    const ArqConfig cfg = cell.config();
    const PolicyChoice pol = choose_policy(spec, cell, threads);
    const auto sd = stop_distribution(cfg, pol.pp, pol.rp, analysis_settings(cfg));
    return long_term_throughput(sd, pol.rp);
}

// Largest p_b in [0, 0.5] with pred(p_b) true, given pred(0) true and pred
// monotone (true below the boundary). Returns 0.5 when true everywhere.
template <typename Pred>
double bisect_boundary(Pred&& pred, double tol) {
    if (pred(0.5)) return 0.5;
    double lo = 0.0, hi = 0.5;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (pred(mid)) lo = mid; else hi = mid;
    }
    return lo;
}

std::vector<Cell> boundary_cells(const ExperimentSpec& spec) {
    ExperimentSpec pinned = spec;
    pinned.pb_values = {0.0};  // p_b is the bisection variable, not an axis
    return enumerate_cells(pinned);
}

}  // namespace

size_t beta_region(const ExperimentSpec& spec, double beta_percent, const RunOptions& options,
                   double pb_tolerance) {
    const std::string path = options.out_override.empty() ? spec.out_path : options.out_override;
    if (path.empty()) throw std::invalid_argument("no output path configured");
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output path " + path);
    out << "# boundary: largest p_b with [Pout(p_b)-Pout(0)]/Pout(0) <= beta%\n";
    out << "# power allocation: "
        << (spec.optimize == OptimizeMode::None ? "uniform" : "optimized per p_b") << "\n";
    out << "protocol,scenario,coding,M,N,w,snr_db,beta_pct,outage_pb0,boundary_p_b,flag\n";

    const std::vector<Cell> cells = boundary_cells(spec);
    std::vector<std::string> rows(cells.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (cells.size() >= 4) \
    num_threads(options.threads > 0 ? options.threads : omp_get_max_threads())
#endif
    for (int64_t i = 0; i < static_cast<int64_t>(cells.size()); ++i) {
        const Cell& cell = cells[i];
        const int threads = cells.size() >= 4 ? 1 : options.threads;
        const double out0 = outage_at(spec, cell, 0.0, threads);
        std::ostringstream os;
        os << cell.protocol_name() << ',' << to_string(cell.scenario) << ','
           << (cell.coding == Coding::Fixed ? "fixed" : "variable") << ',' << cell.max_retx
           << ',' << fmt(cell.n_shape) << ',' << fmt(cell.w) << ',' << fmt(cell.snr_db) << ','
           << fmt(beta_percent) << ',' << fmt(out0) << ',';
        if (out0 <= 0.0) {
            os << ",undefined\n";  // relative inflation has no meaning at zero outage
        } else {
            const double target = beta_percent / 100.0;
            const double boundary = bisect_boundary(
                [&](double pb) {
                    return (outage_at(spec, cell, pb, threads) - out0) / out0 <= target;
                },
                pb_tolerance);
            os << fmt(boundary) << ',' << (boundary >= 0.5 ? "ceiling" : "ok") << '\n';
        }
        rows[i] = os.str();
    }
    for (const auto& r : rows) out << r;
    return cells.size();
}

size_t relative_throughput(const ExperimentSpec& spec, const RunOptions& options) {
    const std::string path = options.out_override.empty() ? spec.out_path : options.out_override;
    if (path.empty()) throw std::invalid_argument("no output path configured");
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output path " + path);
    out << "# zeta: 100 * (eta_lt - baseline) / baseline\n";
    out << "# numerator: eta_lt at the cell's p_b, "
        << (spec.optimize == OptimizeMode::None ? "uniform power, rate re-optimized"
                                                : "re-optimized per cell")
        << "\n";
    out << "# baseline: noise-free uniform-power eta_lt at its own optimal rate\n";
    out << "protocol,scenario,coding,M,N,w,snr_db,p_b,eta_lt,baseline_eta_lt,zeta_pct\n";

    const std::vector<Cell> cells = enumerate_cells(spec);
    std::vector<std::string> rows(cells.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (cells.size() >= 4) \
    num_threads(options.threads > 0 ? options.threads : omp_get_max_threads())
#endif
    for (int64_t i = 0; i < static_cast<int64_t>(cells.size()); ++i) {
        const Cell& cell = cells[i];
        const int threads = cells.size() >= 4 ? 1 : options.threads;

        // baseline: uniform power, p_b = 0, rate at its own optimum
        auto uniform_best = [&](double pb) {
            OptProblem prob;
            prob.objective = Objective::MaxLongTerm;
            Cell c = cell;
            c.p_b = pb;
            prob.config = c.config();
            prob.power_budget = db_to_linear(cell.snr_db);
            prob.uniform_power = true;
            prob.threads = threads;
            return solve(prob).objective_value;
        };
        const double baseline = uniform_best(0.0);
        const double eta = spec.optimize == OptimizeMode::None
                               ? uniform_best(cell.p_b)
                               : eta_lt_at(spec, cell, cell.p_b, threads);
        const double zeta = 100.0 * (eta - baseline) / baseline;
        std::ostringstream os;
        os << cell.protocol_name() << ',' << to_string(cell.scenario) << ','
           << (cell.coding == Coding::Fixed ? "fixed" : "variable") << ',' << cell.max_retx
           << ',' << fmt(cell.n_shape) << ',' << fmt(cell.w) << ',' << fmt(cell.snr_db) << ','
           << fmt(cell.p_b) << ',' << fmt(eta) << ',' << fmt(baseline) << ',' << fmt(zeta)
           << '\n';
        rows[i] = os.str();
    }
    for (const auto& r : rows) out << r;
    return cells.size();
}

size_t usefulness_region(const ExperimentSpec& spec, const RunOptions& options,
                         double pb_tolerance) {
    if (!spec.fixed_rate)
        throw std::invalid_argument("usefulness region requires a fixed rate R");
    const std::string path = options.out_override.empty() ? spec.out_path : options.out_override;
    if (path.empty()) throw std::invalid_argument("no output path configured");
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output path " + path);
    out << "# boundary: largest p_b with ARQ eta_lt >= open-loop eta at equal rate and budget\n";
    out << "protocol,scenario,coding,M,N,w,snr_db,R,eta_open_loop,boundary_p_b,flag\n";

    const std::vector<Cell> cells = boundary_cells(spec);
    std::vector<std::string> rows(cells.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (cells.size() >= 4) \
    num_threads(options.threads > 0 ? options.threads : omp_get_max_threads())
#endif
    for (int64_t i = 0; i < static_cast<int64_t>(cells.size()); ++i) {
        const Cell& cell = cells[i];
        const int threads = cells.size() >= 4 ? 1 : options.threads;
        const double power = db_to_linear(cell.snr_db);
        const double open_loop =
            open_loop_throughput(cell.config().fading, *spec.fixed_rate, power);
        auto useful = [&](double pb) {
            return eta_lt_at(spec, cell, pb, threads) >= open_loop;
        };
        std::ostringstream os;
        os << cell.protocol_name() << ',' << to_string(cell.scenario) << ','
           << (cell.coding == Coding::Fixed ? "fixed" : "variable") << ',' << cell.max_retx
           << ',' << fmt(cell.n_shape) << ',' << fmt(cell.w) << ',' << fmt(cell.snr_db) << ','
           << fmt(*spec.fixed_rate) << ',' << fmt(open_loop) << ',';
        const double eta0 = eta_lt_at(spec, cell, 0.0, threads);
        if (std::fabs(eta0 - open_loop) <= 1e-12 * std::max(1.0, open_loop)) {
            // e.g. a deterministic channel decodable in round one: ARQ merely
            // matches the single shot, the boundary carries no information
            os << fmt(0.0) << ",degenerate_equal\n";
        } else if (eta0 < open_loop) {
            os << fmt(0.0) << ",never_useful\n";
        } else if (useful(0.5)) {
            os << fmt(0.5) << ",always_useful\n";
        } else {
            os << fmt(bisect_boundary(useful, pb_tolerance)) << ",ok\n";
        }
        rows[i] = os.str();
    }
    for (const auto& r : rows) out << r;
    return cells.size();
}

bool verify_grid(uint64_t packets, uint64_t seed, int threads, std::ostream& out) {
    ExperimentSpec spec;
    spec.protocols = {Protocol::Basic, Protocol::Rtd, Protocol::InrFixed};
    spec.scenarios = {Scenario::LongLc, Scenario::ShortLc};
    spec.codings = {Coding::Fixed};
    spec.m_values = {1, 2};
    spec.pb_values = {0.0, 0.05, 0.2};
    spec.snr_db_values = {0.0, 5.0, 10.0};
    spec.n_values = {1.0, 2.0};
    spec.fixed_rate = 0.4;

    const std::vector<Cell> cells = enumerate_cells(spec);
    std::vector<std::string> lines(cells.size());
    std::vector<char> ok(cells.size(), 1);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) \
    num_threads(threads > 0 ? threads : omp_get_max_threads())
#endif
    for (int64_t i = 0; i < static_cast<int64_t>(cells.size()); ++i) {
        const Cell& cell = cells[i];
        const ArqConfig cfg = cell.config();
        const double power = db_to_linear(cell.snr_db);
        const auto pp = PowerPolicy::uniform(power, cfg.rounds());
        const auto rp = RatePolicy::fixed_length(*spec.fixed_rate, cfg.rounds());
        const auto sd = stop_distribution(cfg, pp, rp, analysis_settings(cfg));
        const auto ar = derive_report(sd, pp, rp);
        const McReport mc = estimate_report(cfg, pp, rp, packets, cell.derive_seed(seed), 1);
        const HypothesisErrors he = hypothesis_stderrs(sd, pp, rp, packets);

        double worst = 0.0;
        std::string worst_name = "-";
        auto check = [&](const char* name, double a, double m, double se, double se_h0) {
            const double z = std::fabs(a - m) / std::max(4.0 * std::max(se, se_h0), 1e-9);
            if (z > worst) { worst = z; worst_name = name; }
        };
        check("outage", ar.outage, mc.report.outage, mc.stderrs.outage, he.report.outage);
        check("eta_lt", ar.eta_lt, mc.report.eta_lt, mc.stderrs.eta_lt, he.report.eta_lt);
        check("eta_dl", ar.eta_dl, mc.report.eta_dl, mc.stderrs.eta_dl, he.report.eta_dl);
        check("avg_power", ar.avg_power, mc.report.avg_power, mc.stderrs.avg_power,
              he.report.avg_power);
        check("fb_load", ar.feedback_load, mc.report.feedback_load, mc.stderrs.feedback_load,
              he.report.feedback_load);
        check("exp_rounds", ar.expected_rounds, mc.report.expected_rounds,
              mc.stderrs.expected_rounds, he.report.expected_rounds);
        for (int m = 0; m < cfg.rounds(); ++m) {
            check("pr_a", sd.pr_a[m], mc.stop.pr_a[m], mc.se_pr_a[m], he.pr_a[m]);
            check("pr_s", sd.pr_s[m], mc.stop.pr_s[m], mc.se_pr_s[m], he.pr_s[m]);
        }
        ok[i] = worst <= 1.0 ? 1 : 0;
        std::ostringstream os;
        os << (ok[i] ? "PASS" : "FAIL") << "  " << cell.protocol_name() << "/"
           << to_string(cell.scenario) << " M=" << cell.max_retx << " N=" << cell.n_shape
           << " snr=" << cell.snr_db << "dB p_b=" << cell.p_b << "  worst=" << worst_name
           << " (" << worst << "x of 4se)";
        lines[i] = os.str();
    }
    bool all = true;
    for (size_t i = 0; i < cells.size(); ++i) {
        out << lines[i] << "\n";
        if (!ok[i]) all = false;
    }
    out << (all ? "verify: all cells PASS" : "verify: FAIL") << " (" << cells.size()
        << " cells, " << packets << " packets each)\n";
    return all;
}

}  // namespace arq
