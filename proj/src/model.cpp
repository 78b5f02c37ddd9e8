#include "arq/model.hpp"

#include <cmath>
#include <stdexcept>

namespace arq {

const char* to_string(Protocol p) {
    switch (p) {
        case Protocol::Basic: return "basic";
        case Protocol::Rtd: return "rtd";
        case Protocol::InrFixed: return "inr_fixed";
        case Protocol::InrVariable: return "inr_variable";
    }
    return "?";
}

const char* to_string(Scenario s) {
    return s == Scenario::LongLc ? "long" : "short";
}

PowerPolicy PowerPolicy::uniform(double power, int rounds) {
    if (rounds < 1) throw std::invalid_argument("uniform: rounds must be >= 1");
    return PowerPolicy{std::vector<double>(static_cast<size_t>(rounds), power)};
}

RatePolicy RatePolicy::fixed_length(double rate, int rounds) {
    if (rounds < 1) throw std::invalid_argument("fixed_length: rounds must be >= 1");
    RatePolicy rp;
    rp.initial_rate = rate;
    rp.equiv_rates.resize(static_cast<size_t>(rounds));
    for (int m = 1; m <= rounds; ++m) rp.equiv_rates[m - 1] = rate / m;
    return rp;
}

RatePolicy RatePolicy::variable(std::vector<double> ladder) {
    if (ladder.empty()) throw std::invalid_argument("variable: empty ladder");
    RatePolicy rp;
    rp.initial_rate = ladder.front();
    rp.equiv_rates = std::move(ladder);
    return rp;
}

RatePolicy RatePolicy::threshold_matched(double rtd_rate, int rounds) {
    RatePolicy rp;
    rp.equiv_rates.resize(static_cast<size_t>(rounds));
    for (int m = 1; m <= rounds; ++m)
        rp.equiv_rates[m - 1] = std::log1p(std::expm1(rtd_rate) / m);
    rp.initial_rate = rp.equiv_rates.front();
    return rp;
}

std::vector<Violation> validate(const ArqConfig& config, const PowerPolicy& pp,
                                const RatePolicy& rp) {
    std::vector<Violation> v;
    const int rounds = config.rounds();

    if (config.max_retx < 0)
        v.push_back({"config.max_retx", "max_retx must be >= 0"});
    if (!(config.p_b >= 0.0 && config.p_b <= 1.0))
        v.push_back({"config.pb_range", "feedback bit error probability outside [0,1]"});
    if (config.protocol == Protocol::InrVariable && config.scenario == Scenario::ShortLc)
        v.push_back({"config.variable_short_lc", "variable-length short-Lc unsupported"});

    if (pp.rounds() != rounds)
        v.push_back({"powers.size", "power policy length differs from max_retx+1"});
    for (double p : pp.powers)
        if (!(p > 0.0)) {
            v.push_back({"powers.nonpositive", "all per-round powers must be positive"});
            break;
        }

    if (rp.rounds() != rounds)
        v.push_back({"equiv_rates.size", "rate ladder length differs from max_retx+1"});
    bool rates_ok = true;
    for (double r : rp.equiv_rates)
        if (!(r > 0.0)) {
            v.push_back({"equiv_rates.nonpositive", "equivalent rates must be positive"});
            rates_ok = false;
            break;
        }
    if (rates_ok)
        for (size_t i = 1; i < rp.equiv_rates.size(); ++i)
            if (!(rp.equiv_rates[i] < rp.equiv_rates[i - 1])) {
                v.push_back({"equiv_rates.not_decreasing", "equiv rates not decreasing"});
                break;
            }
    if (!rp.equiv_rates.empty() && rp.equiv_rates.front() != rp.initial_rate)
        v.push_back({"rates.initial_mismatch", "initial_rate must equal R^(1)"});

    // Fixed-length protocols demand the exact R/m ladder.
    if (config.protocol != Protocol::InrVariable && rp.rounds() == rounds) {
        for (int m = 1; m <= rounds; ++m)
            if (rp.equiv_rates[m - 1] != rp.initial_rate / m) {
                v.push_back({"rate_ladder.fixed_mismatch",
                             "fixed-length protocol requires R^(m) = R/m"});
                break;
            }
    }

    // With one gain for the whole packet, re-sending a plain copy at lower
    // power can never help a receiver that just failed, so basic ARQ power
    // ladders must be nondecreasing. Checked as a predicate, not enforced
    // by construction.
    if (config.protocol == Protocol::Basic && config.scenario == Scenario::LongLc &&
        pp.rounds() == rounds) {
        for (int m = 1; m < rounds; ++m)
            if (pp.powers[m] < pp.powers[m - 1]) {
                v.push_back({"basic_powers.not_increasing",
                             "basic ARQ long-Lc powers must be nondecreasing"});
                break;
            }
    }
    return v;
}

uint64_t hash_combine(uint64_t seed, const ArqConfig& config) {
    seed = hash_combine(seed, static_cast<uint64_t>(config.protocol),
                        static_cast<uint64_t>(config.max_retx),
                        static_cast<uint64_t>(config.scenario), bits_of(config.p_b));
    return hash_combine(seed, config.fading);
}

uint64_t hash_combine(uint64_t seed, const PowerPolicy& pp) {
    for (double p : pp.powers) seed = hash_combine(seed, bits_of(p));
    return seed;
}

uint64_t hash_combine(uint64_t seed, const RatePolicy& rp) {
    seed = hash_combine(seed, bits_of(rp.initial_rate));
    for (double r : rp.equiv_rates) seed = hash_combine(seed, bits_of(r));
    return seed;
}

}  // namespace arq
