// Shared configuration and result types.
//
// Conventions used throughout the engines:
//   * up to max_retx retransmissions, i.e. rounds m = 1 .. max_retx+1;
//   * R^(m) is the equivalent rate after m rounds, with the virtual
//     R^(0) = +inf, so the weight 1/R^(m) - 1/R^(m-1) of round m uses
//     1/R^(0) = 0;
//   * powers are per-channel-use SNRs (noise variance 1), linear scale;
//   * rates are in nats per channel use.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "arq/fading.hpp"

namespace arq {

enum class Protocol { Basic, Rtd, InrFixed, InrVariable };
enum class Scenario { LongLc, ShortLc };

const char* to_string(Protocol p);
const char* to_string(Scenario s);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double p) { return 10.0 * std::log10(p); }

struct ArqConfig {
    Protocol protocol = Protocol::Rtd;
    int max_retx = 1;  // M
    Scenario scenario = Scenario::LongLc;
    double p_b = 0.0;  // feedback bit error probability
    FadingDistribution fading = FadingDistribution::nakagami(2.0);

    int rounds() const { return max_retx + 1; }
};

struct PowerPolicy {
    std::vector<double> powers;  // P_1 .. P_{M+1}, linear SNR

    static PowerPolicy uniform(double power, int rounds);
    int rounds() const { return static_cast<int>(powers.size()); }
};

struct RatePolicy {
    double initial_rate = 0.0;         // R = R^(1)
    std::vector<double> equiv_rates;   // R^(1) .. R^(M+1), strictly decreasing

    // Fixed-length ladder R^(m) = R/m.
    static RatePolicy fixed_length(double rate, int rounds);
    // Free decreasing ladder (variable-length INR).
    static RatePolicy variable(std::vector<double> ladder);
    // Ladder R^(m) = log(1 + (e^rtd_rate - 1)/m): per-round decode thresholds
    // under uniform power coincide with an RTD ladder at rate rtd_rate.
    static RatePolicy threshold_matched(double rtd_rate, int rounds);

    int rounds() const { return static_cast<int>(equiv_rates.size()); }

    // 1/R^(m) - 1/R^(m-1) for m in 1..rounds; equals l_m/Q, the round-m
    // codeword length normalized by the packet's information content.
    double inv_rate_step(int m) const {
        return 1.0 / equiv_rates[m - 1] - (m == 1 ? 0.0 : 1.0 / equiv_rates[m - 2]);
    }
};

struct StopDistribution {
    std::vector<double> pr_m;  // noise-free decode-exactly-at-round-m
    std::vector<double> pr_a;  // Pr(A_m): stop at round m
    std::vector<double> pr_s;  // Pr(S_m): stop at m with data decoded
    double outage = 0.0;

    int rounds() const { return static_cast<int>(pr_a.size()); }
};

struct PerformanceReport {
    double eta_lt = 0.0;          // long-term throughput, npcu
    double eta_dl = 0.0;          // delay-limited throughput, npcu
    double avg_power = 0.0;       // phi
    double feedback_load = 0.0;   // expected feedback bits per packet
    double expected_rounds = 0.0; // expected (re)transmission rounds
    double outage = 0.0;
};

struct Violation {
    std::string code;
    std::string message;
};

// Checks every type-level invariant; violations are data, not exceptions.
std::vector<Violation> validate(const ArqConfig& config, const PowerPolicy& pp,
                                const RatePolicy& rp);

uint64_t hash_combine(uint64_t seed, const ArqConfig& config);
uint64_t hash_combine(uint64_t seed, const PowerPolicy& pp);
uint64_t hash_combine(uint64_t seed, const RatePolicy& rp);

}  // namespace arq
