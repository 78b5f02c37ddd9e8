// Event-level packet simulator with explicit ACK/NACK bit-flip semantics.
//
// Each packet draws its gains up front (one for the whole packet under
// long-Lc, one per round under short-Lc), determines the noise-free decode
// round from the protocol's accumulated-information test, then walks the
// feedback ladder: the receiver emits ACK iff it has decoded (that round or
// earlier), each bit flips independently with probability p_b, and the
// transmitter stops on the first received ACK or after the final round.
// No feedback bit follows the final round.
//
// Packet i draws from an independent stream seeded by hash(seed, i), so
// estimates are bit-identical regardless of batch partitioning or thread
// count. estimate_report_serial is the plain-loop reference against which
// the OpenMP path is tested.

#pragma once

#include <cstdint>
#include <vector>

#include "arq/analytic.hpp"
#include "arq/model.hpp"
#include "arq/rng.hpp"

namespace arq {

struct PacketOutcome {
    int stop_round = 0;     // m*: round after which transmission stopped
    int decoded_round = 0;  // first decodable round (0 if never decodable)
    bool success = false;   // decoded at or before the stop round
    double channel_uses = 0.0;   // sum l_n for n <= stop, with Q = 1 nat
    double energy = 0.0;         // sum P_n l_n for n <= stop
    double achieved_rate = 0.0;  // R^(stop) if success else 0
};

PacketOutcome simulate_packet(const ArqConfig& config, const PowerPolicy& pp,
                              const RatePolicy& rp, RngStream& rng);

struct McReport {
    PerformanceReport report;
    PerformanceReport stderrs;     // standard error of each report field
    StopDistribution stop;         // estimated pr_m / pr_a / pr_s / outage
    std::vector<double> se_pr_a;
    std::vector<double> se_pr_s;
    uint64_t n_packets = 0;
    uint64_t seed = 0;
};

McReport estimate_report(const ArqConfig& config, const PowerPolicy& pp, const RatePolicy& rp,
                         uint64_t n_packets, uint64_t seed, int threads = 0);
McReport estimate_report_serial(const ArqConfig& config, const PowerPolicy& pp,
                                const RatePolicy& rp, uint64_t n_packets, uint64_t seed);

// Standard errors an n-packet estimate would have if the analytic stop
// distribution were the truth. Empirical standard errors collapse to zero
// when no rare event lands in the sample; the hypothesis errors keep the
// four-standard-error comparison meaningful there.
struct HypothesisErrors {
    PerformanceReport report;
    std::vector<double> pr_a, pr_s;
};
HypothesisErrors hypothesis_stderrs(const StopDistribution& sd, const PowerPolicy& pp,
                                    const RatePolicy& rp, uint64_t n_packets);

// Demonstrates the short-Lc <-> long-Lc equivalence: a fixed-length protocol
// with uniform power P under per-round fading is simulated next to a long-Lc
// system whose round powers are randomized as P~_n = (g_n / g) P, so that
// 1 + g P~_n has the law of 1 + g_n P. Reports both estimates, per-round
// two-sample KS statistics of the accumulated information, and the mapped
// system's average power (which differs from P in general).
struct ShortLongEquivalence {
    McReport native_short;
    McReport mapped_long;
    std::vector<double> ks_accumulated_info;  // one entry per round
    double mapped_avg_power = 0.0;            // == mapped_long.report.avg_power
    double uniform_power = 0.0;
};

ShortLongEquivalence map_short_to_long(const FadingDistribution& fading, double power,
                                       int max_retx, double rate, Protocol protocol, double p_b,
                                       uint64_t n_packets, uint64_t seed, int threads = 0);

}  // namespace arq
