#include "arq/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace arq {
namespace {

constexpr uint64_t kPacketTag = 0x9a3cull;

// First round m at which the accumulated-information test passes; 0 if the
// data is never decodable within gains.size() rounds. gains[n] is the
// effective gain of round n+1 (identical entries under long-Lc).
int decode_round(Protocol protocol, const std::vector<double>& gains,
                 const std::vector<double>& powers, const RatePolicy& rp) {
    const int rounds = static_cast<int>(gains.size());
    switch (protocol) {
        case Protocol::Rtd: {
            double snr = 0.0;
            for (int m = 1; m <= rounds; ++m) {
                snr += gains[m - 1] * powers[m - 1];
                if (std::log1p(snr) >= rp.initial_rate) return m;
            }
            return 0;
        }
        case Protocol::Basic: {
            for (int m = 1; m <= rounds; ++m)
                if (std::log1p(gains[m - 1] * powers[m - 1]) >= rp.initial_rate) return m;
            return 0;
        }
        case Protocol::InrFixed: {
            double info = 0.0;
            for (int m = 1; m <= rounds; ++m) {
                info += std::log1p(gains[m - 1] * powers[m - 1]);
                if (info >= rp.initial_rate) return m;
            }
            return 0;
        }
        case Protocol::InrVariable:
        default: {
            double theta = 0.0;
            for (int m = 1; m <= rounds; ++m) {
                theta += rp.inv_rate_step(m) * std::log1p(gains[m - 1] * powers[m - 1]);
                if (theta >= 1.0) return m;
            }
            return 0;
        }
    }
}

PacketOutcome run_packet(const ArqConfig& config, const std::vector<double>& gains,
                         const std::vector<double>& powers, const RatePolicy& rp,
                         RngStream& rng) {
    const int rounds = config.rounds();
    PacketOutcome out;
    out.decoded_round = decode_round(config.protocol, gains, powers, rp);

    int stop = rounds;
    for (int m = 1; m <= config.max_retx; ++m) {
        const bool ack = out.decoded_round != 0 && out.decoded_round <= m;
        const bool flipped = rng.next_unit() < config.p_b;
        if (ack != flipped) {  // received ACK
            stop = m;
            break;
        }
    }
    out.stop_round = stop;
    out.success = out.decoded_round != 0 && out.decoded_round <= stop;
    out.channel_uses = 1.0 / rp.equiv_rates[stop - 1];
    double energy = 0.0;
    for (int n = 1; n <= stop; ++n) energy += powers[n - 1] * rp.inv_rate_step(n);
    out.energy = energy;
    out.achieved_rate = out.success ? rp.equiv_rates[stop - 1] : 0.0;
    return out;
}

void draw_gains(const ArqConfig& config, RngStream& rng, std::vector<double>& gains) {
    if (config.scenario == Scenario::LongLc) {
        const double g = config.fading.sample(rng);
        gains.assign(static_cast<size_t>(config.rounds()), g);
    } else {
        gains.resize(static_cast<size_t>(config.rounds()));
        for (auto& g : gains) g = config.fading.sample(rng);
    }
}

struct BatchStats {
    double success = 0.0, tau = 0.0, energy = 0.0;
    double rate = 0.0, rate2 = 0.0;
    double bits = 0.0, bits2 = 0.0;
    double rounds = 0.0, rounds2 = 0.0;
    std::vector<double> stop_count, stop_success_count, decode_count;
    uint64_t n = 0;

    explicit BatchStats(int r = 0)
        : stop_count(static_cast<size_t>(r), 0.0),
          stop_success_count(static_cast<size_t>(r), 0.0),
          decode_count(static_cast<size_t>(r), 0.0) {}

    void add(const PacketOutcome& o, int max_retx) {
        success += o.success ? 1.0 : 0.0;
        tau += o.channel_uses;
        energy += o.energy;
        rate += o.achieved_rate;
        rate2 += o.achieved_rate * o.achieved_rate;
        const double b = std::min(o.stop_round, max_retx);
        bits += b;
        bits2 += b * b;
        rounds += o.stop_round;
        rounds2 += static_cast<double>(o.stop_round) * o.stop_round;
        stop_count[o.stop_round - 1] += 1.0;
        if (o.success) stop_success_count[o.stop_round - 1] += 1.0;
        if (o.decoded_round > 0) decode_count[o.decoded_round - 1] += 1.0;
        ++n;
    }

    void merge(const BatchStats& b) {
        success += b.success; tau += b.tau; energy += b.energy;
        rate += b.rate; rate2 += b.rate2;
        bits += b.bits; bits2 += b.bits2;
        rounds += b.rounds; rounds2 += b.rounds2;
        for (size_t i = 0; i < stop_count.size(); ++i) {
            stop_count[i] += b.stop_count[i];
            stop_success_count[i] += b.stop_success_count[i];
            decode_count[i] += b.decode_count[i];
        }
        n += b.n;
    }
};

double se_of_mean(double sum, double sum2, double n) {
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    return std::sqrt(var / n);
}

double se_of_proportion(double count, double n) {
    const double p = count / n;
    return std::sqrt(std::max(0.0, p * (1.0 - p)) / n);
}

// Leave-one-batch-out jackknife for a ratio of totals.
double jackknife_ratio_se(const std::vector<BatchStats>& batches, double num_total,
                          double den_total, double BatchStats::*num, double BatchStats::*den) {
    const size_t nb = batches.size();
    if (nb < 2) return 0.0;
    std::vector<double> loo(nb);
    double mean = 0.0;
    for (size_t b = 0; b < nb; ++b) {
        loo[b] = (num_total - batches[b].*num) / (den_total - batches[b].*den);
        mean += loo[b];
    }
    mean /= static_cast<double>(nb);
    double ss = 0.0;
    for (double v : loo) ss += (v - mean) * (v - mean);
    return std::sqrt((nb - 1.0) / nb * ss);
}

McReport reduce(const ArqConfig& config, std::vector<BatchStats>&& batches, uint64_t n_packets,
                uint64_t seed) {
    const int rounds = config.rounds();
    BatchStats total(rounds);
    for (const auto& b : batches) total.merge(b);
    const double n = static_cast<double>(n_packets);

    McReport mc;
    mc.n_packets = n_packets;
    mc.seed = seed;

    mc.report.eta_lt = total.success / total.tau;
    mc.report.eta_dl = total.rate / n;
    mc.report.avg_power = total.energy / total.tau;
    mc.report.feedback_load = total.bits / n;
    mc.report.expected_rounds = total.rounds / n;
    mc.report.outage = 1.0 - total.success / n;

    mc.stderrs.eta_lt = jackknife_ratio_se(batches, total.success, total.tau,
                                           &BatchStats::success, &BatchStats::tau);
    mc.stderrs.avg_power = jackknife_ratio_se(batches, total.energy, total.tau,
                                              &BatchStats::energy, &BatchStats::tau);
    mc.stderrs.eta_dl = se_of_mean(total.rate, total.rate2, n);
    mc.stderrs.feedback_load = se_of_mean(total.bits, total.bits2, n);
    mc.stderrs.expected_rounds = se_of_mean(total.rounds, total.rounds2, n);
    mc.stderrs.outage = se_of_proportion(total.success, n);

    mc.stop.pr_m.resize(rounds);
    mc.stop.pr_a.resize(rounds);
    mc.stop.pr_s.resize(rounds);
    mc.se_pr_a.resize(rounds);
    mc.se_pr_s.resize(rounds);
    for (int m = 0; m < rounds; ++m) {
        mc.stop.pr_m[m] = total.decode_count[m] / n;
        mc.stop.pr_a[m] = total.stop_count[m] / n;
        mc.stop.pr_s[m] = total.stop_success_count[m] / n;
        mc.se_pr_a[m] = se_of_proportion(total.stop_count[m], n);
        mc.se_pr_s[m] = se_of_proportion(total.stop_success_count[m], n);
    }
    mc.stop.outage = mc.report.outage;
    return mc;
}

uint64_t batch_count(uint64_t n_packets) { return std::min<uint64_t>(256, n_packets); }

template <typename PacketFn>
BatchStats run_batch(const ArqConfig& config, uint64_t begin, uint64_t end, uint64_t seed,
                     PacketFn&& packet) {
    BatchStats stats(config.rounds());
    for (uint64_t i = begin; i < end; ++i) {
        RngStream rng(hash_combine(seed, kPacketTag, i));
        stats.add(packet(rng), config.max_retx);
    }
    return stats;
}

template <typename PacketFn>
McReport estimate_generic(const ArqConfig& config, uint64_t n_packets, uint64_t seed,
                          int threads, PacketFn&& packet) {
    if (n_packets < 1000) throw std::invalid_argument("estimate_report: need >= 1e3 packets");
    const uint64_t nb = batch_count(n_packets);
    std::vector<BatchStats> batches(nb, BatchStats(config.rounds()));
#ifdef _OPENMP
    if (threads != 1) {
        const int want = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(want)
        for (int64_t b = 0; b < static_cast<int64_t>(nb); ++b) {
            const uint64_t begin = n_packets * b / nb;
            const uint64_t end = n_packets * (b + 1) / nb;
            batches[b] = run_batch(config, begin, end, seed, packet);
        }
        return reduce(config, std::move(batches), n_packets, seed);
    }
#else
    (void)threads;
#endif
    for (uint64_t b = 0; b < nb; ++b) {
        const uint64_t begin = n_packets * b / nb;
        const uint64_t end = n_packets * (b + 1) / nb;
        batches[b] = run_batch(config, begin, end, seed, packet);
    }
    return reduce(config, std::move(batches), n_packets, seed);
}

}  // namespace

PacketOutcome simulate_packet(const ArqConfig& config, const PowerPolicy& pp,
                              const RatePolicy& rp, RngStream& rng) {
    if (config.protocol == Protocol::InrVariable && config.scenario == Scenario::ShortLc)
        throw std::invalid_argument("variable-length short-Lc unsupported");
    std::vector<double> gains;
    draw_gains(config, rng, gains);
    return run_packet(config, gains, pp.powers, rp, rng);
}

McReport estimate_report(const ArqConfig& config, const PowerPolicy& pp, const RatePolicy& rp,
                         uint64_t n_packets, uint64_t seed, int threads) {
    return estimate_generic(config, n_packets, seed, threads, [&](RngStream& rng) {
        return simulate_packet(config, pp, rp, rng);
    });
}

HypothesisErrors hypothesis_stderrs(const StopDistribution& sd, const PowerPolicy& pp,
                                    const RatePolicy& rp, uint64_t n_packets) {
    const int rounds = sd.rounds();
    const int max_retx = rounds - 1;
    const double n = static_cast<double>(n_packets);
    HypothesisErrors he;
    he.pr_a.resize(rounds);
    he.pr_s.resize(rounds);
    auto prop_se = [&](double p) { return std::sqrt(std::max(0.0, p * (1.0 - p)) / n); };
    for (int m = 0; m < rounds; ++m) {
        he.pr_a[m] = prop_se(sd.pr_a[m]);
        he.pr_s[m] = prop_se(sd.pr_s[m]);
    }
    he.report.outage = prop_se(sd.outage);

    // per-packet moments of successes, channel uses, energy, achieved rate,
    // feedback bits and stop rounds under the stop distribution
    double e_tau = 0.0, e_tau2 = 0.0, e_xi = 0.0, e_xi2 = 0.0, e_xitau = 0.0;
    double e_q = 1.0 - sd.outage, e_qtau = 0.0;
    double e_rate = 0.0, e_rate2 = 0.0;
    double e_bits = 0.0, e_bits2 = 0.0, e_rounds = 0.0, e_rounds2 = 0.0;
    double energy_m = 0.0;
    for (int m = 1; m <= rounds; ++m) {
        const double tau_m = 1.0 / rp.equiv_rates[m - 1];
        energy_m += pp.powers[m - 1] * rp.inv_rate_step(m);
        const double a = sd.pr_a[m - 1], s = sd.pr_s[m - 1];
        e_tau += a * tau_m;
        e_tau2 += a * tau_m * tau_m;
        e_xi += a * energy_m;
        e_xi2 += a * energy_m * energy_m;
        e_xitau += a * energy_m * tau_m;
        e_qtau += s * tau_m;
        e_rate += s * rp.equiv_rates[m - 1];
        e_rate2 += s * rp.equiv_rates[m - 1] * rp.equiv_rates[m - 1];
        const double bits = std::min(m, max_retx);
        e_bits += a * bits;
        e_bits2 += a * bits * bits;
        e_rounds += a * m;
        e_rounds2 += a * static_cast<double>(m) * m;
    }
    auto mean_se = [&](double ex, double ex2) {
        return std::sqrt(std::max(0.0, ex2 - ex * ex) / n);
    };
    he.report.eta_dl = mean_se(e_rate, e_rate2);
    he.report.feedback_load = mean_se(e_bits, e_bits2);
    he.report.expected_rounds = mean_se(e_rounds, e_rounds2);
    // delta method for the two ratio estimators
    auto ratio_se = [&](double num, double num2, double cross) {
        const double theta = num / e_tau;
        const double var = (num2 - num * num) - 2.0 * theta * (cross - num * e_tau) +
                           theta * theta * (e_tau2 - e_tau * e_tau);
        return std::sqrt(std::max(0.0, var) / n) / e_tau;
    };
    he.report.eta_lt = ratio_se(e_q, e_q /* success is an indicator */, e_qtau);
    he.report.avg_power = ratio_se(e_xi, e_xi2, e_xitau);
    return he;
}

McReport estimate_report_serial(const ArqConfig& config, const PowerPolicy& pp,
                                const RatePolicy& rp, uint64_t n_packets, uint64_t seed) {
    if (n_packets < 1000) throw std::invalid_argument("estimate_report: need >= 1e3 packets");
    const uint64_t nb = batch_count(n_packets);
    std::vector<BatchStats> batches(nb, BatchStats(config.rounds()));
    for (uint64_t b = 0; b < nb; ++b) {
        const uint64_t begin = n_packets * b / nb;
        const uint64_t end = n_packets * (b + 1) / nb;
        batches[b] = run_batch(config, begin, end, seed, [&](RngStream& rng) {
            return simulate_packet(config, pp, rp, rng);
        });
    }
    return reduce(config, std::move(batches), n_packets, seed);
}

ShortLongEquivalence map_short_to_long(const FadingDistribution& fading, double power,
                                       int max_retx, double rate, Protocol protocol, double p_b,
                                       uint64_t n_packets, uint64_t seed, int threads) {
    if (protocol == Protocol::InrVariable)
        throw std::invalid_argument("map_short_to_long: fixed-length protocols only");
    const int rounds = max_retx + 1;

    ArqConfig short_cfg;
    short_cfg.protocol = protocol;
    short_cfg.max_retx = max_retx;
    short_cfg.scenario = Scenario::ShortLc;
    short_cfg.p_b = p_b;
    short_cfg.fading = fading;

    ArqConfig long_cfg = short_cfg;
    long_cfg.scenario = Scenario::LongLc;

    const auto pp = PowerPolicy::uniform(power, rounds);
    const auto rp = RatePolicy::fixed_length(rate, rounds);

    ShortLongEquivalence eq;
    eq.uniform_power = power;
    eq.native_short = estimate_report(short_cfg, pp, rp, n_packets, hash_combine(seed, 0x5u),
                                      threads);

    // Mapped system: one packet gain g plus per-round gains g_n define the
    // random powers P~_n = (g_n / g) P.
    std::vector<double> powers(static_cast<size_t>(rounds));
    std::vector<double> gains(static_cast<size_t>(rounds));
    auto mapped_packet = [&](RngStream& rng) {
        double g = fading.sample(rng);
        for (int tries = 0; g == 0.0 && tries < 128; ++tries) g = fading.sample(rng);
        if (g == 0.0) throw std::runtime_error("map_short_to_long: degenerate zero gain");
        for (int m = 0; m < rounds; ++m) {
            const double gn = fading.sample(rng);
            powers[m] = gn * power / g;
        }
        gains.assign(static_cast<size_t>(rounds), g);
        return run_packet(long_cfg, gains, powers, rp, rng);
    };
    {
        // the mapped loop mutates shared scratch, so it runs single-threaded
        const uint64_t nb = batch_count(n_packets);
        std::vector<BatchStats> batches(nb, BatchStats(rounds));
        const uint64_t mseed = hash_combine(seed, 0x1ull);
        for (uint64_t b = 0; b < nb; ++b) {
            const uint64_t begin = n_packets * b / nb;
            const uint64_t end = n_packets * (b + 1) / nb;
            batches[b] = run_batch(long_cfg, begin, end, mseed, mapped_packet);
        }
        eq.mapped_long = reduce(long_cfg, std::move(batches), n_packets, mseed);
    }
    eq.mapped_avg_power = eq.mapped_long.report.avg_power;

    // Per-round accumulated-information samples for the KS comparison.
    const uint64_t k_samples = std::min<uint64_t>(n_packets, 10000);
    std::vector<std::vector<double>> info_short(rounds), info_long(rounds);
    for (auto& v : info_short) v.reserve(k_samples);
    for (auto& v : info_long) v.reserve(k_samples);
    auto accumulate_info = [&](const std::vector<double>& g, const std::vector<double>& P,
                               std::vector<std::vector<double>>& out) {
        double acc = 0.0, snr = 0.0;
        for (int m = 0; m < rounds; ++m) {
            if (protocol == Protocol::Rtd) {
                snr += g[m] * P[m];
                acc = std::log1p(snr);
            } else if (protocol == Protocol::Basic) {
                acc = std::log1p(g[m] * P[m]);  // latest-copy information
            } else {
                acc += std::log1p(g[m] * P[m]);
            }
            out[m].push_back(acc);
        }
    };
    const auto uniform_powers = std::vector<double>(static_cast<size_t>(rounds), power);
    for (uint64_t i = 0; i < k_samples; ++i) {
        RngStream rng_s(hash_combine(seed, 0x2ull, i));
        for (auto& g : gains) g = fading.sample(rng_s);
        accumulate_info(gains, uniform_powers, info_short);

        RngStream rng_l(hash_combine(seed, 0x3ull, i));
        double g = fading.sample(rng_l);
        for (int tries = 0; g == 0.0 && tries < 128; ++tries) g = fading.sample(rng_l);
        for (int m = 0; m < rounds; ++m) powers[m] = fading.sample(rng_l) * power / g;
        gains.assign(static_cast<size_t>(rounds), g);
        accumulate_info(gains, powers, info_long);
    }
    eq.ks_accumulated_info.resize(rounds);
    for (int m = 0; m < rounds; ++m) {
        auto a = info_short[m];
        auto b = info_long[m];
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        size_t i = 0, j = 0;
        double d = 0.0;
        while (i < a.size() && j < b.size()) {
            // ties advance both sides
            if (a[i] < b[j]) {
                ++i;
            } else if (b[j] < a[i]) {
                ++j;
            } else {
                const double v = a[i];
                while (i < a.size() && a[i] == v) ++i;
                while (j < b.size() && b[j] == v) ++j;
            }
            d = std::max(d, std::fabs(static_cast<double>(i) / a.size() -
                                      static_cast<double>(j) / b.size()));
        }
        eq.ks_accumulated_info[m] = d;
    }
    return eq;
}

}  // namespace arq
