// Channel gain distribution family.
//
// The gain variable g carries a Nakagami-N law applied to g itself:
//   pdf  f(g) = 2 (N/w)^N g^(2N-1) exp(-N g^2 / w) / Gamma(N),  g >= 0
//   cdf  F(g) = P(N, N g^2 / w)   (regularized lower incomplete gamma)
// N=1 is the Rayleigh-type gain law, N=2 the moderate-severity default.
// A deterministic (unit step) law is provided for exact-value tests.

#pragma once

#include <cstdint>

#include "arq/rng.hpp"

namespace arq {

enum class FadingKind { NakagamiN, Deterministic };

class FadingDistribution {
public:
    static FadingDistribution nakagami(double n_shape, double w_scale = 1.0);
    static FadingDistribution deterministic(double gain);

    FadingKind kind() const { return kind_; }
    double n_shape() const { return n_shape_; }
    double w_scale() const { return w_scale_; }
    double fixed_gain() const { return fixed_gain_; }

    double pdf(double g) const;

    // Pr(G <= g). Accepts g = +inf (returns exactly 1); throws on g < 0.
    double cdf(double g) const;

    // Pr(G < g). Differs from cdf only at atoms of the deterministic law;
    // decodability events of the form {G >= t} use 1 - prob_below(t).
    double prob_below(double g) const;

    // Smallest g with cdf(g) >= p, p in [0,1]. p=1 maps to +inf for the
    // continuous family.
    double quantile(double p) const;

    double sample(RngStream& rng) const;

    bool operator==(const FadingDistribution&) const = default;

private:
    FadingDistribution() = default;

    FadingKind kind_ = FadingKind::NakagamiN;
    double n_shape_ = 1.0;
    double w_scale_ = 1.0;
    double fixed_gain_ = 0.0;
    double log_gamma_n_ = 0.0;  // cached lgamma(n_shape)
};

inline uint64_t hash_combine(uint64_t seed, const FadingDistribution& d) {
    return hash_combine(seed, static_cast<uint64_t>(d.kind()), bits_of(d.n_shape()),
                        bits_of(d.w_scale()), bits_of(d.fixed_gain()));
}

}  // namespace arq
