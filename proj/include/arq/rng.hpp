// Deterministic random streams and seed derivation.
//
// All randomized code in the project draws from RngStream (xoshiro256++
// seeded through splitmix64) so results are reproducible across platforms
// and independent of the standard library's distribution implementations.
// Seeds for parallel work units are derived with hash_combine over the
// unit's coordinates, never from the order of execution.

#pragma once

#include <cstdint>
#include <cstring>

namespace arq {

inline uint64_t splitmix64_next(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t hash_combine(uint64_t seed, uint64_t value) {
    return mix64(seed ^ (mix64(value) + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2)));
}

template <typename T, typename... Rest>
    requires(sizeof...(Rest) > 0)
uint64_t hash_combine(uint64_t seed, const T& value, const Rest&... rest) {
    return hash_combine(hash_combine(seed, value), rest...);
}

inline uint64_t bits_of(double x) {
    uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    return u;
}

class RngStream {
public:
    explicit RngStream(uint64_t seed) {
        uint64_t s = seed;
        for (auto& word : state_) word = splitmix64_next(s);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in the open interval (0,1); never returns an exact endpoint.
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
};

}  // namespace arq
