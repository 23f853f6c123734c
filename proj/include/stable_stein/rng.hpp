#pragma once

// Counter-based seeding and a small, fast generator. A stream is fully
// determined by a seed and a list of integer identifiers, so work can be
// scheduled on any number of threads without changing the draws.

#include <bit>
#include <boost/random/exponential_distribution.hpp>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace stable_stein::rng {

/// SplitMix64 finalizer: a bijective 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Hash of (seed, id_1, ..., id_k) used to key independent streams.
inline std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept {
    std::uint64_t h = mix64(seed ^ 0x5851f42d4c957f2dULL);
    for (std::uint64_t id : ids) h = mix64(h ^ mix64(id + 0x2545f4914f6cdd1dULL));
    return h;
}

/// xoshiro256** generator, seeded through SplitMix64.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept {
        std::uint64_t z = seed;
        for (auto& w : s_) {
            z += 0x9e3779b97f4a7c15ULL;
            std::uint64_t t = z;
            t = (t ^ (t >> 30)) * 0xbf58476d1ce4e5b9ULL;
            t = (t ^ (t >> 27)) * 0x94d049bb133111ebULL;
            w = t ^ (t >> 31);
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

/// Generator plus the handful of variates the library needs. Uniforms are built
/// from raw bits and exponentials use Boost's ziggurat, so draws do not depend on
/// the standard library's distributions.
/// y with its sign flipped unless `positive`; same value as positive ? y : -y
/// but without a data-dependent branch, which a random sign would mispredict.
inline double with_sign(double y, bool positive) noexcept {
    return std::bit_cast<double>(std::bit_cast<std::uint64_t>(y) ^ (static_cast<std::uint64_t>(!positive) << 63));
}

class Stream {
public:
    using result_type = std::uint64_t;
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    explicit Stream(std::uint64_t key) noexcept : g_(key) {}

    std::uint64_t bits() noexcept { return g_(); }
    result_type operator()() noexcept { return g_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept { return (static_cast<double>(g_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard exponential (ziggurat).
    double exponential() { return boost::random::exponential_distribution<double>()(*this); }

    /// true with probability p (53-bit resolution).
    bool bernoulli(double p) noexcept { return static_cast<double>(g_() >> 11) < p * 0x1.0p53; }

    /// +1 with probability p, -1 otherwise.
    double sign(double p_plus) noexcept { return uniform() < p_plus ? 1.0 : -1.0; }

private:
    Xoshiro256 g_;
};

}  // namespace stable_stein::rng
