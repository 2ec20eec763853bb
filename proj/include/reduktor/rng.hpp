// rng.hpp: counter-based random streams.
//
// Stream r of a run seeded with s produces x_i = mix(key(s, r) + (i + 1) * gamma),
// the SplitMix64 construction with a per-stream key. Any realization can be
// regenerated from (seed, index) alone, which is what makes Monte Carlo
// results independent of how realizations are spread over threads.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace reduktor {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    using result_type = std::uint64_t;

    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix64(mix64(seed) ^ mix64(stream * kGoldenGamma + 0x632be59bd9b4e019ULL))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGoldenGamma); }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }
    /// Uniform double in (0, 1).
    constexpr double open_uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Poisson variate by sequential inversion; portable across standard
/// libraries. For large means the sum is restarted in chunks of at most 500 so
/// e^{-lambda} never underflows.
inline std::uint64_t poisson_variate(CounterRng& rng, double lambda) {
    if (!(lambda > 0.0)) return 0;
    std::uint64_t total = 0;
    while (lambda > 500.0) {
        total += poisson_variate(rng, 500.0);
        lambda -= 500.0;
    }
    const double u = rng.uniform();
    double p = std::exp(-lambda);
    double cdf = p;
    std::uint64_t k = 0;
    while (u >= cdf) {
        ++k;
        p *= lambda / static_cast<double>(k);
        const double next = cdf + p;
        if (next == cdf) break; // floating point tail exhausted
        cdf = next;
    }
    return total + k;
}

} // namespace reduktor
