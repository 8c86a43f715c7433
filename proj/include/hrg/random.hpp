#pragma once

#include <cstdint>
#include <limits>

namespace hrg {

/// SplitMix64 finalizer; bijective mixing of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream key from a seed and up to three stream labels.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                                   std::uint64_t c = 0) noexcept
{
    return mix64(mix64(mix64(mix64(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL)) ^ (c * 0x85157af5ULL));
}

/// Counter-based generator: the k-th draw of a stream is mix64(key + k * golden).
/// Satisfies UniformRandomBitGenerator, so it plugs into <random> distributions.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
        : key_(key), counter_(counter) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        return mix64(key_ + 0x9e3779b97f4a7c15ULL * (counter_++));
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1].
    double uniform_pos() noexcept { return 1.0 - uniform(); }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

/// Standard normal sampler over a CounterRng (Box-Muller, pairs cached).
class NormalSampler {
public:
    explicit NormalSampler(CounterRng rng) noexcept : rng_(rng) {}

    double operator()() noexcept;

    CounterRng& engine() noexcept { return rng_; }

private:
    CounterRng rng_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace hrg
