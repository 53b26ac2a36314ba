// Deterministic random number generation.
//
// All randomized operations take an explicit 64-bit seed. Worker/trial seeds
// are derived as derive_seed(seed, index) with a fixed splitmix64 mix, so a
// result computed from (seed, index) is identical regardless of how work is
// distributed across threads.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace l0cert {

/// splitmix64 finalizer; the fixed stream-derivation function.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derived seed for a sub-stream (worker, trial, block, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// mt19937_64 wrapper with stdlib-independent uniform draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n); n >= 1. Rejection sampling, no modulo bias.
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = gen_();
            if (r >= threshold) return r % n;
        }
    }

    /// Uniform subset of {0,...,n-1} of the given size, returned sorted.
    std::vector<std::size_t> subset(std::size_t n, std::size_t size) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        for (std::size_t i = 0; i < size; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(bounded(n - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(size);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace l0cert
