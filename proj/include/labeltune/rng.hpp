#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace labeltune {

// Seeded generator with platform-independent distributions.
//
// std::mt19937_64 is fully specified by the standard, but the std::*_distribution
// adaptors are not, so the draws below are derived from raw 64-bit words.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t bound);

    // Standard normal via Box-Muller; the second variate is cached.
    double normal();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace labeltune
