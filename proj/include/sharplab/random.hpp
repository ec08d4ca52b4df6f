#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace sharplab {

/// Seeded random stream with platform-independent draws.
///
/// The standard distributions are implementation-defined, so uniform and
/// normal variates are derived directly from the 64-bit Mersenne Twister
/// output. Identical seeds give identical streams on every toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal (Box-Muller, one variate per call).
    double normal();

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::size_t below(std::size_t n);

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Independent child seed for a named sub-stream (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sharplab
