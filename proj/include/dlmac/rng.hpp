#pragma once

#include <cstdint>
#include <random>

namespace dlmac {

/// Seeded random stream. Wraps mt19937_64 and does its own variate
/// conversion so sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Independent stream derived from (seed, stream_id).
    static Rng derive(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi]; returns lo when lo == hi.
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer on [0, n), n > 0, without modulo bias.
    std::uint64_t uniform_int(std::uint64_t n);

    bool bernoulli(double p) { return uniform01() < p; }

    /// Poisson variate by sequential inversion; suitable for small means.
    std::uint32_t poisson(double mean);

    /// Standard normal via Box-Muller (one value per call).
    double normal();

private:
    std::mt19937_64 engine_;
};

} // namespace dlmac
