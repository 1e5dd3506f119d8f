#pragma once

#include <cstdint>

namespace cellrobust {

/// xoshiro256++ with splitmix64 seeding. Self-contained so that seeded
/// runs reproduce bit-identically across platforms and standard library
/// versions (std::normal_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform();

    /// Uniform integer in [0, n), rejection-sampled (no modulo bias).
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller; the paired draw is cached.
    double normal();

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cellrobust
