#pragma once

#include <cstdint>
#include <random>

#include "arbsr/common.hpp"

namespace arbsr {

/// mt19937_64 with pinned output mappings, so streams are reproducible
/// independent of the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return double(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) {
        return a + (b - a) * uniform();
    }

    /// Uniform integer in [0, n). n must be > 0.
    int uniform_int(int n) {
        return int((__uint128_t(gen_()) * std::uint64_t(n)) >> 64);
    }

    /// Standard normal via Box-Muller (pinned implementation).
    double normal();

    /// Derive an independent child stream.
    Rng fork() { return Rng(gen_() ^ 0x9e3779b97f4a7c15ull); }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace arbsr
