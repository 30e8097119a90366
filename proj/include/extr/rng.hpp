#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace extr {

// splitmix64; used to derive independent substreams from one master seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Inverse of the standard normal CDF (Wichura's AS 241, double precision).
// Accurate to ~1e-15 over (0,1); also used for confidence-interval z values.
double normal_quantile(double p);

// Seedable generator with a fixed, portable mapping from bits to variates.
// mt19937_64 output is specified by the standard, and the normal transform is
// inverse-CDF, so streams are identical across platforms and builds.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on (0,1), never returning an exact endpoint.
    double uniform01() {
        const std::uint64_t bits = engine_() >> 11;  // 53 random bits
        return (static_cast<double>(bits) + 0.5) * 0x1p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal(double mean = 0.0, double sd = 1.0) {
        return mean + sd * normal_quantile(uniform01());
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free modulo is fine here; n is tiny relative to 2^64.
        return engine_() % n;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace extr
