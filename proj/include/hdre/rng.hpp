#pragma once

#include <cmath>
#include <cstdint>

namespace hdre::util {

/// Deterministic random stream based on the splitmix64 generator.
///
/// Every randomized procedure in this project draws from one of these
/// streams so that a (seed, index) pair fully determines its output on
/// any platform. Normal variates use the Box-Muller transform; each call
/// consumes exactly two uniforms and returns the cosine branch, so the
/// draw count per operation is fixed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        const auto draw = static_cast<std::uint64_t>(uniform01() * static_cast<double>(span));
        const auto clamped = draw >= span ? span - 1 : draw;
        return lo + static_cast<int>(clamped);
    }

    /// Fair coin; true with probability 0.5.
    bool coin() { return uniform01() < 0.5; }

    /// Normal variate via Box-Muller (two uniforms per call, no caching).
    double normal(double mean, double stddev) {
        const double u1 = 1.0 - uniform01(); // (0, 1], keeps the log finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Derives an independent stream for (master, index), e.g. one per sample.
    static std::uint64_t derive(std::uint64_t master, std::uint64_t index) {
        Rng mix(master ^ (0x632be59bd9b4e019ull + index * 0x9e3779b97f4a7c15ull));
        return mix.next_u64();
    }

private:
    std::uint64_t state_;
};

} // namespace hdre::util
