#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace morec::rng {

// splitmix64 finalizer, used to decorrelate stream seeds derived from
// (master seed, label, index).
inline std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Named substream: all randomness in the project flows from one master seed
// through labelled streams so that components cannot perturb each other.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view label,
                                 std::uint64_t index = 0) {
    return std::mt19937_64(mix(seed ^ mix(fnv1a(label) + 0x9e3779b97f4a7c15ULL * (index + 1))));
}

// 53-bit uniform in [0,1). std:: distributions are implementation-defined,
// so draws that must be reproducible are hand-rolled.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

// Unbiased integer in [0, n).
inline std::uint64_t below(std::mt19937_64& g, std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
    std::uint64_t x = g();
    while (x >= limit) x = g();
    return x % n;
}

// Box-Muller normal deviate.
class Normal {
public:
    double operator()(std::mt19937_64& g) {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform01(g);
        while (u1 <= 0.0) u1 = uniform01(g);
        const double u2 = uniform01(g);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

private:
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace morec::rng
