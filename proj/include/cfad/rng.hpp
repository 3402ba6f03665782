#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace cfad {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic random stream. Gaussian sampling is done explicitly
/// (Box-Muller) so the byte stream does not depend on the standard
/// library's distribution internals.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(splitmix64(seed)) {}

    /// Independent stream derived from (seed, stream id). Used for
    /// counter-based per-sample streams.
    static RandomStream substream(std::uint64_t seed, std::uint64_t id) {
        return RandomStream(splitmix64(seed) ^ splitmix64(0x51ed270b0f3ULL + id));
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Standard normal N(0, 1).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    /// Circularly-symmetric complex normal CN(0, 1).
    std::complex<double> cnormal() {
        const double re = normal();
        const double im = normal();
        return {re * M_SQRT1_2, im * M_SQRT1_2};
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace cfad
