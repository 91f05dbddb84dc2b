#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace pricecast {

/**
 * @brief Deterministic random source shared by every stochastic component.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the
 * standard. The distribution transforms live here instead of <random>
 * because std::normal_distribution and friends are implementation defined,
 * and a fixed seed has to reproduce results bit for bit on any platform.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform draw in [0, 1) with 53 random bits.
    double uniform() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller. No caching of the second deviate, so
    /// the draw count stays predictable.
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    /// Uniform integer in [0, n). Lemire's multiply-shift rejection keeps the
    /// result unbiased without a modulo loop.
    std::uint64_t below(std::uint64_t n) {
        while (true) {
            const std::uint64_t x = next_u64();
            const unsigned __int128 m = (unsigned __int128)x * n;
            const std::uint64_t lo = std::uint64_t(m);
            if (lo >= n || lo >= std::uint64_t(-n) % n) {
                return std::uint64_t(m >> 64);
            }
        }
    }

    /// Fisher-Yates shuffle driven by below(), so permutations are
    /// reproducible across platforms.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[std::size_t(below(i))]);
        }
    }

    /// Derives an independent stream seed from a base seed and an index
    /// (splitmix64 finalizer applied twice). Parallel grid workers use this
    /// so results do not depend on scheduling order.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
        auto split = [](std::uint64_t z) {
            z += 0x9e3779b97f4a7c15ULL;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            return z ^ (z >> 31);
        };
        return split(split(seed) ^ split(index + 0x632be59bd9b4e019ULL));
    }

private:
    std::mt19937_64 engine_;
};

}
