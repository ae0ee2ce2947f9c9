#pragma once

// Self-contained random number generation. std:: distributions are
// deliberately avoided: their output is implementation-defined and the
// CSV outputs here are required to be reproducible byte for byte.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tamex::rng {

// splitmix64 finalizer; also used as a stateless 64-bit mixer.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// xoshiro256++ (Blackman & Vigna), seeded through a splitmix64 chain.
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed) {
        for (auto& w : s_) w = splitmix64(seed);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform on (0, 1]; never 0, safe under log()
    double uniform_pos() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

// Standard normals via Box-Muller (pairwise, with one value cached).
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = gen_.uniform_pos();
        const double u2 = gen_.uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    Xoshiro256pp gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace tamex::rng
