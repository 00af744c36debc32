#pragma once

#include <cmath>
#include <cstdint>

namespace eew {

// splitmix64 step; used for seeding and for deriving independent substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Mixes a base seed with up to three stream indices (cell row, cell column,
// run index) into an independent substream seed. Same inputs, same stream,
// regardless of which thread runs the cell.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = base;
    splitmix64(s);
    s ^= 0x51c64a3de2d5b1efULL + a;
    splitmix64(s);
    s ^= 0x9d2c5680cafebabeULL + b;
    splitmix64(s);
    s ^= 0xd3a2646c4f1bbcdcULL + c;
    return splitmix64(s);
}

// xoshiro256** generator. <random> engines are portable but the standard
// distributions are not; this class provides the few variates the engine
// needs with a fixed, reproducible algorithm.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (a, b).
    double uniform(double a, double b) {
        double u = uniform();
        while (u == 0.0) u = uniform();
        return a + u * (b - a);
    }

    // Exponential with the given rate (events per unit time), strictly positive.
    double exponential(double rate) {
        double u = uniform();
        while (u == 0.0) u = uniform();
        return -std::log(u) / rate;
    }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4] = {};
};

}  // namespace eew
