// Seeded pseudo-random generator used by the workload generator and the
// simulator. The algorithm is fixed and spelled out so that any port of the
// toolkit reproduces identical traces from identical seeds:
//
//   state(0) = seed, except seed 0 maps to 0x9E3779B97F4A7C15
//   next():  x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27;
//            return x * 0x2545F4914F6CDD1D     (xorshift64*)
//   uniform(n)        = next() % n
//   uniform_i64(a,b)  = a + next() % (b - a + 1)        inclusive bounds
//   unit()            = ((next() >> 11) + 1) * 2^-53    in (0, 1]
//   exponential(mean) = -mean * ln(unit())
#pragma once

#include <cmath>
#include <cstdint>

#include "portsched/ticks.hpp"

namespace portsched {

class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : state_(seed == 0 ? 0x9E3779B97F4A7C15ULL : seed) {}

    std::uint64_t next() {
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1DULL;
    }

    std::uint64_t uniform(std::uint64_t n) { return next() % n; }

    std::int64_t uniform_i64(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // (0, 1]; never returns 0 so log() is safe.
    double unit() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

    double exponential(double mean) { return -mean * std::log(unit()); }

private:
    std::uint64_t state_;
};

} // namespace portsched
