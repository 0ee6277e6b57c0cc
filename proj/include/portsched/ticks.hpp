// Integer time base and checked arithmetic shared by every module.
// One tick is one nanosecond; all periods, offsets and service times are
// integral ticks. Overflow is always a reported error, never a silent wrap.
#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace portsched {

using Tick = std::int64_t;   // time points and durations, ns
using Wide = __int128;       // intermediate lattice/LCM arithmetic

// Sentinel for "no bound configured" (safe to add small slack without wrap).
inline constexpr Tick kNoBound = std::numeric_limits<Tick>::max() / 4;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent input (bad file, violated precondition).
class SpecError : public Error {
public:
    explicit SpecError(const std::string& what) : Error(what) {}
};

// Checked arithmetic would wrap (hyperperiod, lattice products, horizons).
class OverflowError : public Error {
public:
    explicit OverflowError(const std::string& what) : Error(what) {}
};

inline Tick checked_add(Tick a, Tick b) {
    Tick r;
    if (__builtin_add_overflow(a, b, &r)) throw OverflowError("tick addition overflow");
    return r;
}

inline Tick checked_mul(Tick a, Tick b) {
    Tick r;
    if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("tick multiplication overflow");
    return r;
}

inline Wide checked_add_wide(Wide a, Wide b) {
    Wide r;
    if (__builtin_add_overflow(a, b, &r)) throw OverflowError("128-bit addition overflow");
    return r;
}

inline Wide checked_mul_wide(Wide a, Wide b) {
    Wide r;
    if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("128-bit multiplication overflow");
    return r;
}

// Non-negative remainder, valid for negative dividends.
inline Tick mod_pos(Tick x, Tick m) {
    Tick r = x % m;
    return r < 0 ? r + m : r;
}

inline Wide mod_pos_wide(Wide x, Wide m) {
    Wide r = x % m;
    return r < 0 ? r + m : r;
}

// ceil(a / b) for b > 0.
inline Wide div_ceil_wide(Wide a, Wide b) {
    Wide q = a / b;
    if (a % b != 0 && ((a < 0) == (b < 0))) ++q;
    return q;
}

inline Wide gcd_wide(Wide a, Wide b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        Wide t = a % b;
        a = b;
        b = t;
    }
    return a;
}

inline std::string to_string(Wide v) {
    if (v == 0) return "0";
    bool neg = v < 0;
    // Digits peeled with unsigned magnitude so INT128_MIN stays representable.
    unsigned __int128 mag = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
    std::string out;
    while (mag != 0) {
        out.insert(out.begin(), static_cast<char>('0' + static_cast<int>(mag % 10)));
        mag /= 10;
    }
    if (neg) out.insert(out.begin(), '-');
    return out;
}

// Narrow a Wide back to Tick or fail loudly.
inline Tick narrow_tick(Wide v, const char* what) {
    if (v > static_cast<Wide>(std::numeric_limits<Tick>::max()) ||
        v < static_cast<Wide>(std::numeric_limits<Tick>::min()))
        throw OverflowError(std::string(what) + " exceeds 64-bit tick range");
    return static_cast<Tick>(v);
}

} // namespace portsched
