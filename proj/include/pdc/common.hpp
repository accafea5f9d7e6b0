#pragma once

// Shared types, error taxonomy, and small numeric helpers.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace pdc {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// --------------------------- errors -----------------------------------------

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TruncationTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LeakageExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NormDriftExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BasisMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotAState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --------------------------- modes ------------------------------------------

enum class Mode { pump = 0, signal = 1, idler = 2 };

inline const char* mode_name(Mode m) {
    switch (m) {
        case Mode::pump: return "pump";
        case Mode::signal: return "signal";
        case Mode::idler: return "idler";
    }
    return "?";
}

// --------------------------- phases ------------------------------------------

// Reduce an angle to (-pi, pi]. Idempotent.
inline double reduce_phase(double x) {
    double r = std::remainder(x, 2.0 * kPi);  // lands in [-pi, pi]
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

// Cumulative phase  Phi = theta_s + theta_i - 2 phi  of a seed triple.
inline double cumulative_phase(double theta_s, double theta_i, double pump_phase) {
    return reduce_phase(theta_s + theta_i - pump_phase);
}

// z^n for nonnegative integer n by binary exponentiation.
inline cplx ipow(cplx z, int n) {
    cplx acc = 1.0;
    while (n > 0) {
        if (n & 1) acc *= z;
        z *= z;
        n >>= 1;
    }
    return acc;
}

// --------------------------- log-Gamma with sign -----------------------------

struct SignedLogGamma {
    double log_abs;
    int sign;  // -1, 0 (pole), +1
};

// Gamma(x) as sign * exp(log_abs). Poles at nonpositive integers get sign = 0.
inline SignedLogGamma signed_lgamma(double x) {
    if (x <= 0.0 && x == std::floor(x)) return {0.0, 0};
    int sign = 1;
    double la = std::lgamma(x);
    if (x < 0.0) {
        // Gamma is negative on (-1,0), positive on (-2,-1), ... : sign = (-1)^(-floor x)
        long k = static_cast<long>(-std::floor(x));
        if (k % 2 == 1) sign = -1;
    }
    return {la, sign};
}

}  // namespace pdc
