#pragma once

// Two-mode squeezed coherent states under the parametric (constant, classical
// pump) approximation: closed-form amplitudes, operator-applied construction,
// ordering equivalence, and phase-dependent statistics.

#include <cmath>
#include <complex>
#include <cstdlib>
#include <utility>

#include "pdc/common.hpp"
#include "pdc/fock.hpp"

namespace pdc {

// --------------------------- parameter types -----------------------------------

struct SqueezeParams {
    double r = 0.0;    // squeeze parameter, |gamma| t
    double phi = 0.0;  // half the pump phase

    void validate() const {
        if (!(r >= 0.0)) throw ConfigError("SqueezeParams: r must be >= 0");
        if (!std::isfinite(phi)) throw ConfigError("SqueezeParams: phi must be finite");
    }
    double mu() const { return std::cosh(r); }
    cplx nu() const { return std::polar(std::sinh(r), 2.0 * phi); }
};

struct CoherentSeed {
    double mag = 0.0;
    double theta = 0.0;

    void validate() const {
        if (!(mag >= 0.0)) throw ConfigError("CoherentSeed: mag must be >= 0");
    }
    cplx value() const { return std::polar(mag, theta); }
    static CoherentSeed from_complex(cplx a) {
        return {std::abs(a), a == cplx(0.0) ? 0.0 : std::arg(a)};
    }
};

// Half-integer (j, m) labels stored doubled so the bijection with photon pairs
// (n1, n2) = (j+m, j-m) stays exact.
struct JMIndex {
    int two_j = 0;
    int two_m = 0;

    static JMIndex from_occupation(int n1, int n2) {
        if (n1 < 0 || n2 < 0) throw ConfigError("JMIndex: negative occupation");
        return {n1 + n2, n1 - n2};
    }
    bool valid() const {
        return two_j >= 0 && std::abs(two_m) <= two_j && (two_j + two_m) % 2 == 0;
    }
    int n1() const { return (two_j + two_m) / 2; }
    int n2() const { return (two_j - two_m) / 2; }
    double j() const { return 0.5 * two_j; }
    double m() const { return 0.5 * two_m; }
};

inline double cumulative_phase(const CoherentSeed& s, const CoherentSeed& i,
                               const SqueezeParams& sq) {
    return cumulative_phase(s.theta, i.theta, 2.0 * sq.phi);
}

// --------------------------- Laguerre recurrence -------------------------------

// L_n^k(x) by the three-term recurrence; stable for the moderate n used here.
inline cplx assoc_laguerre(int n, int k, cplx x) {
    if (n < 0 || k < 0) throw ConfigError("assoc_laguerre: n, k must be >= 0");
    if (n == 0) return 1.0;
    cplx p0 = 1.0, p1 = cplx(1.0 + k) - x;
    for (int m = 1; m < n; ++m) {
        cplx p2 = ((cplx(2 * m + k + 1) - x) * p1 - cplx(m + k) * p0) / cplx(m + 1);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

// --------------------------- squeezed vacuum -----------------------------------

// Diagonal amplitudes (-1)^n e^{2 i n phi} tanh^n r / cosh r on |n, n>.
inline TwoModeState tmsvs_amplitudes(const SqueezeParams& sq, int cutoff) {
    sq.validate();
    if (cutoff < 0) throw ConfigError("tmsvs_amplitudes: negative cutoff");
    double th = std::tanh(sq.r);
    double ch = std::cosh(sq.r);
    if (sq.r > 0.0) {
        double tail_bound = std::pow(th, 2.0 * cutoff) / (ch * ch);
        if (tail_bound >= 1e-12 / (1.0 - th * th))
            throw TruncationTooSmall("tmsvs_amplitudes: cutoff too small for requested r");
    }
    TwoModeState st;
    st.n1_max = st.n2_max = cutoff;
    st.amps = Matrix::Zero(cutoff + 1, cutoff + 1);
    cplx step = -std::polar(th, 2.0 * sq.phi);
    cplx c = 1.0 / ch;
    for (int n = 0; n <= cutoff; ++n) {
        st.amps(n, n) = c;
        c *= step;
    }
    return st;
}

// --------------------------- closed-form TMSCS ---------------------------------

// Amplitudes of S(z) D_s(alpha_s) D_i(alpha_i) |0,0>.  The Laguerre factor is
// evaluated as P_m = nu^m L_m^d(alpha_s alpha_i / (mu nu)); folding nu^m into
// the recurrence removes the division by nu, so r -> 0 collapses to the exact
// coherent product with no separate branch.
inline TwoModeState tmscs_closed_form(const CoherentSeed& seed_s, const CoherentSeed& seed_i,
                                      const SqueezeParams& sq, int cutoff) {
    seed_s.validate();
    seed_i.validate();
    sq.validate();
    if (cutoff < 0) throw ConfigError("tmscs_closed_form: negative cutoff");

    const cplx as = seed_s.value(), ai = seed_i.value();
    const double mu = sq.mu();
    const cplx nu = sq.nu();
    const cplx w = as * ai / mu;  // nu * x, finite for all r
    const cplx envelope = std::exp(-0.5 * (std::norm(as) + std::norm(ai)) +
                                   std::conj(nu) * as * ai / mu);

    const int dim = cutoff + 1;
    TwoModeState st;
    st.n1_max = st.n2_max = cutoff;
    st.amps = Matrix::Zero(dim, dim);

    const double log_mu = std::log(mu);
    // One recurrence pass per offset d = |n1 - n2|; m indexes min(n1, n2).
    for (int d = 0; d <= cutoff; ++d) {
        for (int side = 0; side < (d == 0 ? 1 : 2); ++side) {
            const cplx amp = (side == 0) ? as : ai;
            const cplx amp_pow = ipow(amp, d);
            cplx p_prev = 0.0, p = 1.0;  // P_{-1}, P_0
            double lg_lo = 0.0;          // lgamma(m + 1)
            double lg_hi = std::lgamma(double(d) + 1.0);
            double parity = 1.0;
            for (int m = 0; m + d <= cutoff; ++m) {
                if (m > 0) {
                    cplx p_next = ((cplx(2.0 * (m - 1) + d + 1.0) * nu - w) * p -
                                   cplx(double(m - 1 + d)) * nu * nu * p_prev) /
                                  double(m);
                    p_prev = p;
                    p = p_next;
                    lg_lo += std::log(double(m));
                    lg_hi += std::log(double(m + d));
                    parity = -parity;
                }
                if (!std::isfinite(p.real()) || !std::isfinite(p.imag()))
                    throw DimensionOverflow(
                        "tmscs_closed_form: Laguerre recurrence overflow; lower cutoff or r");
                double pref = std::exp(0.5 * (lg_lo - lg_hi) - (m + d + 1) * log_mu);
                cplx val = parity * pref * amp_pow * p * envelope;
                if (side == 0)
                    st.amps(m + d, m) = val;
                else
                    st.amps(m, m + d) = val;
            }
        }
    }
    return st;
}

// --------------------------- operator-applied paths ----------------------------

namespace detail {

// y = acc + sum_{k>=1} K^k acc / k! applied in s substeps, Taylor terms cut at
// relative 1e-18.  norm_bound must dominate ||K||.
template <typename ApplyK>
void exp_action(Matrix& state, double norm_bound, ApplyK&& apply_k) {
    int substeps = std::max(1, int(std::ceil(norm_bound / 2.0)));
    Matrix term(state.rows(), state.cols()), next(state.rows(), state.cols());
    for (int s = 0; s < substeps; ++s) {
        Matrix acc = state;
        term = state;
        double acc_norm = acc.norm();
        for (int k = 1; k <= 120; ++k) {
            apply_k(term, next);
            term = next / (double(substeps) * k);
            acc += term;
            if (term.norm() <= 1e-18 * acc_norm) break;
            if (k == 120)
                throw NotAState("exp_action: Taylor series failed to converge");
        }
        state = acc;
    }
}

// K = r (e^{-2 i phi} a b - e^{2 i phi} a^dag b^dag) acting on amplitude matrices.
inline void squeeze_generator(const Matrix& in, Matrix& out, const SqueezeParams& sq) {
    const int d1 = int(in.rows()), d2 = int(in.cols());
    const cplx f_down = sq.r * std::polar(1.0, -2.0 * sq.phi);
    const cplx f_up = sq.r * std::polar(1.0, 2.0 * sq.phi);
    out.setZero();
    for (int n1 = 0; n1 < d1; ++n1)
        for (int n2 = 0; n2 < d2; ++n2) {
            cplx v = 0.0;
            if (n1 + 1 < d1 && n2 + 1 < d2)
                v += f_down * std::sqrt(double((n1 + 1) * (n2 + 1))) * in(n1 + 1, n2 + 1);
            if (n1 > 0 && n2 > 0)
                v -= f_up * std::sqrt(double(n1 * n2)) * in(n1 - 1, n2 - 1);
            out(n1, n2) = v;
        }
}

// K = alpha_1 a1^dag - alpha_1^* a1 + alpha_2 a2^dag - alpha_2^* a2.
inline void displacement_generator(const Matrix& in, Matrix& out, cplx a1, cplx a2) {
    const int d1 = int(in.rows()), d2 = int(in.cols());
    out.setZero();
    for (int n1 = 0; n1 < d1; ++n1)
        for (int n2 = 0; n2 < d2; ++n2) {
            cplx v = 0.0;
            if (n1 > 0) v += a1 * std::sqrt(double(n1)) * in(n1 - 1, n2);
            if (n1 + 1 < d1) v -= std::conj(a1) * std::sqrt(double(n1 + 1)) * in(n1 + 1, n2);
            if (n2 > 0) v += a2 * std::sqrt(double(n2)) * in(n1, n2 - 1);
            if (n2 + 1 < d2) v -= std::conj(a2) * std::sqrt(double(n2 + 1)) * in(n1, n2 + 1);
            out(n1, n2) = v;
        }
}

inline void apply_displacement(Matrix& state, cplx a1, cplx a2) {
    double bound = 2.0 * (std::abs(a1) + std::abs(a2)) * std::sqrt(double(state.rows()));
    exp_action(state, bound,
               [&](const Matrix& in, Matrix& out) { displacement_generator(in, out, a1, a2); });
}

inline void apply_squeeze(Matrix& state, const SqueezeParams& sq) {
    if (sq.r == 0.0) return;
    double bound = 2.0 * sq.r * double(state.rows());
    exp_action(state, bound,
               [&](const Matrix& in, Matrix& out) { squeeze_generator(in, out, sq); });
}

}  // namespace detail

// Applies the truncated displacement exponentials to |0,0>, then the truncated
// squeeze exponential.  Independent of the Laguerre path.
inline TwoModeState tmscs_operator_path(const CoherentSeed& seed_s, const CoherentSeed& seed_i,
                                        const SqueezeParams& sq, int cutoff) {
    seed_s.validate();
    seed_i.validate();
    sq.validate();
    if (cutoff < 0) throw ConfigError("tmscs_operator_path: negative cutoff");
    TwoModeState st;
    st.n1_max = st.n2_max = cutoff;
    st.amps = Matrix::Zero(cutoff + 1, cutoff + 1);
    st.amps(0, 0) = 1.0;
    detail::apply_displacement(st.amps, seed_s.value(), seed_i.value());
    detail::apply_squeeze(st.amps, sq);
    return st;
}

// Reversed ordering: D_s(beta_s) D_i(beta_i) S(z) |0,0>.
inline TwoModeState reversed_operator_path(cplx beta_s, cplx beta_i, const SqueezeParams& sq,
                                           int cutoff) {
    sq.validate();
    if (cutoff < 0) throw ConfigError("reversed_operator_path: negative cutoff");
    TwoModeState st;
    st.n1_max = st.n2_max = cutoff;
    st.amps = Matrix::Zero(cutoff + 1, cutoff + 1);
    st.amps(0, 0) = 1.0;
    detail::apply_squeeze(st.amps, sq);
    detail::apply_displacement(st.amps, beta_s, beta_i);
    return st;
}

// --------------------------- ordering equivalence ------------------------------

// S(z) D(alpha) = D(beta) S(z) with beta as below.
inline std::pair<cplx, cplx> ordering_transform(const CoherentSeed& seed_s,
                                                const CoherentSeed& seed_i,
                                                const SqueezeParams& sq) {
    seed_s.validate();
    seed_i.validate();
    sq.validate();
    cplx as = seed_s.value(), ai = seed_i.value();
    double mu = sq.mu();
    cplx nu = sq.nu();
    return {mu * as - nu * std::conj(ai), mu * ai - nu * std::conj(as)};
}

inline std::pair<cplx, cplx> ordering_transform_inverse(cplx beta_s, cplx beta_i,
                                                        const SqueezeParams& sq) {
    sq.validate();
    double mu = sq.mu();
    cplx nu = sq.nu();
    return {mu * beta_s + nu * std::conj(beta_i), mu * beta_i + nu * std::conj(beta_s)};
}

// --------------------------- closed-form statistics ----------------------------

inline double mean_total_photons_tmscs(const CoherentSeed& seed_s, const CoherentSeed& seed_i,
                                       const SqueezeParams& sq) {
    seed_s.validate();
    seed_i.validate();
    sq.validate();
    double Phi = cumulative_phase(seed_s, seed_i, sq);
    double sh = std::sinh(sq.r);
    return (seed_s.mag * seed_s.mag + seed_i.mag * seed_i.mag) * std::cosh(2.0 * sq.r) -
           2.0 * seed_s.mag * seed_i.mag * std::cos(Phi) * std::sinh(2.0 * sq.r) +
           2.0 * sh * sh;
}

inline double mean_total_photons_reversed(cplx beta_s, cplx beta_i, const SqueezeParams& sq) {
    sq.validate();
    double sh = std::sinh(sq.r);
    return std::norm(beta_s) + std::norm(beta_i) + 2.0 * sh * sh;
}

// Signal-mode Mandel Q for equal seed magnitudes |alpha_s| = |alpha_i| = alpha.
inline double mandel_q_tmscs(double alpha_mag, double r, double Phi) {
    if (!(alpha_mag >= 0.0) || !(r >= 0.0))
        throw ConfigError("mandel_q_tmscs: alpha_mag and r must be >= 0");
    if (alpha_mag == 0.0 && r == 0.0)
        throw ConfigError("mandel_q_tmscs: undefined at alpha = r = 0 (vacuum)");
    double sh = std::sinh(r);
    double denom = alpha_mag * alpha_mag * (std::cosh(2.0 * r) - std::sinh(2.0 * r) * std::cos(Phi)) +
                   sh * sh;
    return 2.0 * sh * sh - sh * sh * sh * sh / denom;
}

// Log-negativity of the TMSVS, independent of phi.
inline double logneg_tmsvs(double r) {
    if (!(r >= 0.0)) throw ConfigError("logneg_tmsvs: r must be >= 0");
    return 2.0 * r / std::log(2.0);
}

}  // namespace pdc
