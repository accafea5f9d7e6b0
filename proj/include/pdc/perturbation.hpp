#pragma once

// Short-time expansions in the scaled time tau = kappa*t for the quantized-pump
// model: photon-number series through second order, second moments, variances,
// the Mandel Q ratio, and the first-order reduced signal/idler density matrix.
// Coefficients are kept as closed-form functions of (|alpha_s|, |alpha_i|,
// |gamma|, Phi) so conservation-law cancellations hold exactly in floating
// point, not just to rounding.

#include <cmath>
#include <string>

#include "pdc/common.hpp"
#include "pdc/constant_pump.hpp"
#include "pdc/fock.hpp"

namespace pdc {

// --------------------------- series container ----------------------------------

struct PerturbativeSeries {
    std::string label;
    double c0 = 0.0;  // coefficient of 1
    double c1 = 0.0;  // coefficient of tau
    double c2 = 0.0;  // coefficient of tau^2
    double tau_max = 0.1;  // validity hint, never enforced

    double evaluate(double tau) const { return c0 + tau * (c1 + tau * c2); }
};

inline double evaluate_series(const PerturbativeSeries& s, double tau) {
    return s.evaluate(tau);
}

// --------------------------- initial data ---------------------------------------

// Coherent seeds for all three modes. pump_phase is the full pump phase, i.e.
// the 2*phi entering the cumulative phase Phi = theta_s + theta_i - 2*phi.
struct SeedTriple {
    CoherentSeed seed_s;
    CoherentSeed seed_i;
    double pump_mag = 0.0;
    double pump_phase = 0.0;

    void validate() const {
        seed_s.validate();
        seed_i.validate();
        if (!(pump_mag >= 0.0) || !std::isfinite(pump_mag))
            throw ConfigError("SeedTriple: pump magnitude must be nonnegative");
        if (!std::isfinite(pump_phase))
            throw ConfigError("SeedTriple: pump phase must be finite");
    }
    double Phi() const {
        return cumulative_phase(seed_s.theta, seed_i.theta, pump_phase);
    }
    cplx pump_value() const { return std::polar(pump_mag, pump_phase); }
};

// |gamma>_p |alpha_s>_s |alpha_i>_i on the given lattice.
inline ThreeModeState initial_state(const SeedTriple& seeds, const TruncationSpec& trunc) {
    seeds.validate();
    return product_coherent_state(seeds.seed_s.value(), seeds.seed_i.value(),
                                  seeds.pump_value(), trunc);
}

namespace detail {

// Hint below which the quadratic term stays a modest correction; scales with
// the largest occupation driving the series.
inline double series_tau_hint(double s2, double i2, double g2) {
    double top = std::max({1.0, s2, i2, g2});
    return 0.1 / std::sqrt(top);
}

}  // namespace detail

// --------------------------- photon-number series -------------------------------

inline PerturbativeSeries pump_number_series(const SeedTriple& seeds) {
    seeds.validate();
    const double S = seeds.seed_s.mag * seeds.seed_s.mag;
    const double I = seeds.seed_i.mag * seeds.seed_i.mag;
    const double G = seeds.pump_mag * seeds.pump_mag;
    PerturbativeSeries out;
    out.label = "n_pump";
    out.c0 = G;
    out.c1 = 2.0 * seeds.seed_s.mag * seeds.seed_i.mag * seeds.pump_mag * std::cos(seeds.Phi());
    out.c2 = S * I - G * (1.0 + S + I);
    out.tau_max = detail::series_tau_hint(S, I, G);
    return out;
}

// Signal and idler first/second coefficients are the exact negations of the
// pump's, so the pair conservation laws cancel identically.
inline PerturbativeSeries signal_number_series(const SeedTriple& seeds) {
    PerturbativeSeries p = pump_number_series(seeds);
    PerturbativeSeries out;
    out.label = "n_signal";
    out.c0 = seeds.seed_s.mag * seeds.seed_s.mag;
    out.c1 = -p.c1;
    out.c2 = -p.c2;
    out.tau_max = p.tau_max;
    return out;
}

inline PerturbativeSeries idler_number_series(const SeedTriple& seeds) {
    PerturbativeSeries out = signal_number_series(seeds);
    out.label = "n_idler";
    out.c0 = seeds.seed_i.mag * seeds.seed_i.mag;
    return out;
}

inline PerturbativeSeries number_series(const SeedTriple& seeds, Mode m) {
    switch (m) {
        case Mode::pump: return pump_number_series(seeds);
        case Mode::signal: return signal_number_series(seeds);
        case Mode::idler: return idler_number_series(seeds);
    }
    throw ConfigError("number_series: bad mode");
}

// --------------------------- second moments -------------------------------------

inline PerturbativeSeries second_moment_series(const SeedTriple& seeds, Mode m) {
    const PerturbativeSeries n = number_series(seeds, m);
    const double S = seeds.seed_s.mag * seeds.seed_s.mag;
    const double I = seeds.seed_i.mag * seeds.seed_i.mag;
    const double G = seeds.pump_mag * seeds.pump_mag;
    const double P = S * I;
    const double c2Phi = std::cos(2.0 * seeds.Phi());

    PerturbativeSeries out;
    out.label = n.label + "_sq";
    out.tau_max = n.tau_max;
    out.c0 = n.c0 * n.c0 + n.c0;          // Poissonian start
    out.c1 = n.c1 * (1.0 + 2.0 * n.c0);   // first order for every mode
    switch (m) {
        case Mode::pump:
            out.c2 = n.c2 + 2.0 * G * (P * (2.0 + G) - G * (1.0 + S + I + P) + P * c2Phi);
            break;
        case Mode::signal:
            out.c2 = n.c2 + 2.0 * S * (G * (1.0 + I) * (2.0 + S) - P * (1.0 + G) + G * I * c2Phi);
            break;
        case Mode::idler:
            out.c2 = n.c2 + 2.0 * I * (G * (1.0 + S) * (2.0 + I) - P * (1.0 + G) + G * S * c2Phi);
            break;
    }
    return out;
}

// --------------------------- variances ------------------------------------------

// The pump variance series coincides with its number series order by order;
// signal and idler pick up an extra +2|alpha|^2|gamma|^2 at second order.
inline PerturbativeSeries variance_series(const SeedTriple& seeds, Mode m) {
    const PerturbativeSeries n = number_series(seeds, m);
    const double G = seeds.pump_mag * seeds.pump_mag;

    PerturbativeSeries out;
    out.label = "var_" + n.label.substr(2);
    out.tau_max = n.tau_max;
    out.c0 = n.c0;
    out.c1 = n.c1;
    out.c2 = n.c2;
    if (m == Mode::signal)
        out.c2 += 2.0 * (seeds.seed_s.mag * seeds.seed_s.mag) * G;
    else if (m == Mode::idler)
        out.c2 += 2.0 * (seeds.seed_i.mag * seeds.seed_i.mag) * G;
    return out;
}

// --------------------------- Mandel Q -------------------------------------------

// Q(tau) = (var - mean)/mean with both series truncated at the requested order.
// The numerator is assembled coefficient-wise so the pump's exact cancellation
// survives floating point; to first order every mode returns zero.
inline double mandel_q_second_order(const SeedTriple& seeds, Mode m, double tau,
                                    int order = 2) {
    if (order != 1 && order != 2)
        throw ConfigError("mandel_q_second_order: order must be 1 or 2");
    if (order == 1) return 0.0;

    const PerturbativeSeries n = number_series(seeds, m);
    const PerturbativeSeries v = variance_series(seeds, m);
    const double denom = n.evaluate(tau);
    if (!(denom > 0.0)) {
        std::ostringstream os;
        os << "mandel_q_second_order: series mean " << denom << " at tau = " << tau
           << " is nonpositive; tau exceeds the expansion's validity";
        throw ConfigError(os.str());
    }
    const double num = (v.c0 - n.c0) + tau * ((v.c1 - n.c1) + tau * (v.c2 - n.c2));
    return num / denom;
}

// --------------------------- first-order reduced density ------------------------

struct DensityCorrectionLog {
    double hermiticity = 0.0;  // ||rho - rho^dag||_F / 2 removed by symmetrization
    double trace_defect = 0.0; // |tr(rho) - 1| before renormalization
    bool validity_warning = false;  // tau exceeded the series hint
};

/// rho_{s,i}(tau) to first order: coherent-product magnitudes dressed with the
// seed phases and the bracketed tau correction that depends on the phases only
// through Phi. The result is symmetrized and trace-normalized; the applied
// corrections are reported through the optional log.
inline DensityMatrix first_order_reduced_density(const SeedTriple& seeds, double tau,
                                                 int n_s_max, int n_i_max,
                                                 DensityCorrectionLog* log = nullptr) {
    seeds.validate();
    if (n_s_max < 0 || n_i_max < 0)
        throw ConfigError("first_order_reduced_density: negative cutoff");

    const double as = seeds.seed_s.mag, ai = seeds.seed_i.mag, g = seeds.pump_mag;
    const double Phi = seeds.Phi();
    const cplx eip = std::polar(1.0, Phi);
    const double seed_prod = as * ai;
    // With an empty seed the support forces N_s*N_i = 0, so the 1/(as*ai)
    // factor never multiplies anything nonzero; drop it instead of dividing.
    const double inv_seed = (seed_prod > 0.0) ? g / seed_prod : 0.0;
    const double drive = 2.0 * seed_prod * g * std::cos(Phi);

    Eigen::VectorXd mag_s(n_s_max + 1), mag_i(n_i_max + 1);
    {
        Vector vs = coherent_amplitudes(std::polar(as, 0.0), n_s_max);
        Vector vi = coherent_amplitudes(std::polar(ai, 0.0), n_i_max);
        mag_s = vs.real();
        mag_i = vi.real();
    }

    const int ds = n_s_max + 1, di = n_i_max + 1;
    const int dim = ds * di;
    Matrix rho(dim, dim);
    for (int s = 0; s < ds; ++s)
        for (int i = 0; i < di; ++i) {
            const int row = s * di + i;
            const double wr = mag_s[s] * mag_i[i];
            const double ni_r = double(s) * double(i);
            for (int sp = 0; sp < ds; ++sp)
                for (int ip = 0; ip < di; ++ip) {
                    const int col = sp * di + ip;
                    const double wc = mag_s[sp] * mag_i[ip];
                    const double ni_c = double(sp) * double(ip);
                    cplx bracket =
                        1.0 + tau * (drive - inv_seed * (ni_r * std::conj(eip) + ni_c * eip));
                    cplx phase = std::polar(1.0, (s - sp) * seeds.seed_s.theta +
                                                     (i - ip) * seeds.seed_i.theta);
                    rho(row, col) = wr * wc * phase * bracket;
                }
        }

    DensityCorrectionLog local;
    local.validity_warning = tau > detail::series_tau_hint(as * as, ai * ai, g * g);
    Matrix herm = 0.5 * (rho + rho.adjoint());
    local.hermiticity = 0.5 * (rho - rho.adjoint()).norm();
    double tr = herm.trace().real();
    local.trace_defect = std::abs(tr - 1.0);
    if (!(tr > 0.0))
        throw NotAState("first_order_reduced_density: nonpositive trace; tau far outside validity");
    herm /= tr;
    if (log) *log = local;

    DensityMatrix dm;
    dm.modes = {Mode::signal, Mode::idler};
    dm.cutoffs = {n_s_max, n_i_max};
    dm.rho = std::move(herm);
    return dm;
}

}  // namespace pdc
