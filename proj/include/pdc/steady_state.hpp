#pragma once

// Closed-form chain solutions for the long-time regime and the machinery for
// comparing long-time numerics against them: a constant-pump family over
// (n_s, n_i) with n_i - n_s fixed along a chain, a large-pump family over the
// chain coordinate n at fixed (n_p0, delta_n), per-chain least-squares fits of
// the two free constants, and time averaging of reduced density matrices.
// Gamma factors go through signed log-Gamma so large indices neither overflow
// nor lose the sign.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

#include "pdc/common.hpp"
#include "pdc/dynamics.hpp"
#include "pdc/fock.hpp"

namespace pdc {

// --------------------------- constant-pump chains --------------------------------

namespace detail {

inline double gamma_ratio(double num, double den, const char* who, int a, int b) {
    SignedLogGamma n = signed_lgamma(num);
    SignedLogGamma d = signed_lgamma(den);
    if (n.sign == 0 || d.sign == 0) {
        std::ostringstream os;
        os << who << ": Gamma pole at nonpositive integer argument for indices (" << a
           << ", " << b << ")";
        throw ConfigError(os.str());
    }
    return n.sign * d.sign * std::exp(n.log_abs - d.log_abs);
}

}  // namespace detail

// Chain kernel times [c1 + (-1)^{n_s} c2]. The n-dependence along a chain is
// Gamma((n_s+n_i+2)/4)/Gamma((n_s+n_i+4)/4), which satisfies
// ((n_s+n_i)/2 + 1) C_{+1} = ((n_s+n_i)/2) C_{-1} exactly; the remaining factor
// depends only on the chain label n_i - n_s.
inline double constant_pump_chain_coeffs(int n_s, int n_i, double c1, double c2) {
    if (n_s < 0 || n_i < 0)
        throw ConfigError("constant_pump_chain_coeffs: negative occupation index");
    const int dn = n_i - n_s;
    const double label = detail::gamma_ratio(0.25 * (dn + 4), 0.25 * (dn + 2),
                                             "constant_pump_chain_coeffs", n_s, n_i);
    const double kernel = detail::gamma_ratio(0.25 * (n_s + n_i + 2), 0.25 * (n_s + n_i + 4),
                                              "constant_pump_chain_coeffs", n_s, n_i);
    const double parity = (n_s % 2 == 0) ? 1.0 : -1.0;
    return label * kernel * (c1 + parity * c2);
}

// --------------------------- large-pump chains -----------------------------------

inline bool large_pump_regime_ok(int n_p0, int delta_n, int n) {
    return 4 * n <= n_p0 && 4 * std::abs(delta_n) <= n;
}

// Two-term solution of the expanded recursion
// 2(n_p0+1)(2n_p0-n)(n+1) C_{n+1} = 2 n_p0 (2(n_p0+1)-n) n C_{n-1};
// delta_n cancels at this order but stays in the signature as the chain label.
// Outside n_p0 >> n >> |delta_n| a note goes to warn (the value is still the
// printed expression).
inline double large_pump_chain_coeffs(int n_p0, int delta_n, int n, double c1, double c2,
                                      std::ostream* warn = nullptr) {
    if (n_p0 < 0 || n < 0)
        throw ConfigError("large_pump_chain_coeffs: negative index");
    if (n == 2 * n_p0 + 1) {
        std::ostringstream os;
        os << "large_pump_chain_coeffs: pole at n = 2 n_p0 + 1 (n_p0 = " << n_p0
           << ", n = " << n << ")";
        throw ConfigError(os.str());
    }
    if (warn && !large_pump_regime_ok(n_p0, delta_n, n))
        (*warn) << "large_pump_chain_coeffs: indices (n_p0 = " << n_p0 << ", delta_n = "
                << delta_n << ", n = " << n << ") are outside the regime n_p0 >> n >> |delta_n|\n";

    const double rho = double(n_p0) / (double(n_p0) + 1.0);
    const double envelope = std::pow(rho, 0.5 * n) *
                            std::exp(std::lgamma(0.5 * (n + 1)) - std::lgamma(0.5 * (n + 2)));
    const double shared = (2.0 * n_p0 + 1.0) * envelope /
                          (std::sqrt(kPi) * (double(n) - 2.0 * n_p0 - 1.0));
    const double alt = (n % 2 == 0) ? -1.0 : 1.0;  // (-1)^(n+1)
    return shared * (c1 * alt - c2 * (2.0 * n_p0 + 1.0));
}

// --------------------------- solution handle --------------------------------------

struct SteadyChainSolution {
    enum class Family { constant_pump, large_pump };
    Family family = Family::constant_pump;
    int delta_n = 0;  // chain label n_i - n_s
    int n_p0 = 0;     // large-pump family only
    double c1 = 0.0;
    double c2 = 0.0;
    double fit_residual = 0.0;

    // Constant-pump family: full (n_s, n_i) indices. Large-pump family: the
    // chain coordinate n.
    double evaluate(int n_s, int n_i) const {
        if (family != Family::constant_pump)
            throw ConfigError("SteadyChainSolution: (n_s, n_i) evaluation needs the constant-pump family");
        if (n_i - n_s != delta_n)
            throw ConfigError("SteadyChainSolution: indices leave the chain");
        return constant_pump_chain_coeffs(n_s, n_i, c1, c2);
    }
    double evaluate_chain(int n) const {
        if (family != Family::large_pump)
            throw ConfigError("SteadyChainSolution: chain evaluation needs the large-pump family");
        return large_pump_chain_coeffs(n_p0, delta_n, n, c1, c2);
    }
};

// --------------------------- chain fitting ----------------------------------------

struct ChainFit {
    double c1 = 0.0;
    double c2 = 0.0;
    double residual = 0.0;  // relative, includes any out-of-model imaginary part
};

// Least squares of [c1 + (-1)^{n_s} c2] * kernel against chain amplitudes taken
// at (n_s, n_i) = (n_s_start + j, n_s_start + delta_n + j). The model class is
// real up to one global phase, so the data are aligned to the first nonzero
// entry before fitting and whatever imaginary part remains counts as residual.
inline ChainFit fit_chain_constants(const std::vector<cplx>& amps, int delta_n,
                                    int n_s_start = 0) {
    const int m = int(amps.size());
    if (m < 3) throw ConfigError("fit_chain_constants: chain shorter than 3 points");
    if (n_s_start < 0 || n_s_start + delta_n < 0)
        throw ConfigError("fit_chain_constants: chain start outside the lattice");

    double total = 0.0;
    int first = -1;
    for (int j = 0; j < m; ++j) {
        total += std::norm(amps[size_t(j)]);
        if (first < 0 && std::abs(amps[size_t(j)]) > 0.0) first = j;
    }
    if (first < 0) return {0.0, 0.0, 0.0};

    const cplx phase = amps[size_t(first)] / std::abs(amps[size_t(first)]);
    Eigen::VectorXd yr(m), yi(m);
    Eigen::MatrixXd X(m, 2);
    for (int j = 0; j < m; ++j) {
        const cplx aligned = amps[size_t(j)] * std::conj(phase);
        yr[j] = aligned.real();
        yi[j] = aligned.imag();
        const int ns = n_s_start + j, ni = n_s_start + delta_n + j;
        X(j, 0) = constant_pump_chain_coeffs(ns, ni, 1.0, 0.0);
        X(j, 1) = constant_pump_chain_coeffs(ns, ni, 0.0, 1.0);
    }
    Eigen::Vector2d c = X.colPivHouseholderQr().solve(yr);
    const double miss = (X * c - yr).squaredNorm() + yi.squaredNorm();
    ChainFit fit;
    fit.c1 = c[0];
    fit.c2 = c[1];
    fit.residual = std::sqrt(miss / total);
    return fit;
}

// Chain amplitudes out of a two-mode density: row of the dominant diagonal
// element, scaled so a pure |C><C| returns C up to the global phase the fit
// ignores anyway.
inline std::vector<cplx> extract_chain_amplitudes(const DensityMatrix& dm, int delta_n) {
    if (dm.cutoffs.size() != 2)
        throw ConfigError("extract_chain_amplitudes: need a two-mode density");
    const int ds = dm.cutoffs[0] + 1, di = dm.cutoffs[1] + 1;
    int anchor = 0;
    double best = -1.0;
    for (int r = 0; r < ds * di; ++r)
        if (dm.rho(r, r).real() > best) {
            best = dm.rho(r, r).real();
            anchor = r;
        }
    if (!(best > 0.0)) throw NotAState("extract_chain_amplitudes: empty density");
    const double scale = 1.0 / std::sqrt(best);
    std::vector<cplx> out;
    const int n_s_start = std::max(0, -delta_n);
    for (int ns = n_s_start; ns < ds && ns + delta_n < di; ++ns)
        out.push_back(dm.rho(ns * di + (ns + delta_n), anchor) * scale);
    return out;
}

inline ChainFit fit_chain_constants(const DensityMatrix& dm, int delta_n) {
    return fit_chain_constants(extract_chain_amplitudes(dm, delta_n), delta_n,
                               std::max(0, -delta_n));
}

// --------------------------- time-averaged densities ------------------------------

struct AveragedDensities {
    DensityMatrix pump;
    DensityMatrix signal;
    DensityMatrix idler;
    std::optional<DensityMatrix> signal_idler;
    int snapshots_used = 0;
};

namespace detail {

inline void accumulate(DensityMatrix& acc, const DensityMatrix& term) {
    if (acc.rho.size() == 0)
        acc = term;
    else
        acc.rho += term.rho;
}

inline void finalize(DensityMatrix& dm, int count) {
    dm.rho /= double(count);
    dm.rho = 0.5 * (dm.rho + dm.rho.adjoint()).eval();
    const double tr = dm.rho.trace().real();
    if (!(tr > 0.0)) throw NotAState("time_averaged_density: nonpositive trace");
    dm.rho /= tr;
}

}  // namespace detail

// Uniform average of the reduced density matrices over every stored snapshot
// with t1 <= t <= t2.
inline AveragedDensities time_averaged_density(const Trajectory& traj, double t1, double t2,
                                               bool include_pair = true) {
    if (traj.snapshots.empty())
        throw ConfigError("time_averaged_density: trajectory carries no snapshots");
    AveragedDensities avg;
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
        const double t = traj.snapshot_times[k];
        if (t < t1 - 1e-12 || t > t2 + 1e-12) continue;
        const ThreeModeState& snap = traj.snapshots[k];
        detail::accumulate(avg.pump, partial_trace(snap, Mode::pump));
        detail::accumulate(avg.signal, partial_trace(snap, Mode::signal));
        detail::accumulate(avg.idler, partial_trace(snap, Mode::idler));
        if (include_pair) {
            DensityMatrix pair = partial_trace(snap, Mode::signal, Mode::idler);
            if (!avg.signal_idler)
                avg.signal_idler = std::move(pair);
            else
                avg.signal_idler->rho += pair.rho;
        }
        ++avg.snapshots_used;
    }
    if (avg.snapshots_used == 0)
        throw ConfigError("time_averaged_density: no snapshots inside the window");
    detail::finalize(avg.pump, avg.snapshots_used);
    detail::finalize(avg.signal, avg.snapshots_used);
    detail::finalize(avg.idler, avg.snapshots_used);
    if (avg.signal_idler) detail::finalize(*avg.signal_idler, avg.snapshots_used);
    return avg;
}

}  // namespace pdc
