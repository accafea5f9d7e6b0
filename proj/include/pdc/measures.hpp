#pragma once

// Entropies, entanglement measures and photon statistics on reduced states.
// Entropy uses the natural log; log-negativity uses log2.

#include <cmath>
#include <vector>

#include "pdc/fock.hpp"
#include "pdc/linalg.hpp"

namespace pdc {

inline constexpr double kEigFloor = 1e-12;   // eigenvalues below this are dropped
inline constexpr double kNegEigTol = -1e-10; // below this a "state" is not a state

// --------------------------- von Neumann entropy -------------------------------

inline double entropy_from_eigenvalues(const Eigen::VectorXd& lam, double eps = kEigFloor) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
        double l = lam[j];
        if (l < kNegEigTol)
            throw NotAState("entropy: eigenvalue " + std::to_string(l) + " below tolerance");
        if (l > eps) s -= l * std::log(l);
    }
    return s;
}

inline double von_neumann_entropy(const DensityMatrix& dm, double eps = kEigFloor) {
    if (hermiticity_defect(dm.rho) > 1e-9) throw NotAState("entropy: matrix not Hermitian");
    return entropy_from_eigenvalues(hermitian_eigenvalues(dm.rho), eps);
}

// --------------------------- partial transpose ---------------------------------

// Transpose the indices of one mode of a two-mode density matrix.
inline DensityMatrix partial_transpose(const DensityMatrix& dm, Mode which) {
    if (dm.modes.size() != 2) throw BasisMismatch("partial_transpose: need a two-mode state");
    int na = dm.cutoffs[0] + 1, nb = dm.cutoffs[1] + 1;
    bool first = (which == dm.modes[0]);
    if (!first && which != dm.modes[1])
        throw BasisMismatch("partial_transpose: mode not in basis");
    DensityMatrix out = dm;
    for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
            for (int a2 = 0; a2 < na; ++a2)
                for (int b2 = 0; b2 < nb; ++b2) {
                    int r = a * nb + b, c = a2 * nb + b2;
                    int rs = first ? (a2 * nb + b) : (a * nb + b2);
                    int cs = first ? (a * nb + b2) : (a2 * nb + b);
                    out.rho(rs, cs) = dm.rho(r, c);
                }
    return out;
}

// --------------------------- log negativity ------------------------------------

// E_N = log2(1 + 2 sum |negative eigenvalues of the partial transpose|).
inline double log_negativity(const DensityMatrix& dm) {
    DensityMatrix pt = partial_transpose(dm, dm.modes[1]);
    Eigen::VectorXd lam = hermitian_eigenvalues(pt.rho);
    double neg = 0.0;
    for (Eigen::Index j = 0; j < lam.size(); ++j)
        if (lam[j] < kNegEigTol) neg += -lam[j];
    return std::log2(1.0 + 2.0 * neg);
}

// Pure two-mode states: the PT trace norm is (sum of Schmidt coefficients)^2,
// so the eigensolve of the full pair basis is unnecessary.
inline double log_negativity_pure(const TwoModeState& st) {
    Eigen::VectorXd sv = singular_values(st.amps);
    double n2 = sv.squaredNorm();
    if (n2 <= 0.0) throw NotAState("log_negativity_pure: zero state");
    double s = sv.sum();
    return std::log2(s * s / n2);
}

// --------------------------- Mandel Q -------------------------------------------

inline double mandel_q(const std::vector<double>& dist) {
    double m1 = 0.0, m2 = 0.0, tot = 0.0;
    for (size_t n = 0; n < dist.size(); ++n) {
        tot += dist[n];
        m1 += double(n) * dist[n];
        m2 += double(n) * double(n) * dist[n];
    }
    if (tot <= 0.0 || m1 <= 0.0) throw NotAState("mandel_q: zero mean");
    m1 /= tot;
    m2 /= tot;
    return (m2 - m1 * m1 - m1) / m1;
}

inline double mandel_q(const DensityMatrix& dm) {
    if (dm.modes.size() != 1) throw BasisMismatch("mandel_q: need a single-mode state");
    std::vector<double> dist(size_t(dm.dim()));
    for (int n = 0; n < dm.dim(); ++n) dist[size_t(n)] = dm.rho(n, n).real();
    return mandel_q(dist);
}

// --------------------------- mutual information ---------------------------------

// Joint signal/idler entropy of a globally pure state: the eigenvalues of the
// pair reduction are the squared singular values of the amplitude tensor
// reshaped to pump x (signal, idler). The flat layout (idler fastest) makes the
// amplitude buffer that matrix already, transposed, which the SVD ignores.
inline double entropy_signal_idler_pure(const ThreeModeState& st) {
    const Eigen::Index rows = Eigen::Index(st.trunc.dim_s()) * st.trunc.dim_i();
    Eigen::Map<const Matrix> m(st.amps.data(), rows, st.trunc.dim_p());
    Eigen::VectorXd sv = singular_values(m);
    return entropy_from_eigenvalues(sv.array().square().matrix());
}

// I(p : s,i) for a pure three-mode state; equals 2 S_p, with the complementary
// entropy computed through an independent factorization as a consistency guard.
inline double mutual_information_pump_vs_si(const ThreeModeState& st) {
    double sp = von_neumann_entropy(partial_trace(st, Mode::pump));
    double ssi = entropy_signal_idler_pure(st);
    if (std::abs(sp - ssi) > 1e-7)
        throw NotAState("mutual_information: complementary entropies disagree");
    return 2.0 * sp;
}

inline double mutual_information_signal_idler(const ThreeModeState& st) {
    double ss = von_neumann_entropy(partial_trace(st, Mode::signal));
    double si = von_neumann_entropy(partial_trace(st, Mode::idler));
    double ssi = entropy_signal_idler_pure(st);
    return ss + si - ssi;
}

// --------------------------- thermal reference ----------------------------------

inline double thermal_entropy(double nbar) {
    if (nbar < 0.0) throw ConfigError("thermal_entropy: negative mean");
    if (nbar == 0.0) return 0.0;
    return (nbar + 1.0) * std::log(nbar + 1.0) - nbar * std::log(nbar);
}

// Entropy gap to the thermal state of equal mean photon number (>= 0 up to
// numerical noise; thermal maximizes entropy at fixed mean).
inline double effective_thermal_gap(const DensityMatrix& dm) {
    if (dm.modes.size() != 1) throw BasisMismatch("effective_thermal_gap: single mode only");
    double nbar = 0.0, tot = 0.0;
    for (int n = 0; n < dm.dim(); ++n) {
        nbar += double(n) * dm.rho(n, n).real();
        tot += dm.rho(n, n).real();
    }
    nbar /= tot;
    return thermal_entropy(nbar) - von_neumann_entropy(dm);
}

// --------------------------- distances -------------------------------------------

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
    if (a.dim() != b.dim()) throw BasisMismatch("trace_distance: dimension mismatch");
    Matrix d = 0.5 * (a.rho - b.rho);
    d = 0.5 * (d + d.adjoint());  // Hermitize rounding noise
    Eigen::VectorXd lam = hermitian_eigenvalues(d);
    return lam.cwiseAbs().sum();
}

inline double purity(const DensityMatrix& dm) {
    return (dm.rho * dm.rho).trace().real();
}

}  // namespace pdc
