#pragma once

// Truncated Fock-space containers for one pump + signal + idler mode, and the
// basic constructions/reductions on them. Tensor layout is (pump, signal,
// idler) with the idler index fastest.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <sstream>
#include <vector>

#include "pdc/common.hpp"

namespace pdc {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// --------------------------- truncation spec ---------------------------------

struct TruncationSpec {
    int n_p_max = 0;
    int n_s_max = 0;
    int n_i_max = 0;
    double leak_tol = 1e-6;

    void validate() const {
        if (n_p_max < 0 || n_s_max < 0 || n_i_max < 0)
            throw ConfigError("truncation cutoffs must be nonnegative");
        if (!(leak_tol > 0.0))
            throw ConfigError("leak_tol must be positive");
    }
    int dim_p() const { return n_p_max + 1; }
    int dim_s() const { return n_s_max + 1; }
    int dim_i() const { return n_i_max + 1; }
    std::int64_t size() const {
        return std::int64_t(dim_p()) * dim_s() * dim_i();
    }
    int cutoff(Mode m) const {
        switch (m) {
            case Mode::pump: return n_p_max;
            case Mode::signal: return n_s_max;
            case Mode::idler: return n_i_max;
        }
        return 0;
    }
};

// --------------------------- three-mode state ---------------------------------

struct ThreeModeState {
    TruncationSpec trunc;
    Vector amps;           // flat, index = (n_p * dim_s + n_s) * dim_i + n_i
    double norm_deficit = 0.0;  // reported at construction, never silently fixed

    std::int64_t flat_index(int n_p, int n_s, int n_i) const {
        return (std::int64_t(n_p) * trunc.dim_s() + n_s) * trunc.dim_i() + n_i;
    }
    std::array<int, 3> unflatten(std::int64_t idx) const {
        int n_i = int(idx % trunc.dim_i());
        idx /= trunc.dim_i();
        int n_s = int(idx % trunc.dim_s());
        int n_p = int(idx / trunc.dim_s());
        return {n_p, n_s, n_i};
    }
    cplx& at(int n_p, int n_s, int n_i) { return amps[flat_index(n_p, n_s, n_i)]; }
    cplx at(int n_p, int n_s, int n_i) const { return amps[flat_index(n_p, n_s, n_i)]; }
};

// --------------------------- two-mode state -----------------------------------

// Signal/idler pair states: amps(n_s, n_i).
struct TwoModeState {
    int n1_max = 0;  // signal
    int n2_max = 0;  // idler
    Matrix amps;

    double norm_sq() const { return amps.squaredNorm(); }
};

// --------------------------- density matrix -----------------------------------

struct DensityMatrix {
    std::vector<Mode> modes;    // 1 or 2 kept modes, canonical order
    std::vector<int> cutoffs;   // per kept mode
    Matrix rho;                 // dim = prod(cutoff+1)

    int dim() const { return int(rho.rows()); }
};

inline double hermiticity_defect(const Matrix& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline void check_density(const DensityMatrix& dm, double herm_tol = 1e-9,
                          double trace_tol = 1e-6) {
    if (hermiticity_defect(dm.rho) > herm_tol) throw NotAState("density matrix not Hermitian");
    if (std::abs(dm.rho.trace().real() - 1.0) > trace_tol ||
        std::abs(dm.rho.trace().imag()) > herm_tol)
        throw NotAState("density matrix trace differs from 1");
}

// --------------------------- coherent amplitudes -------------------------------

// <n|alpha> via the multiplicative recurrence a_{n+1} = a_n * alpha / sqrt(n+1).
inline Vector coherent_amplitudes(cplx alpha, int cutoff) {
    if (cutoff < 0) throw ConfigError("coherent_amplitudes: negative cutoff");
    Vector v(cutoff + 1);
    v[0] = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n <= cutoff; ++n) v[n] = v[n - 1] * alpha / std::sqrt(double(n));
    return v;
}

inline double norm_deficit(const Vector& amps) { return 1.0 - amps.squaredNorm(); }

// --------------------------- product construction ------------------------------

// |gamma>_p |alpha_s>_s |alpha_i>_i truncated; each mode's own deficit must fit
// inside a third of the leak budget.
inline ThreeModeState product_coherent_state(cplx alpha_s, cplx alpha_i, cplx gamma,
                                             const TruncationSpec& trunc) {
    trunc.validate();
    Vector vp = coherent_amplitudes(gamma, trunc.n_p_max);
    Vector vs = coherent_amplitudes(alpha_s, trunc.n_s_max);
    Vector vi = coherent_amplitudes(alpha_i, trunc.n_i_max);
    double budget = trunc.leak_tol / 3.0;
    const struct { const char* name; double d; } defs[] = {
        {"pump", norm_deficit(vp)}, {"signal", norm_deficit(vs)}, {"idler", norm_deficit(vi)}};
    for (auto& d : defs) {
        if (d.d >= budget) {
            std::ostringstream os;
            os << "product_coherent_state: " << d.name << " cutoff too small (deficit "
               << d.d << " >= " << budget << ")";
            throw TruncationTooSmall(os.str());
        }
    }
    ThreeModeState st;
    st.trunc = trunc;
    st.amps.resize(trunc.size());
    std::int64_t k = 0;
    for (int p = 0; p < trunc.dim_p(); ++p)
        for (int s = 0; s < trunc.dim_s(); ++s) {
            cplx ps = vp[p] * vs[s];
            for (int i = 0; i < trunc.dim_i(); ++i) st.amps[k++] = ps * vi[i];
        }
    st.norm_deficit = 1.0 - st.amps.squaredNorm();
    return st;
}

// --------------------------- norms / renormalize -------------------------------

inline double norm_sq(const ThreeModeState& st) { return st.amps.squaredNorm(); }

// Explicit renormalization (integrator use only); returns the norm it removed.
inline double renormalize(ThreeModeState& st) {
    double n2 = st.amps.squaredNorm();
    if (n2 <= 0.0) throw NotAState("renormalize: zero state");
    st.amps /= std::sqrt(n2);
    st.norm_deficit = 0.0;
    return 1.0 - n2;
}

// --------------------------- expectations --------------------------------------

namespace detail {
template <typename F>
inline void for_each_cell(const ThreeModeState& st, F&& f) {
    std::int64_t k = 0;
    for (int p = 0; p < st.trunc.dim_p(); ++p)
        for (int s = 0; s < st.trunc.dim_s(); ++s)
            for (int i = 0; i < st.trunc.dim_i(); ++i, ++k) f(p, s, i, st.amps[k]);
}
}  // namespace detail

inline double expectation_number(const ThreeModeState& st, Mode m) {
    double acc = 0.0;
    detail::for_each_cell(st, [&](int p, int s, int i, cplx a) {
        int n = (m == Mode::pump) ? p : (m == Mode::signal) ? s : i;
        acc += double(n) * std::norm(a);
    });
    return acc;
}

inline double expectation_number_sq(const ThreeModeState& st, Mode m) {
    double acc = 0.0;
    detail::for_each_cell(st, [&](int p, int s, int i, cplx a) {
        int n = (m == Mode::pump) ? p : (m == Mode::signal) ? s : i;
        acc += double(n) * double(n) * std::norm(a);
    });
    return acc;
}

// Marginal photon-number distribution of one mode.
inline std::vector<double> number_distribution(const ThreeModeState& st, Mode m) {
    std::vector<double> pr(size_t(st.trunc.cutoff(m)) + 1, 0.0);
    detail::for_each_cell(st, [&](int p, int s, int i, cplx a) {
        int n = (m == Mode::pump) ? p : (m == Mode::signal) ? s : i;
        pr[size_t(n)] += std::norm(a);
    });
    return pr;
}

// Probability mass on the top two shells of each mode, in (pump, signal, idler)
// order. The integrator treats any entry above leak_tol as an abort condition.
inline std::array<double, 3> leakage(const ThreeModeState& st) {
    std::array<double, 3> out{0.0, 0.0, 0.0};
    const auto& t = st.trunc;
    detail::for_each_cell(st, [&](int p, int s, int i, cplx a) {
        double w = std::norm(a);
        if (p >= t.n_p_max - 1) out[0] += w;
        if (s >= t.n_s_max - 1) out[1] += w;
        if (i >= t.n_i_max - 1) out[2] += w;
    });
    return out;
}

// --------------------------- partial traces ------------------------------------

inline DensityMatrix partial_trace(const ThreeModeState& st, Mode keep,
                                   std::int64_t max_dim = 1 << 14) {
    int nk = st.trunc.cutoff(keep) + 1;
    if (nk > max_dim) throw DimensionOverflow("partial_trace: kept basis too large");
    DensityMatrix dm;
    dm.modes = {keep};
    dm.cutoffs = {nk - 1};
    dm.rho = Matrix::Zero(nk, nk);

    const int dp = st.trunc.dim_p(), ds = st.trunc.dim_s(), di = st.trunc.dim_i();
    // rho[a,b] = sum_traced C[..a..] conj(C[..b..])
    if (keep == Mode::pump) {
        Eigen::Map<const Matrix> M(st.amps.data(), std::int64_t(ds) * di, dp);
        dm.rho = (M.adjoint() * M).conjugate();
    } else if (keep == Mode::idler) {
        // idler fastest: view as (dp*ds, di)
        Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            M(st.amps.data(), std::int64_t(dp) * ds, di);
        dm.rho = M.transpose() * M.conjugate();
    } else {
        for (int p = 0; p < dp; ++p)
            for (int i = 0; i < di; ++i)
                for (int a = 0; a < ds; ++a) {
                    cplx ca = st.at(p, a, i);
                    if (ca == cplx(0.0, 0.0)) continue;
                    for (int b = 0; b < ds; ++b)
                        dm.rho(a, b) += ca * std::conj(st.at(p, b, i));
                }
    }
    return dm;
}

// Keep a canonical pair of modes; rows ordered (first mode slow, second fast).
inline DensityMatrix partial_trace(const ThreeModeState& st, Mode keep_a, Mode keep_b,
                                   std::int64_t max_dim = 1 << 14) {
    if (keep_a == keep_b) throw ConfigError("partial_trace: duplicate kept mode");
    if (int(keep_a) > int(keep_b)) std::swap(keep_a, keep_b);
    int na = st.trunc.cutoff(keep_a) + 1, nb = st.trunc.cutoff(keep_b) + 1;
    std::int64_t dim = std::int64_t(na) * nb;
    if (dim > max_dim) throw DimensionOverflow("partial_trace: kept pair basis too large");

    const int dp = st.trunc.dim_p(), ds = st.trunc.dim_s(), di = st.trunc.dim_i();
    DensityMatrix dm;
    dm.modes = {keep_a, keep_b};
    dm.cutoffs = {na - 1, nb - 1};

    if (keep_a == Mode::signal && keep_b == Mode::idler) {
        // trace over pump: amps viewed as (dp, ds*di)
        Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            M(st.amps.data(), dp, std::int64_t(ds) * di);
        dm.rho = M.transpose() * M.conjugate();
        return dm;
    }
    dm.rho = Matrix::Zero(dim, dim);
    auto kept_index = [&](int p, int s, int i) {
        auto pick = [&](Mode m) { return (m == Mode::pump) ? p : (m == Mode::signal) ? s : i; };
        return std::int64_t(pick(keep_a)) * nb + pick(keep_b);
    };
    Mode traced = (keep_b == Mode::signal) ? Mode::idler
                : (keep_a == Mode::pump && keep_b == Mode::idler) ? Mode::signal
                                                                  : Mode::pump;
    int nt = st.trunc.cutoff(traced) + 1;
    for (int t = 0; t < nt; ++t) {
        for (int a1 = 0; a1 < na; ++a1)
            for (int b1 = 0; b1 < nb; ++b1) {
                auto idx = [&](int a, int b) {
                    int p = 0, s = 0, i = 0;
                    auto put = [&](Mode m, int v) {
                        if (m == Mode::pump) p = v;
                        else if (m == Mode::signal) s = v;
                        else i = v;
                    };
                    put(keep_a, a);
                    put(keep_b, b);
                    put(traced, t);
                    return st.flat_index(p, s, i);
                };
                cplx ca = st.amps[idx(a1, b1)];
                if (ca == cplx(0.0, 0.0)) continue;
                for (int a2 = 0; a2 < na; ++a2)
                    for (int b2 = 0; b2 < nb; ++b2)
                        dm.rho(a1 * nb + b1, a2 * nb + b2) += ca * std::conj(st.amps[idx(a2, b2)]);
            }
    }
    return dm;
}

// Single-mode reductions of a two-mode pure state.
inline DensityMatrix reduce_mode1(const TwoModeState& st) {
    DensityMatrix dm;
    dm.modes = {Mode::signal};
    dm.cutoffs = {st.n1_max};
    dm.rho = st.amps * st.amps.adjoint();
    return dm;
}

inline DensityMatrix reduce_mode2(const TwoModeState& st) {
    DensityMatrix dm;
    dm.modes = {Mode::idler};
    dm.cutoffs = {st.n2_max};
    dm.rho = (st.amps.transpose()) * st.amps.conjugate();
    return dm;
}

// --------------------------- fidelity ------------------------------------------

inline double fidelity(const TwoModeState& a, const TwoModeState& b) {
    if (a.n1_max != b.n1_max || a.n2_max != b.n2_max)
        throw BasisMismatch("fidelity: cutoff mismatch");
    cplx ov = (a.amps.conjugate().cwiseProduct(b.amps)).sum();
    return std::norm(ov);
}

inline double fidelity(const ThreeModeState& a, const ThreeModeState& b) {
    if (a.trunc.n_p_max != b.trunc.n_p_max || a.trunc.n_s_max != b.trunc.n_s_max ||
        a.trunc.n_i_max != b.trunc.n_i_max)
        throw BasisMismatch("fidelity: cutoff mismatch");
    return std::norm(a.amps.dot(b.amps));
}

}  // namespace pdc
