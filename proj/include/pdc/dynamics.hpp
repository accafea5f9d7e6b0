#pragma once

// Time evolution under the trilinear interaction in scaled time tau = kappa*t:
// a dense fixed-step RK4 over the full tensor, and a block path that evolves
// the independent chains picked out by the two conserved quantities
// n_p + (n_s + n_i)/2 and n_s - n_i. The coupling never appears explicitly;
// everything is expressed in tau.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "pdc/common.hpp"
#include "pdc/fock.hpp"
#include "pdc/perturbation.hpp"

namespace pdc {

// --------------------------- configuration --------------------------------------

enum class Method { dense_rk4, block_rk4 };

inline const char* method_name(Method m) {
    return m == Method::dense_rk4 ? "dense_rk4" : "block_rk4";
}

struct EvolutionConfig {
    double dt = 1e-3;
    double t_end = 10.0;
    int record_stride = 1;
    Method method = Method::dense_rk4;
    int snapshot_stride = 0;       // 0 disables state snapshots
    double norm_drift_tol = 1e-8;  // |norm(t) - norm(0)| allowed
    double block_drop_tol = 1e-12; // cumulative norm the block path may discard
    std::ostream* warn_stream = nullptr;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
        if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be nonnegative");
        if (record_stride < 1) throw ConfigError("record_stride must be >= 1");
        if (snapshot_stride < 0) throw ConfigError("snapshot_stride must be >= 0");
        if (!(norm_drift_tol > 0.0)) throw ConfigError("norm_drift_tol must be positive");
        if (!(block_drop_tol >= 0.0)) throw ConfigError("block_drop_tol must be nonnegative");
    }
};

// Largest stencil coefficient on the lattice, sqrt(P*S*I) at the far corner.
inline double max_stencil_coefficient(const TruncationSpec& t) {
    return std::sqrt(double(t.n_p_max) * double(t.n_s_max) * double(t.n_i_max));
}

// --------------------------- trajectory -----------------------------------------

struct Trajectory {
    std::vector<double> times;
    std::vector<std::array<double, 3>> n_mean;  // (pump, signal, idler)
    std::vector<std::array<double, 3>> n_sq;    // second moments <n^2>
    std::vector<double> norm;                   // squared norm
    std::vector<double> leak;                   // worst top-two-shell mass
    std::vector<double> snapshot_times;
    std::vector<ThreeModeState> snapshots;
    std::vector<std::string> warnings;
    double dropped_norm = 0.0;  // mass discarded up front by the block path

    std::size_t samples() const { return times.size(); }
};

// --------------------------- derivative stencil ---------------------------------

namespace detail {

inline std::vector<double> sqrt_table(int n_max) {
    std::vector<double> sq(size_t(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) sq[size_t(n)] = std::sqrt(double(n));
    return sq;
}

// out = gain_sign*sqrt(n_p(n_s+1)(n_i+1)) C[p-1,s+1,i+1]
//     + loss_sign*sqrt((n_p+1)n_s n_i)    C[p+1,s-1,i-1]
// with out-of-range neighbors zero. The physical generator is (+1, -1); other
// signs serve time reversal and fault-injection checks.
inline void trilinear_derivative(const TruncationSpec& t, const double* sq,
                                 const cplx* in, cplx* out,
                                 double gain_sign = 1.0, double loss_sign = -1.0) {
    const int dp = t.dim_p(), ds = t.dim_s(), di = t.dim_i();
    const std::int64_t stride_p = std::int64_t(ds) * di;
    const std::int64_t stride_s = di;
    std::fill(out, out + std::int64_t(dp) * stride_p, cplx(0.0, 0.0));

    for (int p = 1; p < dp; ++p)
        for (int s = 0; s + 1 < ds; ++s) {
            const double cps = gain_sign * sq[size_t(p)] * sq[size_t(s) + 1];
            const cplx* src = in + (std::int64_t(p) - 1) * stride_p + (s + 1) * stride_s + 1;
            cplx* dst = out + std::int64_t(p) * stride_p + s * stride_s;
            for (int i = 0; i + 1 < di; ++i) dst[i] += cps * sq[size_t(i) + 1] * src[i];
        }
    for (int p = 0; p + 1 < dp; ++p)
        for (int s = 1; s < ds; ++s) {
            const double cps = loss_sign * sq[size_t(p) + 1] * sq[size_t(s)];
            const cplx* src = in + (std::int64_t(p) + 1) * stride_p + (s - 1) * stride_s - 1;
            cplx* dst = out + std::int64_t(p) * stride_p + s * stride_s;
            for (int i = 1; i < di; ++i) dst[i] += cps * sq[size_t(i)] * src[i];
        }
}

struct SampleStats {
    std::array<double, 3> n_mean{};
    std::array<double, 3> n_sq{};
    double norm = 0.0;
    std::array<double, 3> leak_by_mode{};
};

inline SampleStats tensor_stats(const TruncationSpec& t, const cplx* amps) {
    SampleStats st;
    const int dp = t.dim_p(), ds = t.dim_s(), di = t.dim_i();
    std::int64_t k = 0;
    for (int p = 0; p < dp; ++p)
        for (int s = 0; s < ds; ++s)
            for (int i = 0; i < di; ++i, ++k) {
                const double w = std::norm(amps[k]);
                if (w == 0.0) continue;
                st.norm += w;
                st.n_mean[0] += w * p;
                st.n_mean[1] += w * s;
                st.n_mean[2] += w * i;
                st.n_sq[0] += w * double(p) * p;
                st.n_sq[1] += w * double(s) * s;
                st.n_sq[2] += w * double(i) * i;
                if (p >= t.n_p_max - 1) st.leak_by_mode[0] += w;
                if (s >= t.n_s_max - 1) st.leak_by_mode[1] += w;
                if (i >= t.n_i_max - 1) st.leak_by_mode[2] += w;
            }
    return st;
}

inline void check_stability(const EvolutionConfig& cfg, const TruncationSpec& trunc,
                            Trajectory& traj) {
    const double prod = cfg.dt * max_stencil_coefficient(trunc);
    if (prod > 1.4) {
        std::ostringstream os;
        os << "dt * max stencil coefficient = " << prod
           << " exceeds the RK4 stability bound 1.4; reduce dt";
        throw ConfigError(os.str());
    }
    if (prod >= 0.1) {
        std::ostringstream os;
        os << "stability heuristic: dt * max stencil coefficient = " << prod
           << " >= 0.1; accuracy rests on the occupied shells staying well below the cutoffs";
        traj.warnings.push_back(os.str());
        if (cfg.warn_stream) (*cfg.warn_stream) << "warning: " << os.str() << "\n";
    }
}

inline void check_sample(const TruncationSpec& trunc, const EvolutionConfig& cfg,
                         double time, double norm0, const SampleStats& st) {
    const double drift = std::abs(st.norm - norm0);
    if (drift > cfg.norm_drift_tol) {
        std::ostringstream os;
        os << "norm drift " << drift << " at tau = " << time << " exceeds "
           << cfg.norm_drift_tol << "; reduce dt or raise cutoffs";
        throw NormDriftExceeded(os.str());
    }
    const double leak = *std::max_element(st.leak_by_mode.begin(), st.leak_by_mode.end());
    if (leak > trunc.leak_tol) {
        std::ostringstream os;
        os << "top-shell probability " << leak << " at tau = " << time << " exceeds leak_tol "
           << trunc.leak_tol << "; suggest cutoffs of at least (" << trunc.n_p_max + trunc.n_p_max / 2 + 4
           << ", " << trunc.n_s_max + trunc.n_s_max / 2 + 4 << ", "
           << trunc.n_i_max + trunc.n_i_max / 2 + 4 << ")";
        throw LeakageExceeded(os.str());
    }
}

}  // namespace detail

// --------------------------- single-state derivative ----------------------------

inline ThreeModeState apply_hamiltonian_derivative(const ThreeModeState& st) {
    st.trunc.validate();
    const int top = std::max({st.trunc.dim_p(), st.trunc.dim_s(), st.trunc.dim_i()});
    std::vector<double> sq = detail::sqrt_table(top);
    ThreeModeState out;
    out.trunc = st.trunc;
    out.amps.resize(st.amps.size());
    detail::trilinear_derivative(st.trunc, sq.data(), st.amps.data(), out.amps.data());
    out.norm_deficit = 0.0;
    return out;
}

// --------------------------- dense RK4 ------------------------------------------

// Fixed-step classic RK4 with a caller-supplied derivative d(in, out); the
// default wrapper plugs in the physical stencil. Observables are sampled at
// step 0, every record_stride steps, and the final step.
template <class Deriv>
Trajectory evolve_dense_with(const ThreeModeState& state, const EvolutionConfig& cfg,
                             Deriv&& deriv) {
    cfg.validate();
    state.trunc.validate();
    if (state.amps.size() != state.trunc.size())
        throw BasisMismatch("evolve_dense: amplitude size does not match truncation");

    Trajectory traj;
    detail::check_stability(cfg, state.trunc, traj);

    const long n_steps = std::lround(cfg.t_end / cfg.dt);
    const std::int64_t n = state.amps.size();
    Vector y = state.amps, k1(n), k2(n), k3(n), k4(n), tmp(n);
    const double norm0 = y.squaredNorm();

    auto record = [&](long step) {
        detail::SampleStats st = detail::tensor_stats(state.trunc, y.data());
        const double t = step * cfg.dt;
        detail::check_sample(state.trunc, cfg, t, norm0, st);
        traj.times.push_back(t);
        traj.n_mean.push_back(st.n_mean);
        traj.n_sq.push_back(st.n_sq);
        traj.norm.push_back(st.norm);
        traj.leak.push_back(*std::max_element(st.leak_by_mode.begin(), st.leak_by_mode.end()));
    };
    auto snapshot = [&](long step) {
        ThreeModeState snap;
        snap.trunc = state.trunc;
        snap.amps = y;
        snap.norm_deficit = state.norm_deficit;
        traj.snapshot_times.push_back(step * cfg.dt);
        traj.snapshots.push_back(std::move(snap));
    };

    record(0);
    if (cfg.snapshot_stride > 0) snapshot(0);
    const double h = cfg.dt;
    for (long step = 1; step <= n_steps; ++step) {
        deriv(y, k1);
        tmp = y + (h / 2.0) * k1;
        deriv(tmp, k2);
        tmp = y + (h / 2.0) * k2;
        deriv(tmp, k3);
        tmp = y + h * k3;
        deriv(tmp, k4);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const bool last = step == n_steps;
        if (step % cfg.record_stride == 0 || last) record(step);
        if (cfg.snapshot_stride > 0 && (step % cfg.snapshot_stride == 0 || last) &&
            (traj.snapshot_times.empty() || traj.snapshot_times.back() != step * cfg.dt))
            snapshot(step);
    }
    return traj;
}

// Same integrator with explicit stencil signs. (+1, -1) is the physical
// generator; (-1, +1) runs time in reverse; anything else injects a fault for
// conservation-law self-checks.
inline Trajectory evolve_dense_signed(const ThreeModeState& state, const EvolutionConfig& cfg,
                                      double gain_sign, double loss_sign) {
    const int top = std::max({state.trunc.dim_p(), state.trunc.dim_s(), state.trunc.dim_i()});
    std::vector<double> sq = detail::sqrt_table(top);
    const TruncationSpec trunc = state.trunc;
    return evolve_dense_with(state, cfg, [&trunc, sq, gain_sign, loss_sign](const Vector& in,
                                                                            Vector& out) {
        detail::trilinear_derivative(trunc, sq.data(), in.data(), out.data(), gain_sign,
                                     loss_sign);
    });
}

inline Trajectory evolve_dense(const ThreeModeState& state, const EvolutionConfig& cfg) {
    return evolve_dense_signed(state, cfg, 1.0, -1.0);
}

// --------------------------- block decomposition --------------------------------

// One chain of the decomposition: fixed doubled invariant 2k = 2n_p+n_s+n_i and
// fixed delta_n = n_s-n_i, parameterized by j = n_i running over a contiguous
// range. Both conservation laws hold for every mapped triple by construction.
struct ChainBlock {
    int two_k = 0;
    int delta_n = 0;
    int j_min = 0;
    Vector amps;

    int length() const { return int(amps.size()); }
    std::array<int, 3> triple(int local) const {
        const int j = j_min + local;
        const int n_i = j;
        const int n_s = j + delta_n;
        const int n_p = (two_k - 2 * j - delta_n) / 2;
        return {n_p, n_s, n_i};
    }
    double norm_sq() const { return amps.squaredNorm(); }
};

struct BlockDecomposition {
    TruncationSpec trunc;
    std::vector<ChainBlock> blocks;

    double norm_sq() const {
        double s = 0.0;
        for (const auto& b : blocks) s += b.norm_sq();
        return s;
    }
};

namespace detail {

// Contiguous j-range of chain (two_k, delta) inside the lattice; empty if hi < lo.
inline std::pair<int, int> chain_range(const TruncationSpec& t, int two_k, int delta) {
    int lo = std::max({0, -delta, (two_k - delta) / 2 - t.n_p_max});
    int hi = std::min({t.n_i_max, t.n_s_max - delta, (two_k - delta) / 2});
    return {lo, hi};
}

}  // namespace detail

// Lossless partition of the amplitudes by (2k, delta_n); blocks that carry no
// amplitude at all are omitted. Order is ascending (two_k, delta_n).
inline BlockDecomposition decompose_blocks(const ThreeModeState& state) {
    state.trunc.validate();
    BlockDecomposition out;
    out.trunc = state.trunc;
    const TruncationSpec& t = state.trunc;
    const int two_k_max = 2 * t.n_p_max + t.n_s_max + t.n_i_max;
    for (int two_k = 0; two_k <= two_k_max; ++two_k)
        for (int delta = -t.n_i_max; delta <= t.n_s_max; ++delta) {
            if (((two_k - delta) & 1) != 0) continue;
            auto [lo, hi] = detail::chain_range(t, two_k, delta);
            if (hi < lo) continue;
            ChainBlock b;
            b.two_k = two_k;
            b.delta_n = delta;
            b.j_min = lo;
            b.amps.resize(hi - lo + 1);
            bool nonzero = false;
            for (int j = lo; j <= hi; ++j) {
                const int n_i = j, n_s = j + delta, n_p = (two_k - 2 * j - delta) / 2;
                const cplx a = state.amps[state.flat_index(n_p, n_s, n_i)];
                b.amps[j - lo] = a;
                nonzero = nonzero || (a != cplx(0.0, 0.0));
            }
            if (nonzero) out.blocks.push_back(std::move(b));
        }
    return out;
}

inline ThreeModeState recompose(const BlockDecomposition& decomp) {
    ThreeModeState st;
    st.trunc = decomp.trunc;
    st.amps = Vector::Zero(decomp.trunc.size());
    for (const auto& b : decomp.blocks)
        for (int loc = 0; loc < b.length(); ++loc) {
            auto [p, s, i] = b.triple(loc);
            st.amps[st.flat_index(p, s, i)] = b.amps[loc];
        }
    st.norm_deficit = 1.0 - st.amps.squaredNorm();
    return st;
}

// --------------------------- block evolution ------------------------------------

namespace detail {

struct BlockWork {
    const ChainBlock* src = nullptr;
    Vector y, k1, k2, k3, k4, tmp;
    std::vector<double> coeff;  // coeff[t] couples entries t and t+1
};

inline void chain_derivative(const BlockWork& w, const Vector& in, Vector& out) {
    const int len = int(in.size());
    for (int t = 0; t < len; ++t) {
        cplx v(0.0, 0.0);
        if (t + 1 < len) v += w.coeff[size_t(t)] * in[t + 1];
        if (t > 0) v -= w.coeff[size_t(t) - 1] * in[t - 1];
        out[t] = v;
    }
}

}  // namespace detail

// Evolves each chain independently with the tridiagonal stencil; per-block norm
// is exactly conserved by the antisymmetric generator. Blocks whose joint norm
// is below block_drop_tol are discarded up front (reported in dropped_norm) and
// observables are assembled in stored block order, so results are deterministic.
inline Trajectory evolve_blocks(const BlockDecomposition& decomp, const EvolutionConfig& cfg) {
    cfg.validate();
    decomp.trunc.validate();
    Trajectory traj;
    detail::check_stability(cfg, decomp.trunc, traj);
    const TruncationSpec& trunc = decomp.trunc;

    // Drop the lightest blocks while their cumulative mass stays within budget.
    std::vector<double> norms(decomp.blocks.size());
    for (std::size_t b = 0; b < decomp.blocks.size(); ++b) norms[b] = decomp.blocks[b].norm_sq();
    std::vector<std::size_t> order(norms.size());
    for (std::size_t b = 0; b < order.size(); ++b) order[b] = b;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return norms[a] < norms[b]; });
    const double total = decomp.norm_sq();
    std::vector<char> keep(norms.size(), 1);
    double dropped = 0.0;
    for (std::size_t idx : order) {
        if (dropped + norms[idx] <= cfg.block_drop_tol * total) {
            dropped += norms[idx];
            keep[idx] = 0;
        } else {
            break;
        }
    }
    traj.dropped_norm = dropped;

    std::vector<detail::BlockWork> work;
    work.reserve(norms.size());
    for (std::size_t b = 0; b < decomp.blocks.size(); ++b) {
        if (!keep[b]) continue;
        const ChainBlock& blk = decomp.blocks[b];
        detail::BlockWork w;
        w.src = &blk;
        w.y = blk.amps;
        const int len = blk.length();
        w.k1.resize(len);
        w.k2.resize(len);
        w.k3.resize(len);
        w.k4.resize(len);
        w.tmp.resize(len);
        w.coeff.resize(len > 0 ? size_t(len) - 1 : 0);
        for (int t = 0; t + 1 < len; ++t) {
            auto [p, s, i] = blk.triple(t);
            w.coeff[size_t(t)] = std::sqrt(double(p) * (s + 1.0) * (i + 1.0));
        }
        work.push_back(std::move(w));
    }

    const double norm0 = [&] {
        double s = 0.0;
        for (const auto& w : work) s += w.y.squaredNorm();
        return s;
    }();

    auto record = [&](long step) {
        detail::SampleStats st;
        for (const auto& w : work)
            for (int loc = 0; loc < int(w.y.size()); ++loc) {
                const double wgt = std::norm(w.y[loc]);
                if (wgt == 0.0) continue;
                auto [p, s, i] = w.src->triple(loc);
                st.norm += wgt;
                st.n_mean[0] += wgt * p;
                st.n_mean[1] += wgt * s;
                st.n_mean[2] += wgt * i;
                st.n_sq[0] += wgt * double(p) * p;
                st.n_sq[1] += wgt * double(s) * s;
                st.n_sq[2] += wgt * double(i) * i;
                if (p >= trunc.n_p_max - 1) st.leak_by_mode[0] += wgt;
                if (s >= trunc.n_s_max - 1) st.leak_by_mode[1] += wgt;
                if (i >= trunc.n_i_max - 1) st.leak_by_mode[2] += wgt;
            }
        const double t = step * cfg.dt;
        detail::check_sample(trunc, cfg, t, norm0, st);
        traj.times.push_back(t);
        traj.n_mean.push_back(st.n_mean);
        traj.n_sq.push_back(st.n_sq);
        traj.norm.push_back(st.norm);
        traj.leak.push_back(*std::max_element(st.leak_by_mode.begin(), st.leak_by_mode.end()));
    };
    auto snapshot = [&](long step) {
        BlockDecomposition cur;
        cur.trunc = trunc;
        cur.blocks.reserve(work.size());
        for (const auto& w : work) {
            ChainBlock b = *w.src;
            b.amps = w.y;
            cur.blocks.push_back(std::move(b));
        }
        traj.snapshot_times.push_back(step * cfg.dt);
        traj.snapshots.push_back(recompose(cur));
    };

    const long n_steps = std::lround(cfg.t_end / cfg.dt);
    record(0);
    if (cfg.snapshot_stride > 0) snapshot(0);
    const double h = cfg.dt;
    for (long step = 1; step <= n_steps; ++step) {
        for (auto& w : work) {
            detail::chain_derivative(w, w.y, w.k1);
            w.tmp = w.y + (h / 2.0) * w.k1;
            detail::chain_derivative(w, w.tmp, w.k2);
            w.tmp = w.y + (h / 2.0) * w.k2;
            detail::chain_derivative(w, w.tmp, w.k3);
            w.tmp = w.y + h * w.k3;
            detail::chain_derivative(w, w.tmp, w.k4);
            w.y += (h / 6.0) * (w.k1 + 2.0 * w.k2 + 2.0 * w.k3 + w.k4);
        }
        const bool last = step == n_steps;
        if (step % cfg.record_stride == 0 || last) record(step);
        if (cfg.snapshot_stride > 0 && (step % cfg.snapshot_stride == 0 || last) &&
            (traj.snapshot_times.empty() || traj.snapshot_times.back() != step * cfg.dt))
            snapshot(step);
    }
    return traj;
}

inline Trajectory evolve(const ThreeModeState& state, const EvolutionConfig& cfg) {
    if (cfg.method == Method::dense_rk4) return evolve_dense(state, cfg);
    return evolve_blocks(decompose_blocks(state), cfg);
}

// --------------------------- conservation diagnostics ---------------------------

// Max deviation over samples, relative to t = 0, of (n_s - n_i), (n_s + n_p),
// (n_i + n_p) in that order.
inline std::array<double, 3> manley_rowe_residuals(const Trajectory& traj) {
    if (traj.times.empty()) throw ConfigError("manley_rowe_residuals: empty trajectory");
    std::array<double, 3> out{0.0, 0.0, 0.0};
    const auto& first = traj.n_mean.front();
    const double r0[3] = {first[1] - first[2], first[1] + first[0], first[2] + first[0]};
    for (const auto& m : traj.n_mean) {
        out[0] = std::max(out[0], std::abs((m[1] - m[2]) - r0[0]));
        out[1] = std::max(out[1], std::abs((m[1] + m[0]) - r0[1]));
        out[2] = std::max(out[2], std::abs((m[2] + m[0]) - r0[2]));
    }
    return out;
}

// Max drift of <n_p + (n_s + n_i)/2> relative to the first sample.
inline double invariant_k_drift(const Trajectory& traj) {
    if (traj.times.empty()) throw ConfigError("invariant_k_drift: empty trajectory");
    const auto& f = traj.n_mean.front();
    const double k0 = f[0] + 0.5 * (f[1] + f[2]);
    double worst = 0.0;
    for (const auto& m : traj.n_mean)
        worst = std::max(worst, std::abs(m[0] + 0.5 * (m[1] + m[2]) - k0));
    return worst;
}

// --------------------------- truncation sizing ----------------------------------

namespace detail {

// Smallest cutoff whose Poisson upper tail is below tol.
inline int poisson_quantile(double lambda, double tol) {
    if (lambda <= 0.0) return 0;
    double term = std::exp(-lambda);
    double cdf = term;
    int n = 0;
    while (1.0 - cdf > tol && n < 4096) {
        ++n;
        term *= lambda / n;
        cdf += term;
    }
    return n;
}

}  // namespace detail

// Conservative lattice for a full run: every pump photon can convert into a
// signal/idler pair and vice versa, so each mode's seed quantile is widened by
// what the other modes can feed it.
inline TruncationSpec suggest_truncation(const SeedTriple& seeds, double leak_tol) {
    seeds.validate();
    const double s2 = seeds.seed_s.mag * seeds.seed_s.mag;
    const double i2 = seeds.seed_i.mag * seeds.seed_i.mag;
    const double g2 = seeds.pump_mag * seeds.pump_mag;
    const double tail = leak_tol / 6.0;
    const int qs = detail::poisson_quantile(s2, tail);
    const int qi = detail::poisson_quantile(i2, tail);
    const int qp = detail::poisson_quantile(g2, tail);
    TruncationSpec t;
    t.n_p_max = qp + (qs + qi + 1) / 2 + 4;
    t.n_s_max = qs + 2 * qp + 4;
    t.n_i_max = qi + 2 * qp + 4;
    t.leak_tol = leak_tol;
    return t;
}

}  // namespace pdc
