#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "pdc/dynamics.hpp"
#include "pdc/linalg.hpp"
#include "pdc/measures.hpp"
#include "pdc/steady_state.hpp"

using namespace pdc;
using Catch::Approx;

namespace {

ThreeModeState basis_state(const TruncationSpec& trunc, int p, int s, int i) {
    ThreeModeState st;
    st.trunc = trunc;
    st.amps = Vector::Zero(trunc.size());
    st.amps[st.flat_index(p, s, i)] = 1.0;
    return st;
}

double rel_residual(double lhs, double rhs) {
    return std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1e-300);
}

}  // namespace

TEST_CASE("constant-pump chain solution satisfies its recursion", "[steady]") {
    const double pairs[][2] = {{1.0, 0.0}, {0.0, 1.0}, {0.7, -0.3}};
    for (const auto& p : pairs)
        for (int dn : {0, -1, 1, 2, 5})
            for (int ns = 2; ns <= 60; ++ns) {
                const int ni = ns + dn;
                // recursion centered at (ns, ni), stepping +-1 on both indices
                const double u = 0.5 * (ns + ni);
                const double up = constant_pump_chain_coeffs(ns + 1, ni + 1, p[0], p[1]);
                const double dnn = constant_pump_chain_coeffs(ns - 1, ni - 1, p[0], p[1]);
                REQUIRE(rel_residual((u + 1.0) * up, u * dnn) < 1e-12);
            }
}

TEST_CASE("constant-pump chain values", "[steady]") {
    SECTION("head of the diagonal chain halves once") {
        REQUIRE(constant_pump_chain_coeffs(0, 0, 0.8, 0.1) ==
                Approx(2.0 * constant_pump_chain_coeffs(2, 2, 0.8, 0.1)).margin(1e-14));
    }
    SECTION("odd signal index flips the c2 sign") {
        REQUIRE(constant_pump_chain_coeffs(1, 1, 1.0, 1.0) == 0.0);
        REQUIRE(constant_pump_chain_coeffs(2, 2, 1.0, -1.0) == 0.0);
    }
    SECTION("zero constants give zero") {
        REQUIRE(constant_pump_chain_coeffs(3, 5, 0.0, 0.0) == 0.0);
    }
    SECTION("linearity in the constants is exact") {
        REQUIRE(constant_pump_chain_coeffs(4, 4, 2.0, 0.0) ==
                2.0 * constant_pump_chain_coeffs(4, 4, 1.0, 0.0));
    }
    SECTION("Gamma poles of the chain label are reported") {
        REQUIRE_THROWS_AS(constant_pump_chain_coeffs(4, 0, 1.0, 0.0), ConfigError);
        REQUIRE_THROWS_AS(constant_pump_chain_coeffs(2, 0, 1.0, 0.0), ConfigError);
        REQUIRE_THROWS_AS(constant_pump_chain_coeffs(-1, 2, 1.0, 0.0), ConfigError);
    }
}

TEST_CASE("large-pump chain solution satisfies the expanded recursion", "[steady]") {
    const double pairs[][2] = {{1.0, 0.0}, {0.0, 1.0}, {0.8, -0.35}};
    for (const auto& p : pairs)
        for (int n_p0 : {25, 40, 70})
            for (int n = 1; n <= 45; ++n) {
                const double up = large_pump_chain_coeffs(n_p0, 0, n + 1, p[0], p[1]);
                const double dn = large_pump_chain_coeffs(n_p0, 0, n - 1, p[0], p[1]);
                const double lhs = 2.0 * (n_p0 + 1.0) * (2.0 * n_p0 - n) * (n + 1.0) * up;
                const double rhs = 2.0 * n_p0 * (2.0 * (n_p0 + 1.0) - n) * n * dn;
                REQUIRE(rel_residual(lhs, rhs) < 1e-10);
            }
}

TEST_CASE("large-pump guard rails", "[steady]") {
    SECTION("pole right above the pump scale") {
        REQUIRE_THROWS_AS(large_pump_chain_coeffs(40, 0, 81, 1.0, 1.0), ConfigError);
        REQUIRE_THROWS_AS(large_pump_chain_coeffs(-1, 0, 3, 1.0, 1.0), ConfigError);
        REQUIRE_THROWS_AS(large_pump_chain_coeffs(40, 0, -2, 1.0, 1.0), ConfigError);
    }
    SECTION("regime note goes to the stream only when outside") {
        std::ostringstream warn;
        large_pump_chain_coeffs(100, 5, 25, 1.0, 0.0, &warn);
        REQUIRE(warn.str().empty());
        large_pump_chain_coeffs(40, 0, 20, 1.0, 0.0, &warn);
        REQUIRE(warn.str().find("outside the regime") != std::string::npos);
        REQUIRE_NOTHROW(large_pump_chain_coeffs(40, 0, 20, 1.0, 0.0, nullptr));
    }
    SECTION("regime predicate") {
        REQUIRE(large_pump_regime_ok(100, 5, 25));
        REQUIRE_FALSE(large_pump_regime_ok(40, 0, 20));
        REQUIRE_FALSE(large_pump_regime_ok(100, 10, 25));
    }
}

TEST_CASE("large-pump family is not rank one across pump sizes", "[steady]") {
    const std::vector<int> pumps{30, 40, 50, 60};
    const int n_max = 12;
    Matrix m(int(pumps.size()), n_max);
    for (int a = 0; a < int(pumps.size()); ++a)
        for (int b = 0; b < n_max; ++b)
            m(a, b) = large_pump_chain_coeffs(pumps[size_t(a)], 0, b + 1, 1.0, 0.3);
    Eigen::VectorXd sv = singular_values(m);
    REQUIRE(sv[1] > 1e-6 * sv[0]);
}

TEST_CASE("solution handles route to the right family", "[steady]") {
    SteadyChainSolution cp;
    cp.family = SteadyChainSolution::Family::constant_pump;
    cp.delta_n = 1;
    cp.c1 = 0.5;
    cp.c2 = 0.1;
    REQUIRE(cp.evaluate(3, 4) == Approx(constant_pump_chain_coeffs(3, 4, 0.5, 0.1)));
    REQUIRE_THROWS_AS(cp.evaluate(3, 5), ConfigError);
    REQUIRE_THROWS_AS(cp.evaluate_chain(3), ConfigError);

    SteadyChainSolution lp;
    lp.family = SteadyChainSolution::Family::large_pump;
    lp.n_p0 = 40;
    lp.c1 = 1.0;
    REQUIRE(lp.evaluate_chain(5) == Approx(large_pump_chain_coeffs(40, 0, 5, 1.0, 0.0)));
    REQUIRE_THROWS_AS(lp.evaluate(2, 2), ConfigError);
}

TEST_CASE("chain fits recover the free constants", "[steady]") {
    SECTION("exact data with a global phase") {
        const cplx phase = std::polar(1.0, 0.9);
        std::vector<cplx> amps;
        for (int j = 0; j <= 14; ++j)
            amps.push_back(phase * constant_pump_chain_coeffs(j, j + 1, 0.8, -0.35));
        ChainFit fit = fit_chain_constants(amps, 1);
        REQUIRE(fit.c1 == Approx(0.8).margin(1e-8));
        REQUIRE(fit.c2 == Approx(-0.35).margin(1e-8));
        REQUIRE(fit.residual < 1e-10);
    }
    SECTION("overall sign folds into the alignment phase") {
        std::vector<cplx> amps;
        for (int j = 0; j <= 14; ++j)
            amps.push_back(constant_pump_chain_coeffs(j, j + 1, -0.8, 0.35));
        ChainFit fit = fit_chain_constants(amps, 1);
        REQUIRE(fit.c1 == Approx(0.8).margin(1e-8));
        REQUIRE(fit.c2 == Approx(-0.35).margin(1e-8));
    }
    SECTION("off-model imaginary noise lands in the residual") {
        std::vector<cplx> amps;
        for (int j = 0; j <= 14; ++j)
            amps.push_back(constant_pump_chain_coeffs(j, j, 0.8, -0.35) +
                           cplx(0.0, 1e-6 * ((j % 2 == 0) ? 0.3 : -0.4)));
        ChainFit fit = fit_chain_constants(amps, 0);
        REQUIRE(fit.c1 == Approx(0.8).margin(1e-4));
        REQUIRE(fit.c2 == Approx(-0.35).margin(1e-4));
        REQUIRE(fit.residual > 1e-8);
        REQUIRE(fit.residual < 1e-4);
    }
    SECTION("degenerate inputs") {
        REQUIRE_THROWS_AS(fit_chain_constants({1.0, 2.0}, 0), ConfigError);
        REQUIRE_THROWS_AS(fit_chain_constants({1.0, 2.0, 3.0}, -2, 1), ConfigError);
        ChainFit z = fit_chain_constants(std::vector<cplx>(6, cplx(0.0, 0.0)), 0);
        REQUIRE(z.c1 == 0.0);
        REQUIRE(z.c2 == 0.0);
        REQUIRE(z.residual == 0.0);
    }
}

TEST_CASE("chain constants come straight out of a pure density", "[steady]") {
    const int cut = 11;
    Vector c(cut + 1);
    for (int n = 0; n <= cut; ++n) c[n] = constant_pump_chain_coeffs(n, n, 0.6, 0.2);
    c *= std::polar(1.0 / c.norm(), -0.4);

    DensityMatrix dm;
    dm.modes = {Mode::signal, Mode::idler};
    dm.cutoffs = {cut, cut};
    Vector full = Vector::Zero((cut + 1) * (cut + 1));
    for (int n = 0; n <= cut; ++n) full[n * (cut + 1) + n] = c[n];
    dm.rho = full * full.adjoint();

    ChainFit fit = fit_chain_constants(dm, 0);
    REQUIRE(fit.residual < 1e-10);
    REQUIRE(fit.c1 / fit.c2 == Approx(3.0).margin(1e-8));

    REQUIRE_THROWS_AS(extract_chain_amplitudes(DensityMatrix{}, 0), ConfigError);
}

TEST_CASE("time-averaged densities", "[steady]") {
    SECTION("a trajectory without snapshots is rejected") {
        TruncationSpec trunc{3, 3, 3, 1e-6};
        EvolutionConfig cfg;
        cfg.t_end = 0.01;
        Trajectory traj = evolve_dense(basis_state(trunc, 0, 0, 0), cfg);
        REQUIRE_THROWS_AS(time_averaged_density(traj, 0.0, 0.01), ConfigError);
    }
    SECTION("stationary state averages to itself") {
        TruncationSpec trunc{3, 3, 3, 1e-6};
        EvolutionConfig cfg;
        cfg.t_end = 0.1;
        cfg.snapshot_stride = 20;
        Trajectory traj = evolve_dense(basis_state(trunc, 0, 0, 0), cfg);
        AveragedDensities avg = time_averaged_density(traj, 0.0, 0.1);
        REQUIRE(avg.snapshots_used == 6);
        REQUIRE(avg.pump.rho(0, 0).real() == Approx(1.0).margin(1e-14));
        REQUIRE(avg.pump.rho.cwiseAbs().sum() == Approx(1.0).margin(1e-14));
        REQUIRE(avg.signal_idler.has_value());
    }
    SECTION("window selection and linear means") {
        SeedTriple seeds;
        seeds.seed_s = CoherentSeed{0.7, 0.3};
        seeds.seed_i = CoherentSeed{0.7, 0.0};
        seeds.pump_mag = 1.0;
        seeds.pump_phase = 0.1;
        TruncationSpec trunc{8, 6, 6, 1e-2};
        EvolutionConfig cfg;
        cfg.t_end = 0.1;
        cfg.record_stride = 10;
        cfg.snapshot_stride = 20;
        Trajectory traj = evolve_dense(initial_state(seeds, trunc), cfg);

        AveragedDensities avg = time_averaged_density(traj, 0.019, 0.061, false);
        REQUIRE(avg.snapshots_used == 3);
        REQUIRE_FALSE(avg.signal_idler.has_value());
        REQUIRE(avg.pump.rho.trace().real() == Approx(1.0).margin(1e-13));
        REQUIRE(hermiticity_defect(avg.pump.rho) == 0.0);

        // Averaging then reading the mean equals pooling the raw sums.
        double pooled_mean = 0.0, pooled_norm = 0.0;
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            const double t = traj.times[k];
            if (t < 0.019 || t > 0.061) continue;
            if (std::lround(t / cfg.dt) % cfg.snapshot_stride != 0) continue;
            pooled_mean += traj.n_mean[k][0];
            pooled_norm += traj.norm[k];
        }
        double avg_mean = 0.0;
        for (int n = 0; n < avg.pump.dim(); ++n) avg_mean += n * avg.pump.rho(n, n).real();
        REQUIRE(avg_mean == Approx(pooled_mean / pooled_norm).margin(1e-10));

        REQUIRE_THROWS_AS(time_averaged_density(traj, 0.3, 0.4), ConfigError);
    }
}

TEST_CASE("long-time signal distribution forgets the cumulative phase",
          "[.][slow][steady]") {
    auto run = [](double phi) {
        SeedTriple seeds;
        seeds.seed_s = CoherentSeed{std::sqrt(3.0), phi};
        seeds.seed_i = CoherentSeed{std::sqrt(3.0), 0.0};
        seeds.pump_mag = std::sqrt(10.0);
        seeds.pump_phase = 0.0;
        TruncationSpec trunc{36, 42, 42, 1e-5};
        EvolutionConfig cfg;
        cfg.t_end = 10.0;
        cfg.record_stride = 100;
        cfg.snapshot_stride = 250;
        cfg.norm_drift_tol = 1e-6;
        Trajectory traj = evolve_dense(initial_state(seeds, trunc), cfg);
        return time_averaged_density(traj, 5.0, 10.0, false);
    };
    AveragedDensities a = run(0.0);
    AveragedDensities b = run(kPi);
    REQUIRE(trace_distance(a.signal, b.signal) < 0.05);
}
