#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "pdc/constant_pump.hpp"
#include "pdc/fock.hpp"
#include "pdc/linalg.hpp"
#include "pdc/measures.hpp"

using namespace pdc;
using Catch::Approx;

namespace {

DensityMatrix pure_density(const TwoModeState& st) {
    DensityMatrix dm;
    dm.modes = {Mode::signal, Mode::idler};
    dm.cutoffs = {st.n1_max, st.n2_max};
    Eigen::Map<const Vector> v(st.amps.data(), st.amps.size());
    dm.rho = v * v.adjoint();
    dm.rho /= dm.rho.trace().real();
    return dm;
}

DensityMatrix thermal_density(double nbar, int cutoff) {
    DensityMatrix dm;
    dm.modes = {Mode::signal};
    dm.cutoffs = {cutoff};
    dm.rho = Matrix::Zero(cutoff + 1, cutoff + 1);
    double p = 1.0 / (nbar + 1.0), ratio = nbar / (nbar + 1.0);
    for (int n = 0; n <= cutoff; ++n) {
        dm.rho(n, n) = p;
        p *= ratio;
    }
    dm.rho /= dm.rho.trace().real();
    return dm;
}

}  // namespace

TEST_CASE("von Neumann entropy basics", "[measures]") {
    SECTION("pure state has zero entropy") {
        auto st = tmscs_closed_form(CoherentSeed{0.9, 0.2}, CoherentSeed{0.5, -0.4},
                                    SqueezeParams{0.3, 0.1}, 18);
        auto dm = pure_density(st);
        REQUIRE(von_neumann_entropy(dm) == Approx(0.0).margin(1e-9));
    }
    SECTION("maximally mixed d = 4 gives ln 4") {
        DensityMatrix dm;
        dm.modes = {Mode::pump};
        dm.cutoffs = {3};
        dm.rho = Matrix::Identity(4, 4) / 4.0;
        REQUIRE(von_neumann_entropy(dm) == Approx(std::log(4.0)).margin(1e-12));
    }
    SECTION("traced TMSVS mode at r = 1.2") {
        auto st = tmsvs_amplitudes(SqueezeParams{1.2, 0.0}, 80);
        REQUIRE(von_neumann_entropy(reduce_mode1(st)) ==
                Approx(2.01645115084775852473629409188).margin(1e-6));
    }
    SECTION("large negative eigenvalue rejected") {
        DensityMatrix dm;
        dm.modes = {Mode::pump};
        dm.cutoffs = {1};
        dm.rho = Matrix::Zero(2, 2);
        dm.rho(0, 0) = 1.5;
        dm.rho(1, 1) = -0.5;
        REQUIRE_THROWS_AS(von_neumann_entropy(dm), NotAState);
    }
}

TEST_CASE("partial transpose structure", "[measures]") {
    auto st = tmscs_closed_form(CoherentSeed{0.8, 0.4}, CoherentSeed{0.6, -0.9},
                                SqueezeParams{0.5, 0.2}, 12);
    auto dm = pure_density(st);
    SECTION("involutive and Hermiticity-preserving") {
        auto pt = partial_transpose(dm, Mode::idler);
        REQUIRE(hermiticity_defect(pt.rho) < 1e-14);
        auto back = partial_transpose(pt, Mode::idler);
        REQUIRE((back.rho - dm.rho).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("either mode gives the same log-negativity") {
        auto pt1 = partial_transpose(dm, Mode::signal);
        auto pt2 = partial_transpose(dm, Mode::idler);
        auto l1 = hermitian_eigenvalues(pt1.rho);
        auto l2 = hermitian_eigenvalues(pt2.rho);
        REQUIRE((l1 - l2).cwiseAbs().maxCoeff() < 1e-10);
    }
    SECTION("product state stays PSD") {
        auto vs = coherent_amplitudes(cplx(0.9, 0.1), 12);
        auto vi = coherent_amplitudes(cplx(-0.3, 0.6), 12);
        TwoModeState prod;
        prod.n1_max = prod.n2_max = 12;
        prod.amps = vs * vi.transpose();
        auto pt = partial_transpose(pure_density(prod), Mode::idler);
        REQUIRE(hermitian_eigenvalues(pt.rho).minCoeff() > -1e-12);
    }
    SECTION("entangled TMSVS violates PPT") {
        auto sv = tmsvs_amplitudes(SqueezeParams{0.8, 0.0}, 40);
        auto pt = partial_transpose(pure_density(sv), Mode::idler);
        REQUIRE(hermitian_eigenvalues(pt.rho).minCoeff() < 0.0);
    }
    SECTION("single-mode input rejected") {
        auto rho1 = reduce_mode1(st);
        REQUIRE_THROWS_AS(partial_transpose(rho1, Mode::signal), BasisMismatch);
    }
}

TEST_CASE("log-negativity", "[measures]") {
    SECTION("embedded Bell pair gives exactly one ebit") {
        TwoModeState bell;
        bell.n1_max = bell.n2_max = 1;
        bell.amps = Matrix::Zero(2, 2);
        bell.amps(0, 0) = bell.amps(1, 1) = 1.0 / std::sqrt(2.0);
        REQUIRE(log_negativity(pure_density(bell)) == Approx(1.0).margin(1e-12));
        REQUIRE(log_negativity_pure(bell) == Approx(1.0).margin(1e-12));
    }
    SECTION("coherent products carry none") {
        std::mt19937 rng(42);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            auto vs = coherent_amplitudes(cplx(u(rng), u(rng)), 12);
            auto vi = coherent_amplitudes(cplx(u(rng), u(rng)), 12);
            TwoModeState prod;
            prod.n1_max = prod.n2_max = 12;
            prod.amps = vs * vi.transpose();
            REQUIRE(log_negativity(pure_density(prod)) <= 1e-8);
        }
    }
    SECTION("TMSVS r = 1.2 dense path at cutoff 40") {
        // hand-rolled diagonal amplitudes: cutoff 40 sits below the library's
        // tail precondition for r = 1.2, which is the point of this pin
        TwoModeState sv;
        sv.n1_max = sv.n2_max = 40;
        sv.amps = Matrix::Zero(41, 41);
        cplx c = 1.0 / std::cosh(1.2), step = -std::polar(std::tanh(1.2), 0.4);
        for (int n = 0; n <= 40; ++n) {
            sv.amps(n, n) = c;
            c *= step;
        }
        double en = log_negativity(pure_density(sv));
        REQUIRE(en == Approx(3.46080559688243632469029285584).margin(2e-6));
        REQUIRE(en == Approx(3.4624680981335121776638192344).margin(1e-2));
        REQUIRE(log_negativity_pure(sv) == Approx(en).margin(1e-8));
    }
    SECTION("TMSCS negativity identical at Phi = 0 and pi") {
        double e0 = log_negativity_pure(tmscs_closed_form(
            CoherentSeed{1.0, 0.0}, CoherentSeed{1.0, 0.0}, SqueezeParams{0.8, 0.0}, 90));
        double epi = log_negativity_pure(tmscs_closed_form(
            CoherentSeed{1.0, kPi}, CoherentSeed{1.0, 0.0}, SqueezeParams{0.8, 0.0}, 90));
        REQUIRE(e0 == Approx(epi).margin(1e-3));
    }
}

// excluded from the default run; invoke with "[slow]" to exercise the full-size case
TEST_CASE("TMSVS dense log-negativity at cutoff 80", "[.][slow]") {
    auto sv = tmsvs_amplitudes(SqueezeParams{1.2, 0.0}, 80);
    DensityMatrix dm = pure_density(sv);
    double en = log_negativity(dm);
    REQUIRE(en == Approx(3.46246694976007200312387993995).margin(1e-6));
    REQUIRE(en == Approx(3.4622).margin(1e-2));
}

TEST_CASE("Mandel Q reference distributions", "[measures]") {
    SECTION("Poisson is Q = 0") {
        std::vector<double> p(41);
        double lam = 3.0, term = std::exp(-lam);
        for (int n = 0; n <= 40; ++n) {
            p[size_t(n)] = term;
            term *= lam / (n + 1);
        }
        REQUIRE(mandel_q(p) == Approx(0.0).margin(1e-6));
    }
    SECTION("Fock state is Q = -1") {
        std::vector<double> p(9, 0.0);
        p[5] = 1.0;
        REQUIRE(mandel_q(p) == Approx(-1.0).margin(1e-14));
    }
    SECTION("thermal nbar = 2 is Q = +2") {
        auto dm = thermal_density(2.0, 80);
        REQUIRE(mandel_q(dm) == Approx(2.0).margin(1e-6));
    }
    SECTION("zero mean rejected") {
        std::vector<double> p{1.0, 0.0};
        REQUIRE_THROWS_AS(mandel_q(p), NotAState);
    }
}

TEST_CASE("mutual information on three-mode states", "[measures]") {
    SECTION("product state carries none") {
        TruncationSpec tr{12, 10, 10, 1e-6};
        auto st = product_coherent_state(cplx(1.0, 0.3), cplx(0.5, 0.0), cplx(1.2, -0.2), tr);
        renormalize(st);
        REQUIRE(mutual_information_pump_vs_si(st) == Approx(0.0).margin(1e-8));
        REQUIRE(mutual_information_signal_idler(st) == Approx(0.0).margin(1e-8));
    }
    SECTION("pump mutual information is twice the pump entropy") {
        std::mt19937 rng(99);
        std::normal_distribution<double> nd;
        ThreeModeState st;
        st.trunc = TruncationSpec{4, 4, 4, 1e-6};
        st.amps.resize(st.trunc.size());
        for (Eigen::Index k = 0; k < st.amps.size(); ++k) st.amps[k] = cplx(nd(rng), nd(rng));
        st.amps /= st.amps.norm();
        double sp = von_neumann_entropy(partial_trace(st, Mode::pump));
        REQUIRE(mutual_information_pump_vs_si(st) == Approx(2.0 * sp).margin(1e-12));
        REQUIRE(mutual_information_signal_idler(st) >= -1e-7);
    }
    SECTION("embedded TMSVS with pure pump gives I(s:i) = 2 S_s") {
        auto sv = tmsvs_amplitudes(SqueezeParams{0.6, 0.0}, 24);
        ThreeModeState st;
        st.trunc = TruncationSpec{2, 24, 24, 1e-6};
        st.amps = Vector::Zero(st.trunc.size());
        for (int n = 0; n <= 24; ++n) st.amps[st.flat_index(0, n, n)] = sv.amps(n, n);
        double ss = von_neumann_entropy(partial_trace(st, Mode::signal));
        REQUIRE(mutual_information_signal_idler(st) == Approx(2.0 * ss).margin(1e-9));
        REQUIRE(mutual_information_pump_vs_si(st) == Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("thermal entropy and the effective thermal gap", "[measures]") {
    REQUIRE(thermal_entropy(0.0) == 0.0);
    REQUIRE(thermal_entropy(1.0) == Approx(1.38629436111989061883446424292).epsilon(1e-14));
    REQUIRE_THROWS_AS(thermal_entropy(-0.1), ConfigError);

    SECTION("exact thermal state has zero gap") {
        auto dm = thermal_density(1.5, 70);
        REQUIRE(effective_thermal_gap(dm) == Approx(0.0).margin(1e-8));
    }
    SECTION("traced TMSVS mode is exactly thermal") {
        auto sv = tmsvs_amplitudes(SqueezeParams{1.2, 0.3}, 80);
        REQUIRE(effective_thermal_gap(reduce_mode1(sv)) == Approx(0.0).margin(1e-6));
    }
    SECTION("pure states have maximal gap") {
        auto v = coherent_amplitudes(cplx(1.4, -0.2), 20);
        DensityMatrix dm;
        dm.modes = {Mode::signal};
        dm.cutoffs = {20};
        dm.rho = v * v.adjoint();
        double nbar = 0.0;
        for (int n = 0; n <= 20; ++n) nbar += n * std::norm(v[n]);
        REQUIRE(effective_thermal_gap(dm) == Approx(thermal_entropy(nbar)).margin(1e-7));
        REQUIRE(effective_thermal_gap(dm) >= -1e-9);
    }
}

TEST_CASE("trace distance and purity", "[measures]") {
    auto a = thermal_density(1.0, 30);
    REQUIRE(trace_distance(a, a) == Approx(0.0).margin(1e-14));
    // orthogonal pure states sit at distance one
    DensityMatrix p0, p1;
    p0.modes = p1.modes = {Mode::signal};
    p0.cutoffs = p1.cutoffs = {1};
    p0.rho = Matrix::Zero(2, 2);
    p1.rho = Matrix::Zero(2, 2);
    p0.rho(0, 0) = 1.0;
    p1.rho(1, 1) = 1.0;
    REQUIRE(trace_distance(p0, p1) == Approx(1.0).margin(1e-14));
    REQUIRE(purity(p0) == Approx(1.0).margin(1e-14));
    REQUIRE(purity(a) < 1.0);
}

TEST_CASE("Hermitian eigensolver wrapper", "[linalg]") {
    std::mt19937 rng(3);
    std::normal_distribution<double> nd;
    int n = 60;
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = cplx(nd(rng), nd(rng));
    m = 0.5 * (m + m.adjoint()).eval();
    auto spec = hermitian_spectrum(m, true);
    REQUIRE(spec.residual < 1e-8 * m.norm());
    for (int k = 1; k < n; ++k) REQUIRE(spec.eigenvalues[k - 1] >= spec.eigenvalues[k]);
    auto vals = hermitian_eigenvalues(m);
    REQUIRE((vals - spec.eigenvalues).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE(vals.sum() == Approx(m.trace().real()).margin(1e-9));
}
