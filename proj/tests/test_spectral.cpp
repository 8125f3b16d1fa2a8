#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doppler/errors.hpp"
#include "doppler/oracle.hpp"
#include "doppler/scenario.hpp"
#include "doppler/spectral.hpp"
#include "test_support.hpp"

using namespace doppler;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double rel_err(Complex got, Complex want) { return std::abs(got - want) / std::abs(want); }

double relative_residual(const CMatrix& g, const DensityMatrix& rho) {
    return (g * rho.vectorized()).norm() / g.norm();
}

LadderScenario fig1() { return LadderScenario::rb87_modulated_ladder(); }

}  // namespace

TEST_CASE("null state of a decaying, undriven atom is the ground state") {
    const LiouvillianPair pair = build_liouvillian_pair(testing::two_level(0.0, 0.0, 5.0));
    const DensityMatrix rho = null_state(pair.g0);
    CMatrix ground = CMatrix::Zero(2, 2);
    ground(0, 0) = 1.0;
    CHECK(max_abs_diff(rho.matrix(), ground) < 1e-14);
}

TEST_CASE("null state with the upper coupling switched off reduces to the two-level Bloch solution") {
    // Resonant two-level Bloch equations at steady state:
    //   0 = -Gamma rho_ee - Im(Omega rho_ge),  0 = -(Gamma/2) rho_eg - i (Omega/2)(rho_gg - rho_ee)
    // give rho_ee = Omega^2 / (Gamma^2 + 2 Omega^2) and rho_eg = -i Omega Gamma / (Gamma^2 + 2 Omega^2).
    const LadderScenario s = fig1();
    const DensityMatrix rho = null_state(build_liouvillian_pair(ladder_system(s, 0.25)).g0);
    const double denom = s.gamma * s.gamma + 2.0 * s.omega_c * s.omega_c;
    CHECK(std::abs(rho(1, 1) - s.omega_c * s.omega_c / denom) < 1e-12);
    CHECK(std::abs(rho(0, 0) - (s.gamma * s.gamma + s.omega_c * s.omega_c) / denom) < 1e-12);
    CHECK(std::abs(rho(1, 0) - Complex(0.0, -s.omega_c * s.gamma / denom)) < 1e-12);
    CHECK(std::abs(rho(2, 2)) < 1e-12);
    CHECK(std::abs(rho(2, 0)) < 1e-12);
    CHECK(std::abs(rho(2, 1)) < 1e-12);
}

TEST_CASE("null state residual is at roundoff") {
    for (const AtomicSystem& sys : {ladder_system(fig1(), 0.0), ladder_system(fig1(), 0.1),
                                    testing::four_level_system(), testing::two_level(3.0, 1.0, 2.0)}) {
        const CMatrix g0 = build_liouvillian_pair(sys).g0;
        const DensityMatrix rho = null_state(g0);
        CHECK(relative_residual(g0, rho) <= 1e-10);
        CHECK(std::abs(rho.matrix().trace() - 1.0) < 1e-12);
        CHECK(max_abs_diff(rho.matrix(), rho.matrix().adjoint()) < 1e-12);
    }
}

TEST_CASE("degenerate null spaces are reported with their dimension") {
    SUBCASE("zero generator") {
        const CMatrix g0 = CMatrix::Zero(4, 4);
        try {
            null_state(g0);
            FAIL("expected a degeneracy error");
        } catch (const DegeneracyError& e) {
            CHECK(e.zero_modes() == 4);
        }
    }
    SUBCASE("isolated, immortal Rydberg level") {
        LadderScenario s = fig1();
        s.omega_p = 0.0;
        s.gamma_rydberg = 0.0;
        const LiouvillianPair pair = build_liouvillian_pair(ladder_system(s, 0.0));
        try {
            build_spectral_model(pair, s.v_th);
            FAIL("expected a degeneracy error");
        } catch (const DegeneracyError& e) {
            CHECK(e.zero_modes() == 2);
            CHECK(std::string(e.what()).find("degenerate") != std::string::npos);
        }
        CHECK_THROWS_AS(null_state(pair.g0), DegeneracyError);
        CHECK_THROWS_AS(pseudo_inverse(pair.g0), DegeneracyError);
    }
}

TEST_CASE("pseudo-inverse of a diagonal generator") {
    CMatrix g0 = CMatrix::Zero(4, 4);
    g0.diagonal() << -1.0, -2.0, 0.0, -4.0;
    const PseudoInverse pi = pseudo_inverse(g0);
    CMatrix expected = CMatrix::Zero(4, 4);
    expected.diagonal() << -1.0, -0.5, 0.0, -0.25;
    CHECK(max_abs_diff(pi.pinv, expected) < 1e-15);
    CMatrix projector = CMatrix::Zero(4, 4);
    projector(2, 2) = 1.0;
    CHECK(max_abs_diff(pi.null_projector, projector) < 1e-15);
}

TEST_CASE("pseudo-inverse completes the null projector") {
    for (const AtomicSystem& sys : {ladder_system(fig1(), 0.0), testing::four_level_system()}) {
        const CMatrix g0 = build_liouvillian_pair(sys).g0;
        const PseudoInverse pi = pseudo_inverse(g0);
        const auto d = g0.rows();
        const CMatrix id = CMatrix::Identity(d, d);
        CHECK((pi.pinv * g0 + pi.null_projector - id).norm() <= 1e-8 * std::sqrt(double(d)));
        CHECK((g0 * pi.pinv + pi.null_projector - id).norm() <= 1e-8 * std::sqrt(double(d)));
        const DensityMatrix rho0 = null_state(g0);
        CHECK((pi.pinv * rho0.vectorized()).norm() <= 1e-10 * pi.pinv.norm());
        CHECK((pi.null_projector * pi.null_projector - pi.null_projector).norm() < 1e-10);
    }
}

TEST_CASE("defective generators are detected") {
    CMatrix g0 = CMatrix::Zero(4, 4);
    g0(1, 1) = -1.0;
    g0(1, 2) = 1.0;
    g0(2, 2) = -1.0;
    g0(3, 3) = -2.0;
    CHECK_THROWS_AS(pseudo_inverse(g0), DefectiveMatrixError);
    CHECK_THROWS_AS(biorthogonal_eigensystem(g0), DefectiveMatrixError);
}

TEST_CASE("propagator at zero velocity or without Doppler coupling is the identity") {
    const LiouvillianPair pair = testing::fig1_pair(0.0);
    const SpectralModel model = build_spectral_model(pair, fig1().v_th);
    CHECK(max_abs_diff(propagate(model, pair.gv, 0.0).matrix(), model.rho0.matrix()) < 1e-15);
    const CMatrix zero = CMatrix::Zero(pair.gv.rows(), pair.gv.cols());
    for (double v : {-300.0, 17.0, 850.0}) {
        CHECK(max_abs_diff(propagate(model, zero, v).matrix(), model.rho0.matrix()) < 1e-15);
    }
}

TEST_CASE("propagated state matches an independent null-space solve") {
    const LiouvillianPair pair = testing::fig1_pair(0.0);
    const SpectralModel model = build_spectral_model(pair, fig1().v_th);
    const double v = 100.0;
    const DensityMatrix rho_v = propagate(model, pair.gv, v);
    const CMatrix g = pair.g0 + v * pair.gv;
    CHECK(max_abs_diff(rho_v.matrix(), direct_null_state(g).matrix()) <= 1e-8);
    CHECK(relative_residual(g, rho_v) <= 1e-8);
    // Trace is preserved by the propagator itself, before normalization.
    CHECK(std::abs(rho_v.raw_trace() - 1.0) < 1e-10);
}

TEST_CASE("property: propagator residual over the thermal velocity range") {
    for (double t : {0.0, 0.125, 0.3}) {
        const LiouvillianPair pair = testing::fig1_pair(t);
        const double v_th = fig1().v_th;
        const SpectralModel model = build_spectral_model(pair, v_th);
        for (int j = 0; j <= 20; ++j) {
            const double v = -5.0 * v_th + j * 0.5 * v_th;
            const CMatrix g = pair.g0 + v * pair.gv;
            CAPTURE(v);
            CHECK(relative_residual(g, propagate(model, pair.gv, v)) <= 1e-8);
        }
    }
}

TEST_CASE("spectral model without Doppler coupling has only zero modes") {
    LiouvillianPair pair = testing::fig1_pair(0.0);
    pair.gv.setZero();
    const SpectralModel model = build_spectral_model(pair, 169.5);
    REQUIRE(model.modes.size() == 9);
    for (const auto& mode : model.modes) CHECK(mode.lam == Complex(0.0));
    CHECK(max_abs_diff(doppler_average(model).matrix(), model.rho0.matrix()) < 1e-14);
}

TEST_CASE("spectral model identities") {
    std::mt19937_64 rng(11);
    const std::vector<std::pair<AtomicSystem, double>> systems = {
        {ladder_system(fig1(), 0.0), fig1().v_th},
        {ladder_system(fig1(), 0.4), fig1().v_th},
        {testing::four_level_system(), 3.0},
    };
    for (const auto& [sys, v_th] : systems) {
        const LiouvillianPair pair = build_liouvillian_pair(sys);
        const SpectralModel model = build_spectral_model(pair, v_th);
        const CMatrix& a = model.generator;
        const double a_norm = a.norm();

        CMatrix rebuilt = CMatrix::Zero(a.rows(), a.cols());
        for (const auto& mode : model.modes) {
            rebuilt += (mode.lam / v_th) * mode.right * mode.left.transpose();
            CHECK((a * mode.right - (mode.lam / v_th) * mode.right).norm() <= 1e-8 * a_norm);
            CHECK((mode.left.transpose() * a - (mode.lam / v_th) * mode.left.transpose()).norm() <=
                  1e-8 * a_norm);
        }
        CHECK((rebuilt - a).norm() <= 1e-8 * a_norm);

        double bio = 0.0;
        for (std::size_t i = 0; i < model.modes.size(); ++i) {
            for (std::size_t j = 0; j < model.modes.size(); ++j) {
                const Complex ip = (model.modes[i].left.transpose() * model.modes[j].right)(0);
                bio = std::max(bio, std::abs(ip - (i == j ? 1.0 : 0.0)));
            }
        }
        CHECK(bio <= 1e-8);

        // Eigen-expansion vs direct inverse of the propagator.
        std::uniform_real_distribution<double> vel(-5.0 * v_th, 5.0 * v_th);
        for (int k = 0; k < 10; ++k) {
            const double v = vel(rng);
            CAPTURE(v);
            CHECK(max_abs_diff(propagate_modes(model, v).matrix(), propagate(model, pair.gv, v).matrix()) <= 1e-7);
        }
    }
}

TEST_CASE("doppler weight at special points") {
    CHECK(doppler_weight(0.0) == Complex(1.0));
    // sqrt(pi/2) e^{1/2} erfc(1/sqrt 2), 40-digit mpmath.
    const Complex at_i = doppler_weight({0.0, 1.0});
    CHECK(std::abs(at_i - 0.65567954241879847154) < 1e-10);
    CHECK(std::abs(at_i.imag()) < 1e-15);
    const double closed = std::sqrt(std::numbers::pi / 2.0) * std::exp(0.5) * std::erfc(1.0 / std::sqrt(2.0));
    CHECK(std::abs(at_i.real() - closed) < 1e-14);
}

TEST_CASE("doppler weight against independently integrated values") {
    // E[1/(1 + lam u)] by 40-digit adaptive quadrature (mpmath) with a
    // breakpoint at the real part of the pole.
    struct Case {
        Complex lam;
        Complex value;
    };
    const Case cases[] = {
        {{0.3, 0.4}, {0.88545475055117246412, 0.13938398042987759242}},
        {{2.0, -1.0}, {0.3208271241831700263, -0.34209020817903474691}},
        {{0.05, 0.01}, {1.0024143792733937444, 0.0010146491036390369877}},
        {{50.0, 30.0}, {0.011193921736075296956, 0.018171757858123940056}},
        {{-7.0, 0.5}, {0.032309353119004050928, -0.17352535923656343882}},
    };
    for (const auto& c : cases) {
        CAPTURE(c.lam);
        CHECK(rel_err(doppler_weight(c.lam), c.value) <= 1e-10);
    }
}

TEST_CASE("doppler weight symmetries and limits") {
    for (Complex lam : {Complex(0.3, 0.4), Complex(-2.0, 0.1), Complex(1e-5, 3e-5), Complex(700.0, -20.0)}) {
        CAPTURE(lam);
        CHECK(doppler_weight(std::conj(lam)) == std::conj(doppler_weight(lam)));
        // u -> -u maps lam to -lam.
        CHECK(rel_err(doppler_weight(-lam), doppler_weight(lam)) < 1e-14);
    }
    // Series and closed form agree across the cutoff.
    for (double arg : {0.3, 1.2, 2.0}) {
        const Complex lam = std::polar(1e-4, arg);
        CHECK(rel_err(doppler_weight(lam * (1.0 - 1e-9)), doppler_weight(lam * (1.0 + 1e-9))) < 1e-13);
    }
    // Large |lam|: g ~ -i sqrt(pi/2) sign(Im lam) / lam.
    const Complex big(0.0, 1e6);
    CHECK(rel_err(doppler_weight(big), Complex(0.0, std::sqrt(std::numbers::pi / 2.0)) / big) < 1e-5);
}

TEST_CASE("real eigenvalues are rejected") {
    CHECK_THROWS_AS(doppler_weight(0.5), PoleOnAxisError);
    CHECK_THROWS_AS(doppler_weight(Complex(-3.0, 1e-14)), PoleOnAxisError);
    CHECK_THROWS_AS(doppler_weight(Complex(1e-6, 0.0)), PoleOnAxisError);
    CHECK_NOTHROW(doppler_weight(Complex(1e-13, 0.0)));
    CHECK_THROWS_AS(doppler_weight(Complex(std::nan(""), 1.0)), NumericFailureError);
}

TEST_CASE("property: doppler weight matches shifted-contour Gauss-Hermite quadrature") {
    const GaussHermiteRule rule = gauss_hermite_rule(200);
    double worst = 0.0;
    for (int m = 0; m < 10; ++m) {
        const double mag = std::pow(10.0, -6.0 + 9.0 * m / 9.0);
        for (int a = 0; a < 10; ++a) {
            const double arg = (a + 0.5) * 2.0 * std::numbers::pi / 10.0;
            const Complex lam = std::polar(mag, arg);
            worst = std::max(worst, rel_err(doppler_weight(lam), quadrature_weight(lam, rule)));
        }
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("averaged state without Doppler coupling or at vanishing temperature is rho0") {
    const LiouvillianPair pair = testing::fig1_pair(0.0);
    const SpectralModel frozen = build_spectral_model(pair, 1e-9);
    CHECK(max_abs_diff(doppler_average(frozen).matrix(), frozen.rho0.matrix()) <= 1e-6);
}

TEST_CASE("averaged state matches the converged velocity-sampled average") {
    const LiouvillianPair pair = testing::fig1_pair(0.0);
    const double v_th = fig1().v_th;
    const DensityMatrix exact = doppler_average(build_spectral_model(pair, v_th));

    // Refine the uniform grid until two successive levels agree to 1e-8.
    DensityMatrix previous = sample_average(pair, make_grid(GridKind::Uniform, 4001, v_th, 6.0)).rho;
    DensityMatrix converged;
    double change = 1.0;
    for (std::size_t n = 8001; n <= 32001 && change > 1e-8; n = 2 * n - 1) {
        converged = sample_average(pair, make_grid(GridKind::Uniform, n, v_th, 6.0)).rho;
        change = max_abs_diff(converged.matrix(), previous.matrix());
        previous = converged;
    }
    REQUIRE(change <= 1e-8);
    CHECK(max_abs_diff(exact.matrix(), converged.matrix()) <= 1e-6);

    CHECK(exact.hermiticity_defect() <= 1e-8);
    CHECK(std::abs(exact.raw_trace() - 1.0) <= 1e-6);
}

TEST_CASE("sampling error decays at better than second order in the grid spacing") {
    const LiouvillianPair pair = testing::fig1_pair(0.0);
    const double v_th = fig1().v_th;
    const DensityMatrix exact = doppler_average(build_spectral_model(pair, v_th));
    std::vector<double> errors;
    for (std::size_t n : {251u, 501u, 1001u, 2001u}) {
        const DensityMatrix sampled = sample_average(pair, make_grid(GridKind::Uniform, n, v_th, 5.0)).rho;
        errors.push_back(max_abs_diff(exact.matrix(), sampled.matrix()));
    }
    for (std::size_t k = 1; k < errors.size(); ++k) {
        CAPTURE(errors[k - 1]);
        CAPTURE(errors[k]);
        CHECK(errors[k] < errors[k - 1]);
    }
    // Spacing halves between successive grids.
    CHECK(std::log2(errors[1] / errors[3]) / 2.0 >= 2.0);
}

TEST_CASE("averaged state is Hermitian without symmetrization along the modulation period") {
    for (int j = 0; j < 8; ++j) {
        const double t = j / 8.0;
        CAPTURE(t);
        const DensityMatrix avg = doppler_average(build_spectral_model(testing::fig1_pair(t), fig1().v_th));
        CHECK(avg.hermiticity_defect() <= 1e-8);
        CHECK(std::abs(avg.raw_trace() - 1.0) <= 1e-6);
        for (std::size_t i = 0; i < 3; ++i) CHECK(avg(i, i).real() >= -1e-12);
    }
}

TEST_CASE("generic four-level system: spectral average agrees with sampling") {
    const AtomicSystem sys = testing::four_level_system();
    const LiouvillianPair pair = build_liouvillian_pair(sys);
    const double v_th = 3.0;
    const DensityMatrix exact = doppler_average(build_spectral_model(pair, v_th));
    const DensityMatrix sampled = sample_average(pair, make_grid(GridKind::Uniform, 4001, v_th, 8.0)).rho;
    CHECK(max_abs_diff(exact.matrix(), sampled.matrix()) <= 1e-9);
}
