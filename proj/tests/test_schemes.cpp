#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "tamex/errors.hpp"
#include "tamex/kernels.hpp"
#include "tamex/rng.hpp"
#include "tamex/schemes.hpp"

using namespace tamex;

TEST_SUITE_BEGIN("schemes");

namespace {

SquareMatrix scalar_mat(int d, double c) {
    SquareMatrix m(d);
    for (int i = 0; i < d; ++i) m(i, i) = c;
    return m;
}

VectorField zero_field() {
    return [](std::span<const double>, std::span<double> out) {
        std::memset(out.data(), 0, out.size() * sizeof(double));
    };
}

VectorField cubic_field() {
    return [](std::span<const double> x, std::span<double> out) {
        kernels::active().cubic_drift(x.data(), out.data(), x.size());
    };
}

// scalar problem dX = (a X + F) dt + (b X + g) dW with configurable parts
SdeProblem scalar_problem(double a, double b, bool cubic, double beta2, double x0,
                          double horizon) {
    SdeProblem p{
        .dim = 1,
        .m = 1,
        .linear = LinearPart(scalar_mat(1, a), {scalar_mat(1, b)}),
        .drift_f = cubic ? cubic_field() : zero_field(),
        .diffusion_g = {[beta2](std::span<const double> x, std::span<double> out) {
            kernels::active().bounded_rational(beta2, x.data(), out.data(), x.size());
        }},
        .x0 = {x0},
        .horizon = horizon,
    };
    return p;
}

IncrementGrid zero_grid(int m, int n, double dt) {
    IncrementGrid g;
    g.m = m;
    g.n_steps = n;
    g.dt = dt;
    g.values.assign(static_cast<std::size_t>(m) * n, 0.0);
    return g;
}

}  // namespace

TEST_CASE("step_gbm_tamed: exact GBM step for the pure linear problem") {
    const double a = 0.3, b = 0.2, dt = 0.25, y0 = 1.7, dw = 0.15;
    const SdeProblem p = scalar_problem(a, b, false, 0.0, y0, 1.0);
    const SquareMatrix det = deterministic_factor(p.linear, dt);
    const auto y1 = step_gbm_tamed(p, std::vector<double>{y0}, dt, std::vector<double>{dw},
                                   det, TamingSpec{});
    CHECK(y1[0] ==
          doctest::Approx(y0 * std::exp((a - 0.5 * b * b) * dt + b * dw)).epsilon(1e-14));
}

TEST_CASE("tamed step hand computation: 2 -> 1.625") {
    // A = 0, B = 0, g = 0, cubic F, y = 2, dt = 0.1:
    // F = -6, alpha = 0.625, y' = 2 - 3.75*0.1 = 1.625
    const SdeProblem p = scalar_problem(0.0, 0.0, true, 0.0, 2.0, 1.0);
    const std::vector<double> y{2.0}, dw{0.0};
    const SquareMatrix det = deterministic_factor(p.linear, 0.1);
    const SquareMatrix expa = mat_exp(0.1 * p.linear.a());

    CHECK(step_gbm_tamed(p, y, 0.1, dw, det, TamingSpec{})[0] ==
          doctest::Approx(1.625).epsilon(1e-15));
    CHECK(step_exp_tamed(p, y, 0.1, dw, expa, TamingSpec{})[0] ==
          doctest::Approx(1.625).epsilon(1e-15));
    CHECK(step_tamed_euler(p, y, 0.1, dw, TamingSpec{})[0] ==
          doctest::Approx(1.625).epsilon(1e-15));
}

TEST_CASE("identity flow when nothing acts") {
    const SdeProblem p = scalar_problem(0.0, 0.0, false, 0.0, 0.9, 1.0);
    const std::vector<double> y{0.9}, dw{0.0};
    for (double dt : {0.0, 0.3, 2.0}) {
        const SquareMatrix det = deterministic_factor(p.linear, dt);
        CHECK(step_gbm_tamed(p, y, dt, dw, det, TamingSpec{})[0] == doctest::Approx(0.9));
        CHECK(step_tamed_euler(p, y, dt, dw, TamingSpec{})[0] == doctest::Approx(0.9));
        CHECK(step_euler_maruyama(p, y, dt, dw)[0] == doctest::Approx(0.9));
    }
}

TEST_CASE("step_exp_tamed: Maruyama diffusion inside the exponential") {
    // F = 0, g = 0, B = b: y' = e^{a dt} (y + b y dW)
    const double a = -0.8, b = 0.4, dt = 0.2, y0 = 1.1, dw = -0.3;
    const SdeProblem p = scalar_problem(a, b, false, 0.0, y0, 1.0);
    const SquareMatrix expa = mat_exp(dt * p.linear.a());
    const auto y1 =
        step_exp_tamed(p, std::vector<double>{y0}, dt, std::vector<double>{dw}, expa, TamingSpec{});
    CHECK(y1[0] == doctest::Approx(y0 * (1.0 + b * dw) * std::exp(a * dt)).epsilon(1e-14));
}

TEST_CASE("step_tamed_euler: explicit Euler on the linear drift") {
    const double a = -1.5, dt = 0.1, y0 = 2.0;
    const SdeProblem p = scalar_problem(a, 0.0, false, 0.0, y0, 1.0);
    const auto y1 =
        step_tamed_euler(p, std::vector<double>{y0}, dt, std::vector<double>{0.0}, TamingSpec{});
    CHECK(y1[0] == doctest::Approx(y0 * (1.0 + a * dt)).epsilon(1e-15));
}

TEST_CASE("euler_maruyama hand iteration and blow-up onset") {
    // A folded to 0: y' = y + 0.5 (y - y^3)
    const SdeProblem p = scalar_problem(0.0, 0.0, true, 0.0, 3.0, 5.0);
    const std::vector<double> dw{0.0};
    const auto y1 = step_euler_maruyama(p, std::vector<double>{3.0}, 0.5, dw);
    CHECK(y1[0] == doctest::Approx(-9.0).epsilon(1e-15));
    const auto y2 = step_euler_maruyama(p, y1, 0.5, dw);
    CHECK(y2[0] == doctest::Approx(351.0).epsilon(1e-15));
}

TEST_CASE("integrate: pathwise exact on the pure linear problem") {
    const double a = -4.0, b = 0.1;
    const SdeProblem p = scalar_problem(a, b, false, 0.0, 0.5, 1.0);
    for (int n_steps : {1, 4, 16}) {
        for (int s = 0; s < 50; ++s) {
            const IncrementGrid grid = generate_increments(
                {900 + static_cast<std::uint64_t>(s), 0, n_steps}, 1, n_steps, 1.0 / n_steps);
            const TrajectoryResult tr = integrate(p, SchemeKind::gbm_tamed, grid);
            double w = 0.0;
            for (int k = 0; k < n_steps; ++k) w += grid.at(0, k);
            const double exact = 0.5 * std::exp((a - 0.5 * b * b) * 1.0 + b * w);
            REQUIRE(tr.finite);
            REQUIRE(std::fabs(tr.terminal[0] - exact) < 1e-12);
        }
    }
}

TEST_CASE("integrate with N=1 equals one stepper call") {
    const SdeProblem p = scalar_problem(-0.5, 0.25, true, 0.1, 0.8, 1.0);
    const IncrementGrid grid = generate_increments({31337, 0, 0}, 1, 1, 1.0);
    const TrajectoryResult tr = integrate(p, SchemeKind::gbm_tamed, grid);
    const SquareMatrix det = deterministic_factor(p.linear, 1.0);
    const auto manual = step_gbm_tamed(p, p.x0, 1.0, std::vector<double>{grid.at(0, 0)}, det,
                                       TamingSpec{});
    CHECK(tr.terminal[0] == doctest::Approx(manual[0]).epsilon(1e-15));
}

TEST_CASE("integrate validates the grid against the horizon") {
    const SdeProblem p = scalar_problem(0.0, 0.0, true, 0.0, 0.5, 1.0);
    const IncrementGrid bad = generate_increments({1, 0, 0}, 1, 10, 0.2);  // spans 2.0
    CHECK_THROWS_AS(integrate(p, SchemeKind::gbm_tamed, bad), invalid_input_error);
}

TEST_CASE("degeneration chain over random problems and paths") {
    rng::Xoshiro256pp gen(606);
    for (int rep = 0; rep < 100; ++rep) {
        const int d = 1 + static_cast<int>(gen.next() % 4);
        const double a = 2.0 * gen.uniform() - 1.0;
        const double b = 0.6 * gen.uniform();
        const double beta2 = 0.3 * gen.uniform();
        const double x0 = 0.2 + gen.uniform();
        const int n = 8;

        SdeProblem base{
            .dim = d,
            .m = 1,
            .linear = LinearPart(scalar_mat(d, a), {scalar_mat(d, b)}),
            .drift_f = cubic_field(),
            .diffusion_g = {[beta2](std::span<const double> x, std::span<double> out) {
                kernels::active().bounded_rational(beta2, x.data(), out.data(), x.size());
            }},
            .x0 = std::vector<double>(d, x0),
            .horizon = 1.0,
        };
        const IncrementGrid grid =
            generate_increments({static_cast<std::uint64_t>(rep), 9, 0}, 1, n, 1.0 / n);

        // GbmTamed with B = 0 == ExpTamed
        SdeProblem b0 = base;
        b0.linear = LinearPart(scalar_mat(d, a), {SquareMatrix(d)});
        const auto g1 = integrate(b0, SchemeKind::gbm_tamed, grid);
        const auto e1 = integrate(b0, SchemeKind::exp_tamed, grid);
        for (int i = 0; i < d; ++i) REQUIRE(std::fabs(g1.terminal[i] - e1.terminal[i]) < 1e-12);

        // ExpTamed with A = 0 == TamedEuler
        SdeProblem a0 = base;
        a0.linear = LinearPart(SquareMatrix(d), {scalar_mat(d, b)});
        const auto e2 = integrate(a0, SchemeKind::exp_tamed, grid);
        const auto t2 = integrate(a0, SchemeKind::tamed_euler, grid);
        for (int i = 0; i < d; ++i) REQUIRE(std::fabs(e2.terminal[i] - t2.terminal[i]) < 1e-12);

        // TamedEuler without taming == EulerMaruyama
        const auto t3 = integrate(base, SchemeKind::tamed_euler, grid, TamingSpec{TamingKind::none});
        const auto m3 = integrate(base, SchemeKind::euler_maruyama, grid);
        for (int i = 0; i < d; ++i) REQUIRE(std::fabs(t3.terminal[i] - m3.terminal[i]) < 1e-12);
    }
}

TEST_CASE("divergence control: untamed Euler explodes, tamed stays bounded") {
    // d=1 cubic with A folded to 0, x0 = 3, dt = 0.5, zero noise
    const SdeProblem p = scalar_problem(0.0, 0.0, true, 0.0, 3.0, 5.0);
    const IncrementGrid grid = zero_grid(1, 10, 0.5);

    const TrajectoryResult em = integrate(p, SchemeKind::euler_maruyama, grid);
    CHECK(em.max_norm > 1e10);

    const TrajectoryResult te = integrate(p, SchemeKind::tamed_euler, grid);
    CHECK(te.finite);
    CHECK(te.max_norm < 10.0);
}

TEST_CASE("overflow is reported, not thrown") {
    const SdeProblem p = scalar_problem(0.0, 0.0, true, 0.0, 3.0, 8.0);
    const IncrementGrid grid = zero_grid(1, 16, 0.5);
    const TrajectoryResult em = integrate(p, SchemeKind::euler_maruyama, grid);
    CHECK_FALSE(em.finite);
    CHECK(std::isinf(em.max_norm));
}

TEST_CASE("integrate_pair") {
    SUBCASE("factor 1 duplicates the trajectory") {
        const SdeProblem p = scalar_problem(-1.0, 0.3, true, 0.1, 0.5, 1.0);
        const IncrementGrid grid = generate_increments({8, 0, 0}, 1, 8, 0.125);
        const auto [f, c] = integrate_pair(p, SchemeKind::gbm_tamed, grid, 1);
        CHECK(f.terminal == c.terminal);
    }
    SUBCASE("linear problem: phi difference vanishes at every level") {
        const SdeProblem p = scalar_problem(-4.0, 0.1, false, 0.0, 0.5, 1.0);
        for (int s = 0; s < 20; ++s) {
            const IncrementGrid grid =
                generate_increments({77 + static_cast<std::uint64_t>(s), 0, 0}, 1, 64, 1.0 / 64);
            const auto [f, c] = integrate_pair(p, SchemeKind::gbm_tamed, grid, 2);
            REQUIRE(std::fabs(phi_sq_norm(f.terminal) - phi_sq_norm(c.terminal)) < 1e-12);
        }
    }
    SUBCASE("coupled difference variance decays with level on the cubic benchmark") {
        const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.1, .beta2 = 0.0});
        const int samples = 10000;
        std::vector<double> variances;
        for (int level = 1; level <= 5; ++level) {
            const int fine_n = 8 << level;
            double m1 = 0.0, m2 = 0.0;
            for (int s = 0; s < samples; ++s) {
                const IncrementGrid grid = generate_increments(
                    {1000 + static_cast<std::uint64_t>(level), 0, s}, 1, fine_n, 1.0 / fine_n);
                const auto [f, c] = integrate_pair(p, SchemeKind::gbm_tamed, grid, 2);
                const double d = phi_sq_norm(f.terminal) - phi_sq_norm(c.terminal);
                m1 += d;
                m2 += d * d;
            }
            m1 /= samples;
            variances.push_back(m2 / samples - m1 * m1);
        }
        int inversions = 0;
        for (std::size_t i = 1; i < variances.size(); ++i)
            if (variances[i] > variances[i - 1]) ++inversions;
        CHECK(inversions <= 1);  // monotone decay, one inversion tolerated
    }
}

TEST_SUITE_END();
