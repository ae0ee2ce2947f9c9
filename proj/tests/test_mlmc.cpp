#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "tamex/errors.hpp"
#include "tamex/kernels.hpp"
#include "tamex/mlmc.hpp"
#include "tamex/parallel.hpp"

using namespace tamex;

TEST_SUITE_BEGIN("mlmc");

namespace {

SquareMatrix scalar_mat(int d, double c) {
    SquareMatrix m(d);
    for (int i = 0; i < d; ++i) m(i, i) = c;
    return m;
}

SdeProblem linear_problem(double a, double b) {
    return SdeProblem{
        .dim = 1,
        .m = 1,
        .linear = LinearPart(scalar_mat(1, a), {scalar_mat(1, b)}),
        .drift_f = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; },
        .diffusion_g = {[](std::span<const double>, std::span<double> out) { out[0] = 0.0; }},
        .x0 = {0.5},
        .horizon = 1.0,
    };
}

}  // namespace

TEST_CASE("fit_rate on exact power laws") {
    SUBCASE("slope one") {
        const std::vector<std::pair<double, double>> pts{{0.1, 0.1}, {0.05, 0.05}, {0.025, 0.025}};
        const auto [slope, intercept] = fit_rate(pts);
        CHECK(slope == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    }
    SUBCASE("slope two") {
        const std::vector<std::pair<double, double>> pts{{0.1, 0.01}, {0.01, 0.0001}};
        const auto [slope, intercept] = fit_rate(pts);
        CHECK(slope == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("too few points") {
        const std::vector<std::pair<double, double>> one{{0.1, 0.05}};
        CHECK_THROWS_AS(fit_rate(one), fit_error);
        const std::vector<std::pair<double, double>> zeros{{0.1, 0.0}, {0.05, 0.0}};
        CHECK_THROWS_AS(fit_rate(zeros), fit_error);
    }
}

TEST_CASE("estimate_single_level") {
    SUBCASE("deterministic problem has zero variance") {
        const LevelStats st = estimate_single_level(linear_problem(-1.0, 0.0),
                                                    SchemeKind::gbm_tamed, 4, 100, 1, 0);
        CHECK(st.variance == doctest::Approx(0.0));
        CHECK(st.n_discarded == 0);
        const double exact = 0.25 * std::exp(-2.0);  // phi of 0.5 e^{-1}
        CHECK(st.mean == doctest::Approx(exact).epsilon(1e-12));
    }
    SUBCASE("linear GBM second moment matches the closed form") {
        const double a = -1.0, b = 0.1;
        const LevelStats st = estimate_single_level(linear_problem(a, b),
                                                    SchemeKind::gbm_tamed, 8, 20000, 99, 0);
        const double exact = 0.25 * std::exp((2.0 * a + b * b) * 1.0);
        CHECK(std::fabs(st.mean - exact) < 3.0 * st.std_error());
        CHECK(st.std_error() > 0.0);
    }
    SUBCASE("unbiased variance with two samples") {
        const SdeProblem p = linear_problem(-1.0, 0.2);
        const LevelStats st =
            estimate_single_level(p, SchemeKind::gbm_tamed, 2, 2, 7, 42);
        // recompute the two trajectories through the public API
        double v[2];
        for (int i = 0; i < 2; ++i) {
            const IncrementGrid g = generate_increments({7, 42, i}, 1, 2, 0.5);
            v[i] = phi_sq_norm(integrate(p, SchemeKind::gbm_tamed, g).terminal);
        }
        const double mean = 0.5 * (v[0] + v[1]);
        const double var = (v[0] - mean) * (v[0] - mean) + (v[1] - mean) * (v[1] - mean);
        CHECK(st.mean == doctest::Approx(mean).epsilon(1e-15));
        CHECK(st.variance == doctest::Approx(var).epsilon(1e-12));
    }
    SUBCASE("needs two samples") {
        CHECK_THROWS_AS(estimate_single_level(linear_problem(-1.0, 0.1),
                                              SchemeKind::gbm_tamed, 4, 1, 1, 0),
                        invalid_input_error);
    }
}

TEST_CASE("estimate_level_difference") {
    SUBCASE("same scheme, same grid: identically zero") {
        const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.2, .beta2 = 0.1});
        const LevelStats st = estimate_level_difference(p, SchemeKind::gbm_tamed,
                                                        SchemeKind::gbm_tamed, 8, 1, 200, 3, 5);
        CHECK(st.mean == 0.0);
        CHECK(st.variance == 0.0);
    }
    SUBCASE("linear problem: coupled differences vanish pathwise") {
        const LevelStats st = estimate_level_difference(linear_problem(-4.0, 0.1),
                                                        SchemeKind::gbm_tamed,
                                                        SchemeKind::gbm_tamed, 32, 2, 500, 11, 1);
        CHECK(std::fabs(st.mean) < 1e-12);
        CHECK(st.std_error() < 1e-12);
    }
    SUBCASE("cubic benchmark: |mean| shrinks with level") {
        const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.1, .beta2 = 0.0});
        double prev = 1e300;
        for (int level = 1; level <= 4; ++level) {
            const int fine_n = 8 << level;
            const LevelStats st =
                estimate_level_difference(p, SchemeKind::gbm_tamed, SchemeKind::gbm_tamed,
                                          fine_n, 2, 4000, 17, level);
            CHECK(std::fabs(st.mean) < prev);
            prev = std::fabs(st.mean);
        }
    }
    SUBCASE("mixed schemes need equal step counts") {
        const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.1, .beta2 = 0.0});
        CHECK_THROWS_AS(estimate_level_difference(p, SchemeKind::gbm_tamed,
                                                  SchemeKind::exp_tamed, 8, 2, 10, 1, 0),
                        invalid_input_error);
    }
}

TEST_CASE("per-sample telescope collapses exactly onto the finest level") {
    // one fine path, coarsened repeatedly: phi(N0) + sum of diffs == phi(NR)
    const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.1, .beta2 = 0.0});
    for (int s = 0; s < 25; ++s) {
        const IncrementGrid fine =
            generate_increments({31 + static_cast<std::uint64_t>(s), 0, 0}, 1, 64, 1.0 / 64);
        std::vector<double> phis;  // levels: 64, 32, 16, 8
        IncrementGrid g = fine;
        while (true) {
            phis.push_back(phi_sq_norm(integrate(p, SchemeKind::gbm_tamed, g).terminal));
            if (g.n_steps == 8) break;
            g = coarsen(g, 2);
        }
        // telescope from the coarsest up, mirroring the estimator algebra
        double total = phis.back();
        for (int i = static_cast<int>(phis.size()) - 2; i >= 0; --i)
            total += phis[i] - phis[i + 1];
        CHECK(total == doctest::Approx(phis.front()).epsilon(1e-12));
    }
}

TEST_CASE("MLMCSR partial-sum recurrence holds exactly") {
    const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.1, .beta2 = 0.0});
    LevelSpec spec;
    spec.n0 = 4;
    spec.num_levels = 4;
    spec.target_level = 4;  // include the empty-tail point
    spec.samples_per_level = {300};

    EstimatorDiagnostics diag;
    const WeakErrorCurve curve = weak_error_mlmcsr(p, SchemeKind::gbm_tamed, spec, 5, &diag);
    REQUIRE(curve.points.size() == 5);
    CHECK(curve.points[4].error_estimate == 0.0);  // empty tail, exactly

    // error(L) must equal |tail(L)| with tail(L) = mean_{L+1} + tail(L+1);
    // reconstruct the signed tails from the recorded ladder terms
    std::vector<double> means(spec.num_levels + 1, 0.0);
    for (const auto& t : diag.terms) means[t.level] = t.stats.mean;
    double tail = 0.0;
    for (int L = spec.num_levels - 1; L >= 0; --L) {
        tail = means[L + 1] + tail;
        CHECK(curve.points[L].error_estimate == std::fabs(tail));
    }
}

TEST_CASE("statistical soundness on exactly-solvable problems") {
    SUBCASE("deterministic linear problem: all four estimators return zero") {
        const SdeProblem p = linear_problem(-2.0, 0.0);
        LevelSpec spec;
        spec.n0 = 2;
        spec.num_levels = 3;
        spec.target_level = 2;
        spec.samples_per_level = {50};
        const auto check_zero = [](const WeakErrorCurve& c) {
            for (const auto& pt : c.points) CHECK(pt.error_estimate < 1e-12);
        };
        check_zero(weak_error_trad(p, SchemeKind::gbm_tamed, SchemeKind::gbm_tamed, spec, 3));
        check_zero(weak_error_mlmcl0(p, SchemeKind::gbm_tamed, SchemeKind::gbm_tamed, spec, 3));
        check_zero(weak_error_mlmc(p, SchemeKind::gbm_tamed, SchemeKind::gbm_tamed, spec, 3));
        check_zero(weak_error_mlmcsr(p, SchemeKind::gbm_tamed, spec, 3));
    }
    SUBCASE("noisy linear problem: pathwise-exact estimators still return zero") {
        const SdeProblem p = linear_problem(-4.0, 0.1);
        LevelSpec spec;
        spec.n0 = 2;
        spec.num_levels = 3;
        spec.target_level = 2;
        spec.samples_per_level = {200};
        const WeakErrorCurve sr = weak_error_mlmcsr(p, SchemeKind::gbm_tamed, spec, 13);
        for (const auto& pt : sr.points) CHECK(pt.error_estimate < 1e-12);
        const WeakErrorCurve l0 =
            weak_error_mlmcl0(p, SchemeKind::gbm_tamed, SchemeKind::gbm_tamed, spec, 13);
        for (const auto& pt : l0.points) CHECK(pt.error_estimate < 1e-12);
        // independent coarsest-level estimates leave Monte Carlo noise
        const WeakErrorCurve mc =
            weak_error_mlmc(p, SchemeKind::gbm_tamed, SchemeKind::gbm_tamed, spec, 13);
        for (const auto& pt : mc.points) {
            CHECK(pt.error_estimate < 3.0 * pt.std_error + 1e-12);
            CHECK(pt.std_error > 0.0);
        }
    }
}

TEST_CASE("trad on a deterministic problem: exact telescope cancellation") {
    // zero noise: every telescope collapses pathwise, so the error at L is
    // exactly |phi(ref at N_R) - phi(test at N_L)| for two different schemes
    const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.0, .beta2 = 0.0});
    LevelSpec spec;
    spec.n0 = 4;
    spec.num_levels = 3;
    spec.target_level = 3;
    spec.samples_per_level = {10};

    const WeakErrorCurve c =
        weak_error_trad(p, SchemeKind::gbm_tamed, SchemeKind::tamed_euler, spec, 31);

    const auto phi_at = [&](SchemeKind kind, int n_steps) {
        // beta1 = 0 makes the diffusion vanish; increment values are inert
        const IncrementGrid g = generate_increments({31, 900, 0}, 1, n_steps, 1.0 / n_steps);
        return phi_sq_norm(integrate(p, kind, g).terminal);
    };
    const double ref_fine = phi_at(SchemeKind::tamed_euler, 32);
    for (int L = 0; L <= 3; ++L) {
        const double test_L = phi_at(SchemeKind::gbm_tamed, 4 << L);
        CHECK(c.points[L].error_estimate ==
              doctest::Approx(std::fabs(ref_fine - test_L)).epsilon(1e-12));
        // averaging n identical values can round at the last ulp
        CHECK(c.points[L].std_error < 1e-15);
    }
}

TEST_CASE("trad against itself estimates zero at the finest level") {
    // same scheme on both sides, target at the reference level: the two
    // telescopes estimate the same quantity, so only sampling noise remains
    const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.1, .beta2 = 0.0});
    LevelSpec spec;
    spec.n0 = 4;
    spec.num_levels = 4;
    spec.target_level = 4;
    spec.samples_per_level = {4000};
    const WeakErrorCurve c =
        weak_error_trad(p, SchemeKind::gbm_tamed, SchemeKind::gbm_tamed, spec, 11);
    const auto& last = c.points.back();
    CHECK(last.std_error > 0.0);
    CHECK(last.error_estimate <= 3.5 * last.std_error);
}

TEST_CASE("coupled coarsest term beats independent differences on variance") {
    // the MLMCL0 rationale: estimating E[phi(ref) - phi(test)] on shared
    // paths has lower variance than differencing two independent estimates
    const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.1, .beta2 = 0.0});
    const int n0 = 8;
    const std::int64_t n = 10000;
    const LevelStats coupled = estimate_level_difference(
        p, SchemeKind::exp_tamed, SchemeKind::gbm_tamed, n0, 1, n, 99, 0x50);
    const LevelStats ind_ref =
        estimate_single_level(p, SchemeKind::exp_tamed, n0, n, 99, 0x51);
    const LevelStats ind_test =
        estimate_single_level(p, SchemeKind::gbm_tamed, n0, n, 99, 0x52);
    CHECK(coupled.variance < ind_ref.variance + ind_test.variance);
}

TEST_CASE("trad re-estimates the test telescope per level") {
    const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.1, .beta2 = 0.0});
    LevelSpec spec;
    spec.n0 = 2;
    spec.num_levels = 3;
    spec.target_level = 3;
    spec.samples_per_level = {60};

    EstimatorDiagnostics trad, mlmc, mlmcl0;
    weak_error_trad(p, SchemeKind::gbm_tamed, SchemeKind::exp_tamed, spec, 21, &trad);
    weak_error_mlmc(p, SchemeKind::gbm_tamed, SchemeKind::exp_tamed, spec, 21, &mlmc);
    weak_error_mlmcl0(p, SchemeKind::gbm_tamed, SchemeKind::exp_tamed, spec, 21, &mlmcl0);

    // deterministic path-step counting: Trad > MLMC >= MLMCL0
    CHECK(trad.total_path_steps > mlmc.total_path_steps);
    CHECK(mlmc.total_path_steps >= mlmcl0.total_path_steps);

    // exact counts from the level geometry (n = 60 samples everywhere)
    const auto coupled = [](int fine_n) { return fine_n + fine_n / 2; };
    std::uint64_t expect_mlmc = 60ull * (2 + 2);  // two independent singles at N0 = 2
    for (int l = 1; l <= 3; ++l) expect_mlmc += 60ull * coupled(2 << l);  // ref ladder
    for (int l = 1; l <= 3; ++l) expect_mlmc += 60ull * coupled(2 << l);  // test ladder
    CHECK(mlmc.total_path_steps == expect_mlmc);
    CHECK(mlmcl0.total_path_steps == expect_mlmc);  // coupled coarse costs the same 2*N0

    std::uint64_t expect_trad = 60ull * 2;  // ref single
    for (int l = 1; l <= 3; ++l) expect_trad += 60ull * coupled(2 << l);
    for (int L = 0; L <= 3; ++L) {
        expect_trad += 60ull * 2;  // fresh test single per target level
        for (int l = 1; l <= L; ++l) expect_trad += 60ull * coupled(2 << l);
    }
    CHECK(trad.total_path_steps == expect_trad);
}

TEST_CASE("mlmc and mlmcl0 share their ladder terms bit for bit") {
    const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.1, .beta2 = 0.0});
    LevelSpec spec;
    spec.n0 = 4;
    spec.num_levels = 3;
    spec.target_level = 2;
    spec.samples_per_level = {80};

    EstimatorDiagnostics a, b;
    weak_error_mlmc(p, SchemeKind::gbm_tamed, SchemeKind::exp_tamed, spec, 77, &a);
    weak_error_mlmcl0(p, SchemeKind::gbm_tamed, SchemeKind::exp_tamed, spec, 77, &b);

    const auto ladder_terms = [](const EstimatorDiagnostics& d) {
        std::vector<TermRecord> out;
        for (const auto& t : d.terms)
            if (t.label.rfind("ref_diff", 0) == 0 || t.label.rfind("test_diff", 0) == 0)
                out.push_back(t);
        return out;
    };
    const auto la = ladder_terms(a);
    const auto lb = ladder_terms(b);
    REQUIRE(la.size() == lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
        CHECK(la[i].stats.mean == lb[i].stats.mean);
        CHECK(la[i].stats.variance == lb[i].stats.variance);
    }
}

TEST_CASE("samples_per_level: last entry repeats, validation rejects bad specs") {
    LevelSpec spec;
    spec.n0 = 2;
    spec.num_levels = 5;
    spec.target_level = 4;
    spec.samples_per_level = {100, 50, 20};
    CHECK(spec.samples_at(0) == 100);
    CHECK(spec.samples_at(1) == 50);
    CHECK(spec.samples_at(2) == 20);
    CHECK(spec.samples_at(5) == 20);
    CHECK(spec.n_steps_at(5) == 64);
    spec.validate();

    LevelSpec bad = spec;
    bad.n0 = 0;
    CHECK_THROWS_AS(bad.validate(), invalid_input_error);
    bad = spec;
    bad.target_level = 6;
    CHECK_THROWS_AS(bad.validate(), invalid_input_error);
    bad = spec;
    bad.samples_per_level = {1};
    CHECK_THROWS_AS(bad.validate(), invalid_input_error);
}

TEST_CASE("results are independent of the worker count") {
    const SdeProblem p = make_cubic_problem({.dim = 1, .beta1 = 0.1, .beta2 = 0.0});
    set_max_threads(1);
    const LevelStats a = estimate_single_level(p, SchemeKind::gbm_tamed, 16, 500, 5, 9);
    set_max_threads(4);
    const LevelStats b = estimate_single_level(p, SchemeKind::gbm_tamed, 16, 500, 5, 9);
    set_max_threads(0);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
}

TEST_CASE("estimation failure carries the discard count") {
    // EM from x0=4.4 at dt=1/8 diverges deterministically (noise-free)
    const SdeProblem p = make_cubic_problem(
        {.dim = 1, .beta1 = 0.0, .beta2 = 0.0, .x0_scale = 8.8});
    try {
        estimate_single_level(p, SchemeKind::euler_maruyama, 8, 50, 1, 0);
        FAIL("expected estimation_error");
    } catch (const estimation_error& e) {
        CHECK(e.n_discarded == 50);
    }
}

TEST_SUITE_END();
