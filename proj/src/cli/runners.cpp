#include "cli/runners.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "tamex/errors.hpp"
#include "tamex/kernels.hpp"
#include "tamex/parallel.hpp"
#include "tamex/rng.hpp"

namespace tamex::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr std::int32_t kTagMoments = 0x6000;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct CurveRun {
    SchemeKind scheme;
    std::string estimator;
    WeakErrorCurve curve;
    EstimatorDiagnostics diag;
    double wall_seconds = 0.0;
};

CurveRun run_estimator(const ExperimentConfig& cfg, SchemeKind scheme,
                       const std::string& estimator, std::uint64_t seed) {
    const SdeProblem problem = make_cubic_problem(cfg.problem);
    CurveRun out;
    out.scheme = scheme;
    out.estimator = estimator;
    const auto t0 = std::chrono::steady_clock::now();
    if (estimator == "trad") {
        out.curve = weak_error_trad(problem, scheme, cfg.reference, cfg.levels, seed, &out.diag,
                                    phi_sq_norm, cfg.taming);
    } else if (estimator == "mlmcl0") {
        out.curve = weak_error_mlmcl0(problem, scheme, cfg.reference, cfg.levels, seed, &out.diag,
                                      phi_sq_norm, cfg.taming);
    } else if (estimator == "mlmc") {
        out.curve = weak_error_mlmc(problem, scheme, cfg.reference, cfg.levels, seed, &out.diag,
                                    phi_sq_norm, cfg.taming);
    } else if (estimator == "mlmcsr") {
        out.curve = weak_error_mlmcsr(problem, scheme, cfg.levels, seed, &out.diag, phi_sq_norm,
                                      cfg.taming);
    } else {
        throw config_error("unknown estimator '" + estimator + "'");
    }
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

void write_curve_csv(const fs::path& path, const ExperimentConfig& cfg, const CurveRun& run) {
    std::ofstream f(path);
    f << "level,n_steps,dt,error,std_error,n_discarded\n";
    for (std::size_t i = 0; i < run.curve.points.size(); ++i) {
        const auto& pt = run.curve.points[i];
        const std::int64_t disc = i < run.diag.discards_per_point.size()
                                      ? run.diag.discards_per_point[i]
                                      : 0;
        f << i << ',' << cfg.levels.n_steps_at(static_cast<int>(i)) << ',' << fmt17(pt.dt) << ','
          << fmt17(pt.error_estimate) << ',' << fmt17(pt.std_error) << ',' << disc << '\n';
    }
}

void write_terms_csv(const fs::path& path, const CurveRun& run) {
    std::ofstream f(path);
    f << "term,level,mean,variance,n_samples,n_discarded,path_steps\n";
    for (const auto& t : run.diag.terms) {
        f << t.label << ',' << t.level << ',' << fmt17(t.stats.mean) << ','
          << fmt17(t.stats.variance) << ',' << t.stats.n_samples << ',' << t.stats.n_discarded
          << ',' << t.path_steps << '\n';
    }
}

void write_meta(const fs::path& dir, const ExperimentConfig& cfg, std::uint64_t seed,
                const std::string& subcommand, const std::vector<std::string>& outputs) {
    json meta;
    meta["tool"] = "tamex";
    meta["version"] = kToolVersion;
    meta["subcommand"] = subcommand;
    meta["master_seed"] = seed;
    meta["kernel_isa"] = kernels::to_string(kernels::active_isa());
    meta["threads"] = max_threads();
    meta["levels"] = {{"n0", cfg.levels.n0},
                      {"num_levels", cfg.levels.num_levels},
                      {"target_level", cfg.levels.target_level}};
    meta["problem"] = {{"dim", cfg.problem.dim},
                       {"beta1", cfg.problem.beta1},
                       {"beta2", cfg.problem.beta2}};
    {
        // hash of the parsed, canonicalized experiment parameters
        std::string canon;
        canon += std::to_string(cfg.problem.dim) + "|" + fmt17(cfg.problem.beta1) + "|" +
                 fmt17(cfg.problem.beta2) + "|" +
                 std::to_string(static_cast<int>(cfg.problem.laplacian_scaling)) + "|" +
                 std::to_string(cfg.problem.zero_nonlinearity) + "|" +
                 fmt17(cfg.problem.x0_scale) + "|";
        for (auto s : cfg.schemes) canon += to_string(s) + ",";
        canon += "|";
        for (const auto& e : cfg.estimators) canon += e + ",";
        canon += "|" + to_string(cfg.reference) + "|" +
                 std::to_string(cfg.taming.kind == TamingKind::none) + "|" +
                 std::to_string(cfg.levels.n0) + "|" + std::to_string(cfg.levels.num_levels) +
                 "|" + std::to_string(cfg.levels.target_level) + "|";
        for (auto s : cfg.levels.samples_per_level) canon += std::to_string(s) + ",";
        meta["config_hash_fnv1a64"] = fnv1a64(canon);
    }
    meta["outputs"] = outputs;
    std::ofstream f(dir / "run_meta.json");
    f << meta.dump(2) << '\n';
}

std::string curve_file_name(const std::string& prefix, SchemeKind scheme,
                            const std::string& estimator) {
    return prefix + "_" + to_string(scheme) + "_" + estimator + ".csv";
}

}  // namespace

void apply_run_options(const RunOptions& opt) {
    set_max_threads(opt.threads);
    if (opt.kernels == "auto") return;
    if (opt.kernels == "scalar") {
        kernels::select(kernels::Isa::scalar);
    } else if (opt.kernels == "avx2") {
        kernels::select(kernels::Isa::avx2);
    } else if (opt.kernels == "neon") {
        kernels::select(kernels::Isa::neon);
    } else {
        throw config_error("unknown --kernels value '" + opt.kernels + "'");
    }
}

int run_converge(const ExperimentConfig& cfg, const RunOptions& opt) {
    apply_run_options(opt);
    const std::uint64_t seed = opt.seed_override.value_or(cfg.master_seed);
    const fs::path dir = opt.out_override.value_or(cfg.output_dir);
    fs::create_directories(dir);

    std::vector<std::string> outputs;
    bool any_unreliable = false;

    std::ofstream summary(dir / "summary.csv");
    summary << "scheme,estimator,slope,intercept,points_used,unreliable\n";

    for (const auto scheme : cfg.schemes) {
        for (const auto& estimator : cfg.estimators) {
            const CurveRun run = run_estimator(cfg, scheme, estimator, seed);
            const std::string name = curve_file_name("converge", scheme, estimator);
            write_curve_csv(dir / name, cfg, run);
            outputs.push_back(name);
            const std::string terms = curve_file_name("terms", scheme, estimator);
            write_terms_csv(dir / terms, run);
            outputs.push_back(terms);

            int used = 0;
            for (const auto& pt : run.curve.points)
                if (curve_point_usable(pt)) ++used;
            summary << to_string(scheme) << ',' << estimator << ',' << fmt17(run.curve.fitted_slope)
                    << ',' << fmt17(run.curve.fitted_intercept) << ',' << used << ','
                    << (run.diag.any_unreliable ? 1 : 0) << '\n';
            any_unreliable = any_unreliable || run.diag.any_unreliable;

            std::printf("converge %s/%s: slope=%.4g (%d usable points)%s\n",
                        to_string(scheme).c_str(), estimator.c_str(), run.curve.fitted_slope,
                        used, run.diag.any_unreliable ? "  [UNRELIABLE]" : "");
        }
    }
    summary.close();
    outputs.push_back("summary.csv");
    write_meta(dir, cfg, seed, "converge", outputs);
    return any_unreliable ? 2 : 0;
}

int run_compare(const ExperimentConfig& cfg, const RunOptions& opt) {
    apply_run_options(opt);
    const std::uint64_t seed = opt.seed_override.value_or(cfg.master_seed);
    const fs::path dir = opt.out_override.value_or(cfg.output_dir);
    fs::create_directories(dir);

    std::vector<std::string> outputs;
    std::ofstream cmp(dir / "compare.csv");
    cmp << "estimator,scheme,wall_seconds_mean,wall_seconds_sd,total_path_steps,slope\n";

    bool any_unreliable = false;
    const int repeats = std::max(1, opt.repeats);

    for (const auto& estimator : cfg.estimators) {
        for (const auto scheme : cfg.schemes) {
            double sum = 0.0, sumsq = 0.0;
            CurveRun last;
            for (int r = 0; r < repeats; ++r) {
                last = run_estimator(cfg, scheme, estimator, seed);
                sum += last.wall_seconds;
                sumsq += last.wall_seconds * last.wall_seconds;
            }
            const double mean = sum / repeats;
            const double sd =
                repeats > 1 ? std::sqrt(std::max(0.0, (sumsq - repeats * mean * mean) /
                                                          (repeats - 1)))
                            : 0.0;
            const std::string name = curve_file_name("compare", scheme, estimator);
            write_curve_csv(dir / name, cfg, last);
            outputs.push_back(name);
            const std::string terms = curve_file_name("terms", scheme, estimator);
            write_terms_csv(dir / terms, last);
            outputs.push_back(terms);
            any_unreliable = any_unreliable || last.diag.any_unreliable;

            cmp << estimator << ',' << to_string(scheme) << ',' << fmt17(mean) << ',' << fmt17(sd)
                << ',' << last.diag.total_path_steps << ',' << fmt17(last.curve.fitted_slope)
                << '\n';
            std::printf("compare %s/%s: %.3fs (sd %.3fs), %llu path-steps, slope=%.4g%s\n",
                        estimator.c_str(), to_string(scheme).c_str(), mean, sd,
                        static_cast<unsigned long long>(last.diag.total_path_steps),
                        last.curve.fitted_slope,
                        last.diag.any_unreliable ? "  [UNRELIABLE]" : "");
        }
    }
    cmp.close();
    outputs.push_back("compare.csv");
    write_meta(dir, cfg, seed, "compare", outputs);
    return any_unreliable ? 2 : 0;
}

int run_moments(const ExperimentConfig& cfg, const RunOptions& opt) {
    apply_run_options(opt);
    const std::uint64_t seed = opt.seed_override.value_or(cfg.master_seed);
    const fs::path dir = opt.out_override.value_or(cfg.output_dir);
    fs::create_directories(dir);

    const SdeProblem problem = make_cubic_problem(cfg.problem);
    const auto phi4 = [](std::span<const double> y) {
        const double s = phi_sq_norm(y);
        return s * s;
    };

    std::ofstream f(dir / "moments.csv");
    f << "scheme,dt,p2_moment,p4_moment,discard_fraction\n";
    bool any_unreliable = false;

    for (const auto scheme : cfg.schemes) {
        for (int l = 0; l <= cfg.levels.num_levels; ++l) {
            const int n_steps = static_cast<int>(cfg.levels.n_steps_at(l));
            const double dt = problem.horizon / n_steps;
            const std::int64_t n = cfg.levels.samples_at(l);
            const std::int32_t tag = kTagMoments + l;
            double p2 = std::numeric_limits<double>::quiet_NaN();
            double p4 = std::numeric_limits<double>::quiet_NaN();
            double discard = 1.0;
            try {
                // same tag => same trajectories for both moment estimates
                const LevelStats s2 = estimate_single_level(problem, scheme, n_steps, n, seed,
                                                            tag, phi_sq_norm, cfg.taming);
                const LevelStats s4 =
                    estimate_single_level(problem, scheme, n_steps, n, seed, tag, phi4,
                                          cfg.taming);
                p2 = s2.mean;
                p4 = s4.mean;
                discard = static_cast<double>(s2.n_discarded) /
                          static_cast<double>(s2.n_samples + s2.n_discarded);
                any_unreliable = any_unreliable || s2.unreliable();
            } catch (const estimation_error&) {
                any_unreliable = true;  // every trajectory diverged at this step size
            }
            f << to_string(scheme) << ',' << fmt17(dt) << ',' << fmt17(p2) << ',' << fmt17(p4)
              << ',' << fmt17(discard) << '\n';
        }
    }
    f.close();
    write_meta(dir, cfg, seed, "moments", {"moments.csv"});
    return any_unreliable ? 2 : 0;
}

// ---------------------------------------------------------------------------
// selftest: the fast invariant suite. Each check is independent and prints
// one PASS/FAIL line.

namespace {

struct Check {
    const char* name;
    bool (*fn)();
};

SquareMatrix random_matrix(int d, double scale, rng::Xoshiro256pp& gen) {
    SquareMatrix m(d);
    for (auto& v : m.entries) v = scale * (2.0 * gen.uniform() - 1.0);
    return m;
}

bool check_matexp_oracle() {
    rng::Xoshiro256pp gen(42);
    for (int rep = 0; rep < 20; ++rep) {
        const int d = 1 + static_cast<int>(gen.next() % 5);
        SquareMatrix m = random_matrix(d, 0.4, gen);
        // 50-term Taylor reference for |m| <= 1
        SquareMatrix sum = SquareMatrix::identity(d);
        SquareMatrix term = SquareMatrix::identity(d);
        for (int k = 1; k <= 50; ++k) {
            term = (1.0 / k) * (term * m);
            add_scaled(sum, 1.0, term);
        }
        const SquareMatrix got = mat_exp(m);
        for (std::size_t i = 0; i < sum.entries.size(); ++i)
            if (std::fabs(got.entries[i] - sum.entries[i]) >
                1e-12 * (1.0 + std::fabs(sum.entries[i])))
                return false;
    }
    return true;
}

bool check_propagator_identity() {
    const SdeProblem p = make_cubic_problem({.dim = 4, .beta1 = 0.1, .beta2 = 0.0});
    const SquareMatrix det0 = deterministic_factor(p.linear, 0.0);
    const std::vector<double> z(p.m, 0.0);
    const SquareMatrix phi = propagator_sample(p.linear, 0.0, z, det0);
    const SquareMatrix eye = SquareMatrix::identity(4);
    for (std::size_t i = 0; i < phi.entries.size(); ++i)
        if (std::fabs(phi.entries[i] - eye.entries[i]) > 1e-14) return false;
    return true;
}

bool check_fast_vs_general_path() {
    const SdeProblem p = make_cubic_problem({.dim = 4, .beta1 = 0.1, .beta2 = 0.0});
    rng::GaussianStream z(7);
    const double dt = 0.05;
    const SquareMatrix det = deterministic_factor(p.linear, dt);
    for (int rep = 0; rep < 200; ++rep) {
        const std::vector<double> dws{std::sqrt(dt) * z.next()};
        const SquareMatrix fast = propagator_sample(p.linear, dt, dws, det);
        // general route: dense exponential of the fully assembled argument
        SquareMatrix arg = p.linear.a();
        for (const auto& b : p.linear.bs()) add_scaled(arg, -0.5, b * b);
        arg = dt * arg;
        for (std::size_t i = 0; i < p.linear.bs().size(); ++i)
            add_scaled(arg, dws[i], p.linear.bs()[i]);
        const SquareMatrix general = mat_exp(arg);
        for (std::size_t i = 0; i < fast.entries.size(); ++i)
            if (std::fabs(fast.entries[i] - general.entries[i]) > 1e-10) return false;
    }
    return true;
}

bool check_degeneration_chain() {
    rng::Xoshiro256pp gen(99);
    rng::GaussianStream z(100);
    for (int rep = 0; rep < 20; ++rep) {
        const int d = 1 + static_cast<int>(gen.next() % 3);
        const double a_coef = 2.0 * gen.uniform() - 1.0;
        const double b_coef = 0.5 * gen.uniform();
        SquareMatrix a(d), b(d);
        for (int i = 0; i < d; ++i) {
            a(i, i) = a_coef;
            b(i, i) = b_coef;
        }
        const double beta2 = 0.2 * gen.uniform();
        SdeProblem p{
            .dim = d,
            .m = 1,
            .linear = LinearPart(a, {b}),
            .drift_f = [](std::span<const double> x,
                          std::span<double> out) { kernels::active().cubic_drift(x.data(), out.data(), x.size()); },
            .diffusion_g = {[beta2](std::span<const double> x, std::span<double> out) {
                kernels::active().bounded_rational(beta2, x.data(), out.data(), x.size());
            }},
            .x0 = std::vector<double>(d, 0.4),
            .horizon = 1.0,
        };
        IncrementGrid grid =
            generate_increments({static_cast<std::uint64_t>(123 + rep), 0, 0}, 1, 8, 1.0 / 8);

        // B = 0: GbmTamed == ExpTamed
        SquareMatrix zero_b(d);
        SdeProblem pb0 = p;
        pb0.linear = LinearPart(a, {zero_b});
        auto g1 = integrate(pb0, SchemeKind::gbm_tamed, grid);
        auto e1 = integrate(pb0, SchemeKind::exp_tamed, grid);
        for (int i = 0; i < d; ++i)
            if (std::fabs(g1.terminal[i] - e1.terminal[i]) > 1e-12) return false;

        // A = 0: ExpTamed == TamedEuler
        SquareMatrix zero_a(d);
        SdeProblem pa0 = p;
        pa0.linear = LinearPart(zero_a, {b});
        auto e2 = integrate(pa0, SchemeKind::exp_tamed, grid);
        auto t2 = integrate(pa0, SchemeKind::tamed_euler, grid);
        for (int i = 0; i < d; ++i)
            if (std::fabs(e2.terminal[i] - t2.terminal[i]) > 1e-12) return false;

        // no taming: TamedEuler == EulerMaruyama
        auto t3 = integrate(p, SchemeKind::tamed_euler, grid, TamingSpec{TamingKind::none});
        auto m3 = integrate(p, SchemeKind::euler_maruyama, grid);
        for (int i = 0; i < d; ++i)
            if (std::fabs(t3.terminal[i] - m3.terminal[i]) > 1e-12) return false;
    }
    return true;
}

bool check_coupling_identities() {
    const IncrementGrid fine = generate_increments({5, 1, 2}, 2, 16, 0.0625);
    const IncrementGrid c2 = coarsen(fine, 2);
    const IncrementGrid c4a = coarsen(c2, 2);
    const IncrementGrid c4b = coarsen(fine, 4);
    if (c4a.values != c4b.values) return false;
    for (int i = 0; i < fine.m; ++i) {
        double sf = 0.0, sc = 0.0;
        for (int n = 0; n < fine.n_steps; ++n) sf += fine.at(i, n);
        for (int n = 0; n < c2.n_steps; ++n) sc += c2.at(i, n);
        if (std::fabs(sf - sc) > 1e-15 * std::max(1.0, std::fabs(sf))) return false;
    }
    return true;
}

bool check_taming_bounds() {
    rng::Xoshiro256pp gen(1234);
    const TamingSpec spec{};
    for (int rep = 0; rep < 10000; ++rep) {
        const double y = 40.0 * (gen.uniform() - 0.5);
        const double dt = gen.uniform_pos();
        const double f = y - y * y * y;
        std::vector<double> out(1);
        const double alpha = tame_drift(std::span<const double>(&f, 1), dt, spec, out);
        if (!(alpha > 0.0 && alpha <= 1.0)) return false;
        if (std::fabs(out[0]) * dt > 1.0 + 1e-12) return false;
    }
    return true;
}

bool check_linear_exactness() {
    // pure linear GBM, one step: scheme result must equal the closed form
    SquareMatrix a(1), b(1);
    a(0, 0) = -4.0;
    b(0, 0) = 0.1;
    SdeProblem p{
        .dim = 1,
        .m = 1,
        .linear = LinearPart(a, {b}),
        .drift_f = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; },
        .diffusion_g = {[](std::span<const double>, std::span<double> out) { out[0] = 0.0; }},
        .x0 = {0.5},
        .horizon = 1.0,
    };
    for (int i = 0; i < 100; ++i) {
        const IncrementGrid grid = generate_increments({77, 0, i}, 1, 1, 1.0);
        const auto tr = integrate(p, SchemeKind::gbm_tamed, grid);
        const double w = grid.at(0, 0);
        const double exact = 0.5 * std::exp((-4.0 - 0.5 * 0.01) * 1.0 + 0.1 * w);
        if (std::fabs(phi_sq_norm(tr.terminal) - exact * exact) > 1e-12) return false;
    }
    return true;
}

bool check_kernel_equivalence() {
    const auto& ref = kernels::table(kernels::Isa::scalar);
    const auto& act = kernels::active();
    rng::Xoshiro256pp gen(2024);
    for (int n : {1, 3, 4, 7, 16, 33}) {
        std::vector<double> x(n), y(n), y2(n), o1(n), o2(n);
        for (int i = 0; i < n; ++i) {
            x[i] = 2.0 * gen.uniform() - 1.0;
            y[i] = 2.0 * gen.uniform() - 1.0;
        }
        y2 = y;
        ref.axpy(0.37, x.data(), y.data(), n);
        act.axpy(0.37, x.data(), y2.data(), n);
        if (y != y2) return false;
        ref.cubic_drift(x.data(), o1.data(), n);
        act.cubic_drift(x.data(), o2.data(), n);
        if (o1 != o2) return false;
        const double d1 = ref.dot(x.data(), y.data(), n);
        const double d2 = act.dot(x.data(), y.data(), n);
        if (std::fabs(d1 - d2) > 1e-13 * (1.0 + std::fabs(d1))) return false;
    }
    return true;
}

}  // namespace

int run_selftest(const RunOptions& opt) {
    apply_run_options(opt);
    if (!opt.inject_fault.empty()) {
        if (opt.inject_fault == "pade") {
            detail::corrupt_pade_for_testing(true);
        } else {
            throw config_error("unknown --inject-fault target '" + opt.inject_fault + "'");
        }
    }

    const Check checks[] = {
        {"mat_exp matches Taylor oracle", check_matexp_oracle},
        {"propagator identity at dt=0", check_propagator_identity},
        {"propagator fast path == general path", check_fast_vs_general_path},
        {"scheme degeneration chain", check_degeneration_chain},
        {"increment coupling identities", check_coupling_identities},
        {"taming bounds", check_taming_bounds},
        {"linear-problem pathwise exactness", check_linear_exactness},
        {"kernel scalar/simd equivalence", check_kernel_equivalence},
    };

    int failures = 0;
    for (const auto& c : checks) {
        bool ok = false;
        try {
            ok = c.fn();
        } catch (const std::exception& e) {
            std::printf("FAIL %s (exception: %s)\n", c.name, e.what());
            ++failures;
            continue;
        }
        std::printf("%s %s\n", ok ? "PASS" : "FAIL", c.name);
        if (!ok) ++failures;
    }
    detail::corrupt_pade_for_testing(false);
    std::printf("selftest: %d/%d passed\n",
                static_cast<int>(std::size(checks)) - failures,
                static_cast<int>(std::size(checks)));
    return failures == 0 ? 0 : 1;
}

}  // namespace tamex::cli
