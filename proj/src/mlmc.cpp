#include "tamex/mlmc.hpp"

#include <cmath>

#include "tamex/errors.hpp"
#include "tamex/parallel.hpp"

namespace tamex {

// ---------------------------------------------------------------------------
// Stream-tag layout. Every estimated expectation draws from its own block of
// per-sample streams (master_seed, tag, i). MLMC and MLMCL0 share the
// single-scheme ladder tags so their tail levels are computed from identical
// samples; Trad gets a private block because it re-estimates everything
// independently, including one fresh test telescope per target level.
namespace {

constexpr std::int32_t kRoleStride = 0x400;  // ref = 0, test = 1
constexpr std::int32_t kTagSingle = 0x0000;
constexpr std::int32_t kTagCoupled = 0x1000;
constexpr std::int32_t kTagCrossCoarse = 0x2000;
constexpr std::int32_t kTagSelfRef = 0x3000;
constexpr std::int32_t kTagTradRef = 0x4000;
constexpr std::int32_t kTagTradTest = 0x5000;
constexpr std::int32_t kTradTestStride = 0x40;

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::int64_t LevelSpec::samples_at(int level) const {
    if (samples_per_level.empty()) return 10000;
    const auto idx = std::min<std::size_t>(level, samples_per_level.size() - 1);
    return samples_per_level[idx];
}

std::int64_t LevelSpec::n_steps_at(int level) const {
    return static_cast<std::int64_t>(n0) << level;
}

void LevelSpec::validate() const {
    if (n0 < 1) throw invalid_input_error("LevelSpec: n0 must be >= 1");
    if (num_levels < 1) throw invalid_input_error("LevelSpec: num_levels must be >= 1");
    if (num_levels > 30 || n_steps_at(num_levels) > (1 << 30))
        throw invalid_input_error("LevelSpec: finest level too deep");
    if (target_level < 0 || target_level > num_levels)
        throw invalid_input_error("LevelSpec: target_level must lie in [0, num_levels]");
    for (auto s : samples_per_level)
        if (s < 2) throw invalid_input_error("LevelSpec: samples_per_level entries must be >= 2");
}

double LevelStats::std_error() const {
    return n_samples > 0 ? std::sqrt(variance / static_cast<double>(n_samples)) : 0.0;
}

bool LevelStats::unreliable() const {
    const std::int64_t total = n_samples + n_discarded;
    return total > 0 && static_cast<double>(n_discarded) > 0.01 * static_cast<double>(total);
}

namespace {

// Runs `eval` for each sample index, then reduces kept values in index
// order (two passes) so the result is bitwise independent of threading.
template <typename Eval>
LevelStats reduce_samples(std::int64_t n_samples, const char* what, Eval&& eval) {
    std::vector<double> value(n_samples);
    std::vector<char> kept(n_samples);
    parallel_for(n_samples, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) kept[i] = eval(i, value[i]) ? 1 : 0;
    });

    LevelStats st;
    double sum = 0.0;
    for (std::int64_t i = 0; i < n_samples; ++i) {
        if (kept[i]) {
            ++st.n_samples;
            sum += value[i];
        } else {
            ++st.n_discarded;
        }
    }
    if (st.n_samples == 0)
        throw estimation_error(std::string(what) + ": every sample trajectory diverged",
                               st.n_discarded);
    st.mean = sum / static_cast<double>(st.n_samples);
    if (st.n_samples > 1) {
        double ss = 0.0;
        for (std::int64_t i = 0; i < n_samples; ++i) {
            if (!kept[i]) continue;
            const double dev = value[i] - st.mean;
            ss += dev * dev;
        }
        st.variance = ss / static_cast<double>(st.n_samples - 1);
    }
    return st;
}

struct DiagScope {
    EstimatorDiagnostics* diag;
    void record(std::string label, int level, const LevelStats& st, std::uint64_t steps) {
        if (!diag) return;
        diag->terms.push_back({std::move(label), level, st, steps});
        diag->total_path_steps += steps;
        diag->any_unreliable = diag->any_unreliable || st.unreliable();
    }
};

}  // namespace

LevelStats estimate_single_level(const SdeProblem& p, SchemeKind kind, int n_steps,
                                 std::int64_t n_samples, std::uint64_t master_seed,
                                 std::int32_t level_tag, const Observable& phi,
                                 const TamingSpec& taming) {
    if (n_steps < 1) throw invalid_input_error("estimate_single_level: n_steps must be >= 1");
    if (n_samples < 2) throw invalid_input_error("estimate_single_level: need >= 2 samples");
    const double dt = p.horizon / n_steps;
    return reduce_samples(n_samples, "estimate_single_level", [&](std::int64_t i, double& out) {
        const IncrementGrid grid =
            generate_increments({master_seed, level_tag, i}, p.m, n_steps, dt);
        const TrajectoryResult tr = integrate(p, kind, grid, taming);
        if (!tr.finite) return false;
        out = phi(tr.terminal);
        return true;
    });
}

LevelStats estimate_level_difference(const SdeProblem& p, SchemeKind kind_fine,
                                     SchemeKind kind_coarse, int fine_n, int factor,
                                     std::int64_t n_samples, std::uint64_t master_seed,
                                     std::int32_t level_tag, const Observable& phi,
                                     const TamingSpec& taming) {
    if (fine_n < 1) throw invalid_input_error("estimate_level_difference: fine_n must be >= 1");
    if (factor < 1 || fine_n % factor != 0)
        throw invalid_input_error("estimate_level_difference: factor must divide fine_n");
    if (factor > 1 && kind_fine != kind_coarse)
        throw invalid_input_error(
            "estimate_level_difference: mixed schemes only allowed at equal step counts");
    if (n_samples < 2) throw invalid_input_error("estimate_level_difference: need >= 2 samples");

    const double dt = p.horizon / fine_n;
    return reduce_samples(
        n_samples, "estimate_level_difference", [&](std::int64_t i, double& out) {
            const IncrementGrid grid =
                generate_increments({master_seed, level_tag, i}, p.m, fine_n, dt);
            TrajectoryResult fine, coarse;
            if (factor == 1) {
                fine = integrate(p, kind_fine, grid, taming);
                coarse = integrate(p, kind_coarse, grid, taming);
            } else {
                auto pair = integrate_pair(p, kind_fine, grid, factor, taming);
                fine = std::move(pair.first);
                coarse = std::move(pair.second);
            }
            if (!fine.finite || !coarse.finite) return false;
            out = phi(fine.terminal) - phi(coarse.terminal);
            return true;
        });
}

bool curve_point_usable(const CurvePoint& pt) {
    return pt.error_estimate > 3.0 * pt.std_error && pt.error_estimate > 1e-14;
}

namespace {

// Shared assembly: given per-point (error, variance-of-mean, discards),
// build the curve and fit the usable points.
WeakErrorCurve assemble_curve(const SdeProblem& p, const LevelSpec& spec,
                              const std::vector<double>& err,
                              const std::vector<double>& var_of_mean,
                              const std::vector<std::int64_t>& discards,
                              EstimatorDiagnostics* diag) {
    WeakErrorCurve curve;
    for (int L = 0; L <= spec.target_level; ++L) {
        CurvePoint pt;
        pt.dt = p.horizon / static_cast<double>(spec.n_steps_at(L));
        pt.error_estimate = err[L];
        pt.std_error = std::sqrt(var_of_mean[L]);
        curve.points.push_back(pt);
    }
    if (diag) diag->discards_per_point = discards;

    std::vector<std::pair<double, double>> usable;
    for (const auto& pt : curve.points)
        if (curve_point_usable(pt)) usable.emplace_back(pt.dt, pt.error_estimate);
    try {
        auto [slope, intercept] = fit_rate(usable);
        curve.fitted_slope = slope;
        curve.fitted_intercept = intercept;
    } catch (const fit_error&) {
        curve.fitted_slope = nan_value();
        curve.fitted_intercept = nan_value();
    }
    return curve;
}

double var_of_mean(const LevelStats& st) {
    return st.n_samples > 0 ? st.variance / static_cast<double>(st.n_samples) : 0.0;
}

}  // namespace

WeakErrorCurve weak_error_mlmcsr(const SdeProblem& p, SchemeKind kind, const LevelSpec& spec,
                                 std::uint64_t seed, EstimatorDiagnostics* diag,
                                 const Observable& phi, const TamingSpec& taming) {
    spec.validate();
    DiagScope ds{diag};
    const int R = spec.num_levels;

    std::vector<LevelStats> ladder(R + 1);
    for (int l = 1; l <= R; ++l) {
        const int fine_n = static_cast<int>(spec.n_steps_at(l));
        ladder[l] = estimate_level_difference(p, kind, kind, fine_n, 2, spec.samples_at(l), seed,
                                              kTagSelfRef + l, phi, taming);
        ds.record("sr_diff_" + to_string(kind), l, ladder[l],
                  static_cast<std::uint64_t>(spec.samples_at(l)) * (fine_n + fine_n / 2));
    }

    // Tails built by the backward recurrence tail(L) = mean_{L+1} + tail(L+1),
    // so the partial-sum bookkeeping identity holds exactly in floating point.
    std::vector<double> tail(R + 1, 0.0), tail_vom(R + 1, 0.0);
    std::vector<std::int64_t> tail_disc(R + 1, 0);
    for (int L = R - 1; L >= 0; --L) {
        tail[L] = ladder[L + 1].mean + tail[L + 1];
        tail_vom[L] = var_of_mean(ladder[L + 1]) + tail_vom[L + 1];
        tail_disc[L] = ladder[L + 1].n_discarded + tail_disc[L + 1];
    }

    std::vector<double> err(spec.target_level + 1), vom(spec.target_level + 1);
    std::vector<std::int64_t> discards(spec.target_level + 1, 0);
    for (int L = 0; L <= spec.target_level; ++L) {
        err[L] = std::fabs(tail[L]);
        vom[L] = tail_vom[L];
        discards[L] = tail_disc[L];
    }
    return assemble_curve(p, spec, err, vom, discards, diag);
}

namespace {

// Common scaffolding for MLMC and MLMCL0: the two single-scheme ladders.
struct Ladders {
    std::vector<LevelStats> ref;   // l = 1..R
    std::vector<LevelStats> test;  // l = 1..target
};

Ladders build_ladders(const SdeProblem& p, SchemeKind kind_test, SchemeKind kind_ref,
                      const LevelSpec& spec, std::uint64_t seed, DiagScope& ds,
                      const Observable& phi, const TamingSpec& taming) {
    Ladders lad;
    const int R = spec.num_levels;
    lad.ref.resize(R + 1);
    lad.test.resize(spec.target_level + 1);
    for (int l = 1; l <= R; ++l) {
        const int fine_n = static_cast<int>(spec.n_steps_at(l));
        lad.ref[l] = estimate_level_difference(p, kind_ref, kind_ref, fine_n, 2,
                                               spec.samples_at(l), seed, kTagCoupled + l, phi,
                                               taming);
        ds.record("ref_diff_" + to_string(kind_ref), l, lad.ref[l],
                  static_cast<std::uint64_t>(spec.samples_at(l)) * (fine_n + fine_n / 2));
    }
    for (int l = 1; l <= spec.target_level; ++l) {
        const int fine_n = static_cast<int>(spec.n_steps_at(l));
        lad.test[l] = estimate_level_difference(p, kind_test, kind_test, fine_n, 2,
                                                spec.samples_at(l), seed,
                                                kTagCoupled + kRoleStride + l, phi, taming);
        ds.record("test_diff_" + to_string(kind_test), l, lad.test[l],
                  static_cast<std::uint64_t>(spec.samples_at(l)) * (fine_n + fine_n / 2));
    }
    return lad;
}

WeakErrorCurve mlmc_family(const SdeProblem& p, SchemeKind kind_test, SchemeKind kind_ref,
                           const LevelSpec& spec, std::uint64_t seed, bool coupled_coarse,
                           EstimatorDiagnostics* diag, const Observable& phi,
                           const TamingSpec& taming) {
    spec.validate();
    DiagScope ds{diag};
    const int R = spec.num_levels;
    const int n0 = spec.n0;

    double coarse_mean = 0.0, coarse_vom = 0.0;
    std::int64_t coarse_disc = 0;
    if (coupled_coarse) {
        // E[phi(Y_ref^{N0}) - phi(Y_test^{N0})], same path, two schemes
        const LevelStats c0 = estimate_level_difference(p, kind_ref, kind_test, n0, 1,
                                                        spec.samples_at(0), seed,
                                                        kTagCrossCoarse, phi, taming);
        ds.record("cross_coarse", 0, c0,
                  static_cast<std::uint64_t>(spec.samples_at(0)) * (2 * n0));
        coarse_mean = c0.mean;
        coarse_vom = var_of_mean(c0);
        coarse_disc = c0.n_discarded;
    } else {
        const LevelStats e_ref = estimate_single_level(p, kind_ref, n0, spec.samples_at(0), seed,
                                                       kTagSingle, phi, taming);
        const LevelStats e_test = estimate_single_level(p, kind_test, n0, spec.samples_at(0),
                                                        seed, kTagSingle + kRoleStride, phi,
                                                        taming);
        ds.record("single_" + to_string(kind_ref), 0, e_ref,
                  static_cast<std::uint64_t>(spec.samples_at(0)) * n0);
        ds.record("single_" + to_string(kind_test), 0, e_test,
                  static_cast<std::uint64_t>(spec.samples_at(0)) * n0);
        coarse_mean = e_ref.mean - e_test.mean;
        coarse_vom = var_of_mean(e_ref) + var_of_mean(e_test);
        coarse_disc = e_ref.n_discarded + e_test.n_discarded;
    }

    const Ladders lad = build_ladders(p, kind_test, kind_ref, spec, seed, ds, phi, taming);

    std::vector<double> err(spec.target_level + 1), vom(spec.target_level + 1);
    std::vector<std::int64_t> discards(spec.target_level + 1, 0);
    double ref_sum = 0.0, ref_vom = 0.0;
    std::int64_t ref_disc = 0;
    for (int l = 1; l <= R; ++l) {
        ref_sum += lad.ref[l].mean;
        ref_vom += var_of_mean(lad.ref[l]);
        ref_disc += lad.ref[l].n_discarded;
    }
    double test_sum = 0.0, test_vom = 0.0;
    std::int64_t test_disc = 0;
    for (int L = 0; L <= spec.target_level; ++L) {
        if (L >= 1) {
            test_sum += lad.test[L].mean;
            test_vom += var_of_mean(lad.test[L]);
            test_disc += lad.test[L].n_discarded;
        }
        err[L] = std::fabs(coarse_mean + ref_sum - test_sum);
        vom[L] = coarse_vom + ref_vom + test_vom;
        discards[L] = coarse_disc + ref_disc + test_disc;
    }
    return assemble_curve(p, spec, err, vom, discards, diag);
}

}  // namespace

WeakErrorCurve weak_error_mlmcl0(const SdeProblem& p, SchemeKind kind_test, SchemeKind kind_ref,
                                 const LevelSpec& spec, std::uint64_t seed,
                                 EstimatorDiagnostics* diag, const Observable& phi,
                                 const TamingSpec& taming) {
    return mlmc_family(p, kind_test, kind_ref, spec, seed, true, diag, phi, taming);
}

WeakErrorCurve weak_error_mlmc(const SdeProblem& p, SchemeKind kind_test, SchemeKind kind_ref,
                               const LevelSpec& spec, std::uint64_t seed,
                               EstimatorDiagnostics* diag, const Observable& phi,
                               const TamingSpec& taming) {
    return mlmc_family(p, kind_test, kind_ref, spec, seed, false, diag, phi, taming);
}

WeakErrorCurve weak_error_trad(const SdeProblem& p, SchemeKind kind_test, SchemeKind kind_ref,
                               const LevelSpec& spec, std::uint64_t seed,
                               EstimatorDiagnostics* diag, const Observable& phi,
                               const TamingSpec& taming) {
    spec.validate();
    DiagScope ds{diag};
    const int R = spec.num_levels;
    const int n0 = spec.n0;

    // reference telescope, estimated once
    double ref_total = 0.0, ref_vom = 0.0;
    std::int64_t ref_disc = 0;
    {
        const LevelStats e0 = estimate_single_level(p, kind_ref, n0, spec.samples_at(0), seed,
                                                    kTagTradRef, phi, taming);
        ds.record("trad_ref_single", 0, e0, static_cast<std::uint64_t>(spec.samples_at(0)) * n0);
        ref_total = e0.mean;
        ref_vom = var_of_mean(e0);
        ref_disc = e0.n_discarded;
        for (int l = 1; l <= R; ++l) {
            const int fine_n = static_cast<int>(spec.n_steps_at(l));
            const LevelStats dl = estimate_level_difference(p, kind_ref, kind_ref, fine_n, 2,
                                                            spec.samples_at(l), seed,
                                                            kTagTradRef + l, phi, taming);
            ds.record("trad_ref_diff", l, dl,
                      static_cast<std::uint64_t>(spec.samples_at(l)) * (fine_n + fine_n / 2));
            ref_total += dl.mean;
            ref_vom += var_of_mean(dl);
            ref_disc += dl.n_discarded;
        }
    }

    // one fresh test telescope per target level: "estimate independently"
    std::vector<double> err(spec.target_level + 1), vom(spec.target_level + 1);
    std::vector<std::int64_t> discards(spec.target_level + 1, 0);
    for (int L = 0; L <= spec.target_level; ++L) {
        const std::int32_t base = kTagTradTest + L * kTradTestStride;
        const LevelStats e0 = estimate_single_level(p, kind_test, n0, spec.samples_at(0), seed,
                                                    base, phi, taming);
        ds.record("trad_test_single_L" + std::to_string(L), 0, e0,
                  static_cast<std::uint64_t>(spec.samples_at(0)) * n0);
        double test_total = e0.mean, test_vom = var_of_mean(e0);
        std::int64_t test_disc = e0.n_discarded;
        for (int l = 1; l <= L; ++l) {
            const int fine_n = static_cast<int>(spec.n_steps_at(l));
            const LevelStats dl = estimate_level_difference(p, kind_test, kind_test, fine_n, 2,
                                                            spec.samples_at(l), seed, base + l,
                                                            phi, taming);
            ds.record("trad_test_diff_L" + std::to_string(L), l, dl,
                      static_cast<std::uint64_t>(spec.samples_at(l)) * (fine_n + fine_n / 2));
            test_total += dl.mean;
            test_vom += var_of_mean(dl);
            test_disc += dl.n_discarded;
        }
        err[L] = std::fabs(ref_total - test_total);
        vom[L] = ref_vom + test_vom;
        discards[L] = ref_disc + test_disc;
    }
    return assemble_curve(p, spec, err, vom, discards, diag);
}

std::pair<double, double> fit_rate(std::span<const std::pair<double, double>> points) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& [dt, error] : points) {
        if (!(dt > 0.0) || !(error > 0.0) || !std::isfinite(error)) continue;
        const double x = std::log(dt);
        const double y = std::log(error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) throw fit_error("fit_rate: need at least two points with positive error");
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw fit_error("fit_rate: degenerate abscissae");
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    return {slope, intercept};
}

}  // namespace tamex
