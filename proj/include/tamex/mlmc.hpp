#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tamex/schemes.hpp"

namespace tamex {

// Level geometry: N_l = n0 * 2^l for l = 0..num_levels, with num_levels the
// finest (reference) level index and target_level the largest l whose weak
// error is reported.
struct LevelSpec {
    int n0 = 4;
    int num_levels = 8;
    int target_level = 7;
    std::vector<std::int64_t> samples_per_level;  // per level; last entry repeats

    std::int64_t samples_at(int level) const;
    std::int64_t n_steps_at(int level) const;
    void validate() const;
};

// Monte Carlo bookkeeping for one expectation term. Non-finite trajectories
// are excluded from mean/variance and counted in n_discarded.
struct LevelStats {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    std::int64_t n_samples = 0;
    std::int64_t n_discarded = 0;

    double std_error() const;
    // more than 1% of trajectories discarded
    bool unreliable() const;
};

struct CurvePoint {
    double dt = 0.0;
    double error_estimate = 0.0;
    double std_error = 0.0;
};

// A point enters the rate fit only when its error is resolved: above 3x its
// standard error and above the 1e-14 rounding floor (pathwise-exact runs
// produce errors at machine noise with near-zero standard errors).
bool curve_point_usable(const CurvePoint& pt);

// Empirical weak-error curve: one point per target level, dt descending.
// fitted_slope/intercept come from a log-log least-squares fit over points
// whose error exceeds 3x their standard error; NaN when fewer than two
// points qualify.
struct WeakErrorCurve {
    std::vector<CurvePoint> points;
    double fitted_slope = std::numeric_limits<double>::quiet_NaN();
    double fitted_intercept = std::numeric_limits<double>::quiet_NaN();
};

// Optional per-run diagnostics: every estimated term, integrated path-step
// totals (the deterministic cost measure), and per-point discard counts
// aligned with the curve.
struct TermRecord {
    std::string label;
    int level = 0;
    LevelStats stats;
    std::uint64_t path_steps = 0;
};

struct EstimatorDiagnostics {
    std::vector<TermRecord> terms;
    std::uint64_t total_path_steps = 0;
    std::vector<std::int64_t> discards_per_point;
    bool any_unreliable = false;
};

using Observable = std::function<double(std::span<const double>)>;

// Mean/variance of phi(Y_N) over n_samples independent streams
// (master_seed, level_tag, i). Throws estimation_error if every sample
// diverged.
LevelStats estimate_single_level(const SdeProblem& p, SchemeKind kind, int n_steps,
                                 std::int64_t n_samples, std::uint64_t master_seed,
                                 std::int32_t level_tag, const Observable& phi = phi_sq_norm,
                                 const TamingSpec& taming = {});

// Statistics of coupled differences phi(fine) - phi(coarse). factor >= 2
// couples fine_n against fine_n/factor with the same scheme; factor == 1
// runs two schemes on the identical grid (the cross-scheme coarsest term
// of MLMCL0).
LevelStats estimate_level_difference(const SdeProblem& p, SchemeKind kind_fine,
                                     SchemeKind kind_coarse, int fine_n, int factor,
                                     std::int64_t n_samples, std::uint64_t master_seed,
                                     std::int32_t level_tag,
                                     const Observable& phi = phi_sq_norm,
                                     const TamingSpec& taming = {});

// The four weak-error estimation strategies. All return one curve point per
// target level L in 0..target_level; standard errors combine contributing
// terms in quadrature (disjoint streams by construction).

// Two independently estimated telescopes; the test telescope is rebuilt
// with fresh streams for every target level.
WeakErrorCurve weak_error_trad(const SdeProblem& p, SchemeKind kind_test, SchemeKind kind_ref,
                               const LevelSpec& spec, std::uint64_t seed,
                               EstimatorDiagnostics* diag = nullptr,
                               const Observable& phi = phi_sq_norm,
                               const TamingSpec& taming = {});

// Difference form with the coarsest-level term estimated coupled
// (same path, both schemes).
WeakErrorCurve weak_error_mlmcl0(const SdeProblem& p, SchemeKind kind_test, SchemeKind kind_ref,
                                 const LevelSpec& spec, std::uint64_t seed,
                                 EstimatorDiagnostics* diag = nullptr,
                                 const Observable& phi = phi_sq_norm,
                                 const TamingSpec& taming = {});

// Difference form with the two coarsest-level expectations estimated
// independently.
WeakErrorCurve weak_error_mlmc(const SdeProblem& p, SchemeKind kind_test, SchemeKind kind_ref,
                               const LevelSpec& spec, std::uint64_t seed,
                               EstimatorDiagnostics* diag = nullptr,
                               const Observable& phi = phi_sq_norm,
                               const TamingSpec& taming = {});

// Self-referencing: one ladder of coupled differences for a single scheme;
// the error at level L is the tail sum over l > L of the same ladder.
WeakErrorCurve weak_error_mlmcsr(const SdeProblem& p, SchemeKind kind, const LevelSpec& spec,
                                 std::uint64_t seed, EstimatorDiagnostics* diag = nullptr,
                                 const Observable& phi = phi_sq_norm,
                                 const TamingSpec& taming = {});

// Least-squares slope/intercept of log(error) against log(dt). Points with
// error <= 0 are unusable; fewer than two usable points throws fit_error.
std::pair<double, double> fit_rate(std::span<const std::pair<double, double>> points);

}  // namespace tamex
