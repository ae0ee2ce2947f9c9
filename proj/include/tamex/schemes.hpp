#pragma once

#include <string>
#include <utility>

#include "tamex/paths.hpp"
#include "tamex/problems.hpp"

namespace tamex {

// GbmTamed is the full scheme
//   Y_{n+1} = Phi(t_{n+1},t_n) (Y_n + (Ftm(Y_n) - sum B_i g_i(Y_n)) dt
//                                    + sum g_i(Y_n) dW^i_n).
// Setting B_i = 0 gives ExpTamed (full diffusion sigma_i = B_i y + g_i
// folded into the Maruyama term), A = B_i = 0 gives TamedEuler, and
// dropping the taming gives EulerMaruyama (the divergence control).
enum class SchemeKind { gbm_tamed, exp_tamed, tamed_euler, euler_maruyama };

std::string to_string(SchemeKind kind);

struct TrajectoryResult {
    std::vector<double> terminal;  // Y_N; meaningful only when finite
    double max_norm = 0.0;         // running max of |Y_n| including Y_0
    bool finite = true;
};

// Single steps. The *_inplace variants write into out and avoid
// allocation; integrate() is built on them.
std::vector<double> step_gbm_tamed(const SdeProblem& p, std::span<const double> y, double dt,
                                   std::span<const double> dws, const SquareMatrix& det_factor,
                                   const TamingSpec& taming);
std::vector<double> step_exp_tamed(const SdeProblem& p, std::span<const double> y, double dt,
                                   std::span<const double> dws, const SquareMatrix& exp_a_dt,
                                   const TamingSpec& taming);
std::vector<double> step_tamed_euler(const SdeProblem& p, std::span<const double> y, double dt,
                                     std::span<const double> dws, const TamingSpec& taming);
std::vector<double> step_euler_maruyama(const SdeProblem& p, std::span<const double> y,
                                        double dt, std::span<const double> dws);

// Steps the chosen scheme across the whole grid from x0. Per-step matrices
// (det_factor / exp(A dt)) are computed once. Overflow never throws: the
// trajectory is flagged non-finite and integration stops.
TrajectoryResult integrate(const SdeProblem& p, SchemeKind kind, const IncrementGrid& grid,
                           const TamingSpec& taming = {});

// Integrates the fine grid and its coarsening by `factor` on the same
// Brownian path: one coupled MLMC sample. factor == 1 runs both on the
// fine grid unchanged.
std::pair<TrajectoryResult, TrajectoryResult> integrate_pair(const SdeProblem& p,
                                                             SchemeKind kind,
                                                             const IncrementGrid& fine,
                                                             int factor,
                                                             const TamingSpec& taming = {});

}  // namespace tamex
