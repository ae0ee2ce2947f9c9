#pragma once

#include <functional>
#include <span>
#include <vector>

#include "tamex/propagator.hpp"

namespace tamex {

// Taming multiplies the drift nonlinearity by alpha(dt, y) <= 1 so that a
// single explicit step can never move farther than 1/dt, which is what
// keeps explicit schemes from exploding under superlinear drift.
enum class TamingKind { reciprocal_norm, none };

struct TamingSpec {
    TamingKind kind = TamingKind::reciprocal_norm;
};

// out = alpha * f_val with alpha = 1/(1.0 + dt*|f_val|) (reciprocal_norm)
// or alpha = 1 (none). Returns alpha. Guarantees alpha in (0,1] and
// |out|*dt <= 1 for reciprocal_norm.
double tame_drift(std::span<const double> f_val, double dt, const TamingSpec& spec,
                  std::span<double> out);
std::vector<double> tame_drift(std::span<const double> f_val, double dt,
                               const TamingSpec& spec);

using VectorField = std::function<void(std::span<const double>, std::span<double>)>;

// Problem data for  dX = (A X + F(X)) dt + sum_i (B_i X + g_i(X)) dW^i.
struct SdeProblem {
    int dim = 0;
    int m = 0;  // Brownian drivers
    LinearPart linear;
    VectorField drift_f;                    // F
    std::vector<VectorField> diffusion_g;   // g_i, size m
    std::vector<double> x0;
    double horizon = 1.0;
};

// Consistency checks (dims, finite x0, finite F/g at x0). Throws
// invalid_input_error. LinearPart commutators are validated at its own
// construction.
void validate_problem(const SdeProblem& p);

enum class LaplacianScaling {
    literal,            // A = 0.5 d^-2 tridiag(1,-2,1), as printed
    finite_difference,  // A = 0.5 d^2 tridiag(1,-2,1)
};

// The cubic test family  dX = [AX + X - X^3] dt + b1 X dW + b2 X/(1+X^2) dW
// (componentwise nonlinearities, one shared driver).
struct CubicBenchmark {
    int dim = 1;
    double beta1 = 0.1;
    double beta2 = 0.0;
    LaplacianScaling laplacian_scaling = LaplacianScaling::literal;
    bool zero_nonlinearity = false;  // replace F by 0 (linear-problem diagnostics)
    double x0_scale = 1.0;
};

// d = 1: A = [-4], x0 = 0.5. d >= 2: A per scaling rule, x0_j =
// 0.5 exp(-10 (y_j - 0.5)^2) on the interior grid y_j = j/(d+1). T = 1,
// m = 1, B_1 = beta1*I, g_1(x) = beta2*x/(1+x^2).
SdeProblem make_cubic_problem(const CubicBenchmark& cfg);

// phi(y) = |y|^2, the test observable used throughout.
double phi_sq_norm(std::span<const double> y);

}  // namespace tamex
