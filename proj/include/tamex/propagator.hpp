#pragma once

#include <span>
#include <vector>

#include "tamex/matrix.hpp"

namespace tamex {

// One commutator pair whose Frobenius norm exceeded tolerance.
// first == -1 means the pair (A, B_second); otherwise (B_first, B_second).
struct CommutatorViolation {
    int first = -1;
    int second = 0;
    double frobenius = 0.0;
};

// The linear problem data (A, B_1..B_m). The stochastic solution operator
//   Phi(t, t0) = exp((A - 1/2 sum B_i^2)(t - t0) + sum B_i (W^i_t - W^i_{t0}))
// solves the linear part exactly, but only if A and all B_i commute
// pairwise, so construction validates the commutators (scale-aware
// tolerance). When every B_i is a scalar multiple of the identity the
// random factor collapses to a scalar exponential; that is detected here
// and drives the fast path in propagator_sample.
class LinearPart {
public:
    LinearPart(SquareMatrix a, std::vector<SquareMatrix> bs, bool validate = true);

    const SquareMatrix& a() const { return a_; }
    const std::vector<SquareMatrix>& bs() const { return bs_; }
    int dim() const { return a_.dim; }
    int num_drivers() const { return static_cast<int>(bs_.size()); }

    bool all_scalar() const { return all_scalar_; }
    // c_i with B_i = c_i * I; meaningful only when all_scalar()
    const std::vector<double>& scalar_coeffs() const { return scalar_coeffs_; }

private:
    SquareMatrix a_;
    std::vector<SquareMatrix> bs_;
    bool all_scalar_ = true;
    std::vector<double> scalar_coeffs_;
};

// Pure check: all pairs (A,B_i) and (B_i,B_j), i<j, whose commutator
// Frobenius norm exceeds tol. Empty result = admissible for the GBM scheme.
std::vector<CommutatorViolation> check_commutators(const LinearPart& lp, double tol);

// Same with the default scale-aware tolerance 1e-10 * (1 + |X|_F * |Y|_F)
// applied per pair.
std::vector<CommutatorViolation> check_commutators(const LinearPart& lp);

// exp((A - 1/2 sum B_i^2) dt). Step-size constant: compute once per dt and
// reuse across steps and paths.
SquareMatrix deterministic_factor(const LinearPart& lp, double dt);

// One realization of Phi for given increments dws (length m), with the
// deterministic factor supplied by the caller. all_scalar problems take the
// scalar-exponential fast path; otherwise the noise part is exponentiated
// densely and combined with det_factor (valid by commutation).
SquareMatrix propagator_sample(const LinearPart& lp, double dt, std::span<const double> dws,
                               const SquareMatrix& det_factor);

}  // namespace tamex
