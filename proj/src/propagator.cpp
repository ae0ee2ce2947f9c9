#include "tamex/propagator.hpp"

#include <cmath>
#include <string>

#include "tamex/errors.hpp"
#include "tamex/kernels.hpp"

namespace tamex {

namespace {

// B == c*I within 1e-14 (off-diagonal) and 1e-14*(1+|c|) (diagonal spread)?
bool detect_scalar(const SquareMatrix& b, double& c_out) {
    const int d = b.dim;
    const double c = b(0, 0);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (i == j) {
                if (std::fabs(b(i, j) - c) > 1e-14 * (1.0 + std::fabs(c))) return false;
            } else {
                if (std::fabs(b(i, j)) > 1e-14) return false;
            }
        }
    }
    c_out = c;
    return true;
}

double commutator_frobenius(const SquareMatrix& x, const SquareMatrix& y) {
    return frobenius_norm(x * y - y * x);
}

std::vector<CommutatorViolation> check_impl(const LinearPart& lp, double fixed_tol,
                                            bool scale_aware) {
    std::vector<CommutatorViolation> out;
    const auto& bs = lp.bs();
    const double na = frobenius_norm(lp.a());
    std::vector<double> nb(bs.size());
    for (std::size_t i = 0; i < bs.size(); ++i) nb[i] = frobenius_norm(bs[i]);

    for (std::size_t i = 0; i < bs.size(); ++i) {
        const double tol = scale_aware ? 1e-10 * (1.0 + na * nb[i]) : fixed_tol;
        const double f = commutator_frobenius(lp.a(), bs[i]);
        if (f > tol) out.push_back({-1, static_cast<int>(i), f});
    }
    for (std::size_t i = 0; i < bs.size(); ++i) {
        for (std::size_t j = i + 1; j < bs.size(); ++j) {
            const double tol = scale_aware ? 1e-10 * (1.0 + nb[i] * nb[j]) : fixed_tol;
            const double f = commutator_frobenius(bs[i], bs[j]);
            if (f > tol) out.push_back({static_cast<int>(i), static_cast<int>(j), f});
        }
    }
    return out;
}

}  // namespace

LinearPart::LinearPart(SquareMatrix a, std::vector<SquareMatrix> bs, bool validate)
    : a_(std::move(a)), bs_(std::move(bs)) {
    if (a_.dim < 1) throw invalid_input_error("LinearPart: invalid drift matrix");
    for (const auto& b : bs_)
        if (b.dim != a_.dim)
            throw invalid_input_error("LinearPart: all matrices must share dim");

    scalar_coeffs_.resize(bs_.size(), 0.0);
    for (std::size_t i = 0; i < bs_.size(); ++i) {
        if (!detect_scalar(bs_[i], scalar_coeffs_[i])) {
            all_scalar_ = false;
            scalar_coeffs_.clear();
            break;
        }
    }

    if (validate) {
        const auto violations = check_impl(*this, 0.0, true);
        if (!violations.empty())
            throw invalid_input_error(
                "LinearPart: commutator conditions violated for " +
                std::to_string(violations.size()) + " pair(s); the GBM propagator "
                "requires [A,B_i] = [B_i,B_j] = 0");
    }
}

std::vector<CommutatorViolation> check_commutators(const LinearPart& lp, double tol) {
    if (!(tol > 0.0)) throw invalid_input_error("check_commutators: tol must be > 0");
    return check_impl(lp, tol, false);
}

std::vector<CommutatorViolation> check_commutators(const LinearPart& lp) {
    return check_impl(lp, 0.0, true);
}

SquareMatrix deterministic_factor(const LinearPart& lp, double dt) {
    if (!(dt >= 0.0)) throw invalid_input_error("deterministic_factor: dt must be >= 0");
    SquareMatrix gen = lp.a();
    for (const auto& b : lp.bs()) add_scaled(gen, -0.5, b * b);
    return mat_exp(dt * gen);
}

SquareMatrix propagator_sample(const LinearPart& lp, double dt, std::span<const double> dws,
                               const SquareMatrix& det_factor) {
    (void)dt;  // folded into det_factor by the caller per the precondition
    if (static_cast<int>(dws.size()) != lp.num_drivers())
        throw invalid_input_error("propagator_sample: dws length must equal m");
    if (det_factor.dim != lp.dim())
        throw invalid_input_error("propagator_sample: det_factor dim mismatch");

    if (lp.num_drivers() == 0) return det_factor;

    if (lp.all_scalar()) {
        double arg = 0.0;
        const auto& cs = lp.scalar_coeffs();
        for (std::size_t i = 0; i < dws.size(); ++i) arg += cs[i] * dws[i];
        return std::exp(arg) * det_factor;
    }

    SquareMatrix noise(lp.dim());
    for (std::size_t i = 0; i < dws.size(); ++i) add_scaled(noise, dws[i], lp.bs()[i]);
    return det_factor * mat_exp(noise);
}

}  // namespace tamex
