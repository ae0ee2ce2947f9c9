#include "tamex/problems.hpp"

#include <cfloat>
#include <cmath>
#include <cstring>

#include "tamex/errors.hpp"
#include "tamex/kernels.hpp"

namespace tamex {

double tame_drift(std::span<const double> f_val, double dt, const TamingSpec& spec,
                  std::span<double> out) {
    if (out.size() != f_val.size())
        throw invalid_input_error("tame_drift: output size mismatch");
    const auto& K = kernels::active();
    if (!K.all_finite(f_val.data(), f_val.size()))
        throw invalid_input_error("tame_drift: non-finite drift value");
    if (!(dt > 0.0)) throw invalid_input_error("tame_drift: dt must be > 0");

    double alpha = 1.0;
    if (spec.kind == TamingKind::reciprocal_norm) {
        double nf = std::sqrt(K.dot(f_val.data(), f_val.data(), f_val.size()));
        if (!std::isfinite(nf)) nf = DBL_MAX;  // squared-norm overflow on huge finite input
        alpha = 1.0 / (1.0 + dt * nf);
    }
    for (std::size_t i = 0; i < f_val.size(); ++i) out[i] = alpha * f_val[i];
    return alpha;
}

std::vector<double> tame_drift(std::span<const double> f_val, double dt,
                               const TamingSpec& spec) {
    std::vector<double> out(f_val.size());
    tame_drift(f_val, dt, spec, out);
    return out;
}

void validate_problem(const SdeProblem& p) {
    if (p.dim < 1) throw invalid_input_error("SdeProblem: dim must be >= 1");
    if (p.m < 0) throw invalid_input_error("SdeProblem: m must be >= 0");
    if (p.linear.dim() != p.dim)
        throw invalid_input_error("SdeProblem: linear part dim mismatch");
    if (p.linear.num_drivers() != p.m)
        throw invalid_input_error("SdeProblem: linear part must have m noise matrices");
    if (static_cast<int>(p.diffusion_g.size()) != p.m)
        throw invalid_input_error("SdeProblem: need one g_i per driver");
    if (static_cast<int>(p.x0.size()) != p.dim)
        throw invalid_input_error("SdeProblem: x0 size mismatch");
    if (!(p.horizon > 0.0)) throw invalid_input_error("SdeProblem: horizon must be > 0");
    if (!p.drift_f) throw invalid_input_error("SdeProblem: drift_f not set");

    const auto& K = kernels::active();
    if (!K.all_finite(p.x0.data(), p.x0.size()))
        throw invalid_input_error("SdeProblem: x0 must be finite");

    // spot-check F and g_i at x0
    std::vector<double> tmp(p.dim);
    p.drift_f(p.x0, tmp);
    if (!K.all_finite(tmp.data(), tmp.size()))
        throw invalid_input_error("SdeProblem: F(x0) is not finite");
    for (const auto& g : p.diffusion_g) {
        if (!g) throw invalid_input_error("SdeProblem: diffusion_g entry not set");
        g(p.x0, tmp);
        if (!K.all_finite(tmp.data(), tmp.size()))
            throw invalid_input_error("SdeProblem: g_i(x0) is not finite");
    }
}

SdeProblem make_cubic_problem(const CubicBenchmark& cfg) {
    if (cfg.dim < 1) throw invalid_input_error("CubicBenchmark: dim must be >= 1");
    const int d = cfg.dim;

    SquareMatrix a(d);
    if (d == 1) {
        a(0, 0) = -4.0;
    } else {
        const double dd = static_cast<double>(d);
        const double scale = cfg.laplacian_scaling == LaplacianScaling::literal
                                 ? 0.5 / (dd * dd)
                                 : 0.5 * dd * dd;
        for (int i = 0; i < d; ++i) {
            a(i, i) = -2.0 * scale;
            if (i + 1 < d) {
                a(i, i + 1) = scale;
                a(i + 1, i) = scale;
            }
        }
    }

    SquareMatrix b1(d);
    for (int i = 0; i < d; ++i) b1(i, i) = cfg.beta1;

    std::vector<double> x0(d);
    if (d == 1) {
        x0[0] = 0.5;
    } else {
        for (int j = 1; j <= d; ++j) {
            const double y = static_cast<double>(j) / (d + 1);
            x0[j - 1] = 0.5 * std::exp(-10.0 * (y - 0.5) * (y - 0.5));
        }
    }
    for (auto& v : x0) v *= cfg.x0_scale;

    SdeProblem p{
        .dim = d,
        .m = 1,
        .linear = LinearPart(std::move(a), {std::move(b1)}),
        .drift_f = {},
        .diffusion_g = {},
        .x0 = std::move(x0),
        .horizon = 1.0,
    };

    if (cfg.zero_nonlinearity) {
        p.drift_f = [](std::span<const double>, std::span<double> out) {
            std::memset(out.data(), 0, out.size() * sizeof(double));
        };
    } else {
        p.drift_f = [](std::span<const double> x, std::span<double> out) {
            kernels::active().cubic_drift(x.data(), out.data(), x.size());
        };
    }

    const double beta2 = cfg.beta2;
    p.diffusion_g.push_back([beta2](std::span<const double> x, std::span<double> out) {
        kernels::active().bounded_rational(beta2, x.data(), out.data(), x.size());
    });

    validate_problem(p);
    return p;
}

double phi_sq_norm(std::span<const double> y) {
    return kernels::active().dot(y.data(), y.data(), y.size());
}

}  // namespace tamex
