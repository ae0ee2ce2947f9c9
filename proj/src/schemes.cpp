#include "tamex/schemes.hpp"

#include <cfloat>
#include <cmath>
#include <cstring>
#include <limits>

#include "tamex/errors.hpp"
#include "tamex/kernels.hpp"

namespace tamex {

std::string to_string(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::gbm_tamed: return "gbm_tamed";
        case SchemeKind::exp_tamed: return "exp_tamed";
        case SchemeKind::tamed_euler: return "tamed_euler";
        case SchemeKind::euler_maruyama: return "euler_maruyama";
    }
    return "?";
}

namespace {

// Scratch buffers reused across the integration loop.
struct Workspace {
    std::vector<double> f;    // F(y), then tamed
    std::vector<double> g;    // g_i(y)
    std::vector<double> v;    // B_i y / B_i g / matvec scratch
    std::vector<double> acc;  // bracket accumulator
    SquareMatrix noise;       // sum B_i dW_i (general propagator path)

    explicit Workspace(int d) : f(d), g(d), v(d), acc(d), noise(d) {}
};

// alpha for the tamed drift; squared-norm overflow on huge finite f is
// clamped so alpha stays positive.
inline double taming_alpha(const kernels::Table& K, const std::vector<double>& f, double dt,
                           const TamingSpec& taming) {
    if (taming.kind == TamingKind::none) return 1.0;
    double nf = std::sqrt(K.dot(f.data(), f.data(), f.size()));
    if (!std::isfinite(nf)) nf = DBL_MAX;
    return 1.0 / (1.0 + dt * nf);
}

// acc += dws_i * (B_i y + g_i(y)) for all drivers, evaluated at y.
inline void add_full_diffusion(const kernels::Table& K, const SdeProblem& p,
                               std::span<const double> y, std::span<const double> dws,
                               Workspace& ws) {
    const std::size_t d = y.size();
    for (int i = 0; i < p.m; ++i) {
        p.diffusion_g[i](y, ws.g);
        K.axpy(dws[i], ws.g.data(), ws.acc.data(), d);
        if (p.linear.all_scalar()) {
            K.axpy(dws[i] * p.linear.scalar_coeffs()[i], y.data(), ws.acc.data(), d);
        } else {
            K.matvec(p.linear.bs()[i].data(), y.data(), ws.v.data(), d);
            K.axpy(dws[i], ws.v.data(), ws.acc.data(), d);
        }
    }
}

void gbm_tamed_step(const kernels::Table& K, const SdeProblem& p, std::span<const double> y,
                    double dt, std::span<const double> dws, const SquareMatrix& det_factor,
                    const TamingSpec& taming, Workspace& ws, std::span<double> out) {
    const std::size_t d = y.size();
    p.drift_f(y, ws.f);
    const double alpha = taming_alpha(K, ws.f, dt, taming);

    std::memcpy(ws.acc.data(), y.data(), d * sizeof(double));
    K.axpy(alpha * dt, ws.f.data(), ws.acc.data(), d);
    for (int i = 0; i < p.m; ++i) {
        p.diffusion_g[i](y, ws.g);
        if (p.linear.all_scalar()) {
            // B_i g = c_i g, so the -dt*B_i g and +dW*g terms fuse
            K.axpy(dws[i] - dt * p.linear.scalar_coeffs()[i], ws.g.data(), ws.acc.data(), d);
        } else {
            K.axpy(dws[i], ws.g.data(), ws.acc.data(), d);
            K.matvec(p.linear.bs()[i].data(), ws.g.data(), ws.v.data(), d);
            K.axpy(-dt, ws.v.data(), ws.acc.data(), d);
        }
    }

    if (p.linear.all_scalar()) {
        double arg = 0.0;
        for (int i = 0; i < p.m; ++i) arg += p.linear.scalar_coeffs()[i] * dws[i];
        K.matvec(det_factor.data(), ws.acc.data(), out.data(), d);
        K.scal(std::exp(arg), out.data(), d);
    } else {
        if (!K.all_finite(ws.acc.data(), d)) {
            // poison the output instead of feeding overflow into mat_exp
            for (auto& v : out) v = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        std::memset(ws.noise.data(), 0, ws.noise.entries.size() * sizeof(double));
        for (int i = 0; i < p.m; ++i) add_scaled(ws.noise, dws[i], p.linear.bs()[i]);
        const SquareMatrix phi = det_factor * mat_exp(ws.noise);
        K.matvec(phi.data(), ws.acc.data(), out.data(), d);
    }
}

void exp_tamed_step(const kernels::Table& K, const SdeProblem& p, std::span<const double> y,
                    double dt, std::span<const double> dws, const SquareMatrix& exp_a_dt,
                    const TamingSpec& taming, Workspace& ws, std::span<double> out) {
    const std::size_t d = y.size();
    p.drift_f(y, ws.f);
    const double alpha = taming_alpha(K, ws.f, dt, taming);

    std::memcpy(ws.acc.data(), y.data(), d * sizeof(double));
    K.axpy(alpha * dt, ws.f.data(), ws.acc.data(), d);
    add_full_diffusion(K, p, y, dws, ws);
    K.matvec(exp_a_dt.data(), ws.acc.data(), out.data(), d);
}

// Shared Euler body; EulerMaruyama is the taming = none case.
void euler_step(const kernels::Table& K, const SdeProblem& p, std::span<const double> y,
                double dt, std::span<const double> dws, const TamingSpec& taming,
                Workspace& ws, std::span<double> out) {
    const std::size_t d = y.size();
    p.drift_f(y, ws.f);
    const double alpha = taming_alpha(K, ws.f, dt, taming);

    std::memcpy(ws.acc.data(), y.data(), d * sizeof(double));
    K.matvec(p.linear.a().data(), y.data(), ws.v.data(), d);
    K.axpy(dt, ws.v.data(), ws.acc.data(), d);
    K.axpy(alpha * dt, ws.f.data(), ws.acc.data(), d);
    add_full_diffusion(K, p, y, dws, ws);
    std::memcpy(out.data(), ws.acc.data(), d * sizeof(double));
}

void check_step_args(const SdeProblem& p, std::span<const double> y,
                     std::span<const double> dws) {
    if (static_cast<int>(y.size()) != p.dim)
        throw invalid_input_error("step: state size mismatch");
    if (static_cast<int>(dws.size()) != p.m)
        throw invalid_input_error("step: dws length must equal m");
}

}  // namespace

std::vector<double> step_gbm_tamed(const SdeProblem& p, std::span<const double> y, double dt,
                                   std::span<const double> dws, const SquareMatrix& det_factor,
                                   const TamingSpec& taming) {
    check_step_args(p, y, dws);
    if (det_factor.dim != p.dim)
        throw invalid_input_error("step_gbm_tamed: det_factor dim mismatch");
    Workspace ws(p.dim);
    std::vector<double> out(p.dim);
    gbm_tamed_step(kernels::active(), p, y, dt, dws, det_factor, taming, ws, out);
    return out;
}

std::vector<double> step_exp_tamed(const SdeProblem& p, std::span<const double> y, double dt,
                                   std::span<const double> dws, const SquareMatrix& exp_a_dt,
                                   const TamingSpec& taming) {
    check_step_args(p, y, dws);
    if (exp_a_dt.dim != p.dim)
        throw invalid_input_error("step_exp_tamed: exp_a_dt dim mismatch");
    Workspace ws(p.dim);
    std::vector<double> out(p.dim);
    exp_tamed_step(kernels::active(), p, y, dt, dws, exp_a_dt, taming, ws, out);
    return out;
}

std::vector<double> step_tamed_euler(const SdeProblem& p, std::span<const double> y, double dt,
                                     std::span<const double> dws, const TamingSpec& taming) {
    check_step_args(p, y, dws);
    Workspace ws(p.dim);
    std::vector<double> out(p.dim);
    euler_step(kernels::active(), p, y, dt, dws, taming, ws, out);
    return out;
}

std::vector<double> step_euler_maruyama(const SdeProblem& p, std::span<const double> y,
                                        double dt, std::span<const double> dws) {
    check_step_args(p, y, dws);
    Workspace ws(p.dim);
    std::vector<double> out(p.dim);
    euler_step(kernels::active(), p, y, dt, dws, TamingSpec{TamingKind::none}, ws, out);
    return out;
}

TrajectoryResult integrate(const SdeProblem& p, SchemeKind kind, const IncrementGrid& grid,
                           const TamingSpec& taming) {
    if (grid.m != p.m) throw invalid_input_error("integrate: grid has wrong driver count");
    const double span_t = grid.dt * grid.n_steps;
    if (std::fabs(span_t - p.horizon) > 1e-12 * std::max(1.0, std::fabs(p.horizon)))
        throw invalid_input_error("integrate: grid dt*n_steps must equal the horizon");

    const auto& K = kernels::active();
    const double dt = grid.dt;
    const int d = p.dim;

    SquareMatrix factor;  // det_factor or exp(A dt), depending on scheme
    if (kind == SchemeKind::gbm_tamed) {
        factor = deterministic_factor(p.linear, dt);
    } else if (kind == SchemeKind::exp_tamed) {
        factor = mat_exp(dt * p.linear.a());
    }

    const TamingSpec effective =
        kind == SchemeKind::euler_maruyama ? TamingSpec{TamingKind::none} : taming;

    Workspace ws(d);
    TrajectoryResult res;
    res.terminal = p.x0;
    std::vector<double> next(d);
    std::vector<double> dws(p.m);
    res.max_norm = std::sqrt(K.dot(res.terminal.data(), res.terminal.data(), d));

    for (int n = 0; n < grid.n_steps; ++n) {
        for (int i = 0; i < p.m; ++i) dws[i] = grid.at(i, n);
        std::span<const double> y(res.terminal);
        switch (kind) {
            case SchemeKind::gbm_tamed:
                gbm_tamed_step(K, p, y, dt, dws, factor, effective, ws, next);
                break;
            case SchemeKind::exp_tamed:
                exp_tamed_step(K, p, y, dt, dws, factor, effective, ws, next);
                break;
            case SchemeKind::tamed_euler:
            case SchemeKind::euler_maruyama:
                euler_step(K, p, y, dt, dws, effective, ws, next);
                break;
        }
        res.terminal.swap(next);
        if (!K.all_finite(res.terminal.data(), d)) {
            res.finite = false;
            res.max_norm = std::numeric_limits<double>::infinity();
            break;
        }
        res.max_norm =
            std::max(res.max_norm, std::sqrt(K.dot(res.terminal.data(), res.terminal.data(), d)));
    }
    return res;
}

std::pair<TrajectoryResult, TrajectoryResult> integrate_pair(const SdeProblem& p,
                                                             SchemeKind kind,
                                                             const IncrementGrid& fine,
                                                             int factor,
                                                             const TamingSpec& taming) {
    if (factor < 1) throw invalid_input_error("integrate_pair: factor must be >= 1");
    TrajectoryResult f = integrate(p, kind, fine, taming);
    if (factor == 1) {
        TrajectoryResult c = f;
        return {std::move(f), std::move(c)};
    }
    const IncrementGrid coarse = coarsen(fine, factor);
    TrajectoryResult c = integrate(p, kind, coarse, taming);
    return {std::move(f), std::move(c)};
}

}  // namespace tamex
