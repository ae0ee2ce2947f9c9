// NEON kernel variants (aarch64 only, where NEON is baseline). Same
// contract as the AVX2 unit: elementwise ops bit-match scalar, reductions
// are tolerance-tested.

#if defined(__aarch64__)

#include "tamex/kernels.hpp"

#include "kernels_tables.hpp"

#include <arm_neon.h>

#include <cmath>

namespace tamex::kernels {

namespace {

void axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t av = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t xv = vld1q_f64(x + i);
        const float64x2_t yv = vld1q_f64(y + i);
        vst1q_f64(y + i, vaddq_f64(yv, vmulq_f64(av, xv)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
    const float64x2_t av = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(av, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

double dot(const double* x, const double* y, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void cubic_drift(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t v = vld1q_f64(x + i);
        const float64x2_t v3 = vmulq_f64(vmulq_f64(v, v), v);
        vst1q_f64(out + i, vsubq_f64(v, v3));
    }
    for (; i < n; ++i) {
        const double v = x[i];
        out[i] = v - v * v * v;
    }
}

void bounded_rational(double c, const double* x, double* out, std::size_t n) {
    const float64x2_t cv = vdupq_n_f64(c);
    const float64x2_t one = vdupq_n_f64(1.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t v = vld1q_f64(x + i);
        const float64x2_t num = vmulq_f64(cv, v);
        const float64x2_t den = vaddq_f64(one, vmulq_f64(v, v));
        vst1q_f64(out + i, vdivq_f64(num, den));
    }
    for (; i < n; ++i) {
        const double v = x[i];
        out[i] = c * v / (1.0 + v * v);
    }
}

void matvec(const double* a, const double* x, double* y, std::size_t d) {
    for (std::size_t i = 0; i < d; ++i) {
        const double* row = a + i * d;
        float64x2_t acc = vdupq_n_f64(0.0);
        std::size_t j = 0;
        for (; j + 2 <= d; j += 2)
            acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(row + j), vld1q_f64(x + j)));
        double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
        for (; j < d; ++j) s += row[j] * x[j];
        y[i] = s;
    }
}

double max_abs(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vabsq_f64(vld1q_f64(x + i)));
    double m = std::max(vgetq_lane_f64(acc, 0), vgetq_lane_f64(acc, 1));
    for (; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

bool all_finite(const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

}  // namespace

namespace detail {
const Table neon_table = {
    axpy, scal, dot, cubic_drift, bounded_rational, matvec, max_abs, all_finite, "neon"};
}

}  // namespace tamex::kernels

#endif  // aarch64
