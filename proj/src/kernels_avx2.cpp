// AVX2 kernel variants. This file is compiled with -mavx2; callers must
// verify CPU support (kernels::supported) before routing through this table.
// Elementwise kernels use plain mul/add (no FMA) so each lane matches the
// scalar reference bit for bit; reductions use a lane-tree order and are
// equivalence-tested against scalar to a relative tolerance instead.

#if defined(__x86_64__) || defined(_M_X64)

#include "tamex/kernels.hpp"

#include "kernels_tables.hpp"

#include <immintrin.h>

#include <cmath>

namespace tamex::kernels {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s2 = _mm_add_pd(lo, hi);
    const __m128d s1 = _mm_add_sd(s2, _mm_unpackhi_pd(s2, s2));
    return _mm_cvtsd_f64(s1);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, xv)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void cubic_drift(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d v3 = _mm256_mul_pd(_mm256_mul_pd(v, v), v);
        _mm256_storeu_pd(out + i, _mm256_sub_pd(v, v3));
    }
    for (; i < n; ++i) {
        const double v = x[i];
        out[i] = v - v * v * v;
    }
}

void bounded_rational(double c, const double* x, double* out, std::size_t n) {
    const __m256d cv = _mm256_set1_pd(c);
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d num = _mm256_mul_pd(cv, v);
        const __m256d den = _mm256_add_pd(one, _mm256_mul_pd(v, v));
        _mm256_storeu_pd(out + i, _mm256_div_pd(num, den));
    }
    for (; i < n; ++i) {
        const double v = x[i];
        out[i] = c * v / (1.0 + v * v);
    }
}

void matvec(const double* a, const double* x, double* y, std::size_t d) {
    for (std::size_t i = 0; i < d; ++i) {
        const double* row = a + i * d;
        __m256d acc = _mm256_setzero_pd();
        std::size_t j = 0;
        for (; j + 4 <= d; j += 4)
            acc = _mm256_add_pd(acc,
                                _mm256_mul_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(x + j)));
        double s = hsum(acc);
        for (; j < d; ++j) s += row[j] * x[j];
        y[i] = s;
    }
}

double max_abs(const double* x, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_max_pd(acc, _mm256_andnot_pd(sign_mask, _mm256_loadu_pd(x + i)));
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d m2 = _mm_max_pd(lo, hi);
    double m = _mm_cvtsd_f64(_mm_max_sd(m2, _mm_unpackhi_pd(m2, m2)));
    for (; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

bool all_finite(const double* x, std::size_t n) {
    // x - x == 0 exactly when x is neither inf nor NaN.
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d eq = _mm256_cmp_pd(_mm256_sub_pd(v, v), zero, _CMP_EQ_OQ);
        if (_mm256_movemask_pd(eq) != 0xF) return false;
    }
    for (; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

}  // namespace

namespace detail {
const Table avx2_table = {
    axpy, scal, dot, cubic_drift, bounded_rational, matvec, max_abs, all_finite, "avx2"};
}

}  // namespace tamex::kernels

#endif  // x86_64
