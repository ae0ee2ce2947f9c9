// Reference kernels. Everything else in the library is defined against
// the behavior of these loops; SIMD variants are tested against them.

#include "tamex/kernels.hpp"

#include "kernels_tables.hpp"

#include <cmath>

namespace tamex::kernels {

namespace {

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void cubic_drift(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x[i];
        out[i] = v - v * v * v;
    }
}

void bounded_rational(double c, const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x[i];
        out[i] = c * v / (1.0 + v * v);
    }
}

void matvec(const double* a, const double* x, double* y, std::size_t d) {
    for (std::size_t i = 0; i < d; ++i) {
        const double* row = a + i * d;
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += row[j] * x[j];
        y[i] = s;
    }
}

double max_abs(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

bool all_finite(const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

}  // namespace

namespace detail {
const Table scalar_table = {
    axpy, scal, dot, cubic_drift, bounded_rational, matvec, max_abs, all_finite, "scalar"};
}

}  // namespace tamex::kernels
