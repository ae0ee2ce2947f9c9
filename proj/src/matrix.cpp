#include "tamex/matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "tamex/errors.hpp"
#include "tamex/kernels.hpp"

namespace tamex {

SquareMatrix::SquareMatrix(int d) {
    if (d < 1) throw invalid_input_error("SquareMatrix: dim must be >= 1");
    dim = d;
    entries.assign(static_cast<std::size_t>(d) * d, 0.0);
}

SquareMatrix SquareMatrix::identity(int d) {
    SquareMatrix m(d);
    for (int i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
}

bool is_finite(const SquareMatrix& m) {
    return kernels::active().all_finite(m.data(), m.entries.size());
}

double frobenius_norm(const SquareMatrix& m) {
    return std::sqrt(kernels::active().dot(m.data(), m.data(), m.entries.size()));
}

double one_norm(const SquareMatrix& m) {
    double best = 0.0;
    for (int j = 0; j < m.dim; ++j) {
        double s = 0.0;
        for (int i = 0; i < m.dim; ++i) s += std::fabs(m(i, j));
        best = std::max(best, s);
    }
    return best;
}

static void require_same_dim(const SquareMatrix& a, const SquareMatrix& b) {
    if (a.dim != b.dim) throw invalid_input_error("matrix dimension mismatch");
}

SquareMatrix operator+(const SquareMatrix& a, const SquareMatrix& b) {
    require_same_dim(a, b);
    SquareMatrix c = a;
    kernels::active().axpy(1.0, b.data(), c.data(), c.entries.size());
    return c;
}

SquareMatrix operator-(const SquareMatrix& a, const SquareMatrix& b) {
    require_same_dim(a, b);
    SquareMatrix c = a;
    kernels::active().axpy(-1.0, b.data(), c.data(), c.entries.size());
    return c;
}

SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b) {
    require_same_dim(a, b);
    const int d = a.dim;
    const auto& K = kernels::active();
    SquareMatrix c(d);
    // ikj order: row i of c accumulates a(i,k) * row k of b.
    for (int i = 0; i < d; ++i) {
        double* crow = c.data() + static_cast<std::size_t>(i) * d;
        for (int k = 0; k < d; ++k) {
            const double aik = a(i, k);
            if (aik != 0.0)
                K.axpy(aik, b.data() + static_cast<std::size_t>(k) * d, crow, d);
        }
    }
    return c;
}

SquareMatrix operator*(double c, const SquareMatrix& m) {
    SquareMatrix r = m;
    kernels::active().scal(c, r.data(), r.entries.size());
    return r;
}

void add_scaled(SquareMatrix& acc, double c, const SquareMatrix& m) {
    require_same_dim(acc, m);
    kernels::active().axpy(c, m.data(), acc.data(), acc.entries.size());
}

namespace detail {

SquareMatrix lu_solve(SquareMatrix a, const SquareMatrix& b) {
    require_same_dim(a, b);
    const int d = a.dim;
    SquareMatrix x = b;
    std::vector<int> piv(d);
    for (int i = 0; i < d; ++i) piv[i] = i;

    for (int k = 0; k < d; ++k) {
        int p = k;
        double best = std::fabs(a(k, k));
        for (int i = k + 1; i < d; ++i) {
            const double v = std::fabs(a(i, k));
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (best == 0.0) throw invalid_input_error("lu_solve: singular matrix");
        if (p != k) {
            for (int j = 0; j < d; ++j) std::swap(a(k, j), a(p, j));
            for (int j = 0; j < d; ++j) std::swap(x(k, j), x(p, j));
        }
        const double inv = 1.0 / a(k, k);
        for (int i = k + 1; i < d; ++i) {
            const double f = a(i, k) * inv;
            a(i, k) = f;
            if (f != 0.0) {
                for (int j = k + 1; j < d; ++j) a(i, j) -= f * a(k, j);
                for (int j = 0; j < d; ++j) x(i, j) -= f * x(k, j);
            }
        }
    }
    // back substitution, all RHS columns at once
    for (int i = d - 1; i >= 0; --i) {
        const double inv = 1.0 / a(i, i);
        for (int j = 0; j < d; ++j) {
            double s = x(i, j);
            for (int k = i + 1; k < d; ++k) s -= a(i, k) * x(k, j);
            x(i, j) = s * inv;
        }
    }
    return x;
}

namespace {
bool g_corrupt_pade = false;
}

void corrupt_pade_for_testing(bool on) { g_corrupt_pade = on; }

}  // namespace detail

SquareMatrix mat_exp(const SquareMatrix& m) {
    if (m.dim < 1) throw invalid_input_error("mat_exp: empty matrix");
    if (!is_finite(m)) throw invalid_input_error("mat_exp: non-finite entries");

    // Degree-13 Pade coefficients (Higham 2005).
    double b[14] = {64764752532480000.0,
                    32382376266240000.0,
                    7771770303897600.0,
                    1187353796428800.0,
                    129060195264000.0,
                    10559470521600.0,
                    670442572800.0,
                    33522128640.0,
                    1323241920.0,
                    40840800.0,
                    960960.0,
                    16380.0,
                    182.0,
                    1.0};
    if (detail::g_corrupt_pade) b[0] *= 1.0 + 1e-6;

    constexpr double theta13 = 5.371920351148152;
    const int d = m.dim;

    const double nrm = one_norm(m);
    int s = 0;
    if (nrm > theta13) s = static_cast<int>(std::ceil(std::log2(nrm / theta13)));

    SquareMatrix a = std::ldexp(1.0, -s) * m;
    const SquareMatrix a2 = a * a;
    const SquareMatrix a4 = a2 * a2;
    const SquareMatrix a6 = a2 * a4;
    const SquareMatrix eye = SquareMatrix::identity(d);

    // U = a * (a6*(b13 a6 + b11 a4 + b9 a2) + b7 a6 + b5 a4 + b3 a2 + b1 I)
    SquareMatrix w(d);
    add_scaled(w, b[13], a6);
    add_scaled(w, b[11], a4);
    add_scaled(w, b[9], a2);
    SquareMatrix u = a6 * w;
    add_scaled(u, b[7], a6);
    add_scaled(u, b[5], a4);
    add_scaled(u, b[3], a2);
    add_scaled(u, b[1], eye);
    u = a * u;

    // V = a6*(b12 a6 + b10 a4 + b8 a2) + b6 a6 + b4 a4 + b2 a2 + b0 I
    SquareMatrix z(d);
    add_scaled(z, b[12], a6);
    add_scaled(z, b[10], a4);
    add_scaled(z, b[8], a2);
    SquareMatrix v = a6 * z;
    add_scaled(v, b[6], a6);
    add_scaled(v, b[4], a4);
    add_scaled(v, b[2], a2);
    add_scaled(v, b[0], eye);

    SquareMatrix r = detail::lu_solve(v - u, v + u);
    for (int i = 0; i < s; ++i) r = r * r;
    return r;
}

}  // namespace tamex
