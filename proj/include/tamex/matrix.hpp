#pragma once

#include <cstddef>
#include <vector>

namespace tamex {

// Dense row-major d x d matrix of doubles.
struct SquareMatrix {
    int dim = 0;
    std::vector<double> entries;

    SquareMatrix() = default;
    explicit SquareMatrix(int d);

    static SquareMatrix identity(int d);

    double& operator()(int i, int j) { return entries[static_cast<std::size_t>(i) * dim + j]; }
    double operator()(int i, int j) const {
        return entries[static_cast<std::size_t>(i) * dim + j];
    }

    const double* data() const { return entries.data(); }
    double* data() { return entries.data(); }
};

bool is_finite(const SquareMatrix& m);
double frobenius_norm(const SquareMatrix& m);
double one_norm(const SquareMatrix& m);  // max column sum

SquareMatrix operator+(const SquareMatrix& a, const SquareMatrix& b);
SquareMatrix operator-(const SquareMatrix& a, const SquareMatrix& b);
SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b);
SquareMatrix operator*(double c, const SquareMatrix& m);

// acc += c * m
void add_scaled(SquareMatrix& acc, double c, const SquareMatrix& m);

// Matrix exponential by scaling-and-squaring with the degree-13 Pade
// approximant. Relative accuracy ~1e-14 for well-conditioned inputs;
// deterministic for identical input. Throws invalid_input_error on
// non-finite entries.
SquareMatrix mat_exp(const SquareMatrix& m);

namespace detail {
// Solve a X = b for the d x d matrix X (LU with partial pivoting).
SquareMatrix lu_solve(SquareMatrix a, const SquareMatrix& b);
// Fault-injection hook for the selftest: perturbs one Pade coefficient so
// the mat_exp oracle check must fail. Not for production paths.
void corrupt_pade_for_testing(bool on);
}  // namespace detail

}  // namespace tamex
