#pragma once

#include <cstddef>
#include <string>

namespace tamex::kernels {

// Instruction sets the vector kernels are built for. `scalar` is the
// reference implementation; the SIMD variants must agree with it
// (bitwise for elementwise ops, to a few ulps for reductions) and are
// selected at runtime based on what the CPU supports.
enum class Isa { scalar, avx2, neon };

struct Table {
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // x *= a
    void (*scal)(double a, double* x, std::size_t n);
    // sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // out = x - x^3, componentwise
    void (*cubic_drift)(const double* x, double* out, std::size_t n);
    // out = c * x / (1 + x^2), componentwise
    void (*bounded_rational)(double c, const double* x, double* out, std::size_t n);
    // y = a * x for row-major d x d matrix a
    void (*matvec)(const double* a, const double* x, double* y, std::size_t d);
    double (*max_abs)(const double* x, std::size_t n);
    bool (*all_finite)(const double* x, std::size_t n);
    const char* name;
};

bool supported(Isa isa);

// Table for an explicit ISA; throws invalid_input_error when the CPU
// (or the build) lacks it.
const Table& table(Isa isa);

// Active table, auto-detected on first use (best supported ISA).
const Table& active();
Isa active_isa();

// Force a particular ISA (e.g. for equivalence testing or the CLI
// --kernels flag); throws when unsupported.
void select(Isa isa);

std::string to_string(Isa isa);

}  // namespace tamex::kernels
