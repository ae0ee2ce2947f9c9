#include "tamex/kernels.hpp"

#include <atomic>

#include "kernels_tables.hpp"
#include "tamex/errors.hpp"

namespace tamex::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa detect_best() {
#if defined(__aarch64__)
    return Isa::neon;
#else
    return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
#endif
}

std::atomic<const Table*> g_active{nullptr};

}  // namespace

bool supported(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2: return cpu_has_avx2();
        case Isa::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const Table& table(Isa isa) {
    if (!supported(isa))
        throw invalid_input_error("kernels: ISA not supported on this machine: " + to_string(isa));
    switch (isa) {
        case Isa::scalar: return detail::scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
        case Isa::avx2: return detail::avx2_table;
#endif
#if defined(__aarch64__)
        case Isa::neon: return detail::neon_table;
#endif
        default: return detail::scalar_table;
    }
}

const Table& active() {
    const Table* t = g_active.load(std::memory_order_acquire);
    if (!t) {
        t = &table(detect_best());
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

Isa active_isa() {
    const char* name = active().name;
    if (name == std::string("avx2")) return Isa::avx2;
    if (name == std::string("neon")) return Isa::neon;
    return Isa::scalar;
}

void select(Isa isa) {
    g_active.store(&table(isa), std::memory_order_release);
}

std::string to_string(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "?";
}

}  // namespace tamex::kernels
