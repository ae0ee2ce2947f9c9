#pragma once

// Internal: per-ISA kernel tables defined in their own translation units
// (the AVX2 unit is compiled with -mavx2 and must only be entered after a
// runtime CPU check).

#include "tamex/kernels.hpp"

namespace tamex::kernels::detail {

extern const Table scalar_table;

#if defined(__x86_64__) || defined(_M_X64)
extern const Table avx2_table;
#endif

#if defined(__aarch64__)
extern const Table neon_table;
#endif

}  // namespace tamex::kernels::detail
