#pragma once

#include <optional>
#include <string>

#include "cli/config.hpp"

namespace tamex::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunOptions {
    int threads = 0;  // 0 = hardware default
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override;
    std::string kernels = "auto";  // auto | scalar | avx2 | neon
    int repeats = 1;               // compare: timing repetitions
    std::string inject_fault;      // selftest hook, e.g. "pade"
};

// Exit codes: 0 success, 1 usage/config error, 2 completed with
// unreliable estimates.
int run_converge(const ExperimentConfig& cfg, const RunOptions& opt);
int run_compare(const ExperimentConfig& cfg, const RunOptions& opt);
int run_moments(const ExperimentConfig& cfg, const RunOptions& opt);
int run_selftest(const RunOptions& opt);

// Applies thread/kernel options; throws config_error for bad kernel names.
void apply_run_options(const RunOptions& opt);

}  // namespace tamex::cli
