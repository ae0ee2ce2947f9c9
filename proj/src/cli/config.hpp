#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tamex/mlmc.hpp"

namespace tamex::cli {

// One experiment = one config file. Sections and keys are fixed; unknown
// keys are rejected with the offending line number so a typo can never
// silently change the science.
struct ExperimentConfig {
    CubicBenchmark problem;
    std::vector<SchemeKind> schemes;
    std::vector<std::string> estimators;  // trad | mlmcl0 | mlmc | mlmcsr
    SchemeKind reference = SchemeKind::exp_tamed;
    TamingSpec taming;
    LevelSpec levels;
    std::uint64_t master_seed = 1;
    double dt_max = 0.0;  // 0 = no cap
    std::string output_dir = "out";
};

// Parses and validates; applies the dt_max cap by raising n0 (the finest
// level is kept fixed). Throws config_error with "<path>:<line>: ..."
// messages.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& path_for_errors);

SchemeKind scheme_from_string(const std::string& s);  // throws config_error

}  // namespace tamex::cli
