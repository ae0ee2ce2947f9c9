#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tamex {

// Bad arguments or domain objects violating a documented precondition.
class invalid_input_error : public std::invalid_argument {
public:
    explicit invalid_input_error(const std::string& what) : std::invalid_argument(what) {}
};

// A Monte Carlo estimate could not be formed (e.g. every sample diverged).
class estimation_error : public std::runtime_error {
public:
    estimation_error(const std::string& what, std::int64_t discarded)
        : std::runtime_error(what), n_discarded(discarded) {}
    std::int64_t n_discarded = 0;
};

// Rate fit requested with fewer than two usable points.
class fit_error : public std::runtime_error {
public:
    explicit fit_error(const std::string& what) : std::runtime_error(what) {}
};

// Experiment config file problems; message carries the offending line number.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tamex
