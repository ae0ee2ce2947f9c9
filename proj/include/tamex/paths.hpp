#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tamex {

// Identifies one sample's random stream. The mapping
// (master_seed, level, sample_index) -> stream is fixed, so results never
// depend on worker count or scheduling order.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::int32_t level = 0;  // estimator term tag
    std::int64_t sample_index = 0;

    std::uint64_t stream_key() const;
};

// Seeded Brownian increments for one path: m drivers by n_steps columns,
// entry (i, n) = W^i_{t_{n+1}} - W^i_{t_n} ~ Normal(0, dt).
struct IncrementGrid {
    int m = 0;
    int n_steps = 0;
    double dt = 0.0;
    std::vector<double> values;  // row-major, m rows of n_steps

    double& at(int driver, int step) {
        return values[static_cast<std::size_t>(driver) * n_steps + step];
    }
    double at(int driver, int step) const {
        return values[static_cast<std::size_t>(driver) * n_steps + step];
    }
    std::span<const double> row(int driver) const {
        return {values.data() + static_cast<std::size_t>(driver) * n_steps,
                static_cast<std::size_t>(n_steps)};
    }
};

IncrementGrid generate_increments(const SeedSpec& seed, int m, int n_steps, double dt);

// Sums blocks of `factor` fine increments (left to right) into one coarse
// increment per block; coarse.dt = fine.dt * factor. This is the exact
// coupling the MLMC level differences rely on.
IncrementGrid coarsen(const IncrementGrid& fine, int factor);

}  // namespace tamex
