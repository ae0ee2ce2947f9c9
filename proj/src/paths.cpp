#include "tamex/paths.hpp"

#include <cmath>

#include "tamex/errors.hpp"
#include "tamex/rng.hpp"

namespace tamex {

std::uint64_t SeedSpec::stream_key() const {
    std::uint64_t h = master_seed;
    h = rng::splitmix64(h) ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(
                                  static_cast<std::uint32_t>(level)) + 1));
    h = rng::splitmix64(h) ^ (0xC2B2AE3D27D4EB4FULL *
                              (static_cast<std::uint64_t>(sample_index) + 1));
    return rng::splitmix64(h);
}

IncrementGrid generate_increments(const SeedSpec& seed, int m, int n_steps, double dt) {
    if (m < 0) throw invalid_input_error("generate_increments: m must be >= 0");
    if (n_steps < 1) throw invalid_input_error("generate_increments: n_steps must be >= 1");
    if (!(dt > 0.0)) throw invalid_input_error("generate_increments: dt must be > 0");

    IncrementGrid g;
    g.m = m;
    g.n_steps = n_steps;
    g.dt = dt;
    g.values.resize(static_cast<std::size_t>(m) * n_steps);

    rng::GaussianStream z(seed.stream_key());
    const double sqrt_dt = std::sqrt(dt);
    // time-major draw order, so the stream layout is independent of m-loop
    // placement in callers
    for (int n = 0; n < n_steps; ++n)
        for (int i = 0; i < m; ++i) g.at(i, n) = sqrt_dt * z.next();
    return g;
}

namespace {

// Pairwise block sum. The half-split tree makes nested power-of-two
// coarsenings reproduce a direct one bit for bit:
// coarsen(coarsen(g,2),2) == coarsen(g,4).
double tree_sum(const double* v, int n) {
    if (n == 1) return v[0];
    if (n == 2) return v[0] + v[1];
    const int h = n / 2;
    return tree_sum(v, h) + tree_sum(v + h, n - h);
}

}  // namespace

IncrementGrid coarsen(const IncrementGrid& fine, int factor) {
    if (factor < 2) throw invalid_input_error("coarsen: factor must be >= 2");
    if (fine.n_steps % factor != 0)
        throw invalid_input_error("coarsen: factor must divide n_steps");

    IncrementGrid c;
    c.m = fine.m;
    c.n_steps = fine.n_steps / factor;
    c.dt = fine.dt * factor;
    c.values.resize(static_cast<std::size_t>(c.m) * c.n_steps);
    for (int i = 0; i < c.m; ++i) {
        const double* row = fine.values.data() + static_cast<std::size_t>(i) * fine.n_steps;
        for (int k = 0; k < c.n_steps; ++k) c.at(i, k) = tree_sum(row + k * factor, factor);
    }
    return c;
}

}  // namespace tamex
