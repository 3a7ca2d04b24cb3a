#pragma once

#include "fbsde/time_grid.hpp"
#include "fbsde/types.hpp"

#include <array>
#include <cstdint>

namespace fbsde {

/// Philox-4x32-10 counter-based generator (Salmon et al., SC'11). A pure
/// function of (key, counter); no state is carried between calls.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Standard normal variate for entry (path, step, channel) under `seed`.
double standard_normal(std::uint64_t seed, std::uint64_t path, std::uint32_t step, std::uint32_t channel);

/// Brownian increments on a grid. increments[i](p, j) ~ N(0, dt) for step i,
/// path p, channel j, and is a pure function of (seed, p, i, j).
struct NoiseBlock {
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    int channels = 0;
    TimeGrid grid;
    SliceSeries increments;  // M slices of n_paths x channels
};

NoiseBlock sample_noise(const TimeGrid& grid, std::size_t n_paths, int channels, std::uint64_t seed);

}  // namespace fbsde
