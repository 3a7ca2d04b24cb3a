#include "fbsde/noise.hpp"

#include "fbsde/error.hpp"
#include "fbsde/parallel.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace fbsde {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53;
constexpr std::uint32_t kMul1 = 0xCD9E8D57;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

/// 53-bit uniform in (0, 1].
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

double standard_normal(std::uint64_t seed, std::uint64_t path, std::uint32_t step, std::uint32_t channel) {
    // Channels 2k and 2k+1 share one Box-Muller pair.
    const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(path),
                                              static_cast<std::uint32_t>(path >> 32), step, channel >> 1};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                              static_cast<std::uint32_t>(seed >> 32)};
    const auto r = philox4x32(ctr, key);
    const double u1 = to_unit(r[0], r[1]);
    const double u2 = to_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (channel & 1u) ? radius * std::sin(angle) : radius * std::cos(angle);
}

NoiseBlock sample_noise(const TimeGrid& grid, std::size_t n_paths, int channels, std::uint64_t seed) {
    require(n_paths >= 1, "path_engine", "n_paths must be >= 1");
    require(channels >= 1 && channels <= kMaxDim, "path_engine", "noise channel count out of range");
    const std::size_t M = static_cast<std::size_t>(grid.steps());
    const std::size_t limit = std::numeric_limits<std::size_t>::max() / sizeof(double);
    if (n_paths > limit / M / static_cast<std::size_t>(channels) ||
        n_paths > static_cast<std::size_t>(std::numeric_limits<Eigen::Index>::max()) / channels)
        throw InvalidArgument("path_engine", "noise block n_paths*M*n overflows addressable size");

    NoiseBlock nb;
    nb.seed = seed;
    nb.n_paths = n_paths;
    nb.channels = channels;
    nb.grid = grid;
    nb.increments.assign(M, Slice(static_cast<Eigen::Index>(n_paths), channels));
    const double scale = std::sqrt(grid.dt());
    for_each_block(n_paths, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t p = begin; p < end; ++p)
                for (int j = 0; j < channels; ++j)
                    nb.increments[i](static_cast<Eigen::Index>(p), j) =
                        scale * standard_normal(seed, p, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
    });
    return nb;
}

}  // namespace fbsde
