#pragma once

#include "fbsde/noise.hpp"
#include "fbsde/types.hpp"

#include <string>

namespace fbsde {

/// Discrete stochastic exponential of sum_i g_i . dW_i, per path.
struct ExponentialProcess {
    Eigen::MatrixXd log_values;  // n_paths x (M+1)
    Eigen::MatrixXd values;      // exp(log_values)
    std::string generator_tag;
};

/// log E_{i+1} = log E_i + g_i . dW_i - |g_i|^2 dt / 2, with g_values holding
/// M slices of n_paths x n.
ExponentialProcess stochastic_exponential(const SliceSeries& g_values, const NoiseBlock& noise,
                                          const TimeGrid& grid, std::string generator_tag = "g");

/// Increments offset by -sign * g_i dt. The base increments are kept, so
/// applying the opposite sign returns them bit for bit.
struct ShiftedNoise {
    SliceSeries base;
    SliceSeries offset;  // accumulated drift offset per step

    /// base + offset, or the base itself where the offset is exactly zero.
    SliceSeries increments() const;
};

ShiftedNoise shift_noise(const NoiseBlock& noise, const SliceSeries& g_values, const TimeGrid& grid, int sign);
ShiftedNoise shift_noise(const ShiftedNoise& shifted, const SliceSeries& g_values, const TimeGrid& grid, int sign);

struct MartingaleReport {
    double terminal_mean = 1.0;
    double stderr = 0.0;
    double max_log = 0.0;
    bool pass = true;
};

/// pass iff |mean(E_T) - 1| <= 3 stderr and max log E <= 20.
MartingaleReport martingale_diagnostic(const ExponentialProcess& ep);

}  // namespace fbsde
