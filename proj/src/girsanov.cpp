#include "fbsde/girsanov.hpp"

#include "fbsde/error.hpp"
#include "fbsde/parallel.hpp"

#include <cmath>

namespace fbsde {

namespace {
constexpr const char* kModule = "girsanov";

void check_shapes(const SliceSeries& g_values, const SliceSeries& increments, const TimeGrid& grid) {
    require(static_cast<int>(g_values.size()) == grid.steps() && increments.size() == g_values.size(), kModule,
            "g values, noise and grid disagree on the number of steps");
    for (std::size_t i = 0; i < g_values.size(); ++i)
        require(g_values[i].rows() == increments[i].rows() && g_values[i].cols() == increments[i].cols(), kModule,
                "g values and noise increments disagree in shape at step " + std::to_string(i));
}
}  // namespace

ExponentialProcess stochastic_exponential(const SliceSeries& g_values, const NoiseBlock& noise,
                                          const TimeGrid& grid, std::string generator_tag) {
    check_shapes(g_values, noise.increments, grid);
    const int M = grid.steps();
    const auto np = static_cast<Eigen::Index>(noise.n_paths);
    const double dt = grid.dt();
    ExponentialProcess ep;
    ep.generator_tag = std::move(generator_tag);
    ep.log_values.resize(np, M + 1);
    for_each_block(noise.n_paths, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t pp = begin; pp < end; ++pp) {
            const auto p = static_cast<Eigen::Index>(pp);
            double acc = 0.0;
            ep.log_values(p, 0) = 0.0;
            for (int i = 0; i < M; ++i) {
                const auto& g = g_values[static_cast<std::size_t>(i)];
                const auto& dw = noise.increments[static_cast<std::size_t>(i)];
                acc += g.row(p).dot(dw.row(p)) - 0.5 * g.row(p).squaredNorm() * dt;
                if (!(std::abs(acc) <= 700.0))
                    throw NumericalError(kModule, "stochastic exponential overflow on path " + std::to_string(pp) +
                                                      " at step " + std::to_string(i + 1));
                ep.log_values(p, i + 1) = acc;
            }
        }
    });
    ep.values = ep.log_values.array().exp();
    return ep;
}

SliceSeries ShiftedNoise::increments() const {
    SliceSeries out(base.size());
    for (std::size_t i = 0; i < base.size(); ++i)
        out[i] = (offset[i].array() == 0.0).all() ? base[i] : Slice(base[i] + offset[i]);
    return out;
}

ShiftedNoise shift_noise(const ShiftedNoise& shifted, const SliceSeries& g_values, const TimeGrid& grid, int sign) {
    require(sign == 1 || sign == -1, kModule, "shift sign must be +1 or -1");
    check_shapes(g_values, shifted.base, grid);
    ShiftedNoise out{shifted.base, shifted.offset};
    const double dt = grid.dt();
    for (std::size_t i = 0; i < g_values.size(); ++i) {
        // Offsets of opposite sign cancel exactly: (a - c) + c == a for the
        // same floating value c, so the inverse shift restores the base.
        const Slice step = g_values[i] * dt;
        out.offset[i] = sign > 0 ? Slice(out.offset[i] - step) : Slice(out.offset[i] + step);
    }
    return out;
}

ShiftedNoise shift_noise(const NoiseBlock& noise, const SliceSeries& g_values, const TimeGrid& grid, int sign) {
    ShiftedNoise zero{noise.increments, {}};
    for (const auto& s : noise.increments) zero.offset.push_back(Slice::Zero(s.rows(), s.cols()));
    return shift_noise(zero, g_values, grid, sign);
}

MartingaleReport martingale_diagnostic(const ExponentialProcess& ep) {
    MartingaleReport r;
    const auto n = ep.values.rows();
    if (n == 0) return r;
    const Eigen::VectorXd terminal = ep.values.col(ep.values.cols() - 1);
    r.terminal_mean = terminal.mean();
    const double var = n > 1 ? (terminal.array() - r.terminal_mean).square().sum() / static_cast<double>(n - 1) : 0.0;
    r.stderr = std::sqrt(var / static_cast<double>(n));
    r.max_log = ep.log_values.maxCoeff();
    r.pass = std::abs(r.terminal_mean - 1.0) <= 3.0 * r.stderr && r.max_log <= 20.0;
    return r;
}

}  // namespace fbsde
