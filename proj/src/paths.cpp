#include "fbsde/paths.hpp"

#include "fbsde/error.hpp"
#include "fbsde/parallel.hpp"

#include <cmath>

namespace fbsde {

namespace {
constexpr const char* kModule = "path_engine";
}

Slice replicate_initial(const Vector& x0, std::size_t n_paths) {
    Slice s(static_cast<Eigen::Index>(n_paths), x0.size());
    s.rowwise() = Eigen::RowVectorXd(x0.transpose());
    return s;
}

SliceSeries euler_maruyama(const StepDriftFn& drift, const DiffusionFn& sigma, const Slice& initial,
                           const SliceSeries& increments, const TimeGrid& grid) {
    const int M = grid.steps();
    require(static_cast<int>(increments.size()) == M, kModule, "increment array does not match the grid");
    const Eigen::Index n_paths = initial.rows();
    const int m = static_cast<int>(initial.cols());
    const int n = M > 0 ? static_cast<int>(increments.front().cols()) : 0;
    for (const auto& inc : increments)
        require(inc.rows() == n_paths && inc.cols() == n, kModule, "increment slice has the wrong shape");

    SliceSeries states(M + 1, Slice(n_paths, m));
    states[0] = initial;
    const double dt = grid.dt();

    for_each_block(static_cast<std::size_t>(n_paths), [&](std::size_t, std::size_t begin, std::size_t end) {
        Vector x(m), dw(n);
        for (std::size_t pp = begin; pp < end; ++pp) {
            const auto p = static_cast<Eigen::Index>(pp);
            x = initial.row(p).transpose();
            for (int i = 0; i < M; ++i) {
                const double t = grid.time(i);
                dw = increments[i].row(p).transpose();
                const Vector a = drift(i, t, x);
                const Matrix s = sigma(t, x);
                if (a.size() != m || s.rows() != m || s.cols() != n)
                    throw InvalidArgument(kModule, "drift/diffusion dimensions inconsistent with state and noise");
                x += a * dt + s * dw;
                if (!x.allFinite())
                    throw NumericalError(kModule, "non-finite state on path " + std::to_string(pp) +
                                                      " at step " + std::to_string(i + 1));
                states[i + 1].row(p) = x.transpose();
            }
        }
    });
    return states;
}

SliceSeries euler_maruyama(const DriftFn& drift, const DiffusionFn& sigma, const Slice& initial,
                           const SliceSeries& increments, const TimeGrid& grid) {
    return euler_maruyama([&drift](int, double t, const Vector& x) { return drift(t, x); }, sigma, initial,
                          increments, grid);
}

PathEnsemble simulate_sde(const DriftFn& drift, const DiffusionFn& sigma, const Slice& initial,
                          std::shared_ptr<const NoiseBlock> noise, std::string drift_tag) {
    require(noise != nullptr, kModule, "simulate_sde needs a noise block");
    require(static_cast<std::size_t>(initial.rows()) == noise->n_paths, kModule,
            "initial states and noise disagree on n_paths");
    PathEnsemble out;
    out.grid = noise->grid;
    out.states = euler_maruyama(drift, sigma, initial, noise->increments, noise->grid);
    out.noise = std::move(noise);
    out.drift_tag = std::move(drift_tag);
    return out;
}

PathEnsemble simulate_sde(const DriftFn& drift, const DiffusionFn& sigma, const Vector& x0,
                          std::shared_ptr<const NoiseBlock> noise, std::string drift_tag) {
    require(noise != nullptr, kModule, "simulate_sde needs a noise block");
    return simulate_sde(drift, sigma, replicate_initial(x0, noise->n_paths), noise, std::move(drift_tag));
}

}  // namespace fbsde
