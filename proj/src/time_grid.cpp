#include "fbsde/time_grid.hpp"

#include "fbsde/error.hpp"

#include <cmath>

namespace fbsde {

TimeGrid::TimeGrid(double T, int steps) : T_(T), M_(steps) {
    require(T > 0.0 && std::isfinite(T), "path_engine", "time grid horizon must be positive");
    require(steps >= 1, "path_engine", "time grid needs at least one step");
    dt_ = T / steps;
}

int TimeGrid::index_of(double t) const {
    const double pos = t / dt_;
    const long i = std::lround(pos);
    if (i < 0 || i > M_ || std::abs(time(static_cast<int>(i)) - t) > 1e-9 * T_)
        throw InvalidArgument("path_engine", "time " + std::to_string(t) + " is not a grid node");
    return static_cast<int>(i);
}

}  // namespace fbsde
