#pragma once

#include <cstddef>

namespace fbsde {

/// Uniform grid 0 = t_0 < ... < t_M = T.
class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(double T, int steps);

    double horizon() const { return T_; }
    int steps() const { return M_; }
    double dt() const { return dt_; }
    /// t_i = i * dt, except t_M which is exactly T.
    double time(int i) const { return i == M_ ? T_ : i * dt_; }
    /// Index i with |t_i - t| <= 1e-9 T; throws if t is not a node.
    int index_of(double t) const;

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) { return a.T_ == b.T_ && a.M_ == b.M_; }

private:
    double T_ = 1.0;
    int M_ = 1;
    double dt_ = 1.0;
};

}  // namespace fbsde
