#pragma once

#include "fbsde/bsde.hpp"
#include "fbsde/model.hpp"
#include "fbsde/time_grid.hpp"

#include <vector>

namespace fbsde {

/// Nodes x_j = x_min + j dx, j = 0..J+1, with J interior nodes.
struct SpaceGrid {
    double x_min = -6.0;
    double x_max = 6.0;
    int J = 400;

    void validate() const;
    double dx() const { return (x_max - x_min) / (J + 1); }
    double node(int j) const { return j == J + 1 ? x_max : x_min + j * dx(); }
};

struct PdeSolution {
    SpaceGrid grid;
    TimeGrid time;
    Eigen::MatrixXd values;  // (M+1) x (J+2)

    /// Linear interpolation in x at time node `step`.
    double value(int step, double x) const;
};

/// Backward IMEX scheme for
///   u_t + sigma^2 u_xx / 2 + u_x (b + sigma g)(t, x, u, sigma u_x) + f(t, x, u, sigma u_x) = 0,
/// u(T, .) = h. Diffusion implicit, drift and f explicit, lateral nodes by
/// linear extrapolation. m = n = d = 1 only.
PdeSolution solve_semilinear_pde(const CoefficientSet& coeffs, const SpaceGrid& sgrid, const TimeGrid& tgrid);

struct FieldComparison {
    double sup = 0.0;
    double rms = 0.0;
    std::size_t points = 0;
    double worst_x = 0.0;
    double worst_t = 0.0;
};

/// Differences u_pde - u_mc at the PDE nodes inside [lo, hi] at each of
/// `times` (which must be nodes of both time grids).
FieldComparison compare_field(const PdeSolution& pde, const DecouplingField& field, double lo, double hi,
                              const std::vector<double>& times);

}  // namespace fbsde
