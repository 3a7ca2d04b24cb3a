#include "fbsde/pde.hpp"

#include "fbsde/error.hpp"

#include <algorithm>
#include <cmath>

namespace fbsde {

namespace {
constexpr const char* kModule = "pde_oracle";

Vector scalar(double v) { return Vector::Constant(1, v); }
Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }
}  // namespace

void SpaceGrid::validate() const {
    require(std::isfinite(x_min) && std::isfinite(x_max) && x_min < x_max, kModule, "space grid needs x_min < x_max");
    require(J >= 16, kModule, "space grid needs J >= 16 interior nodes");
}

double PdeSolution::value(int step, double x) const {
    require(step >= 0 && step < values.rows(), kModule, "time index outside the PDE solution");
    const double dx = grid.dx();
    double s = (x - grid.x_min) / dx;
    s = std::clamp(s, 0.0, static_cast<double>(grid.J + 1));
    const int j = std::min(static_cast<int>(std::floor(s)), grid.J);
    const double w = s - j;
    return (1.0 - w) * values(step, j) + w * values(step, j + 1);
}

PdeSolution solve_semilinear_pde(const CoefficientSet& coeffs, const SpaceGrid& sgrid, const TimeGrid& tgrid) {
    coeffs.validate();
    sgrid.validate();
    require(coeffs.dims == Dimensions{1, 1, 1}, kModule, "the PDE oracle needs m = n = d = 1");
    require(std::abs(tgrid.horizon() - coeffs.T) <= 1e-12 * coeffs.T, kModule,
            "time grid horizon differs from the coefficient horizon");

    const int J = sgrid.J;
    const int M = tgrid.steps();
    const double dx = sgrid.dx();
    const double dt = tgrid.dt();

    PdeSolution sol;
    sol.grid = sgrid;
    sol.time = tgrid;
    sol.values.resize(M + 1, J + 2);
    for (int j = 0; j <= J + 1; ++j) {
        const Vector hv = coeffs.h(scalar(sgrid.node(j)));
        sol.values(M, j) = hv(0);
    }

    Eigen::VectorXd next(J + 2), rhs(J), lower(J), diag(J), upper(J);
    for (int i = M - 1; i >= 0; --i) {
        const double t = tgrid.time(i);
        next = sol.values.row(i + 1).transpose();
        for (int k = 0; k < J; ++k) {
            const int j = k + 1;
            const double x = sgrid.node(j);
            const Vector xv = scalar(x);
            const double s = coeffs.sigma(t, xv)(0, 0);
            const double s2 = s * s;
            require(s2 > 0.0, kModule, "degenerate diffusion at x = " + std::to_string(x));
            const double u = next(j);
            const double central = (next(j + 1) - next(j - 1)) / (2.0 * dx);
            const Vector uv = scalar(u);
            const Matrix zv = scalar_matrix(central * s);
            const double a = coeffs.b(t, xv)(0) + s * coeffs.g(t, xv, uv, zv)(0);
            const double f = coeffs.f(t, xv, uv, zv)(0);
            if (!std::isfinite(a) || !std::isfinite(f))
                throw NumericalError(kModule, "non-finite coefficient at x = " + std::to_string(x) + ", step " +
                                                  std::to_string(i));
            if (std::abs(a) * dt / dx > 1.0)
                throw NumericalError(kModule, "explicit drift violates |a| dt/dx <= 1 at x = " + std::to_string(x) +
                                                  ", step " + std::to_string(i) + "; refine the time grid");
            double grad = central;
            if (std::abs(a) * dx > s2) grad = a > 0.0 ? (next(j + 1) - u) / dx : (u - next(j - 1)) / dx;
            const double r = 0.5 * s2 * dt / (dx * dx);
            // Increment form: solve for u_i - u_{i+1}, so constants are kept exactly.
            const double second = k == 0 || k == J - 1 ? 0.0 : next(j - 1) - 2.0 * u + next(j + 1);
            rhs(k) = r * second + dt * (a * grad + f);

            lower(k) = -r;
            diag(k) = 1.0 + 2.0 * r;
            upper(k) = -r;
        }
        // Linear extrapolation at both ends makes the second difference at the
        // first and last interior node vanish.
        diag(0) = 1.0;
        upper(0) = 0.0;
        diag(J - 1) = 1.0;
        lower(J - 1) = 0.0;

        // Thomas algorithm.
        for (int k = 1; k < J; ++k) {
            const double w = lower(k) / diag(k - 1);
            diag(k) -= w * upper(k - 1);
            rhs(k) -= w * rhs(k - 1);
        }
        Eigen::VectorXd u(J);
        u(J - 1) = rhs(J - 1) / diag(J - 1);
        for (int k = J - 2; k >= 0; --k) u(k) = (rhs(k) - upper(k) * u(k + 1)) / diag(k);
        u += next.segment(1, J);

        sol.values.row(i).segment(1, J) = u.transpose();
        sol.values(i, 0) = 2.0 * u(0) - u(1);
        sol.values(i, J + 1) = 2.0 * u(J - 1) - u(J - 2);
        if (!sol.values.row(i).allFinite())
            throw NumericalError(kModule, "non-finite PDE values at step " + std::to_string(i));
    }
    return sol;
}

FieldComparison compare_field(const PdeSolution& pde, const DecouplingField& field, double lo, double hi,
                              const std::vector<double>& times) {
    require(std::abs(pde.time.horizon() - field.grid.horizon()) <= 1e-12 * pde.time.horizon(), kModule,
            "PDE solution and field have different horizons");
    require(field.dims == Dimensions{1, 1, 1}, kModule, "field comparison needs a scalar 1-D field");
    require(lo <= hi, kModule, "comparison region has lo > hi");
    require(!times.empty(), kModule, "comparison needs at least one time");
    FieldComparison out;
    double sq = 0.0;
    for (double t : times) {
        const int ip = pde.time.index_of(t);
        const int iff = field.grid.index_of(t);
        for (int j = 0; j <= pde.grid.J + 1; ++j) {
            const double x = pde.grid.node(j);
            if (x < lo || x > hi) continue;
            const double diff = pde.values(ip, j) - field.value(iff, scalar(x))(0);
            sq += diff * diff;
            ++out.points;
            if (std::abs(diff) > out.sup) {
                out.sup = std::abs(diff);
                out.worst_x = x;
                out.worst_t = t;
            }
        }
    }
    if (out.points == 0)
        throw InvalidArgument(kModule, "comparison region does not meet the PDE grid (disjoint domains)");
    out.rms = std::sqrt(sq / static_cast<double>(out.points));
    return out;
}

}  // namespace fbsde
