#include "fbsde/pipeline.hpp"

#include "fbsde/error.hpp"
#include "fbsde/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace fbsde {

namespace {

constexpr const char* kModule = "fbsde_pipeline";

/// Field evaluation that also counts clipped rows.
struct FieldSampler {
    const DecouplingField& field;
    int d, n;

    void at(int step, const Vector& x, Vector& y, Matrix& z, bool& clipped) const {
        y.resize(d);
        clipped = field.u[static_cast<std::size_t>(step)].evaluate(x.data(), y.data());
        double flat[kMaxDim * kMaxDim];
        clipped = field.z[static_cast<std::size_t>(step)].evaluate(x.data(), flat) || clipped;
        z = unflatten(Eigen::Map<const Eigen::RowVectorXd>(flat, d * n), d, n);
    }
};

}  // namespace

SliceSeries coupling_along(const PathEnsemble& paths, const CoefficientSet& coeffs, const DecouplingField& field) {
    const int M = paths.grid.steps();
    const int n = coeffs.dims.n;
    const auto np = static_cast<Eigen::Index>(paths.n_paths());
    const FieldSampler sampler{field, coeffs.dims.d, n};
    SliceSeries out(static_cast<std::size_t>(M), Slice(np, n));
    for_each_block(paths.n_paths(), [&](std::size_t, std::size_t begin, std::size_t end) {
        Vector y;
        Matrix z;
        bool clipped = false;
        for (int i = 0; i < M; ++i) {
            const double t = paths.grid.time(i);
            for (std::size_t pp = begin; pp < end; ++pp) {
                const auto p = static_cast<Eigen::Index>(pp);
                const Vector x = paths.states[static_cast<std::size_t>(i)].row(p).transpose();
                sampler.at(i, x, y, z, clipped);
                out[static_cast<std::size_t>(i)].row(p) = coeffs.g(t, x, y, z).transpose();
            }
        }
    });
    return out;
}

FbsdeSolution solve_fbsde(const CoefficientSet& coeffs_in, const TimeGrid& grid, std::size_t n_paths,
                          std::uint64_t seed, const BasisSpec& basis, const PicardConfig& cfg,
                          const SolveOptions& options) {
    coeffs_in.validate();
    cfg.validate();
    require(n_paths >= 2, kModule, "n_paths must be at least 2");
    require(std::abs(grid.horizon() - coeffs_in.T) <= 1e-12 * coeffs_in.T, kModule,
            "time grid horizon differs from the coefficient horizon");
    const CoefficientSet coeffs =
        cfg.truncation_N ? truncate_coefficients(coeffs_in, *cfg.truncation_N) : coeffs_in;
    PicardConfig inner = cfg;
    inner.truncation_N.reset();

    const int m = coeffs.dims.m, n = coeffs.dims.n, d = coeffs.dims.d;
    auto noise = std::make_shared<const NoiseBlock>(sample_noise(grid, n_paths, n, seed));
    Slice initial = options.initial ? *options.initial : replicate_initial(coeffs.x0, n_paths);
    require(initial.rows() == static_cast<Eigen::Index>(n_paths) && initial.cols() == m, kModule,
            "initial states have the wrong shape");

    FbsdeSolution sol;
    sol.F = simulate_sde(coeffs.b, coeffs.sigma, initial, noise, "b");
    sol.field = solve_decoupled_bsde(sol.F, coeffs, basis, inner);

    // g along F, for the measure-change density.
    sol.g_along_F = coupling_along(sol.F, coeffs, sol.field);
    sol.g_vanishes = std::all_of(sol.g_along_F.begin(), sol.g_along_F.end(),
                                 [](const Slice& s) { return (s.array() == 0.0).all(); });

    if (sol.g_vanishes) {
        sol.X = sol.F;
        sol.X.drift_tag = "b+sigma*g";
    } else {
        const FieldSampler sampler{sol.field, d, n};
        const StepDriftFn drift = [&](int step, double t, const Vector& x) {
            Vector y;
            Matrix z;
            bool clipped = false;
            sampler.at(step, x, y, z, clipped);
            Vector a = coeffs.b(t, x);
            a.noalias() += coeffs.sigma(t, x) * coeffs.g(t, x, y, z);
            return a;
        };
        sol.X.grid = grid;
        sol.X.noise = noise;
        sol.X.drift_tag = "b+sigma*g";
        sol.X.states = euler_maruyama(drift, coeffs.sigma, initial, noise->increments, grid);
    }

    const int M = grid.steps();
    std::size_t clipped_total = 0, evaluations = 0;
    sol.Y.resize(static_cast<std::size_t>(M + 1));
    sol.Z.resize(static_cast<std::size_t>(M));
    for (int i = 0; i <= M; ++i) {
        std::size_t c = 0;
        sol.Y[static_cast<std::size_t>(i)] = sol.field.value_rows(i, sol.X.states[static_cast<std::size_t>(i)], &c);
        clipped_total += c;
        evaluations += n_paths;
        if (i < M) {
            sol.Z[static_cast<std::size_t>(i)] =
                sol.field.gradient_rows(i, sol.X.states[static_cast<std::size_t>(i)], &c);
            clipped_total += c;
            evaluations += n_paths;
        }
    }

    auto& diag = sol.diagnostics;
    diag.clipped_fraction = static_cast<double>(clipped_total) / static_cast<double>(evaluations);
    for (const auto& s : sol.Y) diag.y_sup = std::max(diag.y_sup, s.cwiseAbs().maxCoeff());
    diag.residual = coupling_residual(sol, coeffs);
    if (!sol.g_vanishes) {
        const auto ep = stochastic_exponential(sol.g_along_F, *noise, grid, "g(F,u,d)");
        diag.martingale = martingale_diagnostic(ep);
    }
    return sol;
}

CouplingResidual coupling_residual(const FbsdeSolution& sol, const CoefficientSet& coeffs) {
    const auto& grid = sol.X.grid;
    const int M = grid.steps();
    const int d = coeffs.dims.d, n = coeffs.dims.n;
    require(static_cast<int>(sol.Y.size()) == M + 1 && static_cast<int>(sol.Z.size()) == M && sol.X.noise, kModule,
            "coupling_residual needs a complete solution");
    const auto np = sol.X.n_paths();
    const double dt = grid.dt();
    const auto& dW = sol.X.noise->increments;

    std::vector<double> step_sq(block_count(np), 0.0), term_sq(block_count(np), 0.0);
    for_each_block(np, [&](std::size_t b, std::size_t begin, std::size_t end) {
        double acc = 0.0, term = 0.0;
        for (std::size_t pp = begin; pp < end; ++pp) {
            const auto p = static_cast<Eigen::Index>(pp);
            for (int i = 0; i < M; ++i) {
                const auto si = static_cast<std::size_t>(i);
                const Vector x = sol.X.states[si].row(p).transpose();
                const Vector y = sol.Y[si].row(p).transpose();
                const Matrix z = unflatten(sol.Z[si].row(p), d, n);
                const Vector f = coeffs.f(grid.time(i), x, y, z);
                const Vector dw = dW[si].row(p).transpose();
                const Vector r = sol.Y[si + 1].row(p).transpose() - y + f * dt - z * dw;
                acc += r.squaredNorm();
            }
            const Vector xT = sol.X.states.back().row(p).transpose();
            term += (sol.Y.back().row(p).transpose() - coeffs.h(xT)).squaredNorm();
        }
        step_sq[b] = acc;
        term_sq[b] = term;
    });
    double acc = 0.0, term = 0.0;
    for (std::size_t b = 0; b < step_sq.size(); ++b) {
        acc += step_sq[b];
        term += term_sq[b];
    }
    CouplingResidual r;
    r.rms = std::sqrt(acc / (static_cast<double>(np) * std::max(M, 1) * d));
    r.terminal_rms = std::sqrt(term / (static_cast<double>(np) * d));
    return r;
}

}  // namespace fbsde
