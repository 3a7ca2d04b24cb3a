#include "fbsde/bsde.hpp"

#include "fbsde/error.hpp"
#include "fbsde/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace fbsde {

namespace {

constexpr const char* kModule = "bsde_regression";

/// Values of a field along the training paths, one slice per node.
struct Trace {
    SliceSeries y;  // M+1 slices, n x d
    SliceSeries z;  // M slices, n x (d*n)
};

class Sweeper {
public:
    Sweeper(const PathEnsemble& paths, const FieldFn& driver, const TerminalFn& h, int d, const BasisSpec& basis,
            std::optional<double> driver_clip)
        : paths_(paths), driver_(driver), h_(h), d_(d), driver_clip_(driver_clip) {
        require(paths.noise != nullptr, kModule, "paths carry no noise block");
        require(!paths.states.empty(), kModule, "empty path ensemble");
        require(d >= 1 && d <= kMaxDim, kModule, "backward dimension out of range");
        M_ = paths.grid.steps();
        n_ = paths.noise->channels;
        require(static_cast<int>(paths.states.size()) == M_ + 1 &&
                    static_cast<int>(paths.noise->increments.size()) == M_,
                kModule, "paths and noise disagree with the time grid");
        basis.validate(paths.dim());
        designs_.reserve(static_cast<std::size_t>(M_ + 1));
        for (int i = 0; i <= M_; ++i) designs_.emplace_back(paths.states[static_cast<std::size_t>(i)], basis, i);
    }

    /// Runs one sweep; `prev` selects Picard mode. Fills `trace` with the
    /// new field's values along the paths.
    DecouplingField sweep(const Trace* prev, Trace& trace) const {
        const auto& X = paths_.states;
        const auto& grid = paths_.grid;
        const Eigen::Index np = X.front().rows();
        const int m = paths_.dim();
        const double dt = grid.dt();

        DecouplingField field;
        field.grid = grid;
        field.dims = Dimensions{m, n_, d_};
        field.u.resize(static_cast<std::size_t>(M_ + 1));
        field.z.resize(static_cast<std::size_t>(M_));
        field.experimental = driver_clip_.has_value();
        trace.y.assign(static_cast<std::size_t>(M_ + 1), Slice());
        trace.z.assign(static_cast<std::size_t>(M_), Slice());

        Slice ypath(np, d_);
        for_each_block(static_cast<std::size_t>(np), [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t pp = begin; pp < end; ++pp) {
                const auto p = static_cast<Eigen::Index>(pp);
                const Vector hv = h_(X[static_cast<std::size_t>(M_)].row(p).transpose());
                if (hv.size() != d_) throw InvalidArgument(kModule, "terminal function returned the wrong dimension");
                ypath.row(p) = hv.transpose();
            }
        });
        field.u[static_cast<std::size_t>(M_)] =
            designs_[static_cast<std::size_t>(M_)].fit(ypath, &trace.y[static_cast<std::size_t>(M_)]);

        for (int i = M_ - 1; i >= 0; --i) {
            const auto si = static_cast<std::size_t>(i);
            const Slice& xi = X[si];
            const Slice& dw = paths_.noise->increments[si];
            const auto& design = designs_[si];
            const double t = grid.time(i);

            Slice yhat;
            design.fit(ypath, &yhat);

            Slice ztarget(np, d_ * n_);
            for (Eigen::Index p = 0; p < np; ++p)
                for (int a = 0; a < d_; ++a) {
                    const double centred = (ypath(p, a) - yhat(p, a)) / dt;
                    for (int b = 0; b < n_; ++b) ztarget(p, a * n_ + b) = centred * dw(p, b);
                }
            field.z[si] = design.fit(ztarget, &trace.z[si]);

            const Slice& ystar = prev ? prev->y[si] : yhat;
            const Slice& zstar = prev ? prev->z[si] : trace.z[si];
            add_driver(i, t, xi, ystar, zstar, dt, ypath);
            // Subtracting the fitted martingale increment leaves every
            // conditional expectation unchanged and removes most variance.
            for (Eigen::Index p = 0; p < np; ++p)
                for (int a = 0; a < d_; ++a) {
                    double mart = 0.0;
                    for (int b = 0; b < n_; ++b) mart += trace.z[si](p, a * n_ + b) * dw(p, b);
                    ypath(p, a) -= mart;
                }

            field.u[si] = design.fit(ypath, &trace.y[si]);
        }

        double sup = 0.0;
        for (const auto& s : trace.y) sup = std::max(sup, s.cwiseAbs().maxCoeff());
        field.sup_norm_estimate = sup;
        field.y0_stderr = field.u.front().residual_rms().maxCoeff() / std::sqrt(static_cast<double>(np));
        return field;
    }

private:
    void add_driver(int step, double t, const Slice& xi, const Slice& ystar, const Slice& zstar, double dt,
                    Slice& ypath) const {
        const Eigen::Index np = xi.rows();
        for_each_block(static_cast<std::size_t>(np), [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t pp = begin; pp < end; ++pp) {
                const auto p = static_cast<Eigen::Index>(pp);
                const Vector x = xi.row(p).transpose();
                const Vector y = ystar.row(p).transpose();
                const Matrix z = unflatten(zstar.row(p), d_, n_);
                Vector f = driver_(t, x, y, z);
                if (f.size() != d_) throw InvalidArgument(kModule, "driver returned the wrong dimension");
                if (driver_clip_) f = f.cwiseMax(-*driver_clip_).cwiseMin(*driver_clip_);
                if (!f.allFinite())
                    throw NumericalError(kModule, "non-finite driver value on path " + std::to_string(pp) +
                                                      " at time slice " + std::to_string(step));
                ypath.row(p) += dt * f.transpose();
            }
        });
    }

    const PathEnsemble& paths_;
    const FieldFn& driver_;
    const TerminalFn& h_;
    int d_;
    int n_ = 1;
    int M_ = 0;
    std::optional<double> driver_clip_;
    std::vector<RegressionDesign> designs_;
};

Trace trace_of(const DecouplingField& field, const PathEnsemble& paths) {
    Trace t;
    const int M = paths.grid.steps();
    for (int i = 0; i <= M; ++i) t.y.push_back(field.value_rows(i, paths.states[static_cast<std::size_t>(i)]));
    for (int i = 0; i < M; ++i) t.z.push_back(field.gradient_rows(i, paths.states[static_cast<std::size_t>(i)]));
    return t;
}

double sup_difference(const Trace& a, const Trace& b) {
    double sup = 0.0;
    for (std::size_t i = 0; i < a.y.size(); ++i) sup = std::max(sup, (a.y[i] - b.y[i]).cwiseAbs().maxCoeff());
    return sup;
}

}  // namespace

std::string to_string(PicardInit init) {
    return init == PicardInit::zero ? "zero" : "self-consistent";
}

PicardInit parse_picard_init(const std::string& s) {
    if (s == "zero") return PicardInit::zero;
    if (s == "self-consistent") return PicardInit::self_consistent;
    throw InvalidArgument(kModule, "unknown Picard initialization '" + s + "'");
}

void PicardConfig::validate() const {
    require(max_iters >= 1, kModule, "picard.max_iters must be positive");
    require(tol > 0.0 && std::isfinite(tol), kModule, "picard.tol must be positive");
    require(!truncation_N || (*truncation_N > 0.0 && std::isfinite(*truncation_N)), kModule,
            "picard.truncation_N must be positive");
    require(!driver_clip || *driver_clip > 0.0, kModule, "picard.driver_clip must be positive");
}

Vector DecouplingField::value(int step, const Vector& x) const {
    require(step >= 0 && step < static_cast<int>(u.size()), kModule, "time index outside the field");
    Vector out(dims.d);
    u[static_cast<std::size_t>(step)].evaluate(x.data(), out.data());
    return out;
}

Matrix DecouplingField::gradient(int step, const Vector& x) const {
    require(step >= 0 && step < static_cast<int>(z.size()), kModule, "time index outside the field");
    double flat[kMaxDim * kMaxDim];
    z[static_cast<std::size_t>(step)].evaluate(x.data(), flat);
    Matrix out(dims.d, dims.n);
    for (int a = 0; a < dims.d; ++a)
        for (int b = 0; b < dims.n; ++b) out(a, b) = flat[a * dims.n + b];
    return out;
}

Slice DecouplingField::value_rows(int step, const Slice& states, std::size_t* clipped) const {
    require(step >= 0 && step < static_cast<int>(u.size()), kModule, "time index outside the field");
    return u[static_cast<std::size_t>(step)].evaluate_rows(states, clipped);
}

Slice DecouplingField::gradient_rows(int step, const Slice& states, std::size_t* clipped) const {
    require(step >= 0 && step < static_cast<int>(z.size()), kModule, "time index outside the field");
    return z[static_cast<std::size_t>(step)].evaluate_rows(states, clipped);
}

DecouplingField backward_sweep(const PathEnsemble& paths, const FieldFn& driver, const TerminalFn& h, int d,
                               const BasisSpec& basis, const DecouplingField* previous,
                               std::optional<double> driver_clip) {
    Sweeper sweeper(paths, driver, h, d, basis, driver_clip);
    Trace trace;
    if (!previous) {
        auto field = sweeper.sweep(nullptr, trace);
        field.picard_iterations = 1;
        return field;
    }
    require(previous->grid == paths.grid, kModule, "previous field lives on a different time grid");
    const Trace prev = trace_of(*previous, paths);
    auto field = sweeper.sweep(&prev, trace);
    field.picard_iterations = previous->picard_iterations + 1;
    field.history = previous->history;
    field.history.push_back(sup_difference(trace, prev));
    return field;
}

DecouplingField solve_decoupled_bsde(const PathEnsemble& paths, const CoefficientSet& coeffs,
                                     const BasisSpec& basis, const PicardConfig& cfg) {
    coeffs.validate();
    cfg.validate();
    require(paths.dim() == coeffs.dims.m, kModule, "paths and coefficients disagree on m");
    require(paths.noise && paths.noise->channels == coeffs.dims.n, kModule,
            "paths and coefficients disagree on n");
    require(std::abs(paths.grid.horizon() - coeffs.T) <= 1e-12 * coeffs.T, kModule,
            "paths and coefficients disagree on the horizon");

    const CoefficientSet active = cfg.truncation_N ? truncate_coefficients(coeffs, *cfg.truncation_N) : coeffs;
    const FieldFn driver = augmented_driver(active);
    const int d = coeffs.dims.d;
    Sweeper sweeper(paths, driver, active.h, d, basis, cfg.driver_clip);

    Trace prev;
    DecouplingField field;
    std::vector<double> history;
    int iter = 0;
    bool converged = false;

    if (cfg.init == PicardInit::self_consistent) {
        field = sweeper.sweep(nullptr, prev);
        iter = 1;
    } else {
        const int M = paths.grid.steps();
        const Eigen::Index np = static_cast<Eigen::Index>(paths.n_paths());
        prev.y.assign(static_cast<std::size_t>(M + 1), Slice::Zero(np, d));
        prev.z.assign(static_cast<std::size_t>(M), Slice::Zero(np, d * coeffs.dims.n));
    }
    while (iter < cfg.max_iters) {
        Trace next;
        DecouplingField candidate = sweeper.sweep(&prev, next);
        ++iter;
        const double diff = sup_difference(next, prev);
        if (!std::isfinite(diff))
            throw NumericalError(kModule, "Picard iteration " + std::to_string(iter) + " produced non-finite values");
        history.push_back(diff);
        field = std::move(candidate);
        prev = std::move(next);
        if (diff <= cfg.tol) {
            converged = true;
            break;
        }
    }
    field.picard_iterations = iter;
    field.converged = converged;
    field.history = std::move(history);
    return field;
}

}  // namespace fbsde
