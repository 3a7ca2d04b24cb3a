#include "fbsde/applications.hpp"

#include "fbsde/error.hpp"
#include "fbsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fbsde {

namespace {

constexpr const char* kModule = "applications";

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

struct MeanAndError {
    double mean = 0.0;
    double stderr = 0.0;
};

MeanAndError mean_and_error(const Eigen::VectorXd& v) {
    MeanAndError r;
    const auto n = v.size();
    if (n == 0) return r;
    r.mean = v.mean();
    if (n > 1) r.stderr = std::sqrt((v.array() - r.mean).square().sum() / static_cast<double>(n - 1) / n);
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pandemic

PandemicModel PandemicModel::benchmark() {
    PandemicModel m;
    m.theta = [](double x) { return 0.3 + 0.1 * std::abs(x); };
    m.dtheta_plus = [](double x) { return x >= 0.0 ? 0.1 : -0.1; };
    m.q = [](double x) { return std::max(x - 1.0, 0.0); };
    m.dq_plus = [](double x) { return x >= 1.0 ? 1.0 : 0.0; };
    return m;
}

double PandemicModel::lipschitz_constant() const {
    double C = 1.0;
    for (int k = 0; k <= 4000; ++k) {
        const double x = -20.0 + 0.01 * k;
        C = std::max({C, std::abs(dtheta_plus(x)), dq_plus(x)});
    }
    return C;
}

double PandemicModel::y_cap() const { return C_y > 0.0 ? C_y : std::expm1(lipschitz_constant() * T); }

void PandemicModel::validate() const {
    require(theta && dtheta_plus && q && dq_plus, kModule, "pandemic model needs theta, q and their right derivatives");
    require(sigma > 0.0 && std::isfinite(sigma), kModule, "pandemic sigma must be positive");
    require(T > 0.0, kModule, "pandemic horizon must be positive");
    require(std::isfinite(C_y) && C_y >= 0.0, kModule, "pandemic C_y must be a finite nonnegative number");
    for (int k = 0; k <= 400; ++k) {
        const double x = -20.0 + 0.1 * k;
        require(dq_plus(x) >= 0.0, kModule, "dq_plus must be nonnegative (q nondecreasing)");
    }
    if (C_y > 0.0)
        require(C_y >= std::expm1(lipschitz_constant() * T) * (1.0 - 1e-12), kModule,
                "C_y must be at least exp(C T) - 1");
}

double smooth_cutoff(double y, double cap) {
    require(cap > 0.0, kModule, "cutoff cap C_y must be positive");
    if (y <= -1.0 || y >= cap + 1.0) return 0.0;
    if (y < 0.0) return y * smoothstep(y + 1.0);
    if (y <= cap) return y;
    return y * smoothstep(cap + 1.0 - y);
}

CoefficientSet pandemic_coefficients(const PandemicModel& model) {
    model.validate();
    const double cap = model.y_cap();
    require(cap > 0.0, kModule, "C_y must be positive");
    const double sigma = model.sigma;
    CoefficientSet c;
    c.name = "pandemic";
    c.dims = {1, 1, 1};
    c.T = model.T;
    c.x0 = Vector::Constant(1, model.x0);
    c.b = [theta = model.theta](double, const Vector& x) { return Vector::Constant(1, theta(x(0))); };
    c.sigma = [sigma](double, const Vector&) { return Matrix::Constant(1, 1, sigma); };
    // The state drift is theta - phi(y)/2, routed through b + sigma g.
    c.g = [cap, sigma](double, const Vector&, const Vector& y, const Matrix&) {
        return Vector::Constant(1, -smooth_cutoff(y(0), cap) / (2.0 * sigma));
    };
    c.f = [cap, dq = model.dq_plus, dth = model.dtheta_plus](double, const Vector& x, const Vector& y, const Matrix&) {
        return Vector::Constant(1, dq(x(0)) + dth(x(0)) * smooth_cutoff(y(0), cap));
    };
    c.h = [](const Vector&) { return Vector::Zero(1).eval(); };
    return c;
}

ConditionProfile pandemic_profile(const PandemicModel& model) {
    ConditionProfile p;
    p.forward = ForwardCondition::F3;
    p.backward = BackwardCondition::B4;
    p.uniqueness = UniquenessCondition::U2;
    const double C = model.lipschitz_constant();
    p.constants.r = 0.0;
    p.constants.C = std::max(C, 1.0);
    const double s2 = model.sigma * model.sigma;
    p.constants.epsilon = std::max(s2, 1.0 / s2);
    p.constants.kappa = std::max(1.0, C);
    return p;
}

SliceSeries optimal_policy(const FbsdeSolution& sol) {
    SliceSeries out;
    out.reserve(sol.Y.size());
    for (const auto& y : sol.Y) out.push_back(y.col(0).cwiseMax(0.0) / 2.0);
    return out;
}

namespace {

template <typename Policy>
PolicyCost policy_cost(const PandemicModel& model, const Policy& alpha, const NoiseBlock& noise, const TimeGrid& grid) {
    model.validate();
    require(noise.grid == grid && noise.channels == 1, kModule, "policy evaluation needs 1-channel noise on the grid");
    const int M = grid.steps();
    const double dt = grid.dt();
    PolicyCost out;
    out.per_path.resize(static_cast<Eigen::Index>(noise.n_paths));
    for_each_block(noise.n_paths, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t pp = begin; pp < end; ++pp) {
            const auto p = static_cast<Eigen::Index>(pp);
            double x = model.x0, cost = 0.0;
            for (int i = 0; i < M; ++i) {
                const double a = alpha(i, grid.time(i), x, p);
                cost += (a * a + model.q(x)) * dt;
                x += (model.theta(x) - a) * dt + model.sigma * noise.increments[static_cast<std::size_t>(i)](p, 0);
            }
            if (!std::isfinite(cost))
                throw NumericalError(kModule, "non-finite policy cost on path " + std::to_string(pp));
            out.per_path(p) = cost;
        }
    });
    const auto me = mean_and_error(out.per_path);
    out.J = me.mean;
    out.stderr = me.stderr;
    return out;
}

}  // namespace

PolicyCost evaluate_policy_cost(const PandemicModel& model, const PolicyFn& alpha, const NoiseBlock& noise,
                                const TimeGrid& grid) {
    return policy_cost(model, [&](int i, double t, double x, Eigen::Index) { return alpha(i, t, x); }, noise, grid);
}

PolicyCost evaluate_policy_cost(const PandemicModel& model, const SliceSeries& alpha, const NoiseBlock& noise,
                                const TimeGrid& grid) {
    require(static_cast<int>(alpha.size()) >= grid.steps(), kModule, "policy paths shorter than the grid");
    for (int i = 0; i < grid.steps(); ++i)
        require(alpha[static_cast<std::size_t>(i)].rows() == static_cast<Eigen::Index>(noise.n_paths) &&
                    alpha[static_cast<std::size_t>(i)].cols() == 1,
                kModule, "policy paths have the wrong shape");
    return policy_cost(
        model, [&](int i, double, double, Eigen::Index p) { return alpha[static_cast<std::size_t>(i)](p, 0); },
        noise, grid);
}

std::vector<PolicyComparison> compare_policies(const PandemicModel& model, const DecouplingField& field,
                                               const NoiseBlock& noise) {
    const TimeGrid& grid = noise.grid;
    require(field.grid == grid, kModule, "field and noise live on different grids");
    const auto feedback = [&field](double scale) -> PolicyFn {
        return [&field, scale](int i, double, double x) {
            double y = 0.0;
            field.u[static_cast<std::size_t>(i)].evaluate(&x, &y);
            return scale * std::max(y, 0.0) / 2.0;
        };
    };
    const std::vector<std::pair<std::string, PolicyFn>> suite{
        {"alpha*", feedback(1.0)},
        {"constant 0", [](int, double, double) { return 0.0; }},
        {"constant 0.25", [](int, double, double) { return 0.25; }},
        {"constant 0.5", [](int, double, double) { return 0.5; }},
        {"1.5 alpha*", feedback(1.5)},
        {"0.5 alpha*", feedback(0.5)},
    };
    std::vector<PolicyComparison> out;
    Eigen::VectorXd best;
    for (const auto& [name, policy] : suite) {
        const PolicyCost cost = evaluate_policy_cost(model, policy, noise, grid);
        PolicyComparison row;
        row.name = name;
        row.J = cost.J;
        row.stderr = cost.stderr;
        if (out.empty()) {
            best = cost.per_path;
        } else {
            const auto me = mean_and_error(best - cost.per_path);
            row.diff = me.mean;
            row.diff_stderr = me.stderr;
            row.pass = row.diff <= 3.0 * row.diff_stderr;
        }
        out.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Carbon

CarbonModel CarbonModel::baseline(double E0) {
    CarbonModel m;
    m.E0 = E0;
    m.K = E0 + 0.2;
    m.Lambda = E0 + 0.4;
    m.b = [](double, double) { return 0.5; };
    m.sigma = [](double, double) { return 0.3; };
    return m;
}

void CarbonModel::validate() const {
    require(N >= 1 && static_cast<int>(alphas.size()) == N, kModule, "carbon model needs one alpha per firm");
    for (double a : alphas) require(a > 0.0 && a < 1.0, kModule, "every firm's alpha must lie in (0, 1)");
    require(lambda >= 0.0 && std::isfinite(lambda), kModule, "carbon penalty lambda must be nonnegative");
    require(b && sigma, kModule, "carbon model needs b and sigma");
    require(T > 0.0, kModule, "carbon horizon must be positive");
}

double CarbonModel::multiplier(int i, double e) const {
    return 1.0 / (1.0 - alphas[static_cast<std::size_t>(i)] * (e >= K ? 1.0 : 0.0));
}

double CarbonModel::aggregate_abatement(double e, double y) const {
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += y * multiplier(i, e);
    return s;
}

CoefficientSet carbon_coefficients(const CarbonModel& model) {
    model.validate();
    CoefficientSet c;
    c.name = "carbon";
    c.dims = {1, 1, 1};
    c.T = model.T;
    c.x0 = Vector::Constant(1, model.E0);
    c.b = [b = model.b](double t, const Vector& e) { return Vector::Constant(1, b(t, e(0))); };
    c.sigma = [s = model.sigma](double t, const Vector& e) { return Matrix::Constant(1, 1, s(t, e(0))); };
    // Drift b - g_agg written as b + sigma * (-g_agg / sigma).
    c.g = [model](double t, const Vector& e, const Vector& y, const Matrix&) {
        return Vector::Constant(1, -model.aggregate_abatement(e(0), y(0)) / model.sigma(t, e(0)));
    };
    c.f = [](double, const Vector&, const Vector&, const Matrix&) { return Vector::Zero(1).eval(); };
    c.h = [lambda = model.lambda, cap = model.Lambda](const Vector& e) {
        return Vector::Constant(1, e(0) >= cap ? lambda : 0.0);
    };
    return c;
}

ConditionProfile carbon_profile(const CarbonModel& model) {
    model.validate();
    ConditionProfile p;
    p.forward = ForwardCondition::F1;
    p.backward = BackwardCondition::B1;
    p.uniqueness = UniquenessCondition::U2;
    double bmax = 0.0, smin = std::numeric_limits<double>::infinity(), smax = 0.0;
    for (int k = 0; k <= 200; ++k) {
        const double e = model.E0 - 10.0 + 0.1 * k;
        for (double t : {0.0, 0.5 * model.T, model.T}) {
            bmax = std::max(bmax, std::abs(model.b(t, e)));
            const double s = std::abs(model.sigma(t, e));
            smin = std::min(smin, s);
            smax = std::max(smax, s);
        }
    }
    double mult = 0.0;
    for (double a : model.alphas) mult += 1.0 / (1.0 - a);
    p.constants.r = 0.0;
    p.constants.C = std::max({1.0, bmax, smax * smax, model.lambda, mult / std::max(smin, 1e-300)});
    p.constants.epsilon = std::max({1.0, smax * smax, 1.0 / (smin * smin)});
    p.constants.kappa = std::max(1.0, 2.0 * bmax);
    return p;
}

AllowancePrice price_allowance(const CarbonModel& model, const McSettings& mc) {
    const CoefficientSet coeffs = carbon_coefficients(model);
    PicardConfig cfg = mc.picard;
    if (!cfg.truncation_N && model.lambda > 0.0) cfg.truncation_N = model.lambda;
    BasisSpec basis = mc.basis;
    if (basis.kind != BasisKind::polynomial && basis.knots.empty()) basis.knots = {{model.K, model.Lambda}};
    AllowancePrice out;
    out.solution = solve_fbsde(coeffs, TimeGrid(model.T, mc.steps), mc.n_paths, mc.seed, basis, cfg);
    const auto& sol = out.solution;
    out.Y0 = sol.field.value(0, coeffs.x0)(0);
    out.stderr = sol.field.y0_stderr;
    const auto me = mean_and_error(sol.Y.back().col(0));
    out.terminal_mean = me.mean;
    out.terminal_stderr = me.stderr;
    out.martingale = sol.diagnostics.martingale;

    const auto np = static_cast<Eigen::Index>(sol.X.n_paths());
    out.abatement.reserve(sol.Y.size());
    for (std::size_t i = 0; i < sol.Y.size(); ++i) {
        Slice xi(np, model.N);
        for (Eigen::Index p = 0; p < np; ++p)
            for (int f = 0; f < model.N; ++f)
                xi(p, f) = sol.Y[i](p, 0) * model.multiplier(f, sol.X.states[i](p, 0));
        out.abatement.push_back(std::move(xi));
    }
    return out;
}

}  // namespace fbsde
