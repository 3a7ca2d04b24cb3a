#include "fbsde/cli.hpp"
#include "section.hpp"

#include <cmath>

namespace fbsde::cli {
namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

CoefficientSet scalar_brownian(const std::string& name, double T, double x0) {
    CoefficientSet c;
    c.name = name;
    c.dims = {1, 1, 1};
    c.T = T;
    c.x0 = scalar(x0);
    c.b = [](double, const Vector&) { return Vector::Zero(1).eval(); };
    c.sigma = [](double, const Vector&) { return Matrix::Identity(1, 1).eval(); };
    c.g = [](double, const Vector&, const Vector&, const Matrix&) { return Vector::Zero(1).eval(); };
    c.f = [](double, const Vector&, const Vector&, const Matrix&) { return Vector::Zero(1).eval(); };
    return c;
}

ConditionProfile profile(ForwardCondition fc, BackwardCondition bc, UniquenessCondition uc, double C, double r) {
    ConditionProfile p;
    p.forward = fc;
    p.backward = bc;
    p.uniqueness = uc;
    p.constants.C = C;
    p.constants.r = r;
    return p;
}

BasisSpec bins(BasisKind kind, int size) {
    BasisSpec b;
    b.kind = kind;
    b.size = size;
    return b;
}

Preset linear(Section m) {
    const double T = m.has("T") ? m.positive("T") : 1.0;
    const double x0 = m.has("x0") ? m.number("x0") : 1.0;
    const double rate = m.has("discount") ? m.number("discount") : 0.1;
    m.finish();
    Preset p;
    p.coeffs = scalar_brownian("benchmark:linear", T, x0);
    p.coeffs.f = [rate](double, const Vector&, const Vector& y, const Matrix&) { return Vector(-rate * y); };
    p.coeffs.h = [](const Vector& x) { return x; };
    p.profile = profile(ForwardCondition::F3, BackwardCondition::B1, UniquenessCondition::U1,
                        std::max(1.0, std::abs(rate)), 1.0);
    p.basis = bins(BasisKind::local_linear_bins, 50);
    return p;
}

Preset digital(Section m) {
    const double T = m.has("T") ? m.positive("T") : 1.0;
    const double x0 = m.has("x0") ? m.number("x0") : 0.0;
    m.finish();
    Preset p;
    p.coeffs = scalar_brownian("benchmark:digital", T, x0);
    p.coeffs.h = [](const Vector& x) { return scalar(x(0) >= 0.0 ? 1.0 : 0.0); };
    p.profile = profile(ForwardCondition::F3, BackwardCondition::B1, UniquenessCondition::U1, 1.0, 0.0);
    p.basis = bins(BasisKind::local_linear_bins, 50);
    return p;
}

/// X drifts by sign * Y with Y_T = X_T; sign -1 gives Y_t = X_t / (1 + T - t).
Preset riccati(Section m, const std::string& name, double default_sign) {
    const double T = m.has("T") ? m.positive("T") : 1.0;
    const double x0 = m.has("x0") ? m.number("x0") : 1.0;
    const double sign = m.has("sign") ? m.number("sign") : default_sign;
    m.finish();
    Preset p;
    p.coeffs = scalar_brownian(name, T, x0);
    p.coeffs.g = [sign](double, const Vector&, const Vector& y, const Matrix&) { return Vector(sign * y); };
    p.coeffs.h = [](const Vector& x) { return x; };
    p.profile = profile(ForwardCondition::F3, BackwardCondition::none, UniquenessCondition::none, 1.0, 1.0);
    p.basis = bins(BasisKind::local_linear_bins, 50);
    return p;
}

Preset constant(Section m) {
    const double T = m.has("T") ? m.positive("T") : 1.0;
    const double x0 = m.has("x0") ? m.number("x0") : 0.0;
    const double c = m.has("c") ? m.number("c") : 1.0;
    m.finish();
    Preset p;
    p.coeffs = scalar_brownian("benchmark:constant", T, x0);
    p.coeffs.f = [c](double, const Vector&, const Vector&, const Matrix&) { return scalar(c); };
    p.coeffs.h = [](const Vector&) { return Vector::Zero(1).eval(); };
    p.profile = profile(ForwardCondition::F3, BackwardCondition::B1, UniquenessCondition::U1,
                        std::max(1.0, std::abs(c)), 0.0);
    p.basis = bins(BasisKind::piecewise_constant_bins, 20);
    return p;
}

/// Two-factor coupled example with a digital payoff on x_1 + x_2.
Preset custom_reference(Section m) {
    const double T = m.has("T") ? m.positive("T") : 1.0;
    const double coupling = m.has("coupling") ? m.number("coupling") : 0.3;
    m.finish();
    Preset p;
    CoefficientSet& c = p.coeffs;
    c.name = "custom-reference";
    c.dims = {2, 2, 1};
    c.T = T;
    c.x0 = Vector::Zero(2);
    c.b = [](double, const Vector& x) { return Vector(-x.array().tanh().matrix()); };
    c.sigma = [](double, const Vector&) {
        Matrix s(2, 2);
        s << 0.6, 0.0, 0.3, 0.5;
        return s;
    };
    c.g = [coupling](double, const Vector&, const Vector& y, const Matrix&) {
        Vector v(2);
        v << coupling * std::cos(y(0)), coupling * std::sin(y(0));
        return v;
    };
    c.f = [](double, const Vector& x, const Vector& y, const Matrix&) {
        return scalar(-0.2 * y(0) + 0.1 * std::sin(x(0)));
    };
    c.h = [](const Vector& x) { return scalar(x(0) + x(1) >= 0.0 ? 1.0 : 0.0); };
    p.profile = profile(ForwardCondition::F1, BackwardCondition::B1, UniquenessCondition::none, 2.0, 0.0);
    p.basis = bins(BasisKind::local_linear_bins, 12);
    return p;
}

Preset pandemic(Section m) {
    PandemicModel model = PandemicModel::benchmark();
    const double base = m.has("theta_base") ? m.number("theta_base") : 0.3;
    const double slope = m.has("theta_slope") ? m.number("theta_slope") : 0.1;
    const double threshold = m.has("cost_threshold") ? m.number("cost_threshold") : 1.0;
    const double weight = m.has("cost_weight") ? m.number("cost_weight") : 1.0;
    if (slope < 0.0) fail("config field 'model.theta_slope' must be non-negative (theta convex)");
    if (weight < 0.0) fail("config field 'model.cost_weight' must be non-negative (q nondecreasing)");
    model.theta = [base, slope](double x) { return base + slope * std::abs(x); };
    model.dtheta_plus = [slope](double x) { return x >= 0.0 ? slope : -slope; };
    model.q = [threshold, weight](double x) { return weight * std::max(x - threshold, 0.0); };
    model.dq_plus = [threshold, weight](double x) { return x >= threshold ? weight : 0.0; };
    if (m.has("sigma")) model.sigma = m.positive("sigma");
    if (m.has("T")) model.T = m.positive("T");
    if (m.has("x0")) model.x0 = m.number("x0");
    if (m.has("C_y")) model.C_y = m.positive("C_y");
    m.finish();
    model.validate();
    Preset p;
    p.coeffs = pandemic_coefficients(model);
    p.profile = pandemic_profile(model);
    p.basis = bins(BasisKind::piecewise_constant_bins, 50);
    p.pandemic = model;
    return p;
}

Preset carbon(Section m) {
    const double E0 = m.has("E0") ? m.number("E0") : 0.0;
    CarbonModel model = CarbonModel::baseline(E0);
    if (m.has("alphas")) {
        const json& a = m.raw("alphas");
        if (!a.is_array() || a.empty()) fail("config field 'model.alphas' must be a non-empty list");
        model.alphas.clear();
        for (const auto& v : a) {
            if (!v.is_number()) fail("config field 'model.alphas' must contain numbers");
            model.alphas.push_back(v.get<double>());
        }
        model.N = static_cast<int>(model.alphas.size());
    }
    if (m.has("K")) model.K = m.number("K");
    if (m.has("lambda")) model.lambda = m.number("lambda");
    if (m.has("Lambda")) model.Lambda = m.number("Lambda");
    const double drift = m.has("b") ? m.number("b") : 0.5;
    const double vol = m.has("sigma") ? m.positive("sigma") : 0.3;
    model.b = [drift](double, double) { return drift; };
    model.sigma = [vol](double, double) { return vol; };
    if (m.has("T")) model.T = m.positive("T");
    m.finish();
    for (double a : model.alphas)
        if (!(a > 0.0 && a < 1.0)) fail("config field 'model.alphas' entries must lie in (0, 1)");
    if (!(model.lambda >= 0.0)) fail("config field 'model.lambda' must be non-negative");
    Preset p;
    p.coeffs = carbon_coefficients(model);
    p.profile = carbon_profile(model);
    p.basis = bins(BasisKind::local_linear_bins, 50);
    p.basis.knots = {{model.K, model.Lambda}};
    p.carbon = model;
    return p;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"pandemic",           "carbon",
            "benchmark:linear",   "benchmark:digital",
            "benchmark:riccati",  "benchmark:riccati-literal",
            "benchmark:constant", "custom-reference"};
}

Preset build_preset(const std::string& name, const nlohmann::json& model) {
    const json empty = json::object();
    Section m(model.is_null() ? empty : model, "model");
    Preset p;
    if (name == "pandemic") p = pandemic(m);
    else if (name == "carbon") p = carbon(m);
    else if (name == "benchmark:linear") p = linear(m);
    else if (name == "benchmark:digital") p = digital(m);
    else if (name == "benchmark:riccati") p = riccati(m, name, -1.0);
    else if (name == "benchmark:riccati-literal") p = riccati(m, name, 1.0);
    else if (name == "benchmark:constant") p = constant(m);
    else if (name == "custom-reference") p = custom_reference(m);
    else fail("unknown preset '" + name + "'");
    p.name = name;
    p.coeffs.validate();
    return p;
}

}  // namespace fbsde::cli
