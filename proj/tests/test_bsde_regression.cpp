#include "fbsde/applications.hpp"
#include "fbsde/bsde.hpp"
#include "fbsde/error.hpp"
#include "fbsde/regression.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>

using namespace fbsde;
using fbsde::testing::brownian_scalar;
using fbsde::testing::Gen;
using fbsde::testing::normal_cdf;
using fbsde::testing::vec1;

namespace {

BasisSpec basis_of(BasisKind kind, int size) {
    BasisSpec b;
    b.kind = kind;
    b.size = size;
    return b;
}

Slice gaussian_states(std::size_t n, int m, std::uint64_t seed) {
    Gen gen(seed);
    Slice s(static_cast<Eigen::Index>(n), m);
    for (Eigen::Index p = 0; p < s.rows(); ++p)
        for (int k = 0; k < m; ++k) s(p, k) = gen.normal();
    return s;
}

PathEnsemble brownian_paths(std::size_t n, int steps, double x0, std::uint64_t seed, double spread = 0.0) {
    const TimeGrid grid(1.0, steps);
    auto noise = std::make_shared<const NoiseBlock>(sample_noise(grid, n, 1, seed));
    Slice init = Slice::Constant(static_cast<Eigen::Index>(n), 1, x0);
    for (std::size_t p = 0; p < n && spread > 0.0; ++p)
        init(static_cast<Eigen::Index>(p), 0) += spread * (2.0 * (static_cast<double>(p) + 0.5) / static_cast<double>(n) - 1.0);
    const auto c = brownian_scalar();
    return simulate_sde(c.b, c.sigma, init, noise);
}

double quantile(const Slice& s, double q) {
    std::vector<double> v(s.data(), s.data() + s.rows());
    std::sort(v.begin(), v.end());
    return v[static_cast<std::size_t>(q * static_cast<double>(v.size() - 1))];
}

}  // namespace

TEST_SUITE("bsde_regression") {

TEST_CASE("basis spec validation") {
    CHECK_NOTHROW(basis_of(BasisKind::polynomial, 10).validate(1));
    CHECK_THROWS_AS(basis_of(BasisKind::polynomial, 11).validate(1), InvalidArgument);
    CHECK_THROWS_AS(basis_of(BasisKind::local_linear_bins, 1).validate(1), InvalidArgument);
    CHECK_THROWS_AS(basis_of(BasisKind::piecewise_constant_bins, 1).validate(1), InvalidArgument);
    BasisSpec b;
    b.knots = {{0.0}, {1.0}};
    CHECK_THROWS_AS(b.validate(1), InvalidArgument);
    CHECK(BasisSpec::default_for(1).kind == BasisKind::local_linear_bins);
    CHECK(BasisSpec::default_for(2).size == 50);
    CHECK(BasisSpec::default_for(3).kind == BasisKind::polynomial);
    CHECK(BasisSpec::default_for(3).size == 3);
    for (auto k : {BasisKind::polynomial, BasisKind::piecewise_constant_bins, BasisKind::local_linear_bins})
        CHECK(parse_basis_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_basis_kind("splines"), InvalidArgument);
}

TEST_CASE("legendre polynomials") {
    CHECK(legendre(0, 0.3) == 1.0);
    CHECK(legendre(1, 0.3) == 0.3);
    CHECK(legendre(2, 0.3) == doctest::Approx(0.5 * (3 * 0.09 - 1)));
    CHECK(legendre(3, -0.7) == doctest::Approx(0.5 * (5 * -0.343 - 3 * -0.7)));
    for (int k = 0; k <= 10; ++k) CHECK(legendre(k, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("constant targets are fitted exactly by every basis") {
    const Slice states = gaussian_states(5000, 2, 1);
    const Slice targets = Slice::Constant(5000, 1, 2.5);
    for (const auto& b : {basis_of(BasisKind::polynomial, 3), basis_of(BasisKind::piecewise_constant_bins, 10),
                          basis_of(BasisKind::local_linear_bins, 10)}) {
        const auto model = fit_conditional_expectation(targets, states, b);
        Gen gen(2);
        for (int k = 0; k < 50; ++k) {
            Eigen::VectorXd x(2);
            x << gen.uniform(-6, 6), gen.uniform(-6, 6);
            CHECK(model.evaluate(x)(0) == doctest::Approx(2.5).epsilon(1e-10));
        }
    }
}

TEST_CASE("in-span targets are reproduced") {
    const Slice states = gaussian_states(2000, 1, 3);
    auto worst_inside = [&](const RegressionModel& model) {
        double worst = 0.0;
        for (Eigen::Index p = 0; p < states.rows(); ++p) {
            const double x = states(p, 0);
            if (!model.box().contains(&x)) continue;
            double y = 0.0;
            model.evaluate(&x, &y);
            worst = std::max(worst, std::abs(y - x));
        }
        return worst;
    };
    for (int degree : {1, 2, 5})
        CHECK(worst_inside(fit_conditional_expectation(states, states, basis_of(BasisKind::polynomial, degree))) <= 1e-10);
    CHECK(worst_inside(fit_conditional_expectation(states, states, basis_of(BasisKind::local_linear_bins, 20))) <= 1e-10);
}

TEST_CASE("quadratic recovery from noisy samples") {
    const std::size_t n = 100000;
    const Slice states = gaussian_states(n, 1, 4);
    Gen gen(5);
    Slice targets(static_cast<Eigen::Index>(n), 1);
    for (Eigen::Index p = 0; p < targets.rows(); ++p) targets(p, 0) = states(p, 0) * states(p, 0) + 0.01 * gen.normal();
    const auto model = fit_conditional_expectation(targets, states, basis_of(BasisKind::polynomial, 2));
    Eigen::VectorXd a(1), b(1), c(1);
    a << -1.0;
    b << 0.0;
    c << 1.0;
    const double second = 0.5 * (model.evaluate(a)(0) - 2.0 * model.evaluate(b)(0) + model.evaluate(c)(0));
    CHECK(std::abs(second - 1.0) <= 0.01);
}

TEST_CASE("too few samples for the basis") {
    const Slice states = gaussian_states(5, 1, 6);
    CHECK_THROWS_AS(fit_conditional_expectation(states, states, basis_of(BasisKind::polynomial, 6)), InvalidArgument);
}

TEST_CASE("non-finite targets name the slice") {
    const Slice states = gaussian_states(100, 1, 7);
    Slice targets = states;
    targets(17, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        fit_conditional_expectation(targets, states, basis_of(BasisKind::polynomial, 2), 12);
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("time slice 12") != std::string::npos);
    }
}

TEST_CASE("evaluation clips to the training box") {
    const Slice states = gaussian_states(10000, 1, 8);
    const auto model = fit_conditional_expectation(states, states, basis_of(BasisKind::polynomial, 1));
    double out = 0.0;
    const double far = 100.0;
    CHECK(model.evaluate(&far, &out));
    CHECK(out == doctest::Approx(model.box().hi(0)));
    const double inside = 0.0;
    CHECK_FALSE(model.evaluate(&inside, &out));
    std::size_t clipped = 0;
    Slice probe(3, 1);
    probe << -50.0, 0.0, 50.0;
    model.evaluate_rows(probe, &clipped);
    CHECK(clipped == 2);
}

TEST_CASE("knots split bins at jump locations") {
    const Slice states = gaussian_states(20000, 1, 9);
    Slice targets(states.rows(), 1);
    for (Eigen::Index p = 0; p < states.rows(); ++p) targets(p, 0) = states(p, 0) >= 0.37 ? 1.0 : 0.0;
    BasisSpec b = basis_of(BasisKind::local_linear_bins, 20);
    b.knots = {{0.37}};
    const auto model = fit_conditional_expectation(targets, states, b);
    CHECK((model.evaluate_rows(states) - targets).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("zero driver and constant terminal give a constant field") {
    const auto paths = brownian_paths(20000, 10, 0.0, 1);
    auto c = brownian_scalar();
    c.h = [](const Vector&) { return vec1(3.0); };
    const auto field = backward_sweep(paths, augmented_driver(c), c.h, 1, BasisSpec::default_for(1));
    for (int i = 0; i <= 10; ++i)
        CHECK(field.value(i, vec1(0.4))(0) == doctest::Approx(3.0).epsilon(1e-12));
    for (int i = 0; i < 10; ++i) CHECK(std::abs(field.gradient(i, vec1(0.4))(0, 0)) <= 1e-10);
}

TEST_CASE("identity terminal gives u = x and d = 1") {
    const auto paths = brownian_paths(200000, 50, 0.0, 2);
    auto c = brownian_scalar();
    c.h = [](const Vector& x) { return x; };
    const auto field = backward_sweep(paths, augmented_driver(c), c.h, 1, basis_of(BasisKind::polynomial, 3));
    double worst_u = 0.0, worst_d = 0.0;
    for (int i = 1; i <= 50; ++i) {
        const Slice& s = paths.states[static_cast<std::size_t>(i)];
        for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) {
            const double x = quantile(s, q);
            worst_u = std::max(worst_u, std::abs(field.value(i, vec1(x))(0) - x));
            if (i < 50) worst_d = std::max(worst_d, std::abs(field.gradient(i, vec1(x))(0, 0) - 1.0));
        }
    }
    CHECK(worst_u <= 0.02);
    CHECK(worst_d <= 0.02);
}

TEST_CASE("discounted linear driver") {
    const auto paths = brownian_paths(200000, 50, 1.0, 3);
    auto c = brownian_scalar(1.0, 1.0);
    c.f = [](double, const Vector&, const Vector& y, const Matrix&) { return Vector(-0.1 * y); };
    c.h = [](const Vector& x) { return x; };
    PicardConfig cfg;
    const auto field = solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), cfg);
    CHECK(std::abs(field.value(0, vec1(1.0))(0) - std::exp(-0.1)) <= 0.01);
    CHECK(field.converged);
    CHECK(field.picard_iterations <= 8);
    for (std::size_t k = 1; k < field.history.size(); ++k) CHECK(field.history[k] < field.history[k - 1]);

    PicardConfig zero = cfg;
    zero.init = PicardInit::zero;
    const auto from_zero = solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), zero);
    CHECK(from_zero.converged);
    CHECK(from_zero.picard_iterations <= 8);
    CHECK(from_zero.value(0, vec1(1.0))(0) == doctest::Approx(field.value(0, vec1(1.0))(0)).epsilon(1e-4));
    for (std::size_t k = 1; k < from_zero.history.size(); ++k)
        CHECK(from_zero.history[k] < from_zero.history[k - 1]);
}

TEST_CASE("digital terminal matches the Gaussian distribution function") {
    const auto paths = brownian_paths(200000, 50, 0.0, 4, 2.0);
    auto c = brownian_scalar();
    c.h = [](const Vector& x) { return vec1(x(0) >= 0.0 ? 1.0 : 0.0); };
    const auto field = solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), PicardConfig{});
    double sup = 0.0;
    for (int k = 0; k <= 30; ++k) {
        const double x = -1.5 + 0.1 * k;
        sup = std::max(sup, std::abs(field.value(0, vec1(x))(0) - normal_cdf(x)));
    }
    CHECK(sup <= 0.02);
}

TEST_CASE("truncated carbon field stays in the price range") {
    const CarbonModel m = CarbonModel::baseline(0.0);
    const auto c = carbon_coefficients(m);
    const TimeGrid grid(m.T, 50);
    auto noise = std::make_shared<const NoiseBlock>(sample_noise(grid, 50000, 1, 5));
    const auto paths = simulate_sde(c.b, c.sigma, c.x0, noise);
    PicardConfig cfg;
    cfg.truncation_N = m.lambda;
    cfg.max_iters = 40;
    BasisSpec b = BasisSpec::default_for(1);
    b.knots = {{m.K, m.Lambda}};
    const auto field = solve_decoupled_bsde(paths, c, b, cfg);
    double lo = 0.0, hi = 0.0;
    for (int i = 0; i <= 50; ++i) {
        const Slice u = field.value_rows(i, paths.states[static_cast<std::size_t>(i)]);
        lo = std::min(lo, u.minCoeff());
        hi = std::max(hi, u.maxCoeff());
    }
    CHECK(lo >= -0.02);
    CHECK(hi <= m.lambda + 0.02);
}

TEST_CASE("terminal slice reproduces the fit of h") {
    const auto paths = brownian_paths(20000, 10, 0.0, 6);
    auto c = brownian_scalar();
    c.h = [](const Vector& x) { return vec1(std::sin(3.0 * x(0))); };
    const auto field = solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), PicardConfig{});
    const Slice& xt = paths.states.back();
    Slice hx(xt.rows(), 1);
    for (Eigen::Index p = 0; p < xt.rows(); ++p) hx(p, 0) = std::sin(3.0 * xt(p, 0));
    const auto direct = fit_conditional_expectation(hx, xt, BasisSpec::default_for(1));
    CHECK((field.value_rows(10, xt) - direct.evaluate_rows(xt)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(field.u.back().residual_rms()(0) <= direct.residual_rms()(0) + 1e-12);
}

TEST_CASE("non-convergence is flagged, not thrown") {
    const auto paths = brownian_paths(5000, 20, 0.0, 7);
    auto c = brownian_scalar();
    c.f = [](double, const Vector&, const Vector& y, const Matrix&) { return Vector(2.0 * y); };
    c.h = [](const Vector& x) { return vec1(std::cos(x(0))); };
    PicardConfig cfg;
    cfg.init = PicardInit::zero;
    cfg.max_iters = 2;
    cfg.tol = 1e-12;
    const auto field = solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), cfg);
    CHECK_FALSE(field.converged);
    CHECK(field.picard_iterations == 2);
    CHECK(field.history.size() == 2);
    for (double h : field.history) CHECK(std::isfinite(h));
}

TEST_CASE("NaN terminal data is a hard error") {
    const auto paths = brownian_paths(1000, 5, 0.0, 8);
    auto c = brownian_scalar();
    c.h = [](const Vector& x) { return vec1(x(0) > 1.0 ? std::nan("") : 0.0); };
    CHECK_THROWS_AS(solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), PicardConfig{}), NumericalError);
}

TEST_CASE("driver clip marks the field experimental") {
    const auto paths = brownian_paths(5000, 10, 0.0, 9);
    auto c = brownian_scalar();
    c.f = [](double, const Vector&, const Vector&, const Matrix& z) { return vec1(z(0, 0) * z(0, 0)); };
    c.h = [](const Vector& x) { return vec1(std::tanh(x(0))); };
    PicardConfig cfg;
    cfg.driver_clip = 10.0 * y_bound(1.0, 1.0) / 0.1;
    const auto field = solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), cfg);
    CHECK(field.experimental);
    CHECK_FALSE(solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), PicardConfig{}).experimental);
}

TEST_CASE("Picard config validation") {
    PicardConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.tol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = PicardConfig{};
    cfg.max_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = PicardConfig{};
    cfg.truncation_N = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    CHECK(parse_picard_init("zero") == PicardInit::zero);
    CHECK(parse_picard_init(to_string(PicardInit::self_consistent)) == PicardInit::self_consistent);
}

TEST_CASE("truncation far above the solution is inert") {
    const auto paths = brownian_paths(20000, 20, 0.5, 10);
    auto c = brownian_scalar(1.0, 0.5);
    c.f = [](double, const Vector& x, const Vector& y, const Matrix&) { return vec1(std::sin(x(0)) - 0.3 * y(0)); };
    c.h = [](const Vector& x) { return vec1(std::tanh(x(0))); };
    PicardConfig cfg;
    cfg.truncation_N = 5.0;
    const auto a = solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), cfg);
    REQUIRE(a.sup_norm_estimate < 5.0);
    cfg.truncation_N = 10.0;
    const auto b = solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), cfg);
    CHECK(std::abs(a.value(0, c.x0)(0) - b.value(0, c.x0)(0)) < cfg.tol);
}

TEST_CASE("zero-driver slices are conditional expectations of the next slice") {
    const auto paths = brownian_paths(50000, 10, 0.0, 11);
    auto c = brownian_scalar();
    c.h = [](const Vector& x) { return vec1(x(0) * x(0)); };
    const BasisSpec b = basis_of(BasisKind::polynomial, 3);
    const auto field = solve_decoupled_bsde(paths, c, b, PicardConfig{});
    for (int i = 1; i < 10; ++i) {
        const Slice& xi = paths.states[static_cast<std::size_t>(i)];
        const Slice next = field.value_rows(i + 1, paths.states[static_cast<std::size_t>(i + 1)]);
        const auto cond = fit_conditional_expectation(next, xi, b);
        const Slice diff = field.value_rows(i, xi) - cond.evaluate_rows(xi);
        const double rms = std::sqrt(diff.squaredNorm() / static_cast<double>(diff.rows()));
        CHECK(rms <= 0.1 * cond.residual_rms()(0));
    }
}

}  // TEST_SUITE
