#include "fbsde/applications.hpp"
#include "fbsde/error.hpp"
#include "fbsde/girsanov.hpp"
#include "fbsde/paths.hpp"
#include "fbsde/pipeline.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <memory>

using namespace fbsde;
using fbsde::testing::Gen;

namespace {

SliceSeries constant_g(const TimeGrid& grid, std::size_t n, int channels, double c) {
    return SliceSeries(static_cast<std::size_t>(grid.steps()),
                       Slice::Constant(static_cast<Eigen::Index>(n), channels, c));
}

bool bitwise_equal(const SliceSeries& a, const SliceSeries& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols() ||
            std::memcmp(a[i].data(), b[i].data(), sizeof(double) * static_cast<std::size_t>(a[i].size())) != 0)
            return false;
    return true;
}

}  // namespace

TEST_SUITE("girsanov") {

TEST_CASE("zero integrand gives the unit process") {
    const TimeGrid grid(1.0, 20);
    const auto noise = sample_noise(grid, 1000, 2, 1);
    const auto ep = stochastic_exponential(constant_g(grid, 1000, 2, 0.0), noise, grid);
    CHECK((ep.values.array() == 1.0).all());
    CHECK((ep.log_values.array() == 0.0).all());
    const auto r = martingale_diagnostic(ep);
    CHECK(r.terminal_mean == 1.0);
    CHECK(r.pass);
}

TEST_CASE("one step closed form") {
    const TimeGrid grid(0.5, 1);
    const auto noise = sample_noise(grid, 50, 1, 2);
    const double c = 0.7;
    const auto ep = stochastic_exponential(constant_g(grid, 50, 1, c), noise, grid);
    for (Eigen::Index p = 0; p < 50; ++p) {
        const double dw = noise.increments[0](p, 0);
        CHECK(ep.values(p, 0) == 1.0);
        CHECK(ep.values(p, 1) == doctest::Approx(std::exp(c * dw - 0.5 * c * c * 0.5)).epsilon(1e-14));
    }
}

TEST_CASE("constant integrand has unit mean") {
    const TimeGrid grid(1.0, 50);
    const auto noise = sample_noise(grid, 100000, 1, 3);
    const auto ep = stochastic_exponential(constant_g(grid, 100000, 1, 0.5), noise, grid);
    const auto r = martingale_diagnostic(ep);
    CHECK(std::abs(r.terminal_mean - 1.0) <= 3.0 * r.stderr);
    CHECK(r.pass);
    CHECK((ep.values.array() > 0.0).all());
}

TEST_CASE("products of step factors reproduce the values") {
    Gen gen(4);
    const TimeGrid grid(1.0, 30);
    const auto noise = sample_noise(grid, 200, 2, 4);
    SliceSeries g;
    for (int i = 0; i < 30; ++i) {
        Slice s(200, 2);
        for (Eigen::Index p = 0; p < s.size(); ++p) s.data()[p] = gen.uniform(-1.5, 1.5);
        g.push_back(s);
    }
    const auto ep = stochastic_exponential(g, noise, grid);
    for (Eigen::Index p = 0; p < 200; ++p) {
        double prod = 1.0;
        for (int i = 0; i < 30; ++i) {
            const auto k = static_cast<std::size_t>(i);
            prod *= std::exp(g[k].row(p).dot(noise.increments[k].row(p)) - 0.5 * g[k].row(p).squaredNorm() * grid.dt());
            CHECK(ep.values(p, i + 1) == doctest::Approx(prod).epsilon(1e-12));
        }
    }
}

TEST_CASE("large log value fails the diagnostic") {
    const TimeGrid grid(1.0, 10);
    const auto noise = sample_noise(grid, 1000, 1, 5);
    auto ep = stochastic_exponential(constant_g(grid, 1000, 1, 0.0), noise, grid);
    ep.log_values(17, 5) = 25.0;
    ep.values(17, 5) = std::exp(25.0);
    const auto r = martingale_diagnostic(ep);
    CHECK(r.max_log == 25.0);
    CHECK_FALSE(r.pass);
}

TEST_CASE("overflow guard names path and step") {
    const TimeGrid grid(1.0, 4);
    const auto noise = sample_noise(grid, 3, 1, 6);
    auto g = constant_g(grid, 3, 1, 0.0);
    g[2](1, 0) = 1e6;
    try {
        stochastic_exponential(g, noise, grid);
        FAIL("expected overflow");
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("path 1") != std::string::npos);
        CHECK(msg.find("step 3") != std::string::npos);
    }
}

TEST_CASE("shape mismatch is rejected") {
    const TimeGrid grid(1.0, 4);
    const auto noise = sample_noise(grid, 3, 1, 7);
    CHECK_THROWS_AS(stochastic_exponential(constant_g(grid, 3, 2, 0.1), noise, grid), InvalidArgument);
    CHECK_THROWS_AS(stochastic_exponential(constant_g(TimeGrid(1.0, 5), 3, 1, 0.1), noise, grid), InvalidArgument);
    CHECK_THROWS_AS(shift_noise(noise, constant_g(grid, 3, 1, 0.1), grid, 2), InvalidArgument);
}

TEST_CASE("zero shift is bitwise inert") {
    const TimeGrid grid(1.0, 10);
    const auto noise = sample_noise(grid, 100, 2, 8);
    CHECK(bitwise_equal(shift_noise(noise, constant_g(grid, 100, 2, 0.0), grid, 1).increments(), noise.increments));
}

TEST_CASE("constant shift arithmetic") {
    const TimeGrid grid(1.0, 50);
    const auto noise = sample_noise(grid, 100, 1, 9);
    const auto inc = shift_noise(noise, constant_g(grid, 100, 1, 1.0), grid, 1).increments();
    for (std::size_t i = 0; i < inc.size(); ++i)
        CHECK((inc[i].array() == noise.increments[i].array() - 0.02).all());
}

TEST_CASE("shift followed by the inverse shift restores the noise") {
    Gen gen(10);
    for (int trial = 0; trial < 20; ++trial) {
        CAPTURE(trial);
        const int M = gen.integer(1, 20);
        const int n = gen.integer(1, 3);
        const TimeGrid grid(gen.uniform(0.1, 3.0), M);
        const auto noise = sample_noise(grid, 40, n, static_cast<std::uint64_t>(trial));
        SliceSeries g;
        for (int i = 0; i < M; ++i) {
            Slice s(40, n);
            for (Eigen::Index p = 0; p < s.size(); ++p) s.data()[p] = gen.wide();
            g.push_back(s);
        }
        const int sign = gen.coin() ? 1 : -1;
        const auto there = shift_noise(noise, g, grid, sign);
        const auto back = shift_noise(there, g, grid, -sign);
        CHECK(bitwise_equal(back.increments(), noise.increments));
    }
}

TEST_CASE("recoupled drift equals the shifted-noise simulation") {
    const TimeGrid grid(1.0, 40);
    auto noise = std::make_shared<const NoiseBlock>(sample_noise(grid, 500, 1, 11));
    const DriftFn b = [](double, const Vector& x) { return Vector(-0.5 * x); };
    const DiffusionFn sigma = [](double, const Vector& x) { return Matrix::Constant(1, 1, 0.8 + 0.1 * std::sin(x(0))); };
    const auto gfun = [](int i, const Vector& x) { return std::cos(x(0)) + 0.01 * i; };
    const StepDriftFn coupled = [&](int i, double t, const Vector& x) {
        return Vector(b(t, x) + sigma(t, x) * Vector::Constant(1, gfun(i, x)));
    };
    const Slice init = replicate_initial(Vector::Constant(1, 0.3), 500);
    const SliceSeries X = euler_maruyama(coupled, sigma, init, noise->increments, grid);

    // Shift with g evaluated along X itself: dW + g dt drives the b-only scheme along the same states.
    SliceSeries g(40, Slice(500, 1));
    for (int i = 0; i < 40; ++i)
        for (Eigen::Index p = 0; p < 500; ++p)
            g[static_cast<std::size_t>(i)](p, 0) = gfun(i, Vector::Constant(1, X[static_cast<std::size_t>(i)](p, 0)));
    const auto shifted = shift_noise(*noise, g, grid, -1).increments();
    const SliceSeries F = euler_maruyama(b, sigma, init, shifted, grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) worst = std::max(worst, (X[i] - F[i]).cwiseAbs().maxCoeff());
    CHECK(worst <= 1e-12 * 40);
}

TEST_CASE("bounded carbon coupling passes the diagnostic") {
    const CarbonModel m = CarbonModel::baseline(0.0);
    McSettings mc;
    mc.n_paths = 100000;
    mc.steps = 50;
    mc.basis = BasisSpec::default_for(1);
    mc.picard.max_iters = 40;
    const auto sol = price_allowance(m, mc).solution;
    REQUIRE(sol.diagnostics.martingale.has_value());
    CHECK(sol.diagnostics.martingale->pass);
}

}  // TEST_SUITE
