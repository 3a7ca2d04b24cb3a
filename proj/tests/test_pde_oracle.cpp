#include "fbsde/applications.hpp"
#include "fbsde/error.hpp"
#include "fbsde/pde.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace fbsde;
using fbsde::testing::brownian_scalar;
using fbsde::testing::normal_cdf;
using fbsde::testing::vec1;

namespace {

CoefficientSet digital(double threshold) {
    auto c = brownian_scalar();
    c.h = [threshold](const Vector& x) { return vec1(x(0) >= threshold ? 1.0 : 0.0); };
    return c;
}

double sup_error(const PdeSolution& pde, int step, double lo, double hi, const std::function<double(double)>& exact) {
    double sup = 0.0;
    for (int j = 0; j <= pde.grid.J + 1; ++j) {
        const double x = pde.grid.node(j);
        if (x < lo || x > hi) continue;
        sup = std::max(sup, std::abs(pde.values(step, j) - exact(x)));
    }
    return sup;
}

}  // namespace

TEST_SUITE("pde_oracle") {

TEST_CASE("space grid validation") {
    CHECK_NOTHROW(SpaceGrid(-1.0, 1.0, 16).validate());
    CHECK_THROWS_AS(SpaceGrid(-1.0, 1.0, 15).validate(), InvalidArgument);
    CHECK_THROWS_AS(SpaceGrid(1.0, 1.0, 100).validate(), InvalidArgument);
    const SpaceGrid g{-6.0, 6.0, 400};
    CHECK(g.node(0) == -6.0);
    CHECK(g.node(401) == 6.0);
    CHECK(g.dx() == doctest::Approx(12.0 / 401.0));
}

TEST_CASE("digital terminal against the Gaussian distribution function") {
    const auto pde = solve_semilinear_pde(digital(0.0), SpaceGrid{-6.0, 6.0, 400}, TimeGrid(1.0, 200));
    CHECK(sup_error(pde, 0, -1.5, 1.5, normal_cdf) <= 0.02);
    for (int j = 0; j <= 401; ++j) CHECK(pde.values(200, j) == (pde.grid.node(j) >= 0.0 ? 1.0 : 0.0));
}

TEST_CASE("discounted linear terminal") {
    auto c = brownian_scalar();
    c.f = [](double, const Vector&, const Vector& y, const Matrix&) { return Vector(-0.1 * y); };
    c.h = [](const Vector& x) { return x; };
    const auto pde = solve_semilinear_pde(c, SpaceGrid{-6.0, 6.0, 400}, TimeGrid(1.0, 200));
    CHECK(std::abs(pde.value(0, 1.0) - std::exp(-0.1)) <= 0.005);
}

TEST_CASE("constant terminal is a fixed point") {
    auto c = brownian_scalar();
    c.b = [](double, const Vector& x) { return Vector(-0.7 * x); };
    c.h = [](const Vector&) { return vec1(1.25); };
    const auto pde = solve_semilinear_pde(c, SpaceGrid{-3.0, 3.0, 64}, TimeGrid(1.0, 40));
    CHECK((pde.values.array() == 1.25).all());
}

TEST_CASE("comparison of ordered data") {
    auto low = digital(0.0);
    auto high = digital(-0.3);
    low.f = [](double, const Vector& x, const Vector& y, const Matrix&) { return vec1(-0.2 * y(0) + 0.1 * std::sin(x(0))); };
    high.f = [](double, const Vector& x, const Vector& y, const Matrix&) {
        return vec1(-0.2 * y(0) + 0.1 * std::sin(x(0)) + 0.05);
    };
    const SpaceGrid sg{-5.0, 5.0, 200};
    const TimeGrid tg(1.0, 100);
    const auto u1 = solve_semilinear_pde(low, sg, tg);
    const auto u2 = solve_semilinear_pde(high, sg, tg);
    CHECK(((u2.values - u1.values).array() >= 0.0).all());
}

TEST_CASE("refinement on a smooth terminal") {
    auto c = brownian_scalar();
    c.h = [](const Vector& x) { return vec1(std::sin(x(0))); };
    const auto exact = [](double x) { return std::sin(x) * std::exp(-0.5); };
    const auto coarse = solve_semilinear_pde(c, SpaceGrid{-8.0, 8.0, 79}, TimeGrid(1.0, 20));
    const auto fine = solve_semilinear_pde(c, SpaceGrid{-8.0, 8.0, 159}, TimeGrid(1.0, 40));
    const double e1 = sup_error(coarse, 0, -2.0, 2.0, exact);
    const double e2 = sup_error(fine, 0, -2.0, 2.0, exact);
    CHECK(e1 / e2 >= 1.8);
}

TEST_CASE("bounded terminal data stays bounded") {
    const CarbonModel m = CarbonModel::baseline(0.0);
    const auto c = truncate_coefficients(carbon_coefficients(m), m.lambda);
    const auto pde = solve_semilinear_pde(c, SpaceGrid{-4.0, 5.0, 600}, TimeGrid(1.0, 1600));
    // Exact in real arithmetic; the floating-point scheme may overshoot by rounding.
    CHECK(pde.values.minCoeff() >= -1e-12);
    CHECK(pde.values.maxCoeff() <= m.lambda + 1e-12);
}

TEST_CASE("explicit drift bound is enforced") {
    auto c = digital(0.0);
    c.b = [](double, const Vector&) { return vec1(500.0); };
    try {
        solve_semilinear_pde(c, SpaceGrid{-6.0, 6.0, 400}, TimeGrid(1.0, 10));
        FAIL("expected a step-size error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("|a| dt/dx <= 1") != std::string::npos);
    }
}

TEST_CASE("only scalar problems") {
    auto c = brownian_scalar();
    c.dims = {2, 1, 1};
    CHECK_THROWS_AS(solve_semilinear_pde(c, SpaceGrid{}, TimeGrid(1.0, 10)), InvalidArgument);
    CHECK_THROWS_AS(solve_semilinear_pde(brownian_scalar(2.0), SpaceGrid{}, TimeGrid(1.0, 10)), InvalidArgument);
}

TEST_CASE("field comparison") {
    auto c = brownian_scalar();
    c.h = [](const Vector&) { return vec1(0.4); };
    const TimeGrid tg(1.0, 10);
    const auto pde = solve_semilinear_pde(c, SpaceGrid{-3.0, 3.0, 32}, TimeGrid(1.0, 40));
    auto noise = std::make_shared<const NoiseBlock>(sample_noise(tg, 2000, 1, 1));
    const auto paths = simulate_sde(c.b, c.sigma, c.x0, noise);
    const auto field = solve_decoupled_bsde(paths, c, BasisSpec::default_for(1), PicardConfig{});
    const auto cmp = compare_field(pde, field, -1.0, 1.0, {0.0, 0.5});
    CHECK(cmp.sup <= 1e-12);
    CHECK(cmp.points > 0);
    CHECK_THROWS_AS(compare_field(pde, field, 10.0, 11.0, {0.0}), InvalidArgument);
    CHECK_THROWS_AS(compare_field(pde, field, -1.0, 1.0, {0.33}), InvalidArgument);
}

}  // TEST_SUITE
