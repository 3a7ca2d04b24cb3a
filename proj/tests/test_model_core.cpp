#include "fbsde/applications.hpp"
#include "fbsde/audit.hpp"
#include "fbsde/error.hpp"
#include "fbsde/model.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace fbsde;
using fbsde::testing::brownian_scalar;
using fbsde::testing::vec1;

TEST_SUITE("model_core") {

TEST_CASE("augmented driver of zero coefficients vanishes") {
    const auto c = brownian_scalar();
    const auto fbar = augmented_driver(c);
    CHECK(fbar(0.3, vec1(1.0), vec1(2.0), Matrix::Constant(1, 1, 5.0))(0) == 0.0);
}

TEST_CASE("augmented driver adds z times g") {
    auto c = brownian_scalar();
    c.f = [](double, const Vector&, const Vector&, const Matrix&) { return vec1(1.0); };
    c.g = [](double, const Vector&, const Vector&, const Matrix&) { return vec1(2.0); };
    CHECK(augmented_driver(c)(0.0, vec1(0.0), vec1(0.0), Matrix::Constant(1, 1, 3.0))(0) == 7.0);
}

TEST_CASE("augmented driver for one-firm carbon model") {
    CarbonModel m = CarbonModel::baseline(0.0);
    m.N = 1;
    m.alphas = {0.5};
    m.K = 0.0;
    m.lambda = 1.0;
    m.sigma = [](double, double) { return 1.0; };
    CHECK(m.aggregate_abatement(1.0, 0.3) == doctest::Approx(0.6).epsilon(1e-15));
    // Abatement lowers emissions, so the coupling carries a minus sign.
    const auto fbar = augmented_driver(carbon_coefficients(m));
    CHECK(fbar(0.0, vec1(1.0), vec1(0.3), Matrix::Constant(1, 1, 0.2))(0) == doctest::Approx(-0.12).epsilon(1e-14));
}

TEST_CASE("augmented driver rejects a g of the wrong size") {
    auto c = brownian_scalar();
    c.g = [](double, const Vector&, const Vector&, const Matrix&) { return Vector::Zero(2).eval(); };
    const auto fbar = augmented_driver(c);
    CHECK_THROWS_AS(fbar(0.0, vec1(0.0), vec1(0.0), Matrix::Zero(1, 1)), InvalidArgument);
}

TEST_CASE("truncation is the identity inside the ball") {
    auto c = brownian_scalar();
    c.f = [](double, const Vector&, const Vector& y, const Matrix&) { return vec1(y(0) * y(0) + 1.0); };
    const auto tc = truncate_coefficients(c, 2.0);
    for (double y : {-2.0, -1.3, 0.0, 0.7, 2.0})
        CHECK(tc.f(0.0, vec1(0.0), vec1(y), Matrix::Zero(1, 1))(0) == c.f(0.0, vec1(0.0), vec1(y), Matrix::Zero(1, 1))(0));
}

TEST_CASE("truncation evaluates f at the projected y") {
    auto c = brownian_scalar();
    c.f = [](double, const Vector&, const Vector& y, const Matrix&) { return vec1(y(0)); };
    const auto tc = truncate_coefficients(c, 1.0);
    CHECK(tc.f(0.0, vec1(0.0), vec1(4.0), Matrix::Zero(1, 1))(0) == 1.0);
    CHECK(tc.f(0.0, vec1(0.0), vec1(-4.0), Matrix::Zero(1, 1))(0) == -1.0);
}

TEST_CASE("projection keeps points on the sphere") {
    Vector y(2);
    y << 3.0, 4.0;
    const Vector p = project_to_ball(y, 5.0);
    CHECK(p(0) == 3.0);
    CHECK(p(1) == 4.0);
}

TEST_CASE("truncation leaves b, sigma and h alone") {
    auto c = brownian_scalar();
    c.b = [](double t, const Vector& x) { return vec1(t + x(0)); };
    c.h = [](const Vector& x) { return vec1(10.0 * x(0)); };
    const auto tc = truncate_coefficients(c, 0.5);
    CHECK(tc.b(0.25, vec1(3.0))(0) == 3.25);
    CHECK(tc.h(vec1(7.0))(0) == 70.0);
    CHECK(tc.sigma(0.0, vec1(9.0))(0, 0) == 1.0);
}

TEST_CASE("y_bound closed form") {
    CHECK(y_bound(0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y_bound(1.0, 1.0) == doctest::Approx(std::exp(2.0) * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(y_bound(1.0, 1.0) == doctest::Approx(10.45).epsilon(5e-4));
    CHECK(y_bound(1.0, 0.25) == doctest::Approx(std::exp(0.5) * std::sqrt(1.25)).epsilon(1e-15));
    CHECK(y_bound(1.0, 0.25) == doctest::Approx(1.8433).epsilon(1e-4));
}

TEST_CASE("default truncation needs a backward condition and r = 0") {
    ConditionProfile p;
    p.constants.C = 1.0;
    p.constants.r = 0.0;
    CHECK_FALSE(default_truncation(p, 1.0).has_value());
    p.backward = BackwardCondition::B1;
    REQUIRE(default_truncation(p, 1.0).has_value());
    CHECK(*default_truncation(p, 1.0) == y_bound(1.0, 1.0));
    p.constants.r = 1.0;
    CHECK_FALSE(default_truncation(p, 1.0).has_value());
}

TEST_CASE("dimension and profile validation") {
    CHECK_THROWS_AS((Dimensions{0, 1, 1}.validate()), InvalidArgument);
    CHECK_THROWS_AS((Dimensions{1, 1, kMaxDim + 1}.validate()), InvalidArgument);
    ConditionProfile p;
    p.backward = BackwardCondition::B3;
    CHECK_THROWS_AS(p.validate(Dimensions{1, 1, 2}), InvalidArgument);
    p.backward = BackwardCondition::none;
    p.uniqueness = UniquenessCondition::U2;
    CHECK_THROWS_AS(p.validate(Dimensions{1, 1, 2}), InvalidArgument);
    CHECK_NOTHROW(p.validate(Dimensions{2, 2, 1}));
    p.constants.epsilon = 0.0;
    CHECK_THROWS_AS(p.validate(Dimensions{1, 1, 1}), InvalidArgument);
}

TEST_CASE("coefficient set validation") {
    auto c = brownian_scalar();
    CHECK_NOTHROW(c.validate());
    c.T = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = brownian_scalar();
    c.x0 = Vector::Zero(2);
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = brownian_scalar();
    c.h = nullptr;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("condition names round-trip") {
    for (auto fc : {ForwardCondition::F1, ForwardCondition::F2, ForwardCondition::F3, ForwardCondition::none})
        CHECK(parse_forward_condition(to_string(fc)) == fc);
    for (auto bc : {BackwardCondition::B1, BackwardCondition::B2, BackwardCondition::B3, BackwardCondition::B4,
                    BackwardCondition::none})
        CHECK(parse_backward_condition(to_string(bc)) == bc);
    for (auto uc : {UniquenessCondition::U1, UniquenessCondition::U2, UniquenessCondition::B2, UniquenessCondition::none})
        CHECK(parse_uniqueness_condition(to_string(uc)) == uc);
    CHECK_THROWS_AS(parse_forward_condition("F9"), InvalidArgument);
}

TEST_CASE("carbon model passes its audit") {
    const CarbonModel m = CarbonModel::baseline(0.0);
    const auto report = audit_conditions(carbon_coefficients(m), carbon_profile(m), SampleSpec::standard(m.T));
    for (const auto& e : report.entries) CHECK_MESSAGE(e.tag != Verification::refuted, e.condition << " " << e.check);
    CHECK(report.all_supported());
    CHECK(report.profile.forward_tag == Verification::supported);
    CHECK(report.profile.backward_tag == Verification::supported);
}

TEST_CASE("localized pandemic model passes its audit") {
    const PandemicModel m = PandemicModel::benchmark();
    const auto report = audit_conditions(pandemic_coefficients(m), pandemic_profile(m), SampleSpec::standard(m.T));
    for (const auto& e : report.entries) CHECK_MESSAGE(e.tag != Verification::refuted, e.condition << " " << e.check);
    CHECK(report.all_supported());
    CHECK(report.profile.uniqueness_tag == Verification::supported);
}

TEST_CASE("degenerate diffusion is refuted with a witness") {
    auto c = brownian_scalar();
    c.sigma = [](double, const Vector&) { return Matrix::Zero(1, 1).eval(); };
    ConditionProfile p;
    p.forward = ForwardCondition::F3;
    const auto report = audit_conditions(c, p, SampleSpec::standard(1.0));
    bool found = false;
    for (const auto& e : report.entries) {
        if (e.condition != "ellipticity") continue;
        found = true;
        CHECK(e.tag == Verification::refuted);
        REQUIRE(e.witness.has_value());
        CHECK(e.detail.find("0") != std::string::npos);
    }
    CHECK(found);
    CHECK_FALSE(report.all_supported());
    CHECK(report.tightest_epsilon == std::numeric_limits<double>::infinity());
}

TEST_CASE("audit rejects an empty sample grid") {
    SampleSpec empty;
    CHECK_THROWS_AS(audit_conditions(brownian_scalar(), ConditionProfile{}, empty), InvalidArgument);
}

}  // TEST_SUITE
