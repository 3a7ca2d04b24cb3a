#pragma once

#include "fbsde/types.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <string>

namespace fbsde {

/// m: forward state, n: Brownian, d: backward state.
struct Dimensions {
    int m = 1;
    int n = 1;
    int d = 1;

    void validate() const;
    friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

using DriftFn = std::function<Vector(double t, const Vector& x)>;
using DiffusionFn = std::function<Matrix(double t, const Vector& x)>;
/// Evaluator of the form (t, x, y, z) -> R^k, used for f (k = d) and g (k = n).
using FieldFn = std::function<Vector(double t, const Vector& x, const Vector& y, const Matrix& z)>;
using TerminalFn = std::function<Vector(const Vector& x)>;

/// Complete definition of a coupled FBSDE
///   dX = (b + sigma g)(t, X, Y, Z) dt + sigma(t, X) dW,   X_0 = x0
///   dY = -f(t, X, Y, Z) dt + Z dW,                         Y_T = h(X_T).
/// Evaluators must be pure: they are called concurrently from path workers.
struct CoefficientSet {
    std::string name;
    Dimensions dims;
    DriftFn b;
    DiffusionFn sigma;
    FieldFn f;
    FieldFn g;
    TerminalFn h;
    double T = 1.0;
    Vector x0;

    void validate() const;
};

struct GrowthConstants {
    double C = 1.0;
    double r = 0.0;
    double epsilon = 1.0;
    double kappa = 1.0;

    void validate() const;
};

enum class ForwardCondition { F1, F2, F3, none };
enum class BackwardCondition { B1, B2, B3, B4, none };
enum class UniquenessCondition { U1, U2, B2, none };
enum class Verification { declared, supported, refuted };

std::string to_string(ForwardCondition c);
std::string to_string(BackwardCondition c);
std::string to_string(UniquenessCondition c);
std::string to_string(Verification v);
ForwardCondition parse_forward_condition(const std::string& s);
BackwardCondition parse_backward_condition(const std::string& s);
UniquenessCondition parse_uniqueness_condition(const std::string& s);

/// Hypotheses a coefficient set is declared to satisfy. Verification tags
/// start as `declared` and are only changed by audit_conditions().
struct ConditionProfile {
    ForwardCondition forward = ForwardCondition::none;
    BackwardCondition backward = BackwardCondition::none;
    UniquenessCondition uniqueness = UniquenessCondition::none;
    GrowthConstants constants;
    Verification forward_tag = Verification::declared;
    Verification backward_tag = Verification::declared;
    Verification uniqueness_tag = Verification::declared;

    void validate(const Dimensions& dims) const;
};

/// Radial projection of y onto the closed ball of radius N. Points already
/// inside the ball are returned unchanged (bitwise), and the result of a
/// projection is itself inside the ball, so the map is idempotent.
template <typename Derived>
auto project_to_ball(const Eigen::MatrixBase<Derived>& y, typename Derived::Scalar N) {
    using Scalar = typename Derived::Scalar;
    using Result = Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime,
                                 Eigen::ColMajor, Derived::MaxRowsAtCompileTime,
                                 Derived::MaxColsAtCompileTime>;
    Result out = y;
    const Scalar norm = out.norm();
    if (!(norm > N)) return out;
    Scalar scale = N / norm;
    out = y * scale;
    while (out.norm() > N) {
        scale = std::nextafter(scale, Scalar(0));
        out = y * scale;
    }
    return out;
}

/// exp(C(C+1)T) * sqrt(C^2 + T): a-priori sup bound on |Y| for r = 0 data.
template <typename Scalar>
Scalar y_bound(Scalar C, Scalar T) {
    using std::exp;
    using std::sqrt;
    return exp(C * (C + Scalar(1)) * T) * sqrt(C * C + T);
}

/// f + z g, the driver of the decoupled backward equation.
FieldFn augmented_driver(const CoefficientSet& coeffs);

/// Same coefficients with y replaced by its projection onto the N-ball
/// inside f and g. b, sigma, h are untouched.
CoefficientSet truncate_coefficients(const CoefficientSet& coeffs, double N);

/// Truncation level implied by a profile: y_bound(C, T) when r == 0.
std::optional<double> default_truncation(const ConditionProfile& profile, double T);

}  // namespace fbsde
