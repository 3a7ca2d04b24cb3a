#include "fbsde/model.hpp"

#include "fbsde/error.hpp"

namespace fbsde {

namespace {
constexpr const char* kModule = "model_core";
}

void Dimensions::validate() const {
    require(m >= 1 && n >= 1 && d >= 1, kModule, "dimensions m, n, d must all be >= 1");
    require(m <= kMaxDim && n <= kMaxDim && d <= kMaxDim, kModule,
            "dimensions are capped at " + std::to_string(kMaxDim));
}

void CoefficientSet::validate() const {
    dims.validate();
    require(static_cast<bool>(b) && static_cast<bool>(sigma) && static_cast<bool>(f) &&
                static_cast<bool>(g) && static_cast<bool>(h),
            kModule, "coefficient set '" + name + "' is missing an evaluator");
    require(T > 0.0 && std::isfinite(T), kModule, "horizon T must be positive");
    require(x0.size() == dims.m, kModule, "x0 must have m entries");
}

void GrowthConstants::validate() const {
    require(C >= 0.0 && r >= 0.0, kModule, "growth constants C and r must be nonnegative");
    require(epsilon > 0.0, kModule, "ellipticity constant epsilon must be positive");
    require(kappa > 0.0, kModule, "drift modulus kappa must be positive");
}

void ConditionProfile::validate(const Dimensions& dims) const {
    constants.validate();
    if (backward == BackwardCondition::B3 || uniqueness == UniquenessCondition::U2)
        require(dims.d == 1, kModule, "conditions B3 and U2 require d = 1");
}

std::string to_string(ForwardCondition c) {
    switch (c) {
        case ForwardCondition::F1: return "F1";
        case ForwardCondition::F2: return "F2";
        case ForwardCondition::F3: return "F3";
        case ForwardCondition::none: break;
    }
    return "none";
}

std::string to_string(BackwardCondition c) {
    switch (c) {
        case BackwardCondition::B1: return "B1";
        case BackwardCondition::B2: return "B2";
        case BackwardCondition::B3: return "B3";
        case BackwardCondition::B4: return "B4";
        case BackwardCondition::none: break;
    }
    return "none";
}

std::string to_string(UniquenessCondition c) {
    switch (c) {
        case UniquenessCondition::U1: return "U1";
        case UniquenessCondition::U2: return "U2";
        case UniquenessCondition::B2: return "B2";
        case UniquenessCondition::none: break;
    }
    return "none";
}

std::string to_string(Verification v) {
    switch (v) {
        case Verification::declared: return "declared";
        case Verification::supported: return "numerically-supported";
        case Verification::refuted: return "numerically-refuted";
    }
    return "declared";
}

ForwardCondition parse_forward_condition(const std::string& s) {
    if (s == "F1") return ForwardCondition::F1;
    if (s == "F2") return ForwardCondition::F2;
    if (s == "F3") return ForwardCondition::F3;
    if (s == "none") return ForwardCondition::none;
    throw InvalidArgument(kModule, "unknown forward condition '" + s + "'");
}

BackwardCondition parse_backward_condition(const std::string& s) {
    if (s == "B1") return BackwardCondition::B1;
    if (s == "B2") return BackwardCondition::B2;
    if (s == "B3") return BackwardCondition::B3;
    if (s == "B4") return BackwardCondition::B4;
    if (s == "none") return BackwardCondition::none;
    throw InvalidArgument(kModule, "unknown backward condition '" + s + "'");
}

UniquenessCondition parse_uniqueness_condition(const std::string& s) {
    if (s == "U1") return UniquenessCondition::U1;
    if (s == "U2") return UniquenessCondition::U2;
    if (s == "B2") return UniquenessCondition::B2;
    if (s == "none") return UniquenessCondition::none;
    throw InvalidArgument(kModule, "unknown uniqueness condition '" + s + "'");
}

FieldFn augmented_driver(const CoefficientSet& coeffs) {
    return [f = coeffs.f, g = coeffs.g](double t, const Vector& x, const Vector& y, const Matrix& z) {
        const Vector gv = g(t, x, y, z);
        if (z.cols() != gv.size())
            throw InvalidArgument(kModule, "augmented driver: z has " + std::to_string(z.cols()) +
                                               " columns but g returned " +
                                               std::to_string(gv.size()) + " entries");
        Vector out = f(t, x, y, z);
        if (out.size() != z.rows())
            throw InvalidArgument(kModule, "augmented driver: f and z disagree on d");
        out.noalias() += z * gv;
        return out;
    };
}

CoefficientSet truncate_coefficients(const CoefficientSet& coeffs, double N) {
    require(N > 0.0, kModule, "truncation level N must be positive");
    CoefficientSet out = coeffs;
    out.name = coeffs.name + "|P_N";
    out.f = [f = coeffs.f, N](double t, const Vector& x, const Vector& y, const Matrix& z) {
        return f(t, x, project_to_ball(y, N), z);
    };
    out.g = [g = coeffs.g, N](double t, const Vector& x, const Vector& y, const Matrix& z) {
        return g(t, x, project_to_ball(y, N), z);
    };
    return out;
}

std::optional<double> default_truncation(const ConditionProfile& profile, double T) {
    if (profile.constants.r != 0.0) return std::nullopt;
    if (profile.backward == BackwardCondition::none) return std::nullopt;
    return y_bound(profile.constants.C, T);
}

}  // namespace fbsde
