#pragma once

#include "fbsde/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fbsde {

/// Uniform axis [lo, hi] with `points` samples, applied to every coordinate
/// of a block (x, y or z).
struct SampleAxis {
    double lo = -1.0;
    double hi = 1.0;
    int points = 0;

    std::vector<double> nodes() const;
};

/// Tensor grid over (t, x, y, z) on which the audit samples each inequality.
struct SampleSpec {
    std::vector<double> times;
    SampleAxis x;
    SampleAxis y;
    SampleAxis z;

    bool empty() const;
    static SampleSpec standard(double T, double x_radius = 4.0, double y_radius = 4.0,
                               double z_radius = 4.0);
};

struct AuditEntry {
    std::string condition;  // F1, B4, U2, ellipticity, ...
    std::string check;      // the sampled inequality or property
    Verification tag = Verification::declared;
    std::string detail;
    std::optional<std::string> witness;
};

struct AuditReport {
    ConditionProfile profile;  // tags updated from the entries
    std::vector<AuditEntry> entries;
    double tightest_epsilon = 0.0;  // smallest eps consistent with sampled sigma sigma^T
    double drift_modulus = 0.0;     // sampled |b(t,0)| + sup_{|x-x'|<=1} |b(t,x)-b(t,x')|
    std::size_t evaluations = 0;

    bool all_supported() const;
};

/// Samples every inequality behind the declared conditions on the grid.
/// A sampled violation refutes the flag (with the witness point); absence of
/// violations only supports it. Parts that cannot be sampled (the moduli
/// theta, rho_0, and the time profiles of U2) are reported as declared.
AuditReport audit_conditions(const CoefficientSet& coeffs, const ConditionProfile& profile,
                             const SampleSpec& spec);

}  // namespace fbsde
