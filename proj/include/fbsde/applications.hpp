#pragma once

#include "fbsde/pipeline.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fbsde {

// ---------------------------------------------------------------------------
// Epidemic control: X = log infections, policy alpha lowers the growth rate.

using ScalarFn = std::function<double(double)>;

struct PandemicModel {
    ScalarFn theta;        // growth exponent (convex, Lipschitz)
    ScalarFn dtheta_plus;  // its right derivative
    ScalarFn q;            // infection cost (convex, Lipschitz, nondecreasing)
    ScalarFn dq_plus;
    double sigma = 0.3;
    double T = 1.0;
    double x0 = 0.0;
    double C_y = 0.0;  // <= 0 selects exp(C T) - 1

    /// theta(x) = 0.3 + 0.1|x|, q(x) = max(x - 1, 0), sigma = 0.3, T = 1, x0 = 0.
    static PandemicModel benchmark();

    /// max(sampled |dtheta_plus|, sampled dq_plus, 1) over x in [-20, 20].
    double lipschitz_constant() const;
    double y_cap() const;  // C_y, resolved
    void validate() const;
};

/// Smooth cutoff: identity on [0, cap], zero outside (-1, cap + 1), cubic
/// smoothstep blends in between, |phi(y)| <= |y|.
double smooth_cutoff(double y, double cap);

CoefficientSet pandemic_coefficients(const PandemicModel& model);
ConditionProfile pandemic_profile(const PandemicModel& model);

/// alpha*[i](p) = max(Y[i](p), 0) / 2.
SliceSeries optimal_policy(const FbsdeSolution& sol);

/// A policy is a function of the current step, time and state only.
using PolicyFn = std::function<double(int step, double t, double x)>;

struct PolicyCost {
    double J = 0.0;
    double stderr = 0.0;
    Eigen::VectorXd per_path;  // pathwise Riemann sums
};

/// Simulates dX = (theta(X) - alpha) dt + sigma dW on `noise` and estimates
/// J = E sum_i (alpha_i^2 + q(X_i)) dt.
PolicyCost evaluate_policy_cost(const PandemicModel& model, const PolicyFn& alpha, const NoiseBlock& noise,
                                const TimeGrid& grid);
/// Precomputed adapted policy paths (M or M+1 slices of n_paths x 1).
PolicyCost evaluate_policy_cost(const PandemicModel& model, const SliceSeries& alpha, const NoiseBlock& noise,
                                const TimeGrid& grid);

struct PolicyComparison {
    std::string name;
    double J = 0.0;
    double stderr = 0.0;
    double diff = 0.0;  // J(alpha*) - J(alpha)
    double diff_stderr = 0.0;
    bool pass = true;  // diff <= 3 diff_stderr
};

/// J(alpha*) against {0, 0.25, 0.5, 1.5 alpha*, 0.5 alpha*} on common noise,
/// with alpha* = max(u, 0) / 2 in feedback form. Entry 0 is alpha* itself.
std::vector<PolicyComparison> compare_policies(const PandemicModel& model, const DecouplingField& field,
                                               const NoiseBlock& noise);

// ---------------------------------------------------------------------------
// Emission allowance market with N firms.

struct CarbonModel {
    int N = 2;
    std::vector<double> alphas{0.3, 0.5};
    double K = 0.2;       // cost-regime threshold on aggregate emissions
    double lambda = 1.0;  // penalty per unit
    double Lambda = 0.4;  // cap
    std::function<double(double t, double e)> b;
    std::function<double(double t, double e)> sigma;
    double E0 = 0.0;
    double T = 1.0;

    /// b = 0.5, sigma = 0.3, alphas (0.3, 0.5), K = E0 + 0.2, lambda = 1,
    /// Lambda = E0 + 0.4, T = 1.
    static CarbonModel baseline(double E0 = 0.0);
    void validate() const;
    /// Abatement multiplier of firm i: 1 / (1 - alpha_i 1{e >= K}).
    double multiplier(int i, double e) const;
    /// sum_i y / (1 - alpha_i 1{e >= K}).
    double aggregate_abatement(double e, double y) const;
};

CoefficientSet carbon_coefficients(const CarbonModel& model);
ConditionProfile carbon_profile(const CarbonModel& model);

struct McSettings {
    std::size_t n_paths = 100000;
    int steps = 50;
    std::uint64_t seed = 0;
    BasisSpec basis;
    PicardConfig picard;
};

struct AllowancePrice {
    double Y0 = 0.0;
    double stderr = 0.0;
    double terminal_mean = 0.0;  // mean Y_T along X
    double terminal_stderr = 0.0;
    FbsdeSolution solution;
    SliceSeries abatement;  // M+1 slices of n_paths x N
    std::optional<MartingaleReport> martingale;
};

/// Runs the coupled solve with truncation at lambda unless the settings
/// already pin a level. Bin bases get knots at K and Lambda unless given.
AllowancePrice price_allowance(const CarbonModel& model, const McSettings& mc);

}  // namespace fbsde
