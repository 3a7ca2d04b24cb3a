#pragma once

#include "fbsde/model.hpp"
#include "fbsde/paths.hpp"
#include "fbsde/regression.hpp"

#include <optional>
#include <vector>

namespace fbsde {

/// First iterate of the Picard scheme.
enum class PicardInit {
    self_consistent,  // explicit backward scheme using the sweep's own regressions
    zero,             // u_0 = 0, d_0 = 0
};

std::string to_string(PicardInit init);
PicardInit parse_picard_init(const std::string& s);

struct PicardConfig {
    int max_iters = 10;
    double tol = 1e-4;  // sup over paths and slices of |u_k - u_{k-1}|
    std::optional<double> truncation_N;
    PicardInit init = PicardInit::self_consistent;
    /// Per-step bound on |f_bar| (componentwise); experimental, for quadratic drivers.
    std::optional<double> driver_clip;

    void validate() const;
};

/// Markovian decoupling field (u, d) on a time grid, as fitted regression
/// models: u[i] for i = 0..M and z[i] for i = 0..M-1 (d x n flattened row-major).
struct DecouplingField {
    TimeGrid grid;
    Dimensions dims;
    std::vector<RegressionModel> u;
    std::vector<RegressionModel> z;
    int picard_iterations = 0;
    bool converged = false;
    double sup_norm_estimate = 0.0;
    std::vector<double> history;  // successive sup differences
    double y0_stderr = 0.0;
    bool experimental = false;

    Vector value(int step, const Vector& x) const;
    Matrix gradient(int step, const Vector& x) const;
    /// Row-wise u(t_i, .) on a slice; counts clipped rows when asked.
    Slice value_rows(int step, const Slice& states, std::size_t* clipped = nullptr) const;
    Slice gradient_rows(int step, const Slice& states, std::size_t* clipped = nullptr) const;
};

/// One backward regression sweep. Without `previous` the driver is evaluated
/// at the sweep's own fitted values (explicit scheme); with it, at the
/// previous field's values along the same paths (one Picard step).
DecouplingField backward_sweep(const PathEnsemble& paths, const FieldFn& driver, const TerminalFn& h,
                               int d, const BasisSpec& basis, const DecouplingField* previous = nullptr,
                               std::optional<double> driver_clip = std::nullopt);

/// Picard iteration of backward sweeps on fixed regression designs.
DecouplingField solve_decoupled_bsde(const PathEnsemble& paths, const CoefficientSet& coeffs,
                                     const BasisSpec& basis, const PicardConfig& cfg);

}  // namespace fbsde
