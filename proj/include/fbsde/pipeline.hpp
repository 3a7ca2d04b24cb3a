#pragma once

#include "fbsde/bsde.hpp"
#include "fbsde/girsanov.hpp"
#include "fbsde/paths.hpp"

#include <optional>

namespace fbsde {

struct CouplingResidual {
    double rms = 0.0;           // over paths and steps
    double terminal_rms = 0.0;  // Y_M - h(X_M)
};

struct FbsdeDiagnostics {
    CouplingResidual residual;
    std::optional<MartingaleReport> martingale;  // absent when g vanishes identically along F
    double y_sup = 0.0;
    double clipped_fraction = 0.0;  // field evaluations along X outside the training box
};

struct FbsdeSolution {
    PathEnsemble F;  // drift b, the paths the field was fitted on
    PathEnsemble X;  // recoupled, drift b + sigma g
    SliceSeries Y;   // M+1 slices of n_paths x d
    SliceSeries Z;   // M slices of n_paths x (d*n), row-major d x n
    DecouplingField field;
    SliceSeries g_along_F;  // M slices of n_paths x n
    FbsdeDiagnostics diagnostics;
    bool g_vanishes = false;
};

struct SolveOptions {
    /// Optional per-path initial states; default: every path starts at x0.
    std::optional<Slice> initial;
};

/// Decouple, solve the backward equation on F, recouple with the same noise.
FbsdeSolution solve_fbsde(const CoefficientSet& coeffs, const TimeGrid& grid, std::size_t n_paths,
                          std::uint64_t seed, const BasisSpec& basis, const PicardConfig& cfg,
                          const SolveOptions& options = {});

CouplingResidual coupling_residual(const FbsdeSolution& sol, const CoefficientSet& coeffs);

/// g(t_i, x, u(t_i, x), d(t_i, x)) along a path ensemble, M slices of n_paths x n.
SliceSeries coupling_along(const PathEnsemble& paths, const CoefficientSet& coeffs, const DecouplingField& field);

}  // namespace fbsde
