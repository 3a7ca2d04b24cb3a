#pragma once

#include "fbsde/model.hpp"
#include "fbsde/noise.hpp"

#include <memory>
#include <string>

namespace fbsde {

/// Forward-state trajectories: states[i] is the n_paths x m slice at t_i.
struct PathEnsemble {
    TimeGrid grid;
    SliceSeries states;
    std::shared_ptr<const NoiseBlock> noise;
    std::string drift_tag;

    std::size_t n_paths() const { return states.empty() ? 0 : static_cast<std::size_t>(states.front().rows()); }
    int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().cols()); }
};

/// Explicit Euler-Maruyama with left-endpoint coefficients:
///   X_{i+1} = X_i + drift(t_i, X_i) dt + sigma(t_i, X_i) dW_i.
/// Every path starts from x0.
PathEnsemble simulate_sde(const DriftFn& drift, const DiffusionFn& sigma, const Vector& x0,
                          std::shared_ptr<const NoiseBlock> noise, std::string drift_tag = "b");

/// Same scheme with per-path initial states (n_paths x m).
PathEnsemble simulate_sde(const DriftFn& drift, const DiffusionFn& sigma, const Slice& initial,
                          std::shared_ptr<const NoiseBlock> noise, std::string drift_tag = "b");

/// Core scheme on an explicit increment array (used for shifted noise).
SliceSeries euler_maruyama(const DriftFn& drift, const DiffusionFn& sigma, const Slice& initial,
                           const SliceSeries& increments, const TimeGrid& grid);

/// Drift that depends on the path's own state through a step-indexed map,
/// e.g. b(t,x) + sigma(t,x) g(t,x,u(t_i,x),d(t_i,x)) for a fitted field.
using StepDriftFn = std::function<Vector(int step, double t, const Vector& x)>;

SliceSeries euler_maruyama(const StepDriftFn& drift, const DiffusionFn& sigma, const Slice& initial,
                           const SliceSeries& increments, const TimeGrid& grid);

/// n_paths x m slice with every row equal to x0.
Slice replicate_initial(const Vector& x0, std::size_t n_paths);

}  // namespace fbsde
