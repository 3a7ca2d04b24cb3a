#pragma once

#include "fbsde/types.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace fbsde {

enum class BasisKind { polynomial, piecewise_constant_bins, local_linear_bins };

std::string to_string(BasisKind kind);
BasisKind parse_basis_kind(const std::string& s);

/// Finite-dimensional surrogate for E[ . | X_t = x].
struct BasisSpec {
    BasisKind kind = BasisKind::local_linear_bins;
    int size = 50;  // polynomial degree, or bins per dimension
    /// Optional per-dimension clip box. Empty: the empirical
    /// [clip_quantile, 1 - clip_quantile] box of the training states.
    std::vector<std::pair<double, double>> domain;
    double clip_quantile = 0.001;
    /// Known jump locations per dimension (bins only). Each knot replaces
    /// the nearest equal-probability edge, so no cell straddles it.
    std::vector<std::vector<double>> knots;

    void validate(int m) const;
    /// Local-linear on 50 equal-probability bins for m <= 2, cubic otherwise.
    static BasisSpec default_for(int m);
};

/// Axis-aligned clip box. Degenerate axes (lo == hi) are allowed.
struct ClipBox {
    Eigen::ArrayXd lo;
    Eigen::ArrayXd hi;

    bool contains(const double* x) const;
    /// Clips in place; returns true if any coordinate moved.
    bool clip(double* x) const;
};

/// A fitted least-squares model x -> R^q. Evaluation clips x to the
/// training box first, and is a deterministic pure function of x.
class RegressionModel {
public:
    RegressionModel() = default;

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    const ClipBox& box() const { return box_; }
    BasisKind kind() const { return kind_; }
    std::size_t basis_size() const;
    std::size_t n_samples() const { return n_samples_; }
    /// RMS of training residuals, per output column.
    const Eigen::VectorXd& residual_rms() const { return residual_rms_; }

    /// Writes q outputs to `out`; returns true if x had to be clipped.
    bool evaluate(const double* x, double* out) const;
    Eigen::VectorXd evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    /// Row-wise evaluation of a state slice; counts clipped rows if asked.
    Slice evaluate_rows(const Slice& states, std::size_t* clipped = nullptr) const;

    /// Constant model (used for the zero Picard initializer).
    static RegressionModel constant(int input_dim, const Eigen::VectorXd& value);

private:
    friend class RegressionDesign;

    struct Polynomial {
        int degree = 0;
        std::vector<int> exponents;  // basis_count x input_dim, row-major
        Eigen::MatrixXd coeffs;      // basis_count x q
    };
    struct Bins {
        std::vector<std::vector<double>> edges;  // interior edges per dimension
        std::vector<std::vector<double>> centers;
        std::vector<std::vector<double>> half_widths;
        std::vector<int> strides;
        int features = 1;            // 1 (constant) or 1 + m (local linear)
        Eigen::MatrixXd coeffs;      // (cells * features) x q
        std::vector<unsigned char> status;  // 0 fitted, 1 empty -> fallback
        std::shared_ptr<const RegressionModel> fallback;
    };

    int cell_of(const double* x) const;
    void basis_row(const double* x, double* phi) const;  // polynomial features

    int input_dim_ = 0;
    int output_dim_ = 0;
    BasisKind kind_ = BasisKind::polynomial;
    ClipBox box_;
    Polynomial poly_;
    Bins bins_;
    std::size_t n_samples_ = 0;
    Eigen::VectorXd residual_rms_;
};

/// Everything about a regression that depends only on the states of one
/// time slice: clip box, basis layout, cell membership and the factorized
/// (ridge-regularized) normal equations. Reused for every target fitted on
/// the same slice.
class RegressionDesign {
public:
    RegressionDesign(const Slice& states, const BasisSpec& spec, int slice_index = -1);
    ~RegressionDesign();
    RegressionDesign(RegressionDesign&&) noexcept;
    RegressionDesign& operator=(RegressionDesign&&) noexcept;

    /// Fits targets (n_paths x q). When `fitted` is given it receives the
    /// model evaluated at the training states.
    RegressionModel fit(const Slice& targets, Slice* fitted = nullptr) const;
    std::size_t basis_size() const;
    const ClipBox& box() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Least-squares projection of targets (n_paths x q) on the basis evaluated
/// at states (n_paths x m).
RegressionModel fit_conditional_expectation(const Slice& targets, const Slice& states, const BasisSpec& basis,
                                            int slice_index = -1);

/// Legendre polynomial P_k(x).
double legendre(int k, double x);

}  // namespace fbsde
