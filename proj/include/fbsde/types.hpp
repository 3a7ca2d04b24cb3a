#pragma once

#include <Eigen/Dense>

#include <vector>

namespace fbsde {

/// Upper bound on every state/noise/backward dimension. Small fixed-capacity
/// Eigen types keep coefficient evaluation free of heap traffic.
inline constexpr int kMaxDim = 8;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

/// One time slice of a path quantity: row p holds path p.
using Slice = Eigen::MatrixXd;

/// A quantity along the time grid, one Slice per node (or per step).
using SliceSeries = std::vector<Slice>;

/// Row-major flattening of a d x n matrix into a slice row, and back.
template <typename Derived>
void flatten_into(const Eigen::MatrixBase<Derived>& z, Eigen::Ref<Eigen::RowVectorXd> row) {
    const auto cols = z.cols();
    for (Eigen::Index r = 0; r < z.rows(); ++r)
        for (Eigen::Index c = 0; c < cols; ++c) row(r * cols + c) = z(r, c);
}

template <typename RowDerived>
Matrix unflatten(const Eigen::MatrixBase<RowDerived>& row, int rows, int cols) {
    Matrix z(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) z(r, c) = row(r * cols + c);
    return z;
}

}  // namespace fbsde
