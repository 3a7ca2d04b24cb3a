#pragma once

#include "fbsde/model.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace fbsde::testing {

/// Hand-rolled generator for property tests. Each case draws from its own
/// seeded engine so failures reproduce from the printed case index.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    double normal() { return std::normal_distribution<double>()(engine_); }
    bool coin() { return integer(0, 1) == 1; }

    Vector vector(int size, double lo, double hi) {
        Vector v(size);
        for (int i = 0; i < size; ++i) v(i) = uniform(lo, hi);
        return v;
    }

    Matrix matrix(int rows, int cols, double lo, double hi) {
        Matrix m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = uniform(lo, hi);
        return m;
    }

    /// Doubles spanning many magnitudes, signs, and a few special values.
    double wide() {
        switch (integer(0, 9)) {
            case 0: return 0.0;
            case 1: return -0.0;
            case 2: return std::nextafter(1.0, 2.0);
            case 3: return 1e-300 * uniform(1.0, 10.0);
            default: return (coin() ? 1.0 : -1.0) * std::pow(10.0, uniform(-20.0, 20.0)) * uniform(1.0, 10.0);
        }
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

inline Vector vec1(double v) { return Vector::Constant(1, v); }

/// dX = dW, Y_T = h(X_T), zero driver and coupling; callers override pieces.
inline CoefficientSet brownian_scalar(double T = 1.0, double x0 = 0.0) {
    CoefficientSet c;
    c.name = "test";
    c.dims = {1, 1, 1};
    c.T = T;
    c.x0 = vec1(x0);
    c.b = [](double, const Vector&) { return Vector::Zero(1).eval(); };
    c.sigma = [](double, const Vector&) { return Matrix::Identity(1, 1).eval(); };
    c.f = [](double, const Vector&, const Vector&, const Matrix&) { return Vector::Zero(1).eval(); };
    c.g = [](double, const Vector&, const Vector&, const Matrix&) { return Vector::Zero(1).eval(); };
    c.h = [](const Vector&) { return Vector::Zero(1).eval(); };
    return c;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace fbsde::testing
