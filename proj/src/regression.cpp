#include "fbsde/regression.hpp"

#include "fbsde/error.hpp"
#include "fbsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace fbsde {

namespace {

constexpr const char* kModule = "bsde_regression";
constexpr double kRidge = 1e-8;
constexpr int kRefineSteps = 4;

std::string slice_label(int slice) {
    return slice >= 0 ? " at time slice " + std::to_string(slice) : std::string();
}

/// Exponent tuples of total degree <= p in m variables, graded order.
std::vector<int> total_degree_exponents(int m, int p) {
    std::vector<int> out;
    std::vector<int> e(m, 0);
    for (int total = 0; total <= p; ++total) {
        // Enumerate all e with sum == total (lexicographic, last index fastest).
        std::function<void(int, int)> rec = [&](int k, int left) {
            if (k == m - 1) {
                e[k] = left;
                out.insert(out.end(), e.begin(), e.end());
                return;
            }
            for (int v = left; v >= 0; --v) {
                e[k] = v;
                rec(k + 1, left - v);
            }
        };
        rec(0, total);
    }
    return out;
}

ClipBox make_box(const Slice& states, const BasisSpec& spec) {
    const auto m = states.cols();
    ClipBox box{Eigen::ArrayXd(m), Eigen::ArrayXd(m)};
    if (!spec.domain.empty()) {
        for (Eigen::Index k = 0; k < m; ++k) {
            box.lo(k) = spec.domain[static_cast<std::size_t>(k)].first;
            box.hi(k) = spec.domain[static_cast<std::size_t>(k)].second;
        }
        return box;
    }
    const auto n = states.rows();
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < m; ++k) {
        for (Eigen::Index p = 0; p < n; ++p) col[static_cast<std::size_t>(p)] = states(p, k);
        std::sort(col.begin(), col.end());
        const double last = static_cast<double>(n - 1);
        const auto lo_i = static_cast<std::size_t>(std::floor(spec.clip_quantile * last));
        const auto hi_i = static_cast<std::size_t>(std::ceil((1.0 - spec.clip_quantile) * last));
        box.lo(k) = col[lo_i];
        box.hi(k) = col[hi_i];
    }
    return box;
}

/// Ridge-stabilized solve of A c = rhs followed by refinement steps against
/// the unregularized A. Well-conditioned directions converge to the plain
/// least-squares solution; near-null directions keep the ridge damping.
Eigen::MatrixXd refined_solve(const Eigen::LDLT<Eigen::MatrixXd>& ridged, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& rhs) {
    Eigen::MatrixXd c = ridged.solve(rhs);
    for (int k = 0; k < kRefineSteps; ++k) c += ridged.solve(rhs - A * c);
    return c;
}

}  // namespace

double legendre(int k, double x) {
    if (k == 0) return 1.0;
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= k; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

std::string to_string(BasisKind kind) {
    switch (kind) {
        case BasisKind::polynomial: return "polynomial";
        case BasisKind::piecewise_constant_bins: return "piecewise-constant-bins";
        case BasisKind::local_linear_bins: return "local-linear-bins";
    }
    return "polynomial";
}

BasisKind parse_basis_kind(const std::string& s) {
    if (s == "polynomial") return BasisKind::polynomial;
    if (s == "piecewise-constant-bins") return BasisKind::piecewise_constant_bins;
    if (s == "local-linear-bins") return BasisKind::local_linear_bins;
    throw InvalidArgument(kModule, "unknown basis kind '" + s + "'");
}

void BasisSpec::validate(int m) const {
    if (kind == BasisKind::polynomial)
        require(size >= 0 && size <= 10, kModule, "polynomial degree must be in [0, 10]");
    else
        require(size >= 2, kModule, "bin count must be >= 2");
    require(domain.empty() || static_cast<int>(domain.size()) == m, kModule,
            "basis domain must give one interval per state dimension");
    for (const auto& [lo, hi] : domain) require(lo <= hi, kModule, "basis domain interval has lo > hi");
    require(knots.empty() || static_cast<int>(knots.size()) == m, kModule,
            "basis knots must give one list per state dimension");
    for (const auto& list : knots)
        for (double k : list) require(std::isfinite(k), kModule, "basis knots must be finite");
    require(clip_quantile >= 0.0 && clip_quantile < 0.5, kModule, "clip quantile must be in [0, 0.5)");
}

BasisSpec BasisSpec::default_for(int m) {
    BasisSpec spec;
    if (m <= 2) {
        spec.kind = BasisKind::local_linear_bins;
        spec.size = 50;
    } else {
        spec.kind = BasisKind::polynomial;
        spec.size = 3;
    }
    return spec;
}

bool ClipBox::contains(const double* x) const {
    for (Eigen::Index k = 0; k < lo.size(); ++k)
        if (x[k] < lo(k) || x[k] > hi(k)) return false;
    return true;
}

bool ClipBox::clip(double* x) const {
    bool moved = false;
    for (Eigen::Index k = 0; k < lo.size(); ++k) {
        if (x[k] < lo(k)) {
            x[k] = lo(k);
            moved = true;
        } else if (x[k] > hi(k)) {
            x[k] = hi(k);
            moved = true;
        }
    }
    return moved;
}

// ---------------------------------------------------------------------------
// RegressionModel

std::size_t RegressionModel::basis_size() const {
    if (kind_ == BasisKind::polynomial) return static_cast<std::size_t>(poly_.coeffs.rows());
    return static_cast<std::size_t>(bins_.coeffs.rows());
}

void RegressionModel::basis_row(const double* x, double* phi) const {
    const int m = input_dim_;
    const int p = poly_.degree;
    double table[kMaxDim][11];
    for (int k = 0; k < m; ++k) {
        const double width = box_.hi(k) - box_.lo(k);
        const double xi = width > 0.0 ? 2.0 * (x[k] - box_.lo(k)) / width - 1.0 : 0.0;
        table[k][0] = 1.0;
        if (p >= 1) table[k][1] = xi;
        for (int j = 2; j <= p; ++j)
            table[k][j] = ((2.0 * j - 1.0) * xi * table[k][j - 1] - (j - 1.0) * table[k][j - 2]) / j;
    }
    const auto K = poly_.coeffs.rows();
    for (Eigen::Index j = 0; j < K; ++j) {
        double v = 1.0;
        const int* e = &poly_.exponents[static_cast<std::size_t>(j * m)];
        for (int k = 0; k < m; ++k) v *= table[k][e[k]];
        phi[j] = v;
    }
}

int RegressionModel::cell_of(const double* x) const {
    int cell = 0;
    for (int k = 0; k < input_dim_; ++k) {
        const auto& e = bins_.edges[static_cast<std::size_t>(k)];
        const int bin = static_cast<int>(std::upper_bound(e.begin(), e.end(), x[k]) - e.begin());
        cell += bin * bins_.strides[static_cast<std::size_t>(k)];
    }
    return cell;
}

bool RegressionModel::evaluate(const double* x_in, double* out) const {
    double x[kMaxDim];
    std::copy(x_in, x_in + input_dim_, x);
    const bool clipped = box_.clip(x);
    const int q = output_dim_;
    if (kind_ == BasisKind::polynomial) {
        double phi[512];
        basis_row(x, phi);
        const auto K = poly_.coeffs.rows();
        for (int c = 0; c < q; ++c) {
            double s = 0.0;
            for (Eigen::Index j = 0; j < K; ++j) s += phi[j] * poly_.coeffs(j, c);
            out[c] = s;
        }
        return clipped;
    }
    const int cell = cell_of(x);
    if (bins_.status[static_cast<std::size_t>(cell)] == 1) {
        bins_.fallback->evaluate(x, out);
        return clipped;
    }
    const int F = bins_.features;
    double phi[1 + kMaxDim];
    phi[0] = 1.0;
    if (F > 1) {
        int rest = cell;
        for (int k = input_dim_ - 1; k >= 0; --k) {
            const int stride = bins_.strides[static_cast<std::size_t>(k)];
            const int bin = rest / stride;
            rest -= bin * stride;
            const double hw = bins_.half_widths[static_cast<std::size_t>(k)][static_cast<std::size_t>(bin)];
            const double c = bins_.centers[static_cast<std::size_t>(k)][static_cast<std::size_t>(bin)];
            phi[1 + k] = hw > 0.0 ? (x[k] - c) / hw : 0.0;
        }
    }
    const Eigen::Index row0 = static_cast<Eigen::Index>(cell) * F;
    for (int c = 0; c < q; ++c) {
        double s = 0.0;
        for (int j = 0; j < F; ++j) s += phi[j] * bins_.coeffs(row0 + j, c);
        out[c] = s;
    }
    return clipped;
}

Eigen::VectorXd RegressionModel::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    require(x.size() == input_dim_, kModule, "regression model evaluated at a point of the wrong dimension");
    Eigen::VectorXd out(output_dim_);
    evaluate(x.data(), out.data());
    return out;
}

Slice RegressionModel::evaluate_rows(const Slice& states, std::size_t* clipped) const {
    require(states.cols() == input_dim_, kModule, "state slice has the wrong dimension");
    const auto n = states.rows();
    Slice out(n, output_dim_);
    std::vector<std::size_t> clip_counts(block_count(static_cast<std::size_t>(n)), 0);
    for_each_block(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t begin, std::size_t end) {
        double x[kMaxDim];
        double y[kMaxDim * kMaxDim];
        for (std::size_t pp = begin; pp < end; ++pp) {
            const auto p = static_cast<Eigen::Index>(pp);
            for (int k = 0; k < input_dim_; ++k) x[k] = states(p, k);
            if (evaluate(x, y)) ++clip_counts[b];
            for (int c = 0; c < output_dim_; ++c) out(p, c) = y[c];
        }
    });
    if (clipped) {
        *clipped = 0;
        for (auto c : clip_counts) *clipped += c;
    }
    return out;
}

RegressionModel RegressionModel::constant(int input_dim, const Eigen::VectorXd& value) {
    RegressionModel m;
    m.input_dim_ = input_dim;
    m.output_dim_ = static_cast<int>(value.size());
    m.kind_ = BasisKind::polynomial;
    m.box_.lo = Eigen::ArrayXd::Zero(input_dim);
    m.box_.hi = Eigen::ArrayXd::Zero(input_dim);
    m.box_.lo.setConstant(-std::numeric_limits<double>::infinity());
    m.box_.hi.setConstant(std::numeric_limits<double>::infinity());
    m.poly_.degree = 0;
    m.poly_.exponents.assign(static_cast<std::size_t>(input_dim), 0);
    m.poly_.coeffs = value.transpose();
    m.residual_rms_ = Eigen::VectorXd::Zero(value.size());
    return m;
}

// ---------------------------------------------------------------------------
// RegressionDesign

struct RegressionDesign::Impl {
    const Slice* states = nullptr;
    BasisSpec spec;
    int slice = -1;
    int m = 0;
    ClipBox box;

    // polynomial
    int degree = 0;
    std::vector<int> exponents;
    Eigen::Index K = 0;
    Eigen::MatrixXd gram;
    Eigen::LDLT<Eigen::MatrixXd> normal;

    // bins
    RegressionModel::Bins layout;
    std::vector<int> cell_of_sample;
    std::vector<std::size_t> cell_count;
    std::vector<Eigen::MatrixXd> cell_gram;
    std::vector<Eigen::LDLT<Eigen::MatrixXd>> cell_normal;
    std::unique_ptr<RegressionDesign> fallback;

    void init_polynomial();
    void init_bins();
    RegressionModel shell(int q) const;
    RegressionModel fit_polynomial(const Slice& targets) const;
    RegressionModel fit_bins(const Slice& targets) const;
    void features(Eigen::Index p, double* phi, bool clip) const;
    Slice fitted_polynomial(const RegressionModel& model) const;
    Slice fitted_bins(const RegressionModel& model) const;
};

RegressionModel RegressionDesign::Impl::shell(int q) const {
    RegressionModel model;
    model.input_dim_ = m;
    model.output_dim_ = q;
    model.kind_ = spec.kind;
    model.box_ = box;
    model.n_samples_ = static_cast<std::size_t>(states->rows());
    return model;
}

void RegressionDesign::Impl::init_polynomial() {
    degree = spec.size;
    exponents = total_degree_exponents(m, degree);
    K = static_cast<Eigen::Index>(exponents.size() / static_cast<std::size_t>(m));
    require(K <= 512, kModule, "polynomial basis too large for the state dimension");
    const auto n = states->rows();
    require(n > K, kModule,
            "regression needs more paths (" + std::to_string(n) + ") than basis functions (" +
                std::to_string(K) + ")" + slice_label(slice));

    RegressionModel probe = shell(0);
    probe.poly_.degree = degree;
    probe.poly_.exponents = exponents;
    probe.poly_.coeffs.resize(K, 0);

    const std::size_t blocks = block_count(static_cast<std::size_t>(n));
    std::vector<Eigen::MatrixXd> partial(blocks);
    for_each_block(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t begin, std::size_t end) {
        Eigen::MatrixXd phi(static_cast<Eigen::Index>(end - begin), K);
        double x[kMaxDim];
        std::vector<double> row(static_cast<std::size_t>(K));
        for (std::size_t pp = begin; pp < end; ++pp) {
            for (int k = 0; k < m; ++k) x[k] = (*states)(static_cast<Eigen::Index>(pp), k);
            probe.basis_row(x, row.data());
            for (Eigen::Index j = 0; j < K; ++j) phi(static_cast<Eigen::Index>(pp - begin), j) = row[j];
        }
        partial[b] = phi.transpose() * phi;
    });
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(K, K);
    for (const auto& P : partial) A += P;
    const double maxdiag = A.diagonal().maxCoeff();
    if (!(maxdiag > 0.0) || !A.allFinite())
        throw NumericalError(kModule, "rank-deficient regression design" + slice_label(slice));
    gram = A;
    A.diagonal().array() += kRidge * maxdiag;
    normal.compute(A);
    if (normal.info() != Eigen::Success || !(normal.vectorD().array() > 0.0).all())
        throw NumericalError(kModule, "rank-deficient regression design beyond ridge repair" + slice_label(slice));
}

void RegressionDesign::Impl::init_bins() {
    const auto n = states->rows();
    const int B = spec.size;
    auto& L = layout;
    L.features = spec.kind == BasisKind::local_linear_bins ? 1 + m : 1;
    L.edges.assign(static_cast<std::size_t>(m), {});
    L.centers.assign(static_cast<std::size_t>(m), {});
    L.half_widths.assign(static_cast<std::size_t>(m), {});
    L.strides.assign(static_cast<std::size_t>(m), 1);

    std::vector<double> col(static_cast<std::size_t>(n));
    int cells = 1;
    for (int k = 0; k < m; ++k) {
        for (Eigen::Index p = 0; p < n; ++p)
            col[static_cast<std::size_t>(p)] = std::clamp((*states)(p, k), box.lo(k), box.hi(k));
        std::sort(col.begin(), col.end());
        auto& e = L.edges[static_cast<std::size_t>(k)];
        for (int j = 1; j < B; ++j) {
            const double q = col[static_cast<std::size_t>((static_cast<long long>(j) * n) / B)];
            if (q > box.lo(k) && q < box.hi(k) && (e.empty() || q > e.back())) e.push_back(q);
        }
        if (!spec.knots.empty()) {
            for (double knot : spec.knots[static_cast<std::size_t>(k)]) {
                if (!(knot > box.lo(k) && knot < box.hi(k))) continue;
                if (e.empty()) {
                    e.push_back(knot);
                    continue;
                }
                auto nearest = std::min_element(e.begin(), e.end(), [knot](double a, double b) {
                    return std::abs(a - knot) < std::abs(b - knot);
                });
                *nearest = knot;
            }
            std::sort(e.begin(), e.end());
            e.erase(std::unique(e.begin(), e.end()), e.end());
        }
        const std::size_t nb = e.size() + 1;
        for (std::size_t b = 0; b < nb; ++b) {
            const double left = b == 0 ? box.lo(k) : e[b - 1];
            const double right = b + 1 == nb ? box.hi(k) : e[b];
            L.centers[static_cast<std::size_t>(k)].push_back(0.5 * (left + right));
            L.half_widths[static_cast<std::size_t>(k)].push_back(0.5 * (right - left));
        }
        L.strides[static_cast<std::size_t>(k)] = cells;
        cells *= static_cast<int>(nb);
    }
    const Eigen::Index F = L.features;
    const Eigen::Index basis = static_cast<Eigen::Index>(cells) * F;
    require(n > basis, kModule,
            "regression needs more paths (" + std::to_string(n) + ") than basis functions (" +
                std::to_string(basis) + ")" + slice_label(slice));

    RegressionModel probe = shell(0);
    probe.bins_ = L;
    cell_of_sample.resize(static_cast<std::size_t>(n));
    cell_count.assign(static_cast<std::size_t>(cells), 0);
    for_each_block(static_cast<std::size_t>(n), [&](std::size_t, std::size_t begin, std::size_t end) {
        double x[kMaxDim];
        for (std::size_t pp = begin; pp < end; ++pp) {
            for (int k = 0; k < m; ++k) x[k] = (*states)(static_cast<Eigen::Index>(pp), k);
            box.clip(x);
            cell_of_sample[pp] = probe.cell_of(x);
        }
    });
    std::vector<Eigen::MatrixXd> A(static_cast<std::size_t>(cells), Eigen::MatrixXd::Zero(F, F));
    double phi[1 + kMaxDim];
    for (Eigen::Index p = 0; p < n; ++p) {
        const int cell = cell_of_sample[static_cast<std::size_t>(p)];
        features(p, phi, false);
        ++cell_count[static_cast<std::size_t>(cell)];
        auto& a = A[static_cast<std::size_t>(cell)];
        for (Eigen::Index i = 0; i < F; ++i)
            for (Eigen::Index j = 0; j < F; ++j) a(i, j) += phi[i] * phi[j];
    }
    cell_normal.resize(static_cast<std::size_t>(cells));
    cell_gram.resize(static_cast<std::size_t>(cells));
    bool any_empty = false;
    for (int c = 0; c < cells; ++c) {
        const auto cnt = cell_count[static_cast<std::size_t>(c)];
        if (cnt == 0) {
            any_empty = true;
            continue;
        }
        auto& a = A[static_cast<std::size_t>(c)];
        if (cnt < static_cast<std::size_t>(F)) continue;  // constant fit only
        const double maxdiag = a.diagonal().maxCoeff();
        cell_gram[static_cast<std::size_t>(c)] = a;
        a.diagonal().array() += kRidge * maxdiag;
        cell_normal[static_cast<std::size_t>(c)].compute(a);
        if (cell_normal[static_cast<std::size_t>(c)].info() != Eigen::Success)
            throw NumericalError(kModule, "rank-deficient regression design beyond ridge repair" + slice_label(slice));
    }
    if (any_empty) {
        BasisSpec linear;
        linear.kind = BasisKind::polynomial;
        linear.size = 1;
        linear.domain.clear();
        for (int k = 0; k < m; ++k) linear.domain.emplace_back(box.lo(k), box.hi(k));
        fallback = std::make_unique<RegressionDesign>(*states, linear, slice);
    }
}

void RegressionDesign::Impl::features(Eigen::Index p, double* phi, bool clip) const {
    phi[0] = 1.0;
    if (layout.features == 1) return;
    int rest = cell_of_sample[static_cast<std::size_t>(p)];
    for (int k = m - 1; k >= 0; --k) {
        const auto sk = static_cast<std::size_t>(k);
        const int bin = rest / layout.strides[sk];
        rest -= bin * layout.strides[sk];
        const double x = clip ? std::clamp((*states)(p, k), box.lo(k), box.hi(k)) : (*states)(p, k);
        const double hw = layout.half_widths[sk][static_cast<std::size_t>(bin)];
        phi[1 + k] = hw > 0.0 ? (x - layout.centers[sk][static_cast<std::size_t>(bin)]) / hw : 0.0;
    }
}

Slice RegressionDesign::Impl::fitted_bins(const RegressionModel& model) const {
    const auto n = states->rows();
    const auto q = model.output_dim_;
    const int F = layout.features;
    Slice out(n, q);
    for_each_block(static_cast<std::size_t>(n), [&](std::size_t, std::size_t begin, std::size_t end) {
        double phi[1 + kMaxDim];
        double x[kMaxDim];
        double y[kMaxDim * kMaxDim];
        for (std::size_t pp = begin; pp < end; ++pp) {
            const auto p = static_cast<Eigen::Index>(pp);
            const int cell = cell_of_sample[pp];
            if (model.bins_.status[static_cast<std::size_t>(cell)] == 1) {
                for (int k = 0; k < m; ++k) x[k] = (*states)(p, k);
                model.bins_.fallback->evaluate(x, y);
                for (int c = 0; c < q; ++c) out(p, c) = y[c];
                continue;
            }
            features(p, phi, true);
            const Eigen::Index r0 = static_cast<Eigen::Index>(cell) * F;
            for (int c = 0; c < q; ++c) {
                double s = 0.0;
                for (int j = 0; j < F; ++j) s += phi[j] * model.bins_.coeffs(r0 + j, c);
                out(p, c) = s;
            }
        }
    });
    return out;
}

Slice RegressionDesign::Impl::fitted_polynomial(const RegressionModel& model) const {
    const auto n = states->rows();
    Slice out(n, model.output_dim_);
    for_each_block(static_cast<std::size_t>(n), [&](std::size_t, std::size_t begin, std::size_t end) {
        Eigen::MatrixXd phi(static_cast<Eigen::Index>(end - begin), K);
        double x[kMaxDim];
        std::vector<double> row(static_cast<std::size_t>(K));
        for (std::size_t pp = begin; pp < end; ++pp) {
            for (int k = 0; k < m; ++k) x[k] = (*states)(static_cast<Eigen::Index>(pp), k);
            box.clip(x);
            model.basis_row(x, row.data());
            for (Eigen::Index j = 0; j < K; ++j) phi(static_cast<Eigen::Index>(pp - begin), j) = row[j];
        }
        out.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
            phi * model.poly_.coeffs;
    });
    return out;
}

RegressionModel RegressionDesign::Impl::fit_polynomial(const Slice& targets) const {
    const auto n = states->rows();
    const auto q = targets.cols();
    RegressionModel model = shell(static_cast<int>(q));
    model.poly_.degree = degree;
    model.poly_.exponents = exponents;
    model.poly_.coeffs = Eigen::MatrixXd::Zero(K, q);

    const std::size_t blocks = block_count(static_cast<std::size_t>(n));
    std::vector<Eigen::MatrixXd> partial(blocks);
    for_each_block(static_cast<std::size_t>(n), [&](std::size_t b, std::size_t begin, std::size_t end) {
        Eigen::MatrixXd phi(static_cast<Eigen::Index>(end - begin), K);
        double x[kMaxDim];
        std::vector<double> row(static_cast<std::size_t>(K));
        for (std::size_t pp = begin; pp < end; ++pp) {
            for (int k = 0; k < m; ++k) x[k] = (*states)(static_cast<Eigen::Index>(pp), k);
            model.basis_row(x, row.data());
            for (Eigen::Index j = 0; j < K; ++j) phi(static_cast<Eigen::Index>(pp - begin), j) = row[j];
        }
        partial[b] = phi.transpose() *
                     targets.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    });
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(K, q);
    for (const auto& P : partial) rhs += P;
    model.poly_.coeffs = refined_solve(normal, gram, rhs);
    return model;
}

RegressionModel RegressionDesign::Impl::fit_bins(const Slice& targets) const {
    const auto n = states->rows();
    const auto q = targets.cols();
    const Eigen::Index F = layout.features;
    RegressionModel model = shell(static_cast<int>(q));
    model.bins_ = layout;
    const std::size_t cells = cell_count.size();
    model.bins_.coeffs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells) * F, q);
    model.bins_.status.assign(cells, 0);

    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells) * F, q);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells), q);
    double phi[1 + kMaxDim];
    for (Eigen::Index p = 0; p < n; ++p) {
        const int cell = cell_of_sample[static_cast<std::size_t>(p)];
        features(p, phi, false);
        const Eigen::Index r0 = static_cast<Eigen::Index>(cell) * F;
        for (Eigen::Index c = 0; c < q; ++c) {
            const double t = targets(p, c);
            sums(cell, c) += t;
            for (Eigen::Index j = 0; j < F; ++j) rhs(r0 + j, c) += phi[j] * t;
        }
    }
    for (std::size_t c = 0; c < cells; ++c) {
        const auto cnt = cell_count[c];
        const Eigen::Index r0 = static_cast<Eigen::Index>(c) * F;
        if (cnt == 0) {
            model.bins_.status[c] = 1;
        } else if (cnt < static_cast<std::size_t>(F) || F == 1) {
            model.bins_.coeffs.row(r0) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(cnt);
        } else {
            model.bins_.coeffs.middleRows(r0, F) = refined_solve(cell_normal[c], cell_gram[c], rhs.middleRows(r0, F));
        }
    }
    if (fallback) model.bins_.fallback = std::make_shared<RegressionModel>(fallback->fit(targets));
    return model;
}

RegressionDesign::RegressionDesign(const Slice& states, const BasisSpec& spec, int slice_index)
    : impl_(std::make_unique<Impl>()) {
    spec.validate(static_cast<int>(states.cols()));
    require(states.cols() >= 1 && states.cols() <= kMaxDim, kModule, "state dimension out of range");
    require(states.rows() >= 1, kModule, "regression needs at least one sample");
    require(states.allFinite(), kModule, "non-finite regression states" + slice_label(slice_index));
    impl_->states = &states;
    impl_->spec = spec;
    impl_->slice = slice_index;
    impl_->m = static_cast<int>(states.cols());
    impl_->box = make_box(states, spec);
    if (spec.kind == BasisKind::polynomial)
        impl_->init_polynomial();
    else
        impl_->init_bins();
}

RegressionDesign::~RegressionDesign() = default;
RegressionDesign::RegressionDesign(RegressionDesign&&) noexcept = default;
RegressionDesign& RegressionDesign::operator=(RegressionDesign&&) noexcept = default;

std::size_t RegressionDesign::basis_size() const {
    if (impl_->spec.kind == BasisKind::polynomial) return static_cast<std::size_t>(impl_->K);
    return impl_->cell_count.size() * static_cast<std::size_t>(impl_->layout.features);
}

const ClipBox& RegressionDesign::box() const { return impl_->box; }

RegressionModel RegressionDesign::fit(const Slice& targets, Slice* fitted) const {
    const Slice& states = *impl_->states;
    require(targets.rows() == states.rows(), kModule, "targets and states disagree on the number of paths");
    require(targets.cols() >= 1 && targets.cols() <= kMaxDim * kMaxDim, kModule, "target width out of range");
    if (!targets.allFinite())
        throw NumericalError(kModule, "non-finite regression targets" + slice_label(impl_->slice));

    const bool poly = impl_->spec.kind == BasisKind::polynomial;
    RegressionModel model = poly ? impl_->fit_polynomial(targets) : impl_->fit_bins(targets);
    Slice values = poly ? impl_->fitted_polynomial(model) : impl_->fitted_bins(model);
    if (!values.allFinite())
        throw NumericalError(kModule, "regression produced non-finite coefficients" + slice_label(impl_->slice));
    model.residual_rms_ =
        ((values - targets).colwise().squaredNorm() / static_cast<double>(states.rows())).cwiseSqrt().transpose();
    if (fitted) *fitted = std::move(values);
    return model;
}

RegressionModel fit_conditional_expectation(const Slice& targets, const Slice& states, const BasisSpec& basis,
                                            int slice_index) {
    return RegressionDesign(states, basis, slice_index).fit(targets);
}

}  // namespace fbsde
