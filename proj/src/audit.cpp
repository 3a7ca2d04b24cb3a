#include "fbsde/audit.hpp"

#include "fbsde/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

namespace fbsde {

namespace {

constexpr const char* kModule = "model_core";
constexpr double kSpacings[3] = {1e-1, 1e-2, 1e-3};
constexpr std::size_t kMaxLineBases = 200;

struct Point {
    double t = 0.0;
    Vector x;
    Vector y;
    Matrix z;
};

std::string format_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
    std::string s = "(";
    char buf[32];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.6g", i ? ", " : "", v(i));
        s += buf;
    }
    return s + ")";
}

std::string format_point(const Point& p, bool with_yz) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t=%.6g", p.t);
    std::string s = std::string(buf) + " x=" + format_vector(p.x);
    if (with_yz) {
        s += " y=" + format_vector(p.y);
        Eigen::VectorXd zf = Eigen::Map<const Eigen::VectorXd>(p.z.data(), p.z.size());
        s += " z=" + format_vector(zf);
    }
    return s;
}

/// Odometer over `count` coordinates, each taking values in `nodes`.
bool advance(std::vector<std::size_t>& idx, std::size_t base) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (++idx[k] < base) return true;
        idx[k] = 0;
    }
    return false;
}

class Auditor {
public:
    Auditor(const CoefficientSet& coeffs, const ConditionProfile& profile, const SampleSpec& spec)
        : c_(coeffs), profile_(profile), spec_(spec), fbar_(augmented_driver(coeffs)),
          xs_(spec.x.nodes()), ys_(spec.y.nodes()), zs_(spec.z.nodes()) {
        report_.profile = profile;
    }

    AuditReport run();

private:
    using Scalar4 = std::function<double(const Point&)>;
    using Field4 = std::function<Eigen::VectorXd(const Point&)>;

    /// Visits every (t, x) node, or every (t, x, y, z) node when full.
    template <typename Fn>
    void for_each_point(bool full, Fn&& fn) const {
        const auto& dims = c_.dims;
        const int ny = full ? dims.d : 0;
        const int nz = full ? dims.d * dims.n : 0;
        Point p;
        p.x.resize(dims.m);
        p.y = Vector::Zero(dims.d);
        p.z = Matrix::Zero(dims.d, dims.n);
        std::vector<std::size_t> ix(dims.m, 0), iy(ny, 0), iz(nz, 0);
        for (double t : spec_.times) {
            p.t = t;
            std::fill(ix.begin(), ix.end(), 0);
            do {
                for (int k = 0; k < dims.m; ++k) p.x(k) = xs_[ix[k]];
                std::fill(iy.begin(), iy.end(), 0);
                do {
                    for (int k = 0; k < ny; ++k) p.y(k) = ys_[iy[k]];
                    std::fill(iz.begin(), iz.end(), 0);
                    do {
                        for (int k = 0; k < nz; ++k) p.z(k / dims.n, k % dims.n) = zs_[iz[k]];
                        if (!fn(p)) return;
                    } while (!iz.empty() && advance(iz, zs_.size()));
                } while (!iy.empty() && advance(iy, ys_.size()));
            } while (advance(ix, xs_.size()));
        }
    }

    /// lhs <= rhs at every sampled node; the first violation is the witness.
    AuditEntry growth(const std::string& cond, const std::string& check, bool full,
                      const Scalar4& lhs, const Scalar4& rhs) {
        AuditEntry e{cond, check, Verification::supported, "", std::nullopt};
        double worst = 0.0;
        std::size_t n = 0;
        for_each_point(full, [&](const Point& p) {
            const double l = lhs(p);
            const double r = rhs(p);
            ++n;
            if (!std::isfinite(l) || l > r * (1.0 + 1e-12) + 1e-12) {
                e.tag = Verification::refuted;
                char buf[96];
                std::snprintf(buf, sizeof buf, "lhs=%.6g > rhs=%.6g at ", l, r);
                e.witness = std::string(buf) + format_point(p, full);
                return false;
            }
            if (r > 0.0) worst = std::max(worst, l / r);
            return true;
        });
        report_.evaluations += n;
        if (e.tag == Verification::supported) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%zu samples, max lhs/rhs = %.4g", n, worst);
            e.detail = buf;
        }
        return e;
    }

    struct LineStats {
        double omega[3] = {0, 0, 0};     // max |F(x+h) - F(x)|
        double deriv_gap[2] = {0, 0};    // max |D_h - D_{h/10}| at shared nodes
        double deriv_scale = 0.0;        // max |D_finest|
        std::string omega_witness;       // where the finest modulus is attained
        std::string gap_witness;
    };

    /// Scans the nested grids along one coordinate of one block (x, y or z)
    /// through a strided subset of the coarse grid nodes.
    LineStats scan_lines(char block, int coord, const SampleAxis& axis, bool full, const Field4& F) {
        LineStats stats;
        const double lo = axis.lo;
        const double hi = axis.hi;
        const std::size_t fine = static_cast<std::size_t>(std::floor((hi - lo) / kSpacings[2] + 1e-9));
        if (fine < 100) return stats;

        std::vector<Point> bases;
        for_each_point(full, [&](const Point& p) {
            bases.push_back(p);
            return true;
        });
        const std::size_t stride = std::max<std::size_t>(1, bases.size() / kMaxLineBases);

        std::vector<double> nodes(fine + 1);
        for (std::size_t j = 0; j <= fine; ++j) nodes[j] = lo + static_cast<double>(j) * kSpacings[2];
        std::vector<Eigen::VectorXd> vals(fine + 1);

        for (std::size_t b = 0; b < bases.size(); b += stride) {
            Point p = bases[b];
            auto set = [&](double v) {
                if (block == 'x') p.x(coord) = v;
                else if (block == 'y') p.y(coord) = v;
                else p.z(coord / c_.dims.n, coord % c_.dims.n) = v;
            };
            for (std::size_t j = 0; j <= fine; ++j) {
                set(nodes[j]);
                vals[j] = F(p);
            }
            report_.evaluations += fine + 1;
            for (int level = 0; level < 3; ++level) {
                const std::size_t step = level == 0 ? 100 : level == 1 ? 10 : 1;
                for (std::size_t j = 0; j + step <= fine; j += step) {
                    const double w = (vals[j + step] - vals[j]).norm();
                    if (!(w <= stats.omega[level])) {
                        stats.omega[level] = std::isfinite(w) ? w : std::numeric_limits<double>::infinity();
                        if (level == 2) {
                            set(nodes[j]);
                            stats.omega_witness = format_point(p, full);
                        }
                    }
                }
            }
            for (int level = 0; level < 2; ++level) {
                const std::size_t coarse = level == 0 ? 100 : 10;
                const std::size_t finer = coarse / 10;
                for (std::size_t j = 0; j + coarse <= fine; j += coarse) {
                    const Eigen::VectorXd dc = (vals[j + coarse] - vals[j]) / (nodes[j + coarse] - nodes[j]);
                    const Eigen::VectorXd df = (vals[j + finer] - vals[j]) / (nodes[j + finer] - nodes[j]);
                    const double gap = (dc - df).norm();
                    stats.deriv_scale = std::max(stats.deriv_scale, df.norm());
                    if (gap > stats.deriv_gap[level]) {
                        stats.deriv_gap[level] = gap;
                        if (level == 1) {
                            set(nodes[j]);
                            stats.gap_witness = format_point(p, full);
                        }
                    }
                }
            }
        }
        return stats;
    }

    /// Local Lipschitz: the divided-difference constant must not blow up as
    /// the spacing shrinks from 1e-1 to 1e-3.
    AuditEntry lipschitz(const std::string& cond, const std::string& check, char block,
                         const SampleAxis& axis, int coords, bool full, const Field4& F) {
        AuditEntry e{cond, check, Verification::supported, "", std::nullopt};
        double lip_coarse = 0.0, lip_fine = 0.0;
        for (int k = 0; k < coords; ++k) {
            const LineStats s = scan_lines(block, k, axis, full, F);
            const double lc = s.omega[0] / kSpacings[0];
            const double lf = s.omega[2] / kSpacings[2];
            lip_coarse = std::max(lip_coarse, lc);
            lip_fine = std::max(lip_fine, lf);
            if (!(lf <= 10.0 * lc + 1e-9)) {
                e.tag = Verification::refuted;
                e.witness = "divided differences blow up near " + s.omega_witness;
            }
        }
        char buf[128];
        std::snprintf(buf, sizeof buf, "L(h=1e-1)=%.4g, L(h=1e-3)=%.4g", lip_coarse, lip_fine);
        e.detail = buf;
        return e;
    }

    /// Continuity: the modulus over a step h must shrink with h.
    AuditEntry continuity(const std::string& cond, const std::string& check, char block,
                          const SampleAxis& axis, int coords, const Field4& F) {
        AuditEntry e{cond, check, Verification::supported, "", std::nullopt};
        double w_coarse = 0.0, w_fine = 0.0;
        for (int k = 0; k < coords; ++k) {
            const LineStats s = scan_lines(block, k, axis, true, F);
            w_coarse = std::max(w_coarse, s.omega[0]);
            w_fine = std::max(w_fine, s.omega[2]);
            if (s.omega[2] > 0.5 * s.omega[0] && s.omega[2] > 1e-9) {
                e.tag = Verification::refuted;
                e.witness = "jump of size " + std::to_string(s.omega[2]) + " near " + s.omega_witness;
            }
        }
        char buf[128];
        std::snprintf(buf, sizeof buf, "modulus(h=1e-1)=%.4g, modulus(h=1e-3)=%.4g", w_coarse, w_fine);
        e.detail = buf;
        return e;
    }

    /// Differentiability: forward differences at nested spacings converge.
    AuditEntry differentiability(const std::string& cond, const std::string& check, char block,
                                 const SampleAxis& axis, int coords, const Field4& F) {
        AuditEntry e{cond, check, Verification::supported, "", std::nullopt};
        double g0 = 0.0, g1 = 0.0;
        for (int k = 0; k < coords; ++k) {
            const LineStats s = scan_lines(block, k, axis, true, F);
            g0 = std::max(g0, s.deriv_gap[0]);
            g1 = std::max(g1, s.deriv_gap[1]);
            if (s.deriv_gap[1] > 0.5 * s.deriv_gap[0] && s.deriv_gap[1] > 1e-6 * (1.0 + s.deriv_scale)) {
                e.tag = Verification::refuted;
                e.witness = "difference quotients do not converge near " + s.gap_witness;
            }
        }
        char buf[128];
        std::snprintf(buf, sizeof buf, "|D(1e-1)-D(1e-2)|=%.3g, |D(1e-2)-D(1e-3)|=%.3g", g0, g1);
        e.detail = buf;
        return e;
    }

    AuditEntry declared(const std::string& cond, const std::string& what) {
        return AuditEntry{cond, what, Verification::declared, "not sampled", std::nullopt};
    }

    void add(AuditEntry e) { report_.entries.push_back(std::move(e)); }

    double norm(const Eigen::Ref<const Eigen::VectorXd>& v) const { return v.norm(); }
    double xr(const Point& p) const { return std::pow(p.x.norm(), profile_.constants.r); }

    void standing_assumptions();
    void forward_checks();
    void backward_checks(BackwardCondition cond, const std::string& label);
    void uniqueness_checks();
    void g_bound(const std::string& label, bool with_x);
    Verification fold(const std::string& label) const;

    const CoefficientSet& c_;
    ConditionProfile profile_;
    const SampleSpec& spec_;
    FieldFn fbar_;
    std::vector<double> xs_, ys_, zs_;
    AuditReport report_;
};

void Auditor::standing_assumptions() {
    const int m = c_.dims.m;
    double lmin = std::numeric_limits<double>::infinity();
    double lmax = 0.0;
    Point worst;
    for_each_point(false, [&](const Point& p) {
        const Matrix s = c_.sigma(p.t, p.x);
        const Eigen::MatrixXd a = s * s.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues()(0);
        const double hi = es.eigenvalues()(m - 1);
        if (lo < lmin) {
            lmin = lo;
            worst = p;
        }
        lmax = std::max(lmax, hi);
        ++report_.evaluations;
        return true;
    });
    const double eps = profile_.constants.epsilon;
    report_.tightest_epsilon = lmin > 0.0 ? std::max(1.0 / lmin, lmax) : std::numeric_limits<double>::infinity();
    AuditEntry e{"ellipticity", "eps^-1 <= eig(sigma sigma^T) <= eps", Verification::supported, "", std::nullopt};
    char buf[160];
    std::snprintf(buf, sizeof buf, "eig range [%.6g, %.6g], tightest eps = %.6g, declared eps = %.6g",
                  lmin, lmax, report_.tightest_epsilon, eps);
    e.detail = buf;
    if (!(lmin >= 1.0 / eps * (1.0 - 1e-12)) || !(lmax <= eps * (1.0 + 1e-12))) {
        e.tag = Verification::refuted;
        std::snprintf(buf, sizeof buf, "smallest eigenvalue %.6g at ", lmin);
        e.witness = std::string(buf) + format_point(worst, false);
    }
    add(e);

    // |b(t,0)| + sup_{|x-x'|<=1} |b(t,x)-b(t,x')| <= kappa over grid pairs.
    std::vector<Vector> grid;
    for_each_point(false, [&](const Point& p) {
        if (p.t == spec_.times.front()) grid.push_back(p.x);
        return true;
    });
    double modulus = 0.0;
    Point witness;
    for (double t : spec_.times) {
        const double b0 = c_.b(t, Vector::Zero(m)).norm();
        std::vector<Vector> bx(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) bx[i] = c_.b(t, grid[i]);
        double osc = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (std::size_t j = i + 1; j < grid.size(); ++j)
                if ((grid[i] - grid[j]).norm() <= 1.0) osc = std::max(osc, (bx[i] - bx[j]).norm());
        report_.evaluations += grid.size() + 1;
        if (b0 + osc > modulus) {
            modulus = b0 + osc;
            witness.t = t;
            witness.x = Vector::Zero(m);
        }
    }
    report_.drift_modulus = modulus;
    AuditEntry k{"drift-modulus", "|b(t,0)| + sup_{|x-x'|<=1}|b(t,x)-b(t,x')| <= kappa",
                 Verification::supported, "", std::nullopt};
    std::snprintf(buf, sizeof buf, "sampled modulus %.6g, declared kappa %.6g", modulus,
                  profile_.constants.kappa);
    k.detail = buf;
    if (!(modulus <= profile_.constants.kappa * (1.0 + 1e-12))) {
        k.tag = Verification::refuted;
        k.witness = "modulus " + std::to_string(modulus) + " at t=" + std::to_string(witness.t);
    }
    add(k);

    // Linear growth of the drift: the sampled surrogate for the Benes condition.
    const double C = profile_.constants.C;
    AuditEntry bn = growth("benes-linear-growth", "|b(t,x)| <= C(1+|x|)", false,
                           [&](const Point& p) { return c_.b(p.t, p.x).norm(); },
                           [&](const Point& p) { return C * (1.0 + p.x.norm()); });
    add(bn);
}

void Auditor::forward_checks() {
    const double C = profile_.constants.C;
    const auto fc = profile_.forward;
    const std::string label = to_string(fc);
    if (fc == ForwardCondition::none) return;

    auto b_norm = [&](const Point& p) { return c_.b(p.t, p.x).norm(); };
    auto sigma_flat = [&](const Point& p) {
        const Matrix s = c_.sigma(p.t, p.x);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(s.data(), s.size()));
    };

    if (fc == ForwardCondition::F1 || fc == ForwardCondition::F2)
        add(growth(label, "|b(t,x)| <= C", false, b_norm, [&](const Point&) { return C; }));

    if (fc == ForwardCondition::F1) {
        add(lipschitz(label, "sigma locally Lipschitz in x", 'x', spec_.x, c_.dims.m, false, sigma_flat));
    } else if (fc == ForwardCondition::F2) {
        AuditEntry e{label, "m = n = 1", Verification::supported, "", std::nullopt};
        if (c_.dims.m != 1 || c_.dims.n != 1) {
            e.tag = Verification::refuted;
            e.witness = "m=" + std::to_string(c_.dims.m) + ", n=" + std::to_string(c_.dims.n);
        }
        add(e);
        add(declared(label, "modulus of continuity theta of sigma"));
    } else if (fc == ForwardCondition::F3) {
        const Matrix ref = c_.sigma(spec_.times.front(), Vector::Zero(c_.dims.m));
        add(growth(label, "sigma(t,x) constant", false,
                   [&](const Point& p) { return (c_.sigma(p.t, p.x) - ref).norm(); },
                   [&](const Point&) { return 0.0; }));
    }
}

void Auditor::g_bound(const std::string& label, bool with_x) {
    const double C = profile_.constants.C;
    auto g_norm = [&](const Point& p) { return c_.g(p.t, p.x, p.y, p.z).norm(); };
    if (profile_.constants.r > 0.0) {
        // rho_r vanishes for r > 0.
        if (with_x)
            add(growth(label, "|g| <= C(1+|x|)", true, g_norm,
                       [&](const Point& p) { return C * (1.0 + p.x.norm()); }));
        else
            add(growth(label, "|g| <= C", true, g_norm, [&](const Point&) { return C; }));
        return;
    }
    // r = 0: rho_0 is only required to be nondecreasing. We check g is finite
    // on the grid and report the empirical envelope; rho_0 itself is declared.
    double envelope = 0.0;
    AuditEntry e = growth(label, "g finite on the grid (rho_0 envelope)", true,
                          [&](const Point& p) {
                              const double v = g_norm(p);
                              const double base = with_x ? C * (1.0 + p.x.norm()) : C;
                              if (std::isfinite(v) && C > 0.0)
                                  envelope = std::max(envelope, v / C - (base / C));
                              return std::isfinite(v) ? 0.0 : v;
                          },
                          [&](const Point&) { return 0.0; });
    if (e.tag == Verification::supported) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "; empirical rho_0 envelope <= %.4g", std::max(envelope, 0.0));
        e.detail += buf;
    }
    add(e);
    add(declared(label, "rho_0 nondecreasing bound for g"));
}

void Auditor::backward_checks(BackwardCondition cond, const std::string& label) {
    const double C = profile_.constants.C;
    const int d = c_.dims.d;
    const int dn = c_.dims.d * c_.dims.n;
    auto h_norm = [&](const Point& p) { return c_.h(p.x).norm(); };
    auto f_norm = [&](const Point& p) { return c_.f(p.t, p.x, p.y, p.z).norm(); };
    auto fbar_norm = [&](const Point& p) { return fbar_(p.t, p.x, p.y, p.z).norm(); };
    auto fbar_vec = [&](const Point& p) { return Eigen::VectorXd(fbar_(p.t, p.x, p.y, p.z)); };
    auto h_poly = [&](const Point& p) { return C * (1.0 + xr(p)); };
    auto h_const = [&](const Point&) { return C; };

    auto fbar_continuous = [&] {
        add(continuity(label, "fbar continuous in y", 'y', spec_.y, d, fbar_vec));
        add(continuity(label, "fbar continuous in z", 'z', spec_.z, dn, fbar_vec));
    };

    switch (cond) {
        case BackwardCondition::B1:
            add(growth(label, "|h(x)| <= C(1+|x|^r)", false, h_norm, h_poly));
            fbar_continuous();
            add(growth(label, "|f| <= C(1+|x|^r+|y|+|z|)", true, f_norm, [&](const Point& p) {
                return C * (1.0 + xr(p) + p.y.norm() + p.z.norm());
            }));
            g_bound(label, false);
            break;
        case BackwardCondition::B2:
            add(growth(label, "|h(x)| <= C", false, h_norm, h_const));
            add(growth(label, "|fbar| <= C(1+|y|) + C|z|^2", true, fbar_norm, [&](const Point& p) {
                return C * (1.0 + p.y.norm()) + C * p.z.squaredNorm();
            }));
            g_bound(label, false);
            add(declared(label, "splitting fbar = tilde f + hat f with Lipschitz bounds"));
            break;
        case BackwardCondition::B3: {
            AuditEntry e{label, "d = 1", d == 1 ? Verification::supported : Verification::refuted, "",
                         std::nullopt};
            add(e);
            add(growth(label, "|h(x)| <= C", false, h_norm, h_const));
            fbar_continuous();
            add(growth(label, "|f| <= C(1+|y|+|z|^2)", true, f_norm, [&](const Point& p) {
                return C * (1.0 + p.y.norm() + p.z.squaredNorm());
            }));
            g_bound(label, false);
            break;
        }
        case BackwardCondition::B4:
            add(growth(label, "|h(x)| <= C(1+|x|^r)", false, h_norm, h_poly));
            fbar_continuous();
            add(growth(label, "max_i |f^i|/(1+|x|^r+|y^i|) <= C", true,
                       [&](const Point& p) {
                           const Vector f = c_.f(p.t, p.x, p.y, p.z);
                           double worst = 0.0;
                           for (int i = 0; i < d; ++i)
                               worst = std::max(worst, std::abs(f(i)) / (1.0 + xr(p) + std::abs(p.y(i))));
                           return worst;
                       },
                       h_const));
            g_bound(label, true);
            break;
        case BackwardCondition::none:
            break;
    }
}

void Auditor::uniqueness_checks() {
    const auto uc = profile_.uniqueness;
    const std::string label = to_string(uc);
    const double C = profile_.constants.C;
    const int d = c_.dims.d;
    const int dn = c_.dims.d * c_.dims.n;
    auto fbar_vec = [&](const Point& p) { return Eigen::VectorXd(fbar_(p.t, p.x, p.y, p.z)); };

    if (uc == UniquenessCondition::U1) {
        add(lipschitz(label, "fbar Lipschitz in y", 'y', spec_.y, d, true, fbar_vec));
        add(lipschitz(label, "fbar Lipschitz in z", 'z', spec_.z, dn, true, fbar_vec));
    } else if (uc == UniquenessCondition::U2) {
        AuditEntry e{label, "d = 1", d == 1 ? Verification::supported : Verification::refuted, "",
                     std::nullopt};
        add(e);
        add(growth(label, "|h(x)| <= C", false, [&](const Point& p) { return c_.h(p.x).norm(); },
                   [&](const Point&) { return C; }));
        add(differentiability(label, "fbar differentiable in y", 'y', spec_.y, d, fbar_vec));
        add(differentiability(label, "fbar differentiable in z", 'z', spec_.z, dn, fbar_vec));
        // On the sampled y-box [-M, M] the constants may depend on M.
        const double M = std::max(std::abs(spec_.y.lo), std::abs(spec_.y.hi));
        const double CM = C * (1.0 + M);
        add(growth(label, "|fbar| <= C(1+M)(1+|z|^2)", true,
                   [&](const Point& p) { return fbar_(p.t, p.x, p.y, p.z).norm(); },
                   [&](const Point& p) { return CM * (1.0 + p.z.squaredNorm()); }));
        constexpr double h = 1e-6;
        add(growth(label, "|d_z fbar| <= C(1+M)(1+|z|)", true,
                   [&](const Point& p) {
                       const double base = fbar_(p.t, p.x, p.y, p.z)(0);
                       double sq = 0.0;
                       for (int k = 0; k < dn; ++k) {
                           Matrix z = p.z;
                           z(k / c_.dims.n, k % c_.dims.n) += h;
                           const double dk = (fbar_(p.t, p.x, p.y, z)(0) - base) / h;
                           sq += dk * dk;
                       }
                       return std::sqrt(sq);
                   },
                   [&](const Point& p) { return CM * (1.0 + p.z.norm()); }));
        add(growth(label, "|d_y fbar| <= C(1+M)(1+|z|^2)", true,
                   [&](const Point& p) {
                       Vector y = p.y;
                       y(0) += h;
                       return std::abs(fbar_(p.t, p.x, y, p.z)(0) - fbar_(p.t, p.x, p.y, p.z)(0)) / h;
                   },
                   [&](const Point& p) { return CM * (1.0 + p.z.squaredNorm()); }));
        add(declared(label, "integrability of the time profiles l_M, k_M, l_eps"));
    } else if (uc == UniquenessCondition::B2) {
        backward_checks(BackwardCondition::B2, label);
    }
}

Verification Auditor::fold(const std::string& label) const {
    bool any = false;
    for (const auto& e : report_.entries) {
        if (e.condition != label) continue;
        if (e.tag == Verification::refuted) return Verification::refuted;
        any = any || e.tag == Verification::supported;
    }
    return any ? Verification::supported : Verification::declared;
}

AuditReport Auditor::run() {
    standing_assumptions();
    forward_checks();
    if (profile_.backward != BackwardCondition::none)
        backward_checks(profile_.backward, to_string(profile_.backward));
    if (profile_.uniqueness != UniquenessCondition::none &&
        !(profile_.uniqueness == UniquenessCondition::B2 && profile_.backward == BackwardCondition::B2))
        uniqueness_checks();

    auto& p = report_.profile;
    if (p.forward != ForwardCondition::none) p.forward_tag = fold(to_string(p.forward));
    if (p.backward != BackwardCondition::none) p.backward_tag = fold(to_string(p.backward));
    if (p.uniqueness != UniquenessCondition::none) p.uniqueness_tag = fold(to_string(p.uniqueness));
    return report_;
}

}  // namespace

std::vector<double> SampleAxis::nodes() const {
    std::vector<double> out;
    if (points <= 0) return out;
    if (points == 1) return {0.5 * (lo + hi)};
    out.reserve(points);
    for (int i = 0; i < points; ++i) out.push_back(lo + (hi - lo) * i / (points - 1));
    return out;
}

bool SampleSpec::empty() const {
    return times.empty() || x.points <= 0 || y.points <= 0 || z.points <= 0;
}

SampleSpec SampleSpec::standard(double T, double x_radius, double y_radius, double z_radius) {
    SampleSpec s;
    s.times = {0.0, 0.25 * T, 0.5 * T, 0.75 * T, T};
    s.x = {-x_radius, x_radius, 17};
    s.y = {-y_radius, y_radius, 9};
    s.z = {-z_radius, z_radius, 9};
    return s;
}

bool AuditReport::all_supported() const {
    for (const auto& e : entries)
        if (e.tag == Verification::refuted) return false;
    return true;
}

AuditReport audit_conditions(const CoefficientSet& coeffs, const ConditionProfile& profile,
                             const SampleSpec& spec) {
    require(!spec.empty(), kModule, "audit sample specification is empty");
    coeffs.validate();
    profile.validate(coeffs.dims);
    return Auditor(coeffs, profile, spec).run();
}

}  // namespace fbsde
