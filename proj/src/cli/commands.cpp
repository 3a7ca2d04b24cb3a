#include "fbsde/cli.hpp"
#include "fbsde/girsanov.hpp"
#include "fbsde/parallel.hpp"
#include "report.hpp"
#include "section.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>

namespace fbsde::cli {
namespace {

namespace fs = std::filesystem;

constexpr double kBoundTol = 0.01;

double quantile(const Eigen::Ref<const Eigen::VectorXd>& v, double q) {
    std::vector<double> a(v.data(), v.data() + v.size());
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(a.size() - 1)));
    std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k), a.end());
    return a[k];
}

double mean_stderr(const Eigen::Ref<const Eigen::VectorXd>& v, double* mean) {
    const double mu = v.mean();
    if (mean) *mean = mu;
    const auto n = static_cast<double>(v.size());
    if (v.size() < 2) return 0.0;
    return std::sqrt((v.array() - mu).square().sum() / (n - 1.0) / n);
}

std::string join(const std::vector<double>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? ", " : "") + format_short(values[i]);
    return s.empty() ? "n/a" : s;
}

std::string optional_number(const std::optional<double>& v) { return v ? format_short(*v) : "none"; }

/// Stratified initial states on [x0 - spread, x0 + spread] per coordinate.
Slice spread_initial(const Vector& x0, std::size_t n_paths, double spread, std::uint64_t seed) {
    Slice s = replicate_initial(x0, n_paths);
    if (spread <= 0.0) return s;
    const auto n = static_cast<double>(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) {
        const auto row = static_cast<Eigen::Index>(p);
        s(row, 0) += spread * (2.0 * (static_cast<double>(p) + 0.5) / n - 1.0);
        for (Eigen::Index k = 1; k < s.cols(); ++k) {
            const double z = standard_normal(seed ^ 0x5DEECE66DULL, p, 0, static_cast<std::uint32_t>(k));
            const double u = 0.5 * std::erfc(-z / std::sqrt(2.0));
            s(row, k) += spread * (2.0 * u - 1.0);
        }
    }
    return s;
}

struct Run {
    ExperimentConfig cfg;
    Preset preset;
    ConditionProfile profile;
    fs::path out;
    std::ostream& log;
    Summary summary;
    StageTimer timer;

    TimeGrid grid() const { return TimeGrid(preset.coeffs.T, cfg.mc.steps); }
    BasisSpec basis() const { return cfg.basis ? *cfg.basis : preset.basis; }

    PicardConfig picard() const {
        PicardConfig p = cfg.picard;
        if (!p.truncation_N && preset.carbon && preset.carbon->lambda > 0.0) p.truncation_N = preset.carbon->lambda;
        if (!p.truncation_N) p.truncation_N = default_truncation(profile, preset.coeffs.T);
        return p;
    }

    SolveOptions options() const {
        SolveOptions o;
        if (cfg.mc.initial_spread > 0.0)
            o.initial = spread_initial(preset.coeffs.x0, cfg.mc.n_paths, cfg.mc.initial_spread, cfg.mc.seed);
        return o;
    }

    fs::path file(const std::string& name) const { return out / name; }

    template <typename Fn>
    auto stage(const std::string& name, Fn&& fn) {
        log << "[" << name << "]" << std::endl;
        timer.start(name);
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            timer.stop();
        } else {
            auto r = fn();
            timer.stop();
            return r;
        }
    }

    void finish() {
        summary.write(file("summary.txt"));
        timer.write(file("timings.txt"));
    }
};

void write_header(Run& run, const std::string& command) {
    auto& s = run.summary;
    const auto b = run.basis();
    const auto p = run.picard();
    s.section("run");
    s.line("command", command);
    s.line("preset", run.preset.name);
    s.line("seed", std::to_string(run.cfg.mc.seed));
    s.line("n_paths", std::to_string(run.cfg.mc.n_paths));
    s.line("steps", std::to_string(run.cfg.mc.steps));
    s.line("horizon", run.preset.coeffs.T);
    s.line("initial_spread", run.cfg.mc.initial_spread);
    std::string basis = to_string(b.kind) + " size=" + std::to_string(b.size) +
                        " clip_quantile=" + format_short(b.clip_quantile);
    if (!b.knots.empty()) {
        std::vector<double> all;
        for (const auto& k : b.knots) all.insert(all.end(), k.begin(), k.end());
        basis += " knots=[" + join(all) + "]";
    }
    s.line("basis", basis);
    s.line("picard", "max_iters=" + std::to_string(p.max_iters) + " tol=" + format_short(p.tol) +
                         " init=" + to_string(p.init) + " truncation_N=" + optional_number(p.truncation_N) +
                         " driver_clip=" + optional_number(p.driver_clip));
}

void write_field_csv(const Run& run, const DecouplingField& field) {
    const auto& c = run.preset.coeffs;
    const int m = c.dims.m, n = c.dims.n, d = c.dims.d;
    SampleAxis axis;
    if (run.cfg.exports.field_grid) {
        axis = *run.cfg.exports.field_grid;
    } else {
        axis.lo = c.x0(0) - 3.0;
        axis.hi = c.x0(0) + 3.0;
        axis.points = 61;
    }
    std::vector<std::string> header{"time"};
    for (int k = 0; k < m; ++k) header.push_back("x_" + std::to_string(k + 1));
    for (int k = 0; k < d; ++k) header.push_back("u_" + std::to_string(k + 1));
    for (int r = 0; r < d; ++r)
        for (int k = 0; k < n; ++k) header.push_back("d_" + std::to_string(r + 1) + "_" + std::to_string(k + 1));
    CsvWriter csv(run.file("field.csv"), header);
    const auto& grid = field.grid;
    for (int i = 0; i <= grid.steps(); ++i) {
        for (double x1 : axis.nodes()) {
            Vector x = c.x0;
            x(0) = x1;
            const Vector u = field.value(i, x);
            // The last node carries no gradient; repeat the previous one.
            const Matrix z = field.gradient(std::min(i, grid.steps() - 1), x);
            csv.add(grid.time(i));
            for (int k = 0; k < m; ++k) csv.add(x(k));
            for (int k = 0; k < d; ++k) csv.add(u(k));
            for (int r = 0; r < d; ++r)
                for (int k = 0; k < n; ++k) csv.add(z(r, k));
            csv.end_row();
        }
    }
    csv.close();
}

void write_trajectory_csv(const Run& run, const FbsdeSolution& sol) {
    const int m = sol.X.dim();
    const int d = static_cast<int>(sol.Y.front().cols());
    std::vector<std::string> header{"time"};
    for (int k = 0; k < m; ++k) header.push_back("mean_x_" + std::to_string(k + 1));
    for (int k = 0; k < d; ++k) header.push_back("mean_y_" + std::to_string(k + 1));
    header.insert(header.end(), {"stderr_y_1", "y_1_q05", "y_1_q50", "y_1_q95"});
    CsvWriter csv(run.file("trajectory.csv"), header);
    for (std::size_t i = 0; i < sol.Y.size(); ++i) {
        csv.add(sol.X.grid.time(static_cast<int>(i)));
        for (int k = 0; k < m; ++k) csv.add(sol.X.states[i].col(k).mean());
        for (int k = 0; k < d; ++k) csv.add(sol.Y[i].col(k).mean());
        csv.add(mean_stderr(sol.Y[i].col(0), nullptr));
        for (double q : {0.05, 0.5, 0.95}) csv.add(quantile(sol.Y[i].col(0), q));
        csv.end_row();
    }
    csv.close();
}

void write_paths_csv(const Run& run, const FbsdeSolution& sol) {
    const std::size_t count = std::min(run.cfg.exports.paths, sol.X.n_paths());
    if (count == 0) return;
    const int m = sol.X.dim();
    std::vector<std::string> header{"path", "step", "time"};
    for (int k = 0; k < m; ++k) header.push_back("x_" + std::to_string(k + 1));
    CsvWriter csv(run.file("paths.csv"), header);
    for (std::size_t p = 0; p < count; ++p) {
        const auto row = static_cast<Eigen::Index>(p);
        for (std::size_t i = 0; i < sol.X.states.size(); ++i) {
            csv.add(static_cast<long long>(p)).add(static_cast<long long>(i));
            csv.add(sol.X.grid.time(static_cast<int>(i)));
            for (int k = 0; k < m; ++k) csv.add(sol.X.states[i](row, k));
            csv.end_row();
        }
    }
    csv.close();
}

void write_picard_csv(const Run& run, const DecouplingField& field) {
    CsvWriter csv(run.file("picard.csv"), {"iteration", "sup_difference"});
    for (std::size_t k = 0; k < field.history.size(); ++k) {
        csv.add(static_cast<long long>(k + 1)).add(field.history[k]);
        csv.end_row();
    }
    csv.close();
}

/// Sections shared by every command that runs the coupled solver.
void write_solution(Run& run, const FbsdeSolution& sol, const PicardConfig& picard) {
    auto& s = run.summary;
    const auto& c = run.preset.coeffs;
    const auto& field = sol.field;
    const auto& diag = sol.diagnostics;

    s.section("estimate");
    const Vector y0 = field.value(0, c.x0);
    std::vector<double> comps(y0.data(), y0.data() + y0.size());
    s.line("Y0", join(comps) + " +/- " + format_short(field.y0_stderr));
    s.line("x0", join(std::vector<double>(c.x0.data(), c.x0.data() + c.x0.size())));

    s.section("bounds");
    s.line("y_sup", diag.y_sup);
    const bool r0 = run.profile.constants.r == 0.0;
    s.line("y_bound", r0 ? format_short(y_bound(run.profile.constants.C, c.T)) : "n/a");
    s.line("truncation_N", optional_number(picard.truncation_N));
    if (picard.truncation_N)
        s.line("y_sup <= truncation_N + 0.01", pass_fail(diag.y_sup <= *picard.truncation_N + kBoundTol));
    else
        s.line("y_sup <= truncation_N + 0.01", "n/a");

    s.section("picard");
    s.line("iterations", std::to_string(field.picard_iterations));
    s.line("converged", field.converged ? "true" : "false");
    s.line("sup_norm_estimate", field.sup_norm_estimate);
    s.line("history", join(field.history));
    s.line("experimental", field.experimental ? "true" : "false");

    s.section("martingale");
    if (diag.martingale) {
        s.line("terminal_mean", diag.martingale->terminal_mean);
        s.line("stderr", diag.martingale->stderr);
        s.line("max_log", diag.martingale->max_log);
        s.line("check", pass_fail(diag.martingale->pass));
    } else {
        for (const char* k : {"terminal_mean", "stderr", "max_log", "check"}) s.line(k, "n/a");
    }

    s.section("coupling");
    s.line("g_vanishes", sol.g_vanishes ? "true" : "false");
    s.line("residual_rms", diag.residual.rms);
    s.line("terminal_residual_rms", diag.residual.terminal_rms);
    s.line("clipped_fraction", diag.clipped_fraction);

    write_field_csv(run, field);
    write_trajectory_csv(run, sol);
    write_picard_csv(run, field);
    write_paths_csv(run, sol);
}

void write_audit_section(Run& run) {
    const auto report = run.stage("audit", [&] {
        return audit_conditions(run.preset.coeffs, run.profile, SampleSpec::standard(run.preset.coeffs.T));
    });
    run.summary.section("audit");
    write_audit(run.summary, report);
    write_audit_csv(run.file("audit.csv"), report);
}

FbsdeSolution solve_stage(Run& run, const PicardConfig& picard) {
    return run.stage("solve", [&] {
        return solve_fbsde(run.preset.coeffs, run.grid(), run.cfg.mc.n_paths, run.cfg.mc.seed, run.basis(), picard,
                           run.options());
    });
}

int cmd_solve(Run& run) {
    write_header(run, "solve");
    const auto picard = run.picard();
    const auto sol = solve_stage(run, picard);
    write_solution(run, sol, picard);
    write_audit_section(run);
    run.finish();
    return kSuccess;
}

int cmd_audit(Run& run) {
    write_header(run, "audit");
    write_audit_section(run);
    run.finish();
    return kSuccess;
}

PdeConfig pde_config(const Run& run) { return run.cfg.pde ? *run.cfg.pde : PdeConfig{}; }

int cmd_pde_compare(Run& run) {
    const auto& c = run.preset.coeffs;
    if (c.dims.m != 1 || c.dims.n != 1 || c.dims.d != 1)
        fail("pde-compare needs a scalar preset (m = n = d = 1), got '" + run.preset.name + "'");
    write_header(run, "pde-compare");
    const auto picard = run.picard();
    const auto sol = solve_stage(run, picard);
    write_solution(run, sol, picard);

    const PdeConfig pc = pde_config(run);
    const int M = run.cfg.mc.steps;
    // PDE steps rounded up to a multiple of M so every MC node is a PDE node.
    const int pde_steps = ((std::max(pc.steps, M) + M - 1) / M) * M;
    const CoefficientSet pde_coeffs = picard.truncation_N ? truncate_coefficients(c, *picard.truncation_N) : c;
    const auto pde = run.stage("pde", [&] {
        return solve_semilinear_pde(pde_coeffs, SpaceGrid{pc.x_min, pc.x_max, pc.J}, TimeGrid(c.T, pde_steps));
    });

    const TimeGrid grid = run.grid();
    const double mid = grid.time(M / 2);
    std::vector<double> times;
    if (run.cfg.mc.initial_spread > 0.0) times.push_back(0.0);
    times.push_back(mid);
    double lo = 0.0, hi = 0.0;
    std::string region_rule;
    if (pc.region) {
        std::tie(lo, hi) = *pc.region;
        region_rule = "configured";
    } else {
        const auto& states = sol.F.states[static_cast<std::size_t>(M / 2)];
        lo = quantile(states.col(0), 0.1);
        hi = quantile(states.col(0), 0.9);
        region_rule = "central 80% of the fitting paths at t=" + format_short(mid);
    }
    const auto cmp = compare_field(pde, sol.field, lo, hi, times);

    auto& s = run.summary;
    s.section("pde comparison");
    s.line("pde_grid", "x in [" + format_short(pc.x_min) + ", " + format_short(pc.x_max) +
                           "] J=" + std::to_string(pc.J) + " steps=" + std::to_string(pde_steps));
    s.line("region", "[" + format_short(lo) + ", " + format_short(hi) + "] (" + region_rule + ")");
    s.line("times", join(times));
    s.line("points", std::to_string(cmp.points));
    s.line("sup_difference", cmp.sup);
    s.line("rms_difference", cmp.rms);
    s.line("worst_point", "t=" + format_short(cmp.worst_t) + " x=" + format_short(cmp.worst_x));
    s.line("pde_u0_at_x0", pde.value(0, c.x0(0)));

    CsvWriter csv(run.file("pde.csv"), {"time", "x", "u_pde", "u_mc"});
    for (double t : times) {
        const int ip = pde.time.index_of(t);
        const int im = grid.index_of(t);
        for (int j = 0; j <= pc.J + 1; ++j) {
            const double x = pde.grid.node(j);
            if (x < lo || x > hi) continue;
            csv.add(t).add(x).add(pde.values(ip, j)).add(sol.field.value(im, Vector::Constant(1, x))(0));
            csv.end_row();
        }
    }
    csv.close();

    // Full PDE solution on the MC time nodes.
    CsvWriter full(run.file("pde_solution.csv"), {"time", "x", "u"});
    for (int i = 0; i <= M; ++i) {
        const int ip = pde.time.index_of(grid.time(i));
        for (int j = 0; j <= pc.J + 1; ++j) {
            full.add(grid.time(i)).add(pde.grid.node(j)).add(pde.values(ip, j));
            full.end_row();
        }
    }
    full.close();
    write_audit_section(run);
    run.finish();
    return kSuccess;
}

void require_preset(const Run& run, const std::string& command, bool ok, const std::string& preset) {
    if (!ok) fail("command '" + command + "' needs preset '" + preset + "', config has '" + run.preset.name + "'");
}

int cmd_pandemic(Run& run) {
    require_preset(run, "pandemic", run.preset.pandemic.has_value(), "pandemic");
    const PandemicModel& model = *run.preset.pandemic;
    write_header(run, "pandemic");
    const auto picard = run.picard();
    const auto sol = solve_stage(run, picard);
    write_solution(run, sol, picard);

    const TimeGrid grid = run.grid();
    const double C = model.lipschitz_constant();
    const double cap = model.y_cap();
    double worst_low = 0.0, worst_high = 0.0;
    for (std::size_t i = 0; i < sol.Y.size(); ++i) {
        const double upper = std::expm1(C * (model.T - grid.time(static_cast<int>(i))));
        worst_low = std::max(worst_low, -sol.Y[i].minCoeff());
        worst_high = std::max(worst_high, sol.Y[i].maxCoeff() - upper);
    }
    const auto alpha = optimal_policy(sol);
    double alpha_min = 0.0, alpha_max = 0.0;
    for (const auto& a : alpha) {
        alpha_min = std::min(alpha_min, a.minCoeff());
        alpha_max = std::max(alpha_max, a.maxCoeff());
    }

    // Independent noise for the policy costs, shared by every policy.
    const auto noise = sample_noise(grid, run.cfg.mc.n_paths, 1, run.cfg.mc.seed + 1);
    const auto table = run.stage("policies", [&] { return compare_policies(model, sol.field, noise); });

    auto& s = run.summary;
    s.section("pandemic");
    s.line("lipschitz_constant", C);
    s.line("C_y", cap);
    s.line("max Y below 0", worst_low);
    s.line("max Y above exp(C(T-t))-1", worst_high);
    s.line("Y in [-0.01, exp(C(T-t))-1+0.01]", pass_fail(worst_low <= kBoundTol && worst_high <= kBoundTol));
    s.line("alpha range", "[" + format_short(alpha_min) + ", " + format_short(alpha_max) + "]");
    s.line("alpha in [0, C_y/2]", pass_fail(alpha_min >= 0.0 && alpha_max <= cap / 2.0));
    s.line("policy noise seed", std::to_string(run.cfg.mc.seed + 1));
    s.text("policy | J | stderr | J(alpha*)-J | stderr(diff) | J(alpha*) <= J + 3 stderr\n");
    bool all = true;
    for (const auto& row : table) {
        s.text(row.name + " | " + format_short(row.J) + " | " + format_short(row.stderr) + " | " +
               format_short(row.diff) + " | " + format_short(row.diff_stderr) + " | " + pass_fail(row.pass) + "\n");
        all = all && row.pass;
    }
    s.line("optimality", pass_fail(all));

    CsvWriter pol(run.file("policies.csv"), {"policy", "J", "stderr", "diff", "diff_stderr", "pass"});
    for (const auto& row : table) {
        pol.add(row.name).add(row.J).add(row.stderr).add(row.diff).add(row.diff_stderr).add(pass_fail(row.pass));
        pol.end_row();
    }
    pol.close();

    CsvWriter csv(run.file("pandemic.csv"),
                  {"time", "mean_x", "mean_alpha", "x_q05", "x_q50", "x_q95", "alpha_q05", "alpha_q50", "alpha_q95"});
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const auto& x = sol.X.states[i];
        csv.add(grid.time(static_cast<int>(i))).add(x.col(0).mean()).add(alpha[i].col(0).mean());
        for (double q : {0.05, 0.5, 0.95}) csv.add(quantile(x.col(0), q));
        for (double q : {0.05, 0.5, 0.95}) csv.add(quantile(alpha[i].col(0), q));
        csv.end_row();
    }
    csv.close();
    write_audit_section(run);
    run.finish();
    return kSuccess;
}

McSettings mc_settings(const Run& run) {
    McSettings mc;
    mc.n_paths = run.cfg.mc.n_paths;
    mc.steps = run.cfg.mc.steps;
    mc.seed = run.cfg.mc.seed;
    mc.basis = run.basis();
    mc.picard = run.picard();
    return mc;
}

int cmd_carbon(Run& run) {
    require_preset(run, "carbon", run.preset.carbon.has_value(), "carbon");
    const CarbonModel& model = *run.preset.carbon;
    write_header(run, "carbon");
    const McSettings mc = mc_settings(run);
    const PicardConfig& used = mc.picard;
    const auto price = run.stage("solve", [&] { return price_allowance(model, mc); });
    const auto& sol = price.solution;
    write_solution(run, sol, used);

    double y_lo = 0.0, y_hi = 0.0;
    for (const auto& y : sol.Y) {
        y_lo = std::min(y_lo, y.minCoeff());
        y_hi = std::max(y_hi, y.maxCoeff());
    }
    const double drift = price.terminal_mean - price.Y0;

    // Abatement jumps by exactly 1/(1 - alpha) at upward crossings of K.
    std::size_t crossings = 0, jump_mismatch = 0, negative = 0;
    for (std::size_t i = 0; i < price.abatement.size(); ++i) {
        const auto& xi = price.abatement[i];
        for (Eigen::Index p = 0; p < xi.rows(); ++p) {
            const double y = sol.Y[i](p, 0);
            for (int f = 0; f < model.N; ++f)
                if (y >= 0.0 && xi(p, f) < 0.0) ++negative;
            if (i == 0) continue;
            const double e_prev = sol.X.states[i - 1](p, 0), e = sol.X.states[i](p, 0);
            if (!(e_prev < model.K && e >= model.K)) continue;
            ++crossings;
            for (int f = 0; f < model.N; ++f)
                if (xi(p, f) != y * (1.0 / (1.0 - model.alphas[static_cast<std::size_t>(f)])) ||
                    price.abatement[i - 1](p, f) != sol.Y[i - 1](p, 0))
                    ++jump_mismatch;
        }
    }

    // Initial emissions below the cap, thresholds held fixed.
    std::vector<std::pair<double, AllowancePrice>> levels;
    for (double offset : {1.0, 0.5, 0.1}) {
        CarbonModel shifted = model;
        shifted.E0 = model.Lambda - offset;
        levels.emplace_back(shifted.E0, run.stage("solve E0=" + format_short(shifted.E0),
                                                  [&] { return price_allowance(shifted, mc); }));
    }
    bool monotone = true;
    for (std::size_t k = 1; k < levels.size(); ++k) {
        const auto& a = levels[k - 1].second;
        const auto& b = levels[k].second;
        monotone = monotone && b.Y0 >= a.Y0 - 2.0 * std::hypot(a.stderr, b.stderr);
    }

    auto& s = run.summary;
    s.section("carbon");
    s.line("Y0", format_short(price.Y0) + " +/- " + format_short(price.stderr));
    s.line("Y0 ∈ [0, λ]", pass_fail(price.Y0 >= 0.0 && price.Y0 <= model.lambda));
    s.line("Y range", "[" + format_short(y_lo) + ", " + format_short(y_hi) + "]");
    s.line("Y in [-0.01, λ+0.01]", pass_fail(y_lo >= -kBoundTol && y_hi <= model.lambda + kBoundTol));
    s.line("mean Y_T", format_short(price.terminal_mean) + " +/- " + format_short(price.terminal_stderr));
    s.line("mean Y_T - Y0", drift);
    s.line("|mean Y_T - Y0| <= 3 stderr", pass_fail(std::abs(drift) <= 3.0 * price.terminal_stderr));
    s.line("K crossings", std::to_string(crossings));
    s.line("jump factor 1/(1-alpha) at crossings", pass_fail(jump_mismatch == 0));
    s.line("abatement >= 0 where Y >= 0", pass_fail(negative == 0));
    for (const auto& [e0, p] : levels)
        s.line("Y0 at E0=" + format_short(e0), format_short(p.Y0) + " +/- " + format_short(p.stderr));
    s.line("Y0 nondecreasing in E0 (2 stderr)", pass_fail(monotone));

    std::vector<std::string> header{"time", "mean_e", "y_q05", "y_q50", "y_q95"};
    for (int f = 0; f < model.N; ++f) header.push_back("mean_xi_" + std::to_string(f + 1));
    CsvWriter csv(run.file("carbon.csv"), header);
    const TimeGrid grid = run.grid();
    for (std::size_t i = 0; i < sol.Y.size(); ++i) {
        csv.add(grid.time(static_cast<int>(i))).add(sol.X.states[i].col(0).mean());
        for (double q : {0.05, 0.5, 0.95}) csv.add(quantile(sol.Y[i].col(0), q));
        for (int f = 0; f < model.N; ++f) csv.add(price.abatement[i].col(f).mean());
        csv.end_row();
    }
    csv.close();

    CsvWriter mono(run.file("monotonicity.csv"), {"E0", "Y0", "stderr"});
    for (const auto& [e0, p] : levels) {
        mono.add(e0).add(p.Y0).add(p.stderr);
        mono.end_row();
    }
    mono.close();
    write_audit_section(run);
    run.finish();
    return kSuccess;
}

// ---------------------------------------------------------------------------
// Closed-form oracle suite

struct Check {
    std::string name;
    std::string metric;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<Check> benchmark_suite(Run& run) {
    const McConfig& mc = run.cfg.mc;
    const json empty = json::object();
    std::vector<Check> out;
    auto add = [&](std::string name, std::string metric, double value, double tol) {
        out.push_back({std::move(name), std::move(metric), value, tol, value <= tol});
    };
    PicardConfig picard = run.cfg.picard;

    {
        const Preset p = build_preset("benchmark:linear", empty);
        const TimeGrid grid(p.coeffs.T, mc.steps);
        const auto sol = run.stage("linear", [&] {
            return solve_fbsde(p.coeffs, grid, mc.n_paths, mc.seed, p.basis, picard);
        });
        const double y0 = sol.field.value(0, p.coeffs.x0)(0);
        add("linear", "|Y0 - exp(-0.1)|", std::abs(y0 - std::exp(-0.1)), 0.01);

        // Coupled pipeline with g = 0 against the bare backward solver.
        auto noise = std::make_shared<const NoiseBlock>(sample_noise(grid, mc.n_paths, 1, mc.seed));
        const auto paths = simulate_sde(p.coeffs.b, p.coeffs.sigma, p.coeffs.x0, noise);
        const auto field = solve_decoupled_bsde(paths, p.coeffs, p.basis, picard);
        double mismatches = 0.0;
        for (int i = 0; i <= grid.steps(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            const Slice y = field.value_rows(i, paths.states[k]);
            mismatches += static_cast<double>((y.array() != sol.Y[k].array()).count());
            mismatches += static_cast<double>((paths.states[k].array() != sol.X.states[k].array()).count());
        }
        add("vacuity", "entries differing from the decoupled solve", mismatches, 0.0);
    }

    {
        const Preset p = build_preset("benchmark:digital", empty);
        const TimeGrid grid(p.coeffs.T, mc.steps);
        SolveOptions opts;
        opts.initial = spread_initial(p.coeffs.x0, mc.n_paths, 2.0, mc.seed);
        const auto sol = run.stage("digital", [&] {
            return solve_fbsde(p.coeffs, grid, mc.n_paths, mc.seed, p.basis, picard, opts);
        });
        double sup = 0.0;
        for (int k = 0; k <= 60; ++k) {
            const double x = -1.5 + 0.05 * k;
            const double u = sol.field.value(0, Vector::Constant(1, x))(0);
            sup = std::max(sup, std::abs(u - normal_cdf(x / std::sqrt(p.coeffs.T))));
        }
        add("digital", "sup |u(0,x) - Phi(x)| on [-1.5, 1.5]", sup, 0.02);

        const int pde_steps = 4 * grid.steps();
        const auto pde = run.stage("digital pde", [&] {
            return solve_semilinear_pde(p.coeffs, SpaceGrid{-6.0, 6.0, 400}, TimeGrid(p.coeffs.T, pde_steps));
        });
        double pde_sup = 0.0;
        for (int k = 0; k <= 60; ++k) {
            const double x = -1.5 + 0.05 * k;
            pde_sup = std::max(pde_sup, std::abs(pde.value(0, x) - normal_cdf(x / std::sqrt(p.coeffs.T))));
        }
        add("digital-pde", "sup |u_pde(0,x) - Phi(x)| on [-1.5, 1.5]", pde_sup, 0.01);
        const auto cmp = compare_field(pde, sol.field, -1.0, 1.0, {0.0, grid.time(grid.steps() / 2)});
        add("digital-cross", "sup |u_pde - u_mc| on [-1, 1] x {0, T/2}", cmp.sup, 0.03);
    }

    {
        const Preset p = build_preset("benchmark:riccati", empty);
        const auto sol = run.stage("riccati", [&] {
            return solve_fbsde(p.coeffs, TimeGrid(p.coeffs.T, mc.steps), mc.n_paths, mc.seed, p.basis, picard);
        });
        const double y0 = sol.field.value(0, p.coeffs.x0)(0);
        add("riccati", "|Y0 - x0/(1+T)|", std::abs(y0 - 0.5), 0.02);
    }

    {
        const Preset p = build_preset("benchmark:constant", empty);
        const auto sol = run.stage("constant", [&] {
            return solve_fbsde(p.coeffs, TimeGrid(p.coeffs.T, mc.steps), mc.n_paths, mc.seed, p.basis, picard);
        });
        add("constant-driver", "|Y0 - c T|", std::abs(sol.field.value(0, p.coeffs.x0)(0) - p.coeffs.T), 1e-9);
    }

    {
        const TimeGrid grid(1.0, mc.steps);
        const auto noise = sample_noise(grid, mc.n_paths, 1, mc.seed);
        SliceSeries g(static_cast<std::size_t>(grid.steps()), Slice::Constant(static_cast<Eigen::Index>(mc.n_paths), 1, 0.5));
        const auto report = martingale_diagnostic(stochastic_exponential(g, noise, grid, "0.5"));
        add("exponential", "|mean E_T - 1| / (3 stderr)", std::abs(report.terminal_mean - 1.0) / (3.0 * report.stderr),
            1.0);

        // Drift b + sigma g against b on dW + g dt, with g read off the drifted path.
        const double sigma = 0.8;
        const auto b = [](double, const Vector& x) { return Vector(-0.5 * x); };
        const auto s = [sigma](double, const Vector&) { return Matrix::Constant(1, 1, sigma); };
        const auto gx = [](double x) { return 0.5 * std::cos(x); };
        const StepDriftFn drifted = [&](int, double t, const Vector& x) {
            return Vector(b(t, x) + s(t, x) * Vector::Constant(1, gx(x(0))));
        };
        const Slice init = replicate_initial(Vector::Constant(1, 0.3), mc.n_paths);
        const auto X = euler_maruyama(drifted, s, init, noise.increments, grid);
        SliceSeries g_along(static_cast<std::size_t>(grid.steps()));
        for (int i = 0; i < grid.steps(); ++i)
            g_along[static_cast<std::size_t>(i)] = X[static_cast<std::size_t>(i)].unaryExpr(gx);
        const auto shifted = shift_noise(noise, g_along, grid, -1);
        const auto Xs = euler_maruyama(DriftFn(b), s, init, shifted.increments(), grid);
        double err = 0.0;
        for (std::size_t i = 0; i < X.size(); ++i) err = std::max(err, (X[i] - Xs[i]).cwiseAbs().maxCoeff());
        add("shift-identity", "max |X_drift - X_shifted|", err, 1e-12);
    }
    return out;
}

int cmd_benchmarks(Run& run) {
    write_header(run, "benchmarks");
    const auto checks = benchmark_suite(run);
    auto& s = run.summary;
    s.section("benchmarks");
    s.text("name | metric | value | tolerance | result\n");
    bool all = true;
    CsvWriter csv(run.file("benchmarks.csv"), {"name", "metric", "value", "tolerance", "pass"});
    for (const auto& c : checks) {
        s.text(c.name + " | " + c.metric + " | " + format_short(c.value) + " | " + format_short(c.tolerance) + " | " +
               pass_fail(c.pass) + "\n");
        csv.add(c.name).add(c.metric).add(c.value).add(c.tolerance).add(pass_fail(c.pass));
        csv.end_row();
        all = all && c.pass;
    }
    csv.close();
    s.line("suite", pass_fail(all));
    for (const auto& c : checks) run.log << (c.pass ? "PASS " : "FAIL ") << c.name << "\n";
    run.finish();
    return all ? kSuccess : kBenchmarkFailure;
}

const std::map<std::string, std::function<int(Run&)>>& commands() {
    static const std::map<std::string, std::function<int(Run&)>> table{
        {"solve", cmd_solve},       {"audit", cmd_audit},   {"pde-compare", cmd_pde_compare},
        {"pandemic", cmd_pandemic}, {"carbon", cmd_carbon}, {"benchmarks", cmd_benchmarks},
    };
    return table;
}

}  // namespace

int run(const RunOptions& options, std::ostream& log, std::ostream& err) {
    try {
        const auto& table = commands();
        const auto it = table.find(options.command);
        if (it == table.end()) fail("unknown command '" + options.command + "'");

        ExperimentConfig cfg = options.config_path.empty() ? ExperimentConfig{} : load_config(options.config_path);
        if (options.command == "pandemic" && options.config_path.empty()) cfg.preset = "pandemic";
        if (options.command == "carbon" && options.config_path.empty()) cfg.preset = "carbon";
        if (options.seed) cfg.mc.seed = *options.seed;
        if (options.out) {
            cfg.outputs = *options.out;
        } else if (const char* env = std::getenv("FBSDE_LAB_OUT"); env && *env) {
            cfg.outputs = env;
        }
        if (options.workers) set_max_workers(*options.workers);

        Run r{cfg, build_preset(cfg.preset, cfg.model), {}, fs::path(cfg.outputs), log, {}, {}};
        r.profile = cfg.declared_conditions ? *cfg.declared_conditions : r.preset.profile;
        r.profile.validate(r.preset.coeffs.dims);
        std::error_code ec;
        fs::create_directories(r.out, ec);
        if (ec || !fs::is_directory(r.out)) fail("cannot create output directory '" + r.out.string() + "'");
        return it->second(r);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }
}

}  // namespace fbsde::cli
