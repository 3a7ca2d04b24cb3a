#include "fbsde/cli.hpp"
#include "section.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace fbsde::cli {
namespace {

using nlohmann::json;

std::pair<double, double> interval(Section& s, const std::string& key) {
    const json& v = s.raw(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        fail("config field '" + s.field(key) + "' must be [lo, hi]");
    const double lo = v[0].get<double>(), hi = v[1].get<double>();
    if (!(lo <= hi)) fail("config field '" + s.field(key) + "' needs lo <= hi");
    return {lo, hi};
}

void read_mc(Section s, McConfig& mc) {
    if (s.has("n_paths")) mc.n_paths = s.count("n_paths");
    if (s.has("steps")) mc.steps = static_cast<int>(s.count("steps"));
    if (s.has("seed")) mc.seed = s.count("seed", true);
    if (s.has("initial_spread")) {
        mc.initial_spread = s.number("initial_spread");
        if (mc.initial_spread < 0.0) fail("config field 'mc.initial_spread' must be non-negative");
    }
    s.finish();
}

BasisSpec read_basis(Section s) {
    BasisSpec b;
    if (s.has("kind")) {
        try {
            b.kind = parse_basis_kind(s.text("kind"));
        } catch (const InvalidArgument&) {
            fail("config field 'basis.kind' has unknown value '" + s.text("kind") + "'");
        }
    }
    if (s.has("size")) b.size = static_cast<int>(s.count("size", b.kind == BasisKind::polynomial));
    if (s.has("clip_quantile")) b.clip_quantile = s.number("clip_quantile");
    if (s.has("domain")) {
        const json& d = s.raw("domain");
        if (!d.is_array()) fail("config field 'basis.domain' must be a list of [lo, hi]");
        for (const auto& e : d) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                fail("config field 'basis.domain' must be a list of [lo, hi]");
            b.domain.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
    }
    if (s.has("knots")) {
        const json& k = s.raw("knots");
        if (!k.is_array()) fail("config field 'basis.knots' must be a list of lists");
        for (const auto& dim : k) {
            if (!dim.is_array()) fail("config field 'basis.knots' must be a list of lists");
            std::vector<double> row;
            for (const auto& v : dim) {
                if (!v.is_number()) fail("config field 'basis.knots' must contain numbers");
                row.push_back(v.get<double>());
            }
            b.knots.push_back(std::move(row));
        }
    }
    s.finish();
    if (!(b.clip_quantile >= 0.0 && b.clip_quantile < 0.5))
        fail("config field 'basis.clip_quantile' must lie in [0, 0.5)");
    return b;
}

void read_picard(Section s, PicardConfig& p) {
    if (s.has("max_iters")) p.max_iters = static_cast<int>(s.count("max_iters"));
    if (s.has("tol")) p.tol = s.positive("tol");
    if (s.has("truncation_N")) p.truncation_N = s.positive("truncation_N");
    if (s.has("init")) {
        try {
            p.init = parse_picard_init(s.text("init"));
        } catch (const InvalidArgument&) {
            fail("config field 'picard.init' has unknown value '" + s.text("init") + "'");
        }
    }
    if (s.has("driver_clip")) p.driver_clip = s.positive("driver_clip");
    s.finish();
}

PdeConfig read_pde(Section s) {
    PdeConfig p;
    if (s.has("x_min")) p.x_min = s.number("x_min");
    if (s.has("x_max")) p.x_max = s.number("x_max");
    if (s.has("J")) p.J = static_cast<int>(s.count("J"));
    if (s.has("steps")) p.steps = static_cast<int>(s.count("steps"));
    if (s.has("region")) p.region = interval(s, "region");
    s.finish();
    if (!(p.x_min < p.x_max)) fail("config fields 'pde.x_min' < 'pde.x_max' required");
    if (p.J < 16) fail("config field 'pde.J' must be at least 16");
    return p;
}

ConditionProfile read_declared(Section s) {
    ConditionProfile p;
    try {
        if (s.has("forward")) p.forward = parse_forward_condition(s.text("forward"));
        if (s.has("backward")) p.backward = parse_backward_condition(s.text("backward"));
        if (s.has("uniqueness")) p.uniqueness = parse_uniqueness_condition(s.text("uniqueness"));
    } catch (const InvalidArgument& e) {
        fail(std::string("config section 'declared_conditions': ") + e.what());
    }
    if (s.has("C")) p.constants.C = s.positive("C");
    if (s.has("r")) {
        p.constants.r = s.number("r");
        if (p.constants.r < 0.0) fail("config field 'declared_conditions.r' must be non-negative");
    }
    if (s.has("epsilon")) p.constants.epsilon = s.positive("epsilon");
    if (s.has("kappa")) p.constants.kappa = s.positive("kappa");
    s.finish();
    return p;
}

ExportConfig read_exports(Section s) {
    ExportConfig e;
    if (s.has("field_grid")) {
        Section g = s.child("field_grid");
        SampleAxis axis;
        const auto lohi = [&] {
            const double lo = g.has("lo") ? g.number("lo") : -1.0;
            const double hi = g.has("hi") ? g.number("hi") : 1.0;
            return std::pair{lo, hi};
        }();
        axis.lo = lohi.first;
        axis.hi = lohi.second;
        axis.points = g.has("points") ? static_cast<int>(g.count("points")) : 41;
        g.finish();
        if (!(axis.lo <= axis.hi)) fail("config field 'exports.field_grid' needs lo <= hi");
        e.field_grid = axis;
    }
    if (s.has("paths")) e.paths = s.count("paths", true);
    s.finish();
    return e;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    Section s(root, "");
    if (s.has("preset")) cfg.preset = s.text("preset");
    if (s.has("mc")) read_mc(s.child("mc"), cfg.mc);
    if (s.has("basis")) cfg.basis = read_basis(s.child("basis"));
    if (s.has("picard")) read_picard(s.child("picard"), cfg.picard);
    if (s.has("pde")) cfg.pde = read_pde(s.child("pde"));
    if (s.has("outputs")) {
        cfg.outputs = s.text("outputs");
        if (cfg.outputs.empty()) fail("config field 'outputs' must not be empty");
    }
    if (s.has("declared_conditions")) cfg.declared_conditions = read_declared(s.child("declared_conditions"));
    if (s.has("model")) {
        cfg.model = s.raw("model");
        if (!cfg.model.is_object()) fail("config field 'model' must be an object");
    }
    if (s.has("exports")) cfg.exports = read_exports(s.child("exports"));
    s.finish();

    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), cfg.preset) == names.end())
        fail("config field 'preset' has unknown value '" + cfg.preset + "'");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace fbsde::cli
