#pragma once

#include "fbsde/applications.hpp"
#include "fbsde/audit.hpp"
#include "fbsde/pde.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fbsde::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsageError = 1,
    kNumericalFailure = 2,
    kBenchmarkFailure = 3,
};

struct McConfig {
    std::size_t n_paths = 100000;
    int steps = 50;
    std::uint64_t seed = 0;
    /// Half-width of stratified initial states around x0 (0: all paths at x0).
    double initial_spread = 0.0;
};

struct PdeConfig {
    double x_min = -6.0;
    double x_max = 6.0;
    int J = 400;
    int steps = 200;
    std::optional<std::pair<double, double>> region;  // default: central 80% of X at T/2
};

struct ExportConfig {
    std::optional<SampleAxis> field_grid;  // x_1 nodes for field.csv
    std::size_t paths = 0;                 // number of full paths written to paths.csv
};

struct ExperimentConfig {
    std::string preset = "benchmark:linear";
    McConfig mc;
    std::optional<BasisSpec> basis;  // default: the preset's basis
    PicardConfig picard;
    std::optional<PdeConfig> pde;
    std::string outputs = "fbsde_out";
    std::optional<ConditionProfile> declared_conditions;
    nlohmann::json model = nlohmann::json::object();  // preset parameters
    ExportConfig exports;
};

/// Parses the JSON config. Unknown keys, wrong types and out-of-range values
/// raise InvalidArgument naming the offending field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// A fully built experiment: coefficients plus the defaults that go with them.
struct Preset {
    std::string name;
    CoefficientSet coeffs;
    ConditionProfile profile;
    BasisSpec basis;
    std::optional<PandemicModel> pandemic;
    std::optional<CarbonModel> carbon;
};

/// Recognized names: pandemic, carbon, benchmark:linear, benchmark:digital,
/// benchmark:riccati, benchmark:riccati-literal, benchmark:constant,
/// custom-reference.
Preset build_preset(const std::string& name, const nlohmann::json& model);
std::vector<std::string> preset_names();

struct RunOptions {
    std::string command;
    std::string config_path;  // empty: built-in defaults
    std::optional<unsigned> workers;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
};

/// Executes one command and returns its exit code. Messages go to `log`
/// (stdout for progress) and `err`.
int run(const RunOptions& options, std::ostream& log, std::ostream& err);

/// 17 significant digits, '.' decimal point regardless of locale.
std::string format_number(double v);

}  // namespace fbsde::cli
