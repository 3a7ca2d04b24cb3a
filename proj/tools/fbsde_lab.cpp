#include "fbsde/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo laboratory for coupled forward-backward SDEs"};
    app.require_subcommand(1, 1);

    fbsde::cli::RunOptions opts;
    std::string config;
    unsigned workers = 0;
    std::string out;
    std::uint64_t seed = 0;

    const char* descriptions[][2] = {
        {"solve", "decouple, solve and recouple the configured preset"},
        {"audit", "sample the declared structural conditions"},
        {"pde-compare", "compare the Monte Carlo field with a finite-difference solution"},
        {"pandemic", "optimal lockdown policy and cost comparison"},
        {"carbon", "allowance price, abatement schedules and sanity checks"},
        {"benchmarks", "closed-form oracle suite"},
    };
    for (const auto& [name, help] : descriptions) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "JSON experiment config");
        sub->add_option("--workers", workers, "cap on path-parallel workers")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output directory (overrides FBSDE_LAB_OUT and the config)");
        sub->add_option("--seed", seed, "master seed (overrides the config)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : fbsde::cli::kUsageError;
    }

    auto* sub = app.get_subcommands().front();
    opts.command = sub->get_name();
    opts.config_path = config;
    if (sub->count("--workers")) opts.workers = workers;
    if (sub->count("--out")) opts.out = out;
    if (sub->count("--seed")) opts.seed = seed;
    return fbsde::cli::run(opts, std::cout, std::cerr);
}
