#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "dppsp/diagnostics.hpp"
#include "dppsp/errors.hpp"
#include "dppsp/harness.hpp"

namespace {

int cmd_validate(const std::string& path) {
    const dppsp::ExperimentConfig cfg = dppsp::parse_config(path);
    const dppsp::ExperimentSetup setup = dppsp::make_setup(cfg);
    dppsp::validate_mixing(setup.mixing, &setup.graph);
    double rho = 0.0;
    for (const auto& node : setup.instance.problems)
        rho = std::max(rho, node.rho);
    const double margin_cap =
        dppsp::margin_stepsize_cap(setup.mixing.lambda_min, rho);
    const double gap_cap = dppsp::gap_stepsize_cap(rho);
    std::printf("family = %s\n",
                dppsp::family_name(cfg.instance.family).c_str());
    std::printf("nodes = %d\n", setup.mixing.size());
    std::printf("block_dim = %d\n", setup.instance.problems.front().dim());
    std::printf("edges = %d\n", setup.graph.edge_count());
    std::printf("lambda_min_w = %.17g\n", setup.mixing.lambda_min);
    std::printf("lambda_max_w = %.17g\n", setup.mixing.lambda_max);
    std::printf("fiedler_gap = %.17g\n", setup.mixing.fiedler_gap);
    std::printf("rho = %.17g\n", rho);
    std::printf("margin_cap = %.17g\n", margin_cap);
    std::printf("gap_cap = %.17g\n", gap_cap);
    std::printf("alpha = %.17g\n", cfg.algo.alpha);
    std::printf("alpha_within_margin_cap = %d\n",
                cfg.algo.alpha <= margin_cap ? 1 : 0);
    std::printf("alpha_within_gap_cap = %d\n",
                cfg.algo.alpha <= gap_cap ? 1 : 0);
    std::printf("config_ok = 1\n");
    return 0;
}

int cmd_bounds(const std::string& path) {
    const dppsp::BoundsReport report =
        dppsp::compare_bounds(dppsp::parse_config(path));
    for (const auto& row : report.rows)
        std::printf("T=%-8d %-10s measured=%-14.6g bound=%-14.6g %s\n",
                    row.rounds, row.quantity.c_str(), row.measured, row.bound,
                    !row.regime_ok ? "outside-regime"
                                   : (row.violated ? "VIOLATED" : "ok"));
    std::printf("violations = %d\n", report.violations);
    std::printf("regime_breaks = %d\n", report.regime_breaks);
    std::printf("csv = %s\n", report.csv_path.c_str());
    return report.violations == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Decentralized proximal-point solver for constrained saddle "
        "problems.\nExit codes: 0 success, 2 solver/guarantee failure, 3 "
        "config error."};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<double> grid;

    CLI::App* run =
        app.add_subcommand("run", "Run the experiment and write artifacts");
    run->add_option("config", config_path, "config file")->required();

    CLI::App* sweep = app.add_subcommand(
        "sweep", "Run the experiment over a stepsize grid, one subdir each");
    sweep->add_option("config", config_path, "config file")->required();
    sweep->add_option("--alpha-grid", grid,
                      "stepsizes to sweep (default: cap, cap/2, cap/4)")
        ->delimiter(',');

    CLI::App* validate = app.add_subcommand(
        "validate", "Check the config and mixing matrix, write nothing");
    validate->add_option("config", config_path, "config file")->required();

    CLI::App* bounds = app.add_subcommand(
        "bounds", "Compare measured averages against guarantee bounds");
    bounds->add_option("config", config_path, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    try {
        if (run->parsed()) return dppsp::run_experiment(dppsp::parse_config(config_path));
        if (sweep->parsed())
            return dppsp::sweep_alphas(dppsp::parse_config(config_path), grid);
        if (validate->parsed()) return cmd_validate(config_path);
        return cmd_bounds(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dppsp: %s\n", e.what());
        return dppsp::classify_exit(e);
    }
}
