// Command line front end: run an epsilon sweep, print a rate table, or run
// the property probes.
//
//   ddm run <config>     solve, write fields, reports and rates.csv
//   ddm rates <config>   same solves without field dumps, prints the table
//   ddm check            weighted-space probes on the reference circle

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "ddm/config.hpp"
#include "ddm/probes.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int check() {
    namespace probes = ddm::probes;
    auto results = probes::phase_field_probes();
    for (auto& r : probes::volume_order_probes()) results.push_back(r);
    results.push_back(probes::perimeter_probe());
    for (auto& r : probes::ratio_probes()) results.push_back(r);

    bool all = true;
    for (const auto& res : results) {
        std::cout << (res.pass ? "PASS " : "FAIL ") << res.name << ": " << res.detail << "\n";
        all = all && res.pass;
    }
    return all ? 0 : 1;
}

int sweep(const std::string& path, ddm::SweepMode mode) {
    ddm::RunConfig cfg;
    try {
        cfg = ddm::load_config(path);
    } catch (const ddm::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        const auto result = ddm::run_sweep(cfg, mode, &std::cerr);
        if (result.max_residual)
            std::cout << "exact solution residual (max over samples): " << fmt("%.3e", *result.max_residual) << "\n";
        if (result.table) std::cout << result.table->text();
        std::cout << "output written to " << cfg.output << "\n";
    } catch (const ddm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffuse domain solver for semilinear parabolic problems"};
    app.require_subcommand(1);
    std::string config;
    auto* run = app.add_subcommand("run", "Run an epsilon sweep and write all artifacts");
    run->add_option("config", config, "Configuration file")->required();
    auto* rates = app.add_subcommand("rates", "Run an epsilon sweep and print the convergence table");
    rates->add_option("config", config, "Configuration file")->required();
    auto* chk = app.add_subcommand("check", "Run the weighted-space property probes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (*run) return sweep(config, ddm::SweepMode::run);
    if (*rates) return sweep(config, ddm::SweepMode::rates);
    if (*chk) return check();
    return kExitConfig;
}
