#include "blowup/error.hpp"
#include "blowup/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace ex = blowup::experiment;

int main(int argc, char** argv) {
    CLI::App app{"Boundary blow-up lab"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::string> out;
    std::optional<int> tasks;
    auto* run = app.add_subcommand("run", "Run the pipelines of an experiment config");
    run->add_option("config", config, "Experiment config (JSON)")->required();
    run->add_option("--out", out, "Output directory");
    run->add_option("--tasks", tasks, "Concurrent pipelines")->check(CLI::PositiveNumber);

    std::string manifest_a, manifest_b;
    double tol = 1e-9;
    auto* compare = app.add_subcommand("compare", "Compare two runs");
    compare->add_option("manifest_a", manifest_a, "First manifest or run directory")->required();
    compare->add_option("manifest_b", manifest_b, "Second manifest or run directory")->required();
    compare->add_option("--tol", tol, "Relative tolerance")->check(CLI::NonNegativeNumber);

    auto* list = app.add_subcommand("list-families", "List nonlinearity families");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*list) {
            for (const auto& f : ex::families()) std::printf("%-16s %-18s %s\n", f.name.c_str(), f.params.c_str(), f.description.c_str());
            return 0;
        }
        if (*run) {
            const auto cfg = ex::load_config(config);
            const auto dir = ex::resolve_output(cfg, out);
            const auto res = ex::run_experiment(cfg, {dir, tasks.value_or(cfg.tasks)});
            for (const auto& p : res.manifest["pipelines"]) {
                std::printf("%-24s %-14s %s", p["name"].get<std::string>().c_str(), p["kind"].get<std::string>().c_str(),
                            p["status"].get<std::string>().c_str());
                if (p.contains("message")) std::printf(": %s", p["message"].get<std::string>().c_str());
                std::printf("\n");
            }
            std::printf("wrote %s\n", (dir / "manifest.json").string().c_str());
            return res.ok ? 0 : 1;
        }
        const auto res = ex::compare_manifests(manifest_a, manifest_b, tol);
        std::cout << ex::dump_json(res.report) << '\n';
        return res.differences == 0 ? 0 : 1;
    } catch (const blowup::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
