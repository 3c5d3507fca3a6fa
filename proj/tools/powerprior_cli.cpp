#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <powerprior/errors.hpp>
#include <powerprior/parallel.hpp>
#include <powerprior/scenarios.hpp>

using namespace powerprior;
namespace sc = powerprior::scenarios;

int main(int argc, char** argv)
{
    CLI::App app{"Normalised power priors: constants, grids, dictionaries and joint posterior sampling"};
    app.set_version_flag("--version", std::string(io::kVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string scenario_name;
    bool list = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        if (needs_config)
            opt->required();
        cmd->add_option("--seed", seed, "override the configured seed");
        cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
        cmd->add_option("--threads", threads, "maximum worker threads (0 = all cores)")->capture_default_str();
    };

    auto* constants = app.add_subcommand("constants", "bridge (and closed-form) log c(a0) over a0_list");
    auto* grid = app.add_subcommand("grid", "adaptive or uniform grid of l(a0) estimates");
    auto* fit = app.add_subcommand("fit", "grid plus spline dictionary of l(a0)");
    auto* sample = app.add_subcommand("sample", "joint posterior of (theta, a0)");
    auto* sens = app.add_subcommand("sensitivity", "fixed-a0 prior and posterior summaries over a0_list");
    auto* scenario = app.add_subcommand("scenario", "run an embedded preset end to end");
    for (auto* c : {constants, grid, fit, sample, sens})
        add_common(c, true);
    add_common(scenario, false);
    scenario->add_option("name", scenario_name, "preset name");
    scenario->add_flag("--list", list, "list the presets and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        set_max_threads(threads);
        sc::CommandResult res;
        if (scenario->parsed()) {
            if (list) {
                for (const auto& n : sc::preset_names())
                    std::cout << n << "\n";
                return 0;
            }
            if (scenario_name.empty())
                throw ConfigError("scenario needs a preset name (see --list)");
            sc::RunConfig cfg = config_path.empty() ? sc::preset_run(scenario_name, seed)
                                                    : sc::load_config(config_path, seed);
            res = sc::cmd_scenario(cfg, scenario_name);
        } else {
            const auto cfg = sc::load_config(config_path, seed);
            if (constants->parsed())
                res = sc::cmd_constants(cfg);
            else if (grid->parsed())
                res = sc::cmd_grid(cfg);
            else if (fit->parsed())
                res = sc::cmd_fit(cfg);
            else if (sample->parsed())
                res = sc::cmd_sample(cfg);
            else
                res = sc::cmd_sensitivity(cfg);
        }
        sc::write_artifacts(res.files, out_dir);
        for (const auto& [name, content] : res.files)
            std::cout << (std::filesystem::path(out_dir) / name).string() << "\n";
        if (!res.gate_passed) {
            std::cerr << "error: convergence diagnostics failed (R-hat or MCSE gate); outputs written to " << out_dir
                      << "\n";
            return 3;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
