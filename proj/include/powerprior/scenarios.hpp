#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <powerprior/io.hpp>

// Run configuration, embedded presets and the end-to-end pipelines behind
// each CLI subcommand.
namespace powerprior::scenarios {

using io::Json;
using Artifacts = std::map<std::string, std::string>; // file name -> content

struct RunConfig {
    Json json; // effective configuration, seed included
    std::string hash;
    std::string source;
    std::uint64_t seed = 0;
    ModelSpec model;
    Dataset historical;
    std::optional<Dataset> current;
    A0Prior a0_prior;
    grid::GridBudget budget;
    bool uniform_grid = false;
    grid::Backend backend = grid::Backend::BridgeMcmc;
    int K = 20000;
    posterior::Normalisation normalisation = posterior::Normalisation::Dictionary;
    mcmc::ChainConfig chains;
    bridge::BridgeConfig bridge;
    std::vector<double> a0_list;
    std::optional<VectorXd> truth;
    std::optional<std::filesystem::path> dictionary_path;
    Json extras; // scenario-only keys: K_sweep, K_variants, compare_uniform

    io::FileHeader header(const std::string& command) const;
};

constexpr int kSchemaVersion = 1;

RunConfig parse_config(const io::Document& doc, std::optional<std::uint64_t> seed_override,
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override);

std::vector<std::string> preset_names();
Json preset_config(const std::string& name); // ConfigError for unknown names
RunConfig preset_run(const std::string& name, std::optional<std::uint64_t> seed_override = std::nullopt);

// Deterministic synthetic data from a generator spec such as
// {"kind": "poisson", "n": 200, "lambda": 2, "seed": 7}.
Dataset generate_dataset(const Json& spec, std::uint64_t default_seed);

struct CommandResult {
    Artifacts files;
    Json report;
    bool gate_passed = true;
};

grid::Evaluator make_evaluator(const RunConfig& cfg);
grid::GridResult run_grid(const RunConfig& cfg);

struct FitOutput {
    grid::GridResult grid;
    curvefit::SplineFit fit;
    curvefit::Dictionary direct;
    curvefit::Dictionary derivative;
    Json metrics; // direct vs derivative against the closed form, when there is one
};
FitOutput run_fit(const RunConfig& cfg, const grid::GridResult& grid, int K);

// Exact l(a0) when the family is conjugate.
std::optional<std::function<double(double)>> exact_l(const RunConfig& cfg);

CommandResult cmd_constants(const RunConfig& cfg);
CommandResult cmd_grid(const RunConfig& cfg);
CommandResult cmd_fit(const RunConfig& cfg);
CommandResult cmd_sample(const RunConfig& cfg);
CommandResult cmd_sensitivity(const RunConfig& cfg);
CommandResult cmd_scenario(const RunConfig& cfg, const std::string& name);

void write_artifacts(const Artifacts& files, const std::filesystem::path& dir);

// Summaries keyed by parameter name.
Json summary_object(const std::vector<posterior::ParamSummary>& s);

} // namespace powerprior::scenarios
