#pragma once

#include "blowup/grid.hpp"
#include "blowup/large.hpp"
#include "blowup/nonlinearity.hpp"
#include "blowup/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace blowup::experiment {

using json = nlohmann::json;

struct NonlinearityBlock {
    std::string family = "power";
    double p = 3.0;
    double alpha = 1.0;
    double kappa = 1.0;
    double weight = 1.0;
    int n_intervals = 5;
    std::uint64_t seed = 0;
    std::vector<std::pair<double, double>> table;

    NonlinearitySpec build() const;
    /// Exponent of the profile when it is a pure power, for rate checks.
    std::optional<double> power() const;
};

struct DomainBlock {
    std::string kind = "interval";
    double x0 = -1.0;
    double x1 = 1.0;
    double y0 = 0.0;
    double y1 = 1.0;
    std::string graph = "zero";
    double slope = 1.0;
    double period = 0.5;
    std::vector<std::pair<double, double>> graph_table;
    double rho = 1.0;
    double height = 1.0;
    double h = 1.0 / 64;

    DomainSpec build() const;
};

struct PipelineSpec {
    std::string name;
    std::string kind;
    NonlinearityBlock nonlinearity;
    DomainBlock domain;
    SolveConfig solver;
    RampSchedule ramp;
    /// Kind-specific keys, already validated.
    json params;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    int tasks = 1;
    std::optional<std::string> output;
    std::vector<PipelineSpec> pipelines;
    /// Hex digest of the canonical (sorted-key) config text.
    std::string hash;
};

/// Validates and fills defaults; errors carry the key path.
ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Artifact {
    std::string path;
    std::string content;
};

struct PipelineOutcome {
    std::string name;
    std::string kind;
    /// "ok", "breach" (hard invariant failed) or "error".
    std::string status = "ok";
    std::string message;
    json verdict;
    std::vector<Artifact> artifacts;
};

PipelineOutcome run_pipeline(const PipelineSpec& spec, std::uint64_t seed);

struct RunOptions {
    std::filesystem::path out;
    int tasks = 1;
};

struct RunResult {
    json manifest;
    bool ok = true;
    std::filesystem::path out;
    /// Wall time per pipeline in config order; kept out of the artifacts.
    std::vector<double> seconds;
};

/// Runs every pipeline on a bounded pool and writes artifacts through one writer.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

/// --out, then the config's output key, then $BLOWUP_OUT_ROOT/<name>, then runs/<name>.
std::filesystem::path resolve_output(const ExperimentConfig& cfg, const std::optional<std::string>& cli_out);

struct CompareResult {
    json report;
    std::size_t differences = 0;
};

CompareResult compare_manifests(const std::filesystem::path& a, const std::filesystem::path& b, double tol);

struct FamilyInfo {
    std::string name;
    std::string params;
    std::string description;
};

std::vector<FamilyInfo> families();

/// %.17g, with "nan", "inf", "-inf" spelled out.
std::string format_double(double v);
/// JSON text with every number written by format_double; non-finite numbers become null.
std::string dump_json(const json& doc);

std::string fnv1a_hex(const std::string& text);

} // namespace blowup::experiment
