#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "icl/baselines.hpp"
#include "icl/mixprior.hpp"
#include "icl/result_table.hpp"
#include "icl/taskgen.hpp"

namespace icl {

enum class ExperimentKind {
    algoselect_error,
    algoselect_distance,
    curves,
    double_descent,
    retrieval_eval,
    theory_check,
    oracle_check,
};

std::string_view to_string(ExperimentKind kind);

// A noise level as written in the config ("1/81" or 0.5), kept for labels.
struct NoiseLevel {
    double value = 1.0;
    std::string label;
};

struct TaskSpec {
    FunctionKind kind = FunctionKind::linear;
    Eigen::Index dim = kDefaultDim;
    Eigen::Index hidden_dim = kDefaultHiddenDim;
    std::uint64_t seed = 0;
    // Draw a fresh function per trial (seeded from the trial stream) instead of
    // fixing the one given by `seed`.
    bool resample = false;
};

struct AlgoSelectSpec {
    explicit AlgoSelectSpec(MixturePrior p) : prior(std::move(p)) {}

    MixturePrior prior;
    // strict_unit_norm as written; a conflicting prior is built non-strict with a warning.
    bool strict_requested = false;
    TaskSpec task;
    Vec input_mean;
    double input_std = 1.0;
    std::size_t length = 50;
    std::vector<NoiseLevel> noise_levels;
    std::size_t error_samples = 10000;
};

struct PredictorSpec {
    std::string name;  // unique label used in the results
    std::string method;  // posterior | gd | ols_min_norm | ridge
    FunctionKind gd_kind = FunctionKind::linear;
    GdOptions gd;
    double lambda = 1.0;
    std::optional<MixturePrior> prior;
    bool strict_requested = false;
};

struct CurvesSpec {
    TaskSpec task;
    std::vector<std::size_t> lengths;
    std::vector<PredictorSpec> predictors;
};

struct RetrievalCondition {
    std::string name;
    FunctionKind function_kind = FunctionKind::linear;
    FunctionKind estimator_features = FunctionKind::linear;
    std::string method;  // oracle | estimate_then_retrieve | known_w
};

struct RetrievalSpec {
    InstanceKind instance = InstanceKind::predict_retrieve;
    std::int64_t rows = 1000;
    Eigen::Index dim = kDefaultDim;
    ShiftRange shifts{100, 200};
    std::size_t length = 50;
    std::uint64_t embedding_seed = 0;
    double lambda = 1e-6;
    Eigen::Index hidden_dim = 10;
    std::int64_t classes = 10;
    std::int64_t offset = 5000;
    std::vector<RetrievalCondition> conditions;
    bool write_instances = false;
};

struct Lemma1Spec {
    Vec mu_star;
    Vec mu_alpha;
    Vec mu_beta;
    double tau_x = 1.0;
    Hyper hyper{1.0, 1.0, 1.0, 1.0};
    std::vector<std::size_t> schedule;
    std::size_t repetitions = 100;
};

// Top-level `trials` is the number of filtered Theorem 1 trials.
struct TheorySpec {
    std::size_t max_length = 16;
    Lemma1Spec lemma1;
    std::vector<Eigen::Index> exploratory_dims;
    std::size_t exploratory_trials = 1000;
    std::size_t gradient_draws = 100;
    Eigen::Index gradient_dim = 5;
    Eigen::Index gradient_hidden_dim = 8;
    std::size_t gradient_length = 5;
};

// Top-level `trials` is the number of Monte-Carlo oracle instances.
struct OracleSpec {
    std::size_t mc_samples = 1000000;
    Eigen::Index max_dim = 2;
    std::size_t max_components = 3;
    std::size_t max_length = 6;
    std::size_t quadrature_instances = 20;
    std::size_t grid_points = 512;
};

using ExperimentBody =
    std::variant<CurvesSpec, AlgoSelectSpec, RetrievalSpec, TheorySpec, OracleSpec>;

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::curves;
    std::uint64_t seed = 0;
    std::size_t trials = 1;
    std::optional<std::string> output_dir;
    ExperimentBody body;
    std::vector<std::string> warnings;
};

/// Parses and validates a config document; every failure is a ValidationError
/// naming the offending field. Unknown fields are rejected. A top-level
/// "metadata" object (as written into config.echo.json) is ignored.
ExperimentConfig parse_config(const nlohmann::json& document);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The config with every default filled in; parsing it yields the same config.
nlohmann::json resolved_json(const ExperimentConfig& config);

/// Git blob object id (SHA-1 over "blob <size>\0" + content), hex encoded.
std::string content_hash(const std::string& content);

struct ExperimentResult {
    ResultTable table;
    // Counterexamples found by theory_check (Theorem 1 sign violations).
    std::size_t property_violations = 0;
    // Extra per-run records, e.g. generated retrieval instances (JSON lines).
    std::vector<nlohmann::json> instances;
};

struct RunOptions {
    std::filesystem::path output_dir;  // empty: config output_dir, then results/<experiment>
    bool plot = false;
    unsigned threads = 1;
};

/// Computes the experiment without touching the filesystem except the
/// embedding cache (`cache_dir`, or ICL_LAB_CACHE when set).
ExperimentResult execute(const ExperimentConfig& config, unsigned threads,
                         const std::filesystem::path& cache_dir);

struct RunOutcome {
    ExperimentResult result;
    std::filesystem::path output_dir;
};

/// execute() plus output: results.csv, config.echo.json and, on request,
/// plot.svg (instances.jsonl for retrieval runs that ask for it). Files are
/// written to temporaries and renamed into place only after the whole run
/// succeeded. The embedding cache defaults to <output_dir>/embeddings.
RunOutcome run(const ExperimentConfig& config, const RunOptions& options);

std::filesystem::path default_output_dir(const ExperimentConfig& config);

}  // namespace icl
