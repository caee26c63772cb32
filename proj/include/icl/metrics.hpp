#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "icl/mixprior.hpp"
#include "icl/result_table.hpp"
#include "icl/taskgen.hpp"

namespace icl {

// Predicts the query label of a context. The seed feeds any internal randomness
// (e.g. GD initialization); deterministic predictors ignore it.
using Predictor = std::function<double(const ContextSequence&, std::uint64_t seed)>;
// Produces the ground-truth function for one trial.
using TaskSampler = std::function<TaskFunction(std::uint64_t seed)>;

TaskSampler fixed_task(TaskFunction task);
TaskSampler resampled_task(FunctionKind kind, Eigen::Index dim, std::optional<Eigen::Index> hidden_dim);

struct CurveOptions {
    unsigned threads = 1;
    Vec input_mean;  // empty: zero mean
    double input_std = 1.0;
};

/// Mean squared query error of `predictor` per context length, with its
/// standard error. Axes: context_length x statistic {mean_squared_error, std_error}.
ResultTable error_curve(const Predictor& predictor, const TaskSampler& task,
                        const std::vector<std::size_t>& lengths, std::size_t trials,
                        std::uint64_t seed, const CurveOptions& options = {});

/// Downstream data: x ~ N(input_mean, input_std^2 I), y = task(x).
struct Downstream {
    TaskFunction task;
    Vec input_mean;
    double input_std = 1.0;

    LabeledBatch sample(std::size_t length, std::uint64_t seed) const;
};

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Squared error of predicting y with the fixed center <w_m, x> (no posterior update).
MeanEstimate component_test_error_stats(const MixturePrior& prior, std::size_t component,
                                        const Downstream& downstream, std::size_t n,
                                        std::uint64_t seed);
double component_test_error(const MixturePrior& prior, std::size_t component,
                            const Downstream& downstream, std::size_t n, std::uint64_t seed);

double input_distance(const Vec& mu_pretrain, const Vec& mu_downstream);

/// Mean over query positions i of the attention mass on positions j <= i
/// with tokens[j - 1] == tokens[i]. Positions without such j are skipped;
/// empty result when no position qualifies.
std::optional<double> prefix_matching_score(const Mat& attention,
                                            const std::vector<std::int64_t>& tokens);

/// Spearman rank correlation with average ranks for ties; NaN when either
/// input is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct NoiseLevelSummary {
    double noise_level = 0.0;
    std::vector<double> mean_component_error;
    std::vector<double> mean_tilde_pi;
    std::vector<double> input_distance;
    double icl_squared_error = 0.0;
    double spearman_pi_error = 0.0;
    // argmin of component error has the largest mean weight.
    bool top_rank_agrees = false;
    // Largest |sum_m pi~_m - 1| seen over trials.
    double max_normalization_error = 0.0;
};

struct SelectionReport {
    std::vector<NoiseLevelSummary> levels;
    ResultTable table;
};

struct SelectionOptions {
    unsigned threads = 1;
    std::size_t error_samples = 10000;
    // Row labels for the noise levels; defaults to their shortest decimal form.
    std::vector<std::string> level_labels;
};

/// For each noise level delta (sigma_x = sigma_y = 1, sigma_mu^2 = sigma_w^2 = delta):
/// mean fixed-center test error and mean posterior weight per component, mean
/// squared error of the closed-form prediction, and their Spearman correlation.
/// Trials share downstream contexts across noise levels.
SelectionReport selection_report(const MixturePrior& prior, const Downstream& downstream,
                                 std::size_t length, std::size_t trials,
                                 const std::vector<double>& noise_levels, std::uint64_t seed,
                                 const SelectionOptions& options = {});

}  // namespace icl
