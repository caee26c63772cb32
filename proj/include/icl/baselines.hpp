#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "icl/mixprior.hpp"
#include "icl/taskgen.hpp"

namespace icl {

struct GdOptions {
    double learning_rate = 1e-3;
    std::size_t steps = 1000;
    Eigen::Index hidden_dim = kDefaultHiddenDim;
    // Record the loss every `log_every` steps (the final loss is always recorded).
    std::size_t log_every = 100;
};

struct FittedModel {
    FunctionKind kind = FunctionKind::linear;
    Eigen::Index dim = 0;
    TaskParams params;
    std::vector<std::pair<std::size_t, double>> training_log;
    double final_loss = 0.0;

    double predict(const Vec& x) const;
};

// Hypothesis-class objective and its analytic gradient. The objective is the
// per-example squared error summed over the context, halved:
//     L = 1/2 sum_i (f(x_i) - y_i)^2.
double hypothesis_objective(FunctionKind kind, const TaskParams& params,
                            const ContextSequence& context);
TaskParams hypothesis_gradient(FunctionKind kind, const TaskParams& params,
                               const ContextSequence& context);
double mean_squared_error(FunctionKind kind, const TaskParams& params,
                          const ContextSequence& context);

// Flat parameter view, used by the finite-difference oracle.
Vec flatten(FunctionKind kind, const TaskParams& params);
TaskParams unflatten(FunctionKind kind, const Vec& flat, Eigen::Index dim, Eigen::Index hidden_dim);

struct GradientCheck {
    FunctionKind kind = FunctionKind::linear;
    std::size_t draws = 0;
    // Largest ||analytic - fd|| / max(||analytic||, ||fd||, 1) over the draws.
    double max_relative_error = 0.0;
};

/// Compares hypothesis_gradient against central differences with step h on
/// random (params, context) draws.
GradientCheck gradient_check(FunctionKind kind, Eigen::Index dim, Eigen::Index hidden_dim,
                             std::size_t length, std::size_t draws, double h, std::uint64_t seed);

TaskParams initial_params(FunctionKind kind, Eigen::Index dim, Eigen::Index hidden_dim,
                          std::uint64_t seed);

/// Full-batch gradient descent on the hypothesis class over the T context pairs.
/// Throws DivergenceError when the mean squared error exceeds 1e12.
FittedModel gd_fit(FunctionKind kind, const ContextSequence& context, const GdOptions& options,
                   std::uint64_t seed);

/// Minimum-norm least squares through a thin SVD; singular values below
/// 1e-10 * sigma_max are treated as zero.
Vec ols_min_norm(const Mat& design, const Vec& targets);
Vec ols_min_norm(const ContextSequence& context);

/// (X^T X + lambda I)^-1 X^T y.
Vec ridge_fit(const Mat& design, const Vec& targets, double lambda);
Vec ridge_fit(const ContextSequence& context, double lambda);

/// Outcome of a retrieval-style prediction. `label_index` is empty on no-match.
struct RetrievalOutcome {
    std::optional<std::int64_t> label_index;
    std::optional<std::size_t> position;
    // Several matching context positions disagreed on their label.
    bool conflicting = false;

    bool matched() const { return label_index.has_value(); }
};

/// Copies the label of the most recent context example whose input token equals the query's.
RetrievalOutcome retrieval_oracle(const RetrievalInstance& instance);

/// Regression view of a predict-retrieve prompt for an estimator with feature
/// map `features`: inputs phi(x_i), targets (bucket_i + 1/2) / 0.4 where
/// bucket_i = label_index_i - shift.
ContextSequence recovered_context(const RetrievalInstance& instance, FunctionKind features);

/// Ridge-estimates w from `context`, buckets the query with floor(0.4 <w, query>)
/// and copies the label of the most recent context example in that bucket.
RetrievalOutcome estimate_then_retrieve(const RetrievalInstance& instance,
                                        const ContextSequence& context, double lambda);

/// Same retrieval with a given weight vector and feature map (no estimation).
RetrievalOutcome bucket_retrieve(const RetrievalInstance& instance, const Vec& w,
                                 FunctionKind features);

}  // namespace icl
