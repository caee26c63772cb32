#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "helpers.hpp"
#include "icl/baselines.hpp"
#include "icl/errors.hpp"
#include "icl/mixprior.hpp"
#include "icl/tolerances.hpp"

using namespace icl;
using icl::testing::random_context;
using icl::testing::vec;

namespace {

ContextSequence linear_context(const Vec& w, std::size_t T, std::uint64_t seed) {
    Rng rng(seed);
    ContextSequence c;
    for (std::size_t i = 0; i < T; ++i) {
        c.xs.push_back(normal_vector(rng, w.size()));
        c.ys.push_back(c.xs.back().dot(w));
    }
    c.query = normal_vector(rng, w.size());
    return c;
}

// Hand-built instance over a small table: tokens index rows, labels are explicit.
RetrievalInstance hand_instance(std::vector<std::int64_t> tokens, std::vector<std::int64_t> labels,
                                std::int64_t query_token) {
    RetrievalInstance inst;
    inst.table = std::make_shared<const EmbeddingTable>(20, 3, 1);
    inst.embedding_id = inst.table->id();
    for (std::int64_t t : tokens) inst.pairs_x.push_back(inst.table->row(t));
    inst.token_indices = std::move(tokens);
    inst.label_index = std::move(labels);
    inst.query_token = query_token;
    inst.query = inst.table->row(query_token);
    inst.target_index = 10 + query_token;
    inst.shift = 10;
    return inst;
}

}  // namespace

TEST(Objective, SummedHalfSquaresAndMse) {
    const ContextSequence c = icl::testing::ctx1({1.0, 2.0}, {0.0, 0.0}, 0.0);
    const TaskParams p{vec({1.0}), {}, {}};
    EXPECT_DOUBLE_EQ(hypothesis_objective(FunctionKind::linear, p, c), 2.5);
    EXPECT_DOUBLE_EQ(mean_squared_error(FunctionKind::linear, p, c), 2.5);
    ContextSequence empty;
    empty.query = vec({0.0});
    EXPECT_EQ(mean_squared_error(FunctionKind::linear, p, empty), 0.0);
}

TEST(Flatten, RoundTripsEveryKind) {
    for (FunctionKind k : {FunctionKind::linear, FunctionKind::quadratic, FunctionKind::relu_nn,
                           FunctionKind::linear_plus_quadratic, FunctionKind::sigmoid_nn}) {
        const TaskParams p = initial_params(k, 3, 4, 7);
        const Vec flat = flatten(k, p);
        EXPECT_EQ(flatten(k, unflatten(k, flat, 3, 4)), flat);
        Vec longer(flat.size() + 1);
        longer << flat, 0.0;
        EXPECT_THROW(unflatten(k, longer, 3, 4), DimensionMismatch);
        EXPECT_THROW(unflatten(k, flat.head(flat.size() - 1), 3, 4), DimensionMismatch);
    }
}

class GradientProperty : public ::testing::TestWithParam<FunctionKind> {};

TEST_P(GradientProperty, AnalyticMatchesCentralDifferences) {
    const GradientCheck g = gradient_check(GetParam(), 4, 6, 5, 20, tol::kFiniteDifferenceStep, 11);
    EXPECT_EQ(g.draws, 20u);
    EXPECT_LT(g.max_relative_error, tol::kGradientRelative) << to_string(GetParam());
}

INSTANTIATE_TEST_SUITE_P(AllKinds, GradientProperty,
                         ::testing::Values(FunctionKind::linear, FunctionKind::quadratic, FunctionKind::relu_nn,
                                           FunctionKind::sqrt_linear, FunctionKind::cubic,
                                           FunctionKind::linear_plus_quadratic, FunctionKind::sigmoid_nn));

TEST(GradientCheck, RejectsNonPositiveStep) {
    EXPECT_THROW(gradient_check(FunctionKind::linear, 2, 2, 3, 1, 0.0, 1), InvalidArgument);
}

TEST(GdFit, ConvergesOnLinearTask) {
    const Vec w = vec({0.5, -1.0, 2.0});
    const ContextSequence c = linear_context(w, 30, 3);
    GdOptions opt;
    opt.learning_rate = 0.01;
    opt.steps = 3000;
    const FittedModel m = gd_fit(FunctionKind::linear, c, opt, 1);
    EXPECT_LT(m.final_loss, 1e-10);
    EXPECT_LT((m.params.w - w).norm(), 1e-5);
    EXPECT_NEAR(m.predict(c.query), c.query.dot(w), 1e-5);
    ASSERT_FALSE(m.training_log.empty());
    EXPECT_EQ(m.training_log.front().first, 0u);
    EXPECT_EQ(m.training_log.back().first, opt.steps);
    EXPECT_LT(m.training_log.back().second, m.training_log.front().second);
}

TEST(GdFit, ZeroStepsKeepsInitialization) {
    const ContextSequence c = linear_context(vec({1.0, 1.0}), 5, 2);
    GdOptions opt;
    opt.steps = 0;
    const FittedModel m = gd_fit(FunctionKind::linear, c, opt, 9);
    EXPECT_EQ(m.params.w, initial_params(FunctionKind::linear, 2, opt.hidden_dim, 9).w);
    ASSERT_EQ(m.training_log.size(), 1u);
    EXPECT_EQ(m.training_log.front().second, m.final_loss);
}

TEST(GdFit, DeterministicUnderSeed) {
    const ContextSequence c = linear_context(vec({1.0, -1.0}), 8, 5);
    GdOptions opt;
    opt.steps = 50;
    opt.hidden_dim = 5;
    const FittedModel a = gd_fit(FunctionKind::relu_nn, c, opt, 4);
    const FittedModel b = gd_fit(FunctionKind::relu_nn, c, opt, 4);
    EXPECT_EQ(a.params.w1, b.params.w1);
    EXPECT_EQ(a.params.w2, b.params.w2);
    EXPECT_EQ(a.final_loss, b.final_loss);
}

TEST(GdFit, LargeStepDiverges) {
    const ContextSequence c = linear_context(vec({3.0, 3.0}), 40, 6);
    GdOptions opt;
    opt.learning_rate = 1.0;
    opt.steps = 200;
    EXPECT_THROW(gd_fit(FunctionKind::linear, c, opt, 1), DivergenceError);
}

TEST(GdFit, EmptyContextIsAnError) {
    ContextSequence c;
    c.query = vec({1.0});
    EXPECT_THROW(gd_fit(FunctionKind::linear, c, GdOptions{}, 1), InvalidArgument);
}

TEST(FittedModel, PredictChecksDimension) {
    const ContextSequence c = linear_context(vec({1.0, 2.0}), 4, 1);
    GdOptions opt;
    opt.steps = 1;
    const FittedModel m = gd_fit(FunctionKind::linear, c, opt, 1);
    EXPECT_THROW(m.predict(vec({1.0})), DimensionMismatch);
}

TEST(OlsMinNorm, RecoversWeightWhenOverdetermined) {
    const Vec w = vec({1.5, -0.5, 0.25});
    const ContextSequence c = linear_context(w, 10, 8);
    EXPECT_LT((ols_min_norm(c) - w).norm(), 1e-10);
}

TEST(OlsMinNorm, UnderdeterminedSolutionIsMinimumNorm) {
    Rng rng(4);
    const Mat X = normal_matrix(rng, 3, 6);
    const Vec y = normal_vector(rng, 3);
    const Vec w = ols_min_norm(X, y);
    EXPECT_LT((X * w - y).norm(), 1e-10);
    // Minimum norm means w lies in the row space of X.
    const Vec coef = (X * X.transpose()).ldlt().solve(X * w);
    EXPECT_LT((X.transpose() * coef - w).norm(), 1e-10);
    // Adding a null-space direction keeps the fit but grows the norm.
    Eigen::FullPivLU<Mat> lu(X);
    const Vec n = lu.kernel().col(0);
    EXPECT_LT((X * (w + n) - y).norm(), 1e-9);
    EXPECT_GT((w + n).norm(), w.norm());
}

TEST(OlsMinNorm, Errors) {
    EXPECT_THROW(ols_min_norm(Mat::Zero(3, 2), Vec::Zero(2)), DimensionMismatch);
    EXPECT_THROW(ols_min_norm(Mat::Zero(0, 2), Vec::Zero(0)), InvalidArgument);
}

TEST(RidgeFit, LimitsInLambda) {
    Rng rng(10);
    const ContextSequence c = random_context(rng, 3, 12);
    EXPECT_LT((ridge_fit(c, 1e-10) - ols_min_norm(c)).norm(), 1e-7);
    EXPECT_LT(ridge_fit(c, 1e12).norm(), 1e-10);
    EXPECT_THROW(ridge_fit(c, 0.0), InvalidArgument);
    EXPECT_THROW(ridge_fit(c, -1.0), InvalidArgument);
    EXPECT_THROW(ridge_fit(Mat::Zero(2, 2), Vec::Zero(3), 1.0), DimensionMismatch);
}

TEST(RidgeFit, EqualsZeroCenteredPosteriorMean) {
    Rng rng(13);
    for (int t = 0; t < 20; ++t) {
        const ContextSequence c = random_context(rng, 4, 1 + t % 7);
        const double lambda = 0.1 + uniform01(rng);
        const Hyper h(1.0, 1.0, 1.0, 1.0 / std::sqrt(lambda));
        const Vec post = posterior_w_mean({1.0, Vec::Zero(4), Vec::Zero(4)}, c, h);
        EXPECT_LT((ridge_fit(c, lambda) - post).norm(), 1e-10);
    }
}

TEST(RetrievalOracle, ReturnsMostRecentMatch) {
    const RetrievalInstance inst = hand_instance({0, 1, 2, 1}, {10, 11, 12, 11}, 1);
    const RetrievalOutcome o = retrieval_oracle(inst);
    ASSERT_TRUE(o.matched());
    EXPECT_EQ(*o.label_index, 11);
    EXPECT_EQ(*o.position, 3u);
    EXPECT_FALSE(o.conflicting);
}

TEST(RetrievalOracle, AbsentQueryGivesNoMatch) {
    const RetrievalOutcome o = retrieval_oracle(hand_instance({0, 2, 3}, {10, 12, 13}, 4));
    EXPECT_FALSE(o.matched());
    EXPECT_FALSE(o.position.has_value());
    EXPECT_FALSE(o.conflicting);
}

TEST(RetrievalOracle, DisagreeingLabelsAreFlagged) {
    const RetrievalOutcome o = retrieval_oracle(hand_instance({1, 0, 1}, {15, 10, 11}, 1));
    ASSERT_TRUE(o.matched());
    EXPECT_EQ(*o.label_index, 11);
    EXPECT_TRUE(o.conflicting);
}

TEST(RetrievalOracle, FallsBackToInputEquality) {
    RetrievalInstance inst = hand_instance({3, 4}, {13, 14}, 3);
    inst.token_indices.clear();
    inst.query_token = -1;
    const RetrievalOutcome o = retrieval_oracle(inst);
    ASSERT_TRUE(o.matched());
    EXPECT_EQ(*o.label_index, 13);
}

TEST(EstimateThenRetrieve, KnownWeightAlwaysFindsTheTargetBucket) {
    const EmbeddingStore store;
    int hits = 0;
    int present = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const RetrievalInstance inst =
            make_predict_retrieve_instance(store, 1000, 5, {100, 200}, 50, FunctionKind::linear, 1, s);
        const RetrievalOutcome o = bucket_retrieve(inst, inst.latent_w, FunctionKind::linear);
        if (o.matched()) {
            ++present;
            if (*o.label_index == inst.target_index) ++hits;
        }
    }
    EXPECT_EQ(hits, present);
    EXPECT_GT(present, 100);
}

TEST(EstimateThenRetrieve, RecoveredContextUsesBucketMidpoints) {
    const EmbeddingStore store;
    const RetrievalInstance inst =
        make_predict_retrieve_instance(store, 1000, 4, {100, 200}, 10, FunctionKind::quadratic, 1, 3);
    const ContextSequence c = recovered_context(inst, FunctionKind::quadratic);
    for (std::size_t i = 0; i < inst.length(); ++i) {
        const double score = inst.latent_w.dot(c.xs[i]);
        EXPECT_LE(std::abs(score - c.ys[i]), 0.5 / kBucketScale + 1e-12);
    }
    ContextSequence short_ctx = c;
    short_ctx.xs.pop_back();
    short_ctx.ys.pop_back();
    EXPECT_THROW(estimate_then_retrieve(inst, short_ctx, 1e-6), InvalidArgument);
}
