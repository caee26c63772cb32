#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "helpers.hpp"
#include "icl/baselines.hpp"
#include "icl/errors.hpp"
#include "icl/taskgen.hpp"

using namespace icl;
using icl::testing::vec;

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("icl_taskgen_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(FunctionKind, NamesRoundTrip) {
    for (FunctionKind k : {FunctionKind::linear, FunctionKind::quadratic, FunctionKind::relu_nn,
                           FunctionKind::sqrt_linear, FunctionKind::cubic, FunctionKind::linear_plus_quadratic,
                           FunctionKind::sigmoid_nn})
        EXPECT_EQ(parse_function_kind(to_string(k)), k);
    EXPECT_THROW(parse_function_kind("quartic"), InvalidArgument);
}

TEST(SignedSqrt, PreservesSignAndZero) {
    const Vec r = signed_sqrt(vec({4.0, -9.0, 0.0, 0.25}));
    EXPECT_EQ(r[0], 2.0);
    EXPECT_EQ(r[1], -3.0);
    EXPECT_EQ(r[2], 0.0);
    EXPECT_EQ(r[3], 0.5);
}

TEST(TaskFunction, HandValues) {
    const Vec x = vec({1.0, -2.0});
    EXPECT_DOUBLE_EQ(TaskFunction(FunctionKind::linear, 2, {vec({3, 1}), {}, {}})(x), 1.0);
    EXPECT_DOUBLE_EQ(TaskFunction(FunctionKind::quadratic, 2, {vec({3, 1}), {}, {}})(x), 7.0);
    EXPECT_DOUBLE_EQ(TaskFunction(FunctionKind::cubic, 2, {vec({3, 1}), {}, {}})(x), -5.0);
    EXPECT_DOUBLE_EQ(TaskFunction(FunctionKind::sqrt_linear, 2, {vec({3, 1}), {}, {}})(vec({4, -9})), 3.0);
    Mat w2(2, 2);
    w2 << 1, 0, 0, 1;
    // hidden = relu([1, -2]) = [1, 0]
    EXPECT_DOUBLE_EQ(TaskFunction(FunctionKind::relu_nn, 2, {{}, vec({2, 5}), w2})(x), 2.0);
    const double sig = 2.0 / (1.0 + std::exp(-1.0)) + 5.0 / (1.0 + std::exp(2.0));
    EXPECT_DOUBLE_EQ(TaskFunction(FunctionKind::sigmoid_nn, 2, {{}, vec({2, 5}), w2})(x), sig);
}

TEST(TaskFunction, ShapeErrors) {
    EXPECT_THROW(TaskFunction(FunctionKind::linear, 3, {vec({1, 2}), {}, {}}), DimensionMismatch);
    EXPECT_THROW(TaskFunction(FunctionKind::relu_nn, 2, {{}, vec({1, 2, 3}), Mat::Zero(2, 2)}), DimensionMismatch);
    EXPECT_THROW(TaskFunction(FunctionKind::linear_plus_quadratic, 2, {vec({1, 2}), vec({1}), {}}),
                 DimensionMismatch);
    EXPECT_THROW(TaskFunction(FunctionKind::linear, 0, {Vec(), {}, {}}), InvalidArgument);
    const TaskFunction f(FunctionKind::linear, 2, {vec({1, 2}), {}, {}});
    EXPECT_THROW(f(vec({1, 2, 3})), DimensionMismatch);
}

TEST(SampleTask, NetworksNeedHiddenWidth) {
    EXPECT_THROW(sample_task(FunctionKind::relu_nn, 3, std::nullopt, 1), InvalidArgument);
    EXPECT_THROW(sample_task(FunctionKind::sigmoid_nn, 3, 0, 1), InvalidArgument);
    EXPECT_THROW(sample_task(FunctionKind::linear, 0, std::nullopt, 1), InvalidArgument);
    EXPECT_THROW(sample_task(FunctionKind::linear, kMaxDim + 1, std::nullopt, 1), InvalidArgument);
    const TaskFunction f = sample_task(FunctionKind::relu_nn, 3, 100, 1);
    EXPECT_EQ(f.hidden_dim(), 100);
    EXPECT_EQ(f.params().w2.cols(), 3);
}

class TaskProperty : public ::testing::TestWithParam<int> {};

TEST_P(TaskProperty, SuperpositionOfLinearAndQuadratic) {
    const auto seed = static_cast<std::uint64_t>(GetParam());
    const TaskFunction f = sample_task(FunctionKind::linear_plus_quadratic, 4, std::nullopt, seed);
    const TaskFunction lin(FunctionKind::linear, 4, {f.params().w, {}, {}});
    const TaskFunction quad(FunctionKind::quadratic, 4, {f.params().w1, {}, {}});
    Rng rng(seed + 100);
    for (int i = 0; i < 20; ++i) {
        const Vec x = normal_vector(rng, 4);
        EXPECT_NEAR(f(x), lin(x) + quad(x), 1e-12);
    }
}

TEST_P(TaskProperty, ParityOfSingleWeightKinds) {
    const auto seed = static_cast<std::uint64_t>(GetParam());
    Rng rng(seed + 200);
    const Vec x = normal_vector(rng, 5);
    const TaskFunction quad = sample_task(FunctionKind::quadratic, 5, std::nullopt, seed);
    const TaskFunction cube = sample_task(FunctionKind::cubic, 5, std::nullopt, seed);
    const TaskFunction root = sample_task(FunctionKind::sqrt_linear, 5, std::nullopt, seed);
    const TaskFunction lin = sample_task(FunctionKind::linear, 5, std::nullopt, seed);
    EXPECT_EQ(quad(x), quad(-x));
    EXPECT_EQ(cube(x), -cube(-x));
    EXPECT_EQ(root(x), -root(-x));
    EXPECT_NEAR(lin(2.0 * x), 2.0 * lin(x), 1e-12);
}

TEST_P(TaskProperty, ReluNetIsPositivelyHomogeneous) {
    const auto seed = static_cast<std::uint64_t>(GetParam());
    const TaskFunction f = sample_task(FunctionKind::relu_nn, 3, 10, seed);
    Rng rng(seed + 300);
    const Vec x = normal_vector(rng, 3);
    EXPECT_NEAR(f(3.0 * x), 3.0 * f(x), 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Seeds, TaskProperty, ::testing::Range(0, 10));

TEST(SampleIclBatch, DeterministicAndLabelled) {
    const TaskFunction f = sample_task(FunctionKind::quadratic, 3, std::nullopt, 5);
    const LabeledBatch a = sample_icl_batch(f, 8, 77);
    const LabeledBatch b = sample_icl_batch(f, 8, 77);
    ASSERT_EQ(a.context.length(), 8u);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(a.context.xs[i], b.context.xs[i]);
        EXPECT_EQ(a.context.ys[i], f(a.context.xs[i]));
    }
    EXPECT_EQ(a.query_label, f(a.context.query));
    EXPECT_EQ(a.query_label, b.query_label);
}

TEST(SampleIclBatch, ShiftedInputsHaveRequestedMean) {
    const TaskFunction f = sample_task(FunctionKind::linear, 2, std::nullopt, 1);
    const LabeledBatch b = sample_icl_batch(f, 20000, 3, vec({-4.0, 2.0}), 0.5);
    Vec mean = Vec::Zero(2);
    for (const Vec& x : b.context.xs) mean += x;
    mean /= 20000.0;
    EXPECT_NEAR(mean[0], -4.0, 0.02);
    EXPECT_NEAR(mean[1], 2.0, 0.02);
    EXPECT_THROW(sample_icl_batch(f, 3, 3, vec({0.0}), 1.0), DimensionMismatch);
    EXPECT_THROW(sample_icl_batch(f, 3, 3, vec({0.0, 0.0}), 0.0), InvalidArgument);
}

TEST(SampleIclBatch, LabelVarianceMatchesTheory) {
    // Var <w, x> = d for linear and 3d for quadratic, with w and x standard normal.
    const Eigen::Index d = 20;
    for (auto [kind, expected] : {std::pair{FunctionKind::linear, 20.0}, std::pair{FunctionKind::quadratic, 60.0}}) {
        double s = 0.0;
        double s2 = 0.0;
        const int tasks = 4000;
        for (int t = 0; t < tasks; ++t) {
            const TaskFunction f = sample_task(kind, d, std::nullopt, derive_seed(9, t));
            const LabeledBatch b = sample_icl_batch(f, 4, derive_seed(10, t));
            for (double y : b.context.ys) {
                s += y;
                s2 += y * y;
            }
        }
        const double n = tasks * 4.0;
        const double var = s2 / n - (s / n) * (s / n);
        EXPECT_NEAR(var / expected, 1.0, 0.15) << to_string(kind);
    }
}

TEST(EmbeddingTable, RowsAndErrors) {
    const EmbeddingTable t(10, 4, 3);
    EXPECT_EQ(t.id(), "emb-n10-d4-s3");
    EXPECT_EQ(t.row(9).size(), 4);
    EXPECT_THROW(t.row(10), IndexOverflowError);
    EXPECT_THROW(t.row(-1), IndexOverflowError);
    EXPECT_THROW(EmbeddingTable(0, 4, 1), InvalidArgument);
    EXPECT_THROW(EmbeddingTable(10, 4, 1, Mat::Zero(3, 4)), DimensionMismatch);
}

TEST(EmbeddingStore, DiskCacheRoundTrip) {
    const fs::path dir = fresh_dir("cache");
    const EmbeddingStore store(dir);
    const auto a = store.get(50, 6, 12);
    EXPECT_TRUE(fs::exists(dir / (a->id() + ".bin")));
    EXPECT_EQ(store.get(50, 6, 12).get(), a.get());
    const EmbeddingStore other(dir);
    const auto b = other.get(50, 6, 12);
    EXPECT_EQ(a->values(), b->values());
    EXPECT_EQ(a->values(), EmbeddingTable(50, 6, 12).values());
    fs::remove_all(dir);
}

TEST(EmbeddingStore, CorruptCacheIsRegenerated) {
    const fs::path dir = fresh_dir("corrupt");
    {
        std::ofstream junk(dir / (EmbeddingTable::make_id(20, 3, 1) + ".bin"), std::ios::binary);
        junk << "not a table";
    }
    const auto t = EmbeddingStore(dir).get(20, 3, 1);
    EXPECT_EQ(t->values(), EmbeddingTable(20, 3, 1).values());
    fs::remove_all(dir);
}

TEST(EmbeddingStore, EnvironmentOverridesFallback) {
    const fs::path dir = fresh_dir("env");
    ::setenv("ICL_LAB_CACHE", dir.c_str(), 1);
    EXPECT_EQ(EmbeddingStore::from_environment("/nonexistent").directory(), dir);
    ::unsetenv("ICL_LAB_CACHE");
    EXPECT_EQ(EmbeddingStore::from_environment("fallback").directory(), fs::path("fallback"));
    fs::remove_all(dir);
}

TEST(RetrievalInstance, IndicesStayInRangeAndFollowShift) {
    const EmbeddingStore store;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const RetrievalInstance inst = make_retrieval_instance(store, 300, 8, {100, 200}, 30, 1, s);
        EXPECT_GE(inst.shift, 100);
        EXPECT_LE(inst.shift, 200);
        ASSERT_EQ(inst.length(), 30u);
        for (std::size_t i = 0; i < inst.length(); ++i) {
            EXPECT_GE(inst.token_indices[i], 0);
            EXPECT_LT(inst.token_indices[i], kRetrievalSourceRows);
            EXPECT_EQ(inst.label_index[i], inst.token_indices[i] + inst.shift);
            EXPECT_EQ(inst.pairs_x[i], inst.table->row(inst.token_indices[i]));
        }
        EXPECT_EQ(inst.target_index, inst.query_token + inst.shift);
    }
}

TEST(RetrievalInstance, TargetLabelUsuallyPresent) {
    const EmbeddingStore store;
    int present = 0;
    for (std::uint64_t s = 0; s < 1000; ++s)
        if (retrieval_oracle(make_retrieval_instance(store, 1000, 16, {100, 200}, 50, 1, s)).matched()) ++present;
    EXPECT_GE(present, 950);
}

TEST(RetrievalInstance, RangeErrors) {
    const EmbeddingStore store;
    EXPECT_THROW(make_retrieval_instance(store, 100, 4, {50, 40}, 5, 1, 1), InvalidArgument);
    EXPECT_THROW(make_retrieval_instance(store, 100, 4, {-1, 10}, 5, 1, 1), InvalidArgument);
    EXPECT_THROW(make_retrieval_instance(store, 100, 4, {10, 95}, 5, 1, 1), InvalidArgument);
}

TEST(PredictRetrieve, BucketsMatchLatentWeight) {
    const EmbeddingStore store;
    for (FunctionKind k : {FunctionKind::linear, FunctionKind::quadratic}) {
        const RetrievalInstance inst = make_predict_retrieve_instance(store, 1000, 5, {100, 200}, 20, k, 2, 4);
        ASSERT_TRUE(inst.function_kind.has_value());
        for (std::size_t i = 0; i < inst.length(); ++i)
            EXPECT_EQ(inst.label_index[i], bucket_of(inst.latent_w, inst.pairs_x[i], k) + inst.shift);
        EXPECT_EQ(inst.target_index, bucket_of(inst.latent_w, inst.query, k) + inst.shift);
    }
}

TEST(PredictRetrieve, Errors) {
    const EmbeddingStore store;
    EXPECT_THROW(make_predict_retrieve_instance(store, 1000, 5, {100, 200}, 5, FunctionKind::relu_nn, 1, 1),
                 InvalidArgument);
    // Too little headroom below the shift range for 8-sigma bucket deviations.
    EXPECT_THROW(make_predict_retrieve_instance(store, 1000, 5, {2, 200}, 5, FunctionKind::linear, 1, 1),
                 InvalidArgument);
    EXPECT_THROW(make_predict_retrieve_instance(store, 205, 5, {100, 200}, 5, FunctionKind::linear, 1, 1),
                 InvalidArgument);
}

TEST(BucketOf, FloorsTowardNegativeInfinity) {
    EXPECT_EQ(bucket_of(vec({1.0}), vec({-1.0}), FunctionKind::linear), -1);
    EXPECT_EQ(bucket_of(vec({1.0}), vec({2.5}), FunctionKind::linear), 1);
    EXPECT_EQ(bucket_of(vec({1.0}), vec({-2.5}), FunctionKind::quadratic), 2);
}

TEST(FirstArgmax, TiesGoToLowestIndex) {
    EXPECT_EQ(first_argmax(vec({1.0, 3.0, 3.0, 2.0})), 1);
    EXPECT_EQ(first_argmax(vec({5.0, 5.0})), 0);
    EXPECT_EQ(first_argmax(vec({-1.0})), 0);
    EXPECT_THROW(first_argmax(Vec()), InvalidArgument);
}

TEST(WordClassification, SingleClassLabelsEverythingAtOffset) {
    const EmbeddingStore store;
    const RetrievalInstance inst = make_word_classification_instance(store, 200, 8, 4, 1, 150, 25, 1, 9);
    for (std::int64_t l : inst.label_index) EXPECT_EQ(l, 150);
    EXPECT_EQ(inst.target_index, 150);
}

TEST(WordClassification, LabelsFallInClassBlock) {
    const EmbeddingStore store;
    const RetrievalInstance inst = make_word_classification_instance(store, 500, 8, 4, 10, 300, 40, 1, 9);
    std::set<std::int64_t> seen;
    for (std::int64_t l : inst.label_index) {
        EXPECT_GE(l, 300);
        EXPECT_LT(l, 310);
        seen.insert(l);
    }
    EXPECT_GT(seen.size(), 1u);
    EXPECT_THROW(make_word_classification_instance(store, 500, 8, 4, 0, 300, 5, 1, 9), InvalidArgument);
    EXPECT_THROW(make_word_classification_instance(store, 500, 8, 4, 10, 495, 5, 1, 9), InvalidArgument);
    EXPECT_THROW(make_word_classification_instance(store, 500, 8, 9, 10, 300, 5, 1, 9), InvalidArgument);
}
