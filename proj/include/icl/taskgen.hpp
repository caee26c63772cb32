#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icl/mixprior.hpp"

namespace icl {

enum class FunctionKind {
    linear,
    quadratic,
    relu_nn,
    sqrt_linear,
    cubic,
    linear_plus_quadratic,
    sigmoid_nn,
};

std::string_view to_string(FunctionKind kind);
FunctionKind parse_function_kind(std::string_view name);
bool is_network(FunctionKind kind);

inline constexpr Eigen::Index kDefaultDim = 20;
inline constexpr Eigen::Index kDefaultHiddenDim = 100;

/// Parameter block shared by all function classes.
///
/// linear / quadratic / sqrt_linear / cubic: `w`.
/// linear_plus_quadratic: `w1` weighs the squared features, `w` the raw ones.
/// relu_nn / sigmoid_nn: output weights `w1` (d'), hidden weights `w2` (d' x d).
struct TaskParams {
    Vec w;
    Vec w1;
    Mat w2;
};

class TaskFunction {
public:
    TaskFunction(FunctionKind kind, Eigen::Index dim, TaskParams params);

    FunctionKind kind() const { return kind_; }
    Eigen::Index dim() const { return dim_; }
    Eigen::Index hidden_dim() const { return params_.w2.rows(); }
    const TaskParams& params() const { return params_; }

    double operator()(const Vec& x) const;

private:
    FunctionKind kind_;
    Eigen::Index dim_;
    TaskParams params_;
};

// sign(t) * sqrt(|t|), elementwise.
Vec signed_sqrt(const Vec& x);

TaskFunction sample_task(FunctionKind kind, Eigen::Index dim, std::optional<Eigen::Index> hidden_dim,
                         std::uint64_t seed);

struct LabeledBatch {
    ContextSequence context;
    double query_label = 0.0;
};

/// x_i ~ N(input_mean, input_std^2 I), y_i = task(x_i); the query is drawn the same way.
LabeledBatch sample_icl_batch(const TaskFunction& task, std::size_t length, std::uint64_t seed);
LabeledBatch sample_icl_batch(const TaskFunction& task, std::size_t length, std::uint64_t seed,
                              const Vec& input_mean, double input_std);

// ---------------------------------------------------------------------------
// Embedding tables

class EmbeddingTable {
public:
    EmbeddingTable(std::int64_t rows, Eigen::Index dim, std::uint64_t seed);
    EmbeddingTable(std::int64_t rows, Eigen::Index dim, std::uint64_t seed, Mat values);

    std::int64_t rows() const { return rows_; }
    Eigen::Index dim() const { return dim_; }
    std::uint64_t seed() const { return seed_; }
    const std::string& id() const { return id_; }
    Vec row(std::int64_t index) const;
    const Mat& values() const { return values_; }

    static std::string make_id(std::int64_t rows, Eigen::Index dim, std::uint64_t seed);

private:
    std::int64_t rows_;
    Eigen::Index dim_;
    std::uint64_t seed_;
    std::string id_;
    Mat values_;
};

/// Content-addressed on-disk cache of embedding tables keyed by (N, d, seed).
/// Entries are written once through a temp file and an atomic rename; a table
/// that is already present is read back instead of regenerated.
class EmbeddingStore {
public:
    // Empty directory disables the disk cache; tables are then regenerated.
    explicit EmbeddingStore(std::filesystem::path directory = {});

    // Directory from ICL_LAB_CACHE when set, otherwise `fallback`.
    static EmbeddingStore from_environment(const std::filesystem::path& fallback);

    std::shared_ptr<const EmbeddingTable> get(std::int64_t rows, Eigen::Index dim,
                                              std::uint64_t seed) const;
    const std::filesystem::path& directory() const { return directory_; }

private:
    struct Memo;
    std::filesystem::path directory_;
    // Tables already loaded by this store (and its copies), keyed by id.
    std::shared_ptr<Memo> memo_;
};

// ---------------------------------------------------------------------------
// Retrieval-style instances

enum class InstanceKind { retrieval, predict_retrieve, word_classification };

std::string_view to_string(InstanceKind kind);

struct ShiftRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;  // inclusive
};

// Arguments a generator was called with, kept so an instance can be regenerated.
struct GeneratorParams {
    ShiftRange shifts;
    std::int64_t classes = 0;
    std::int64_t offset = 0;
    Eigen::Index hidden_dim = 0;
};

/// One retrieval-style prompt. `pairs_x[i]` is the input vector, `label_index[i]`
/// the row of E used as its label (the label vector itself is `table->row()`).
struct RetrievalInstance {
    InstanceKind kind = InstanceKind::retrieval;
    std::shared_ptr<const EmbeddingTable> table;
    std::string embedding_id;
    std::uint64_t seed = 0;
    GeneratorParams generator;
    std::int64_t shift = 0;
    // Input row indices; empty when inputs are not rows of E (predict-retrieve).
    std::vector<std::int64_t> token_indices;
    std::vector<Vec> pairs_x;
    std::vector<std::int64_t> label_index;
    Vec query;
    std::int64_t query_token = -1;
    std::int64_t target_index = 0;
    // predict-retrieve only: the latent weight and feature map.
    std::optional<FunctionKind> function_kind;
    Vec latent_w;

    std::size_t length() const { return pairs_x.size(); }
    Vec label(std::size_t i) const { return table->row(label_index.at(i)); }
    Vec target() const { return table->row(target_index); }
};

inline constexpr int kRetrievalSourceRows = 5;
inline constexpr double kBucketScale = 0.4;

RetrievalInstance make_retrieval_instance(const EmbeddingStore& store, std::int64_t rows,
                                          Eigen::Index dim, ShiftRange shifts, std::size_t length,
                                          std::uint64_t embedding_seed, std::uint64_t seed);

/// Inputs x_i ~ N(0, I), bucket = floor(0.4 <w, phi(x_i)>) + s, phi = identity
/// (linear) or elementwise square (quadratic).
RetrievalInstance make_predict_retrieve_instance(const EmbeddingStore& store, std::int64_t rows,
                                                 Eigen::Index dim, ShiftRange shifts,
                                                 std::size_t length, FunctionKind function_kind,
                                                 std::uint64_t embedding_seed, std::uint64_t seed);

/// Inputs are uniformly drawn rows of E; label = argmax_j (x[:d']^T W)_j + offset,
/// ties broken toward the lowest class.
RetrievalInstance make_word_classification_instance(const EmbeddingStore& store,
                                                    std::int64_t rows, Eigen::Index dim,
                                                    Eigen::Index hidden_dim, std::int64_t classes,
                                                    std::int64_t offset, std::size_t length,
                                                    std::uint64_t embedding_seed,
                                                    std::uint64_t seed);

// Index of the largest entry; ties go to the lowest index.
Eigen::Index first_argmax(const Vec& scores);

// Bucket value floor(0.4 <w, phi(x)>) without the shift.
std::int64_t bucket_of(const Vec& w, const Vec& x, FunctionKind feature_map);
Vec feature_map(FunctionKind kind, const Vec& x);

}  // namespace icl
