#include "icl/taskgen.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "icl/errors.hpp"
#include "icl/random.hpp"

namespace icl {

namespace {

constexpr std::array<std::pair<FunctionKind, std::string_view>, 7> kKindNames{{
    {FunctionKind::linear, "linear"},
    {FunctionKind::quadratic, "quadratic"},
    {FunctionKind::relu_nn, "relu_nn"},
    {FunctionKind::sqrt_linear, "sqrt_linear"},
    {FunctionKind::cubic, "cubic"},
    {FunctionKind::linear_plus_quadratic, "linear_plus_quadratic"},
    {FunctionKind::sigmoid_nn, "sigmoid_nn"},
}};

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    std::uniform_int_distribution<std::int64_t> dist(lo, hi);
    return dist(rng);
}

void check_shifts(ShiftRange shifts) {
    if (shifts.lo > shifts.hi) throw InvalidArgument("shift range is empty");
    if (shifts.lo < 0) throw InvalidArgument("shift range must be non-negative");
}

void check_table_args(std::int64_t rows, Eigen::Index dim) {
    if (rows < 1) throw InvalidArgument("embedding table needs at least one row");
    if (dim < 1 || dim > 4096) throw InvalidArgument("embedding dimension out of range");
}

std::int64_t checked_index(std::int64_t index, std::int64_t rows, const char* what) {
    if (index < 0 || index >= rows)
        throw IndexOverflowError(std::string(what) + " falls outside the embedding table", index);
    return index;
}

// Binary cache layout: magic, rows, dim, seed, then rows*dim doubles (row-major).
constexpr char kMagic[8] = {'I', 'C', 'L', 'E', 'M', 'B', '1', '\0'};

std::shared_ptr<const EmbeddingTable> read_table(const std::filesystem::path& path,
                                                 std::int64_t rows, Eigen::Index dim,
                                                 std::uint64_t seed) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return nullptr;
    char magic[8];
    std::int64_t r = 0;
    std::int64_t c = 0;
    std::uint64_t s = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&r), sizeof r);
    in.read(reinterpret_cast<char*>(&c), sizeof c);
    in.read(reinterpret_cast<char*>(&s), sizeof s);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0 || r != rows || c != dim || s != seed)
        return nullptr;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values(rows, dim);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(sizeof(double) * values.size()));
    if (!in) return nullptr;
    return std::make_shared<const EmbeddingTable>(rows, dim, seed, Mat(values));
}

void write_table(const std::filesystem::path& path, const EmbeddingTable& table) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ostringstream suffix;
    suffix << ".tmp." << ::getpid() << '.' << reinterpret_cast<std::uintptr_t>(&table);
    const fs::path tmp = path.string() + suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) return;
        const std::int64_t r = table.rows();
        const std::int64_t c = table.dim();
        const std::uint64_t s = table.seed();
        out.write(kMagic, sizeof kMagic);
        out.write(reinterpret_cast<const char*>(&r), sizeof r);
        out.write(reinterpret_cast<const char*>(&c), sizeof c);
        out.write(reinterpret_cast<const char*>(&s), sizeof s);
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values =
            table.values();
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(sizeof(double) * values.size()));
        if (!out) {
            fs::remove(tmp, ec);
            return;
        }
    }
    // Hard link publishes atomically and refuses to replace an existing entry,
    // so the first writer wins.
    fs::create_hard_link(tmp, path, ec);
    fs::remove(tmp, ec);
}

}  // namespace

std::string_view to_string(FunctionKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "unknown";
}

FunctionKind parse_function_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames)
        if (n == name) return k;
    throw InvalidArgument("unknown function kind '" + std::string(name) + "'");
}

bool is_network(FunctionKind kind) {
    return kind == FunctionKind::relu_nn || kind == FunctionKind::sigmoid_nn;
}

std::string_view to_string(InstanceKind kind) {
    switch (kind) {
        case InstanceKind::retrieval: return "retrieval";
        case InstanceKind::predict_retrieve: return "predict_retrieve";
        case InstanceKind::word_classification: return "word_classification";
    }
    return "unknown";
}

Vec signed_sqrt(const Vec& x) {
    return x.unaryExpr([](double t) { return std::copysign(std::sqrt(std::abs(t)), t); });
}

Vec feature_map(FunctionKind kind, const Vec& x) {
    switch (kind) {
        case FunctionKind::linear: return x;
        case FunctionKind::quadratic: return x.array().square().matrix();
        case FunctionKind::cubic: return x.array().cube().matrix();
        case FunctionKind::sqrt_linear: return signed_sqrt(x);
        default: throw InvalidArgument("feature map defined only for single-weight kinds");
    }
}

TaskFunction::TaskFunction(FunctionKind kind, Eigen::Index dim, TaskParams params)
    : kind_(kind), dim_(dim), params_(std::move(params)) {
    if (dim < 1) throw InvalidArgument("task dimension must be at least 1");
    switch (kind) {
        case FunctionKind::relu_nn:
        case FunctionKind::sigmoid_nn:
            if (params_.w2.cols() != dim || params_.w1.size() != params_.w2.rows() ||
                params_.w2.rows() < 1)
                throw DimensionMismatch("network task parameters have inconsistent shapes");
            break;
        case FunctionKind::linear_plus_quadratic:
            if (params_.w.size() != dim || params_.w1.size() != dim)
                throw DimensionMismatch("linear_plus_quadratic parameters have wrong dimension");
            break;
        default:
            if (params_.w.size() != dim) throw DimensionMismatch("task weight has wrong dimension");
    }
}

double TaskFunction::operator()(const Vec& x) const {
    if (x.size() != dim_) throw DimensionMismatch("task input has wrong dimension");
    const TaskParams& p = params_;
    switch (kind_) {
        case FunctionKind::linear:
        case FunctionKind::quadratic:
        case FunctionKind::cubic:
        case FunctionKind::sqrt_linear:
            return p.w.dot(feature_map(kind_, x));
        case FunctionKind::linear_plus_quadratic:
            return p.w1.dot(x.array().square().matrix()) + p.w.dot(x);
        case FunctionKind::relu_nn:
            return p.w1.dot((p.w2 * x).cwiseMax(0.0));
        case FunctionKind::sigmoid_nn:
            return p.w1.dot((p.w2 * x).unaryExpr(&sigmoid));
    }
    return 0.0;
}

TaskFunction sample_task(FunctionKind kind, Eigen::Index dim, std::optional<Eigen::Index> hidden_dim,
                         std::uint64_t seed) {
    if (dim < 1 || dim > kMaxDim) throw InvalidArgument("task dimension out of range");
    Rng rng = make_rng(seed);
    TaskParams p;
    if (is_network(kind)) {
        if (!hidden_dim || *hidden_dim < 1)
            throw InvalidArgument(std::string(to_string(kind)) + " requires a hidden width d_prime");
        p.w1 = normal_vector(rng, *hidden_dim);
        p.w2 = normal_matrix(rng, *hidden_dim, dim);
    } else if (kind == FunctionKind::linear_plus_quadratic) {
        p.w1 = normal_vector(rng, dim);
        p.w = normal_vector(rng, dim);
    } else {
        p.w = normal_vector(rng, dim);
    }
    return TaskFunction(kind, dim, std::move(p));
}

LabeledBatch sample_icl_batch(const TaskFunction& task, std::size_t length, std::uint64_t seed) {
    return sample_icl_batch(task, length, seed, Vec::Zero(task.dim()), 1.0);
}

LabeledBatch sample_icl_batch(const TaskFunction& task, std::size_t length, std::uint64_t seed,
                              const Vec& input_mean, double input_std) {
    if (input_mean.size() != task.dim()) throw DimensionMismatch("input mean has wrong dimension");
    if (!(input_std > 0.0) || !std::isfinite(input_std))
        throw InvalidArgument("input standard deviation must be positive");
    Rng rng = make_rng(seed);
    LabeledBatch out;
    out.context.xs.reserve(length);
    out.context.ys.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
        Vec x = normal_vector(rng, input_mean, input_std);
        out.context.ys.push_back(task(x));
        out.context.xs.push_back(std::move(x));
    }
    out.context.query = normal_vector(rng, input_mean, input_std);
    out.query_label = task(out.context.query);
    return out;
}

// ---------------------------------------------------------------------------

EmbeddingTable::EmbeddingTable(std::int64_t rows, Eigen::Index dim, std::uint64_t seed)
    : rows_(rows), dim_(dim), seed_(seed), id_(make_id(rows, dim, seed)) {
    check_table_args(rows, dim);
    Rng rng = make_rng(seed);
    values_ = normal_matrix(rng, rows, dim);
}

EmbeddingTable::EmbeddingTable(std::int64_t rows, Eigen::Index dim, std::uint64_t seed, Mat values)
    : rows_(rows), dim_(dim), seed_(seed), id_(make_id(rows, dim, seed)), values_(std::move(values)) {
    check_table_args(rows, dim);
    if (values_.rows() != rows || values_.cols() != dim)
        throw DimensionMismatch("embedding values have wrong shape");
}

Vec EmbeddingTable::row(std::int64_t index) const {
    return values_.row(checked_index(index, rows_, "row index")).transpose();
}

std::string EmbeddingTable::make_id(std::int64_t rows, Eigen::Index dim, std::uint64_t seed) {
    std::ostringstream id;
    id << "emb-n" << rows << "-d" << dim << "-s" << seed;
    return id.str();
}

struct EmbeddingStore::Memo {
    std::mutex mutex;
    std::map<std::string, std::shared_ptr<const EmbeddingTable>> tables;
};

EmbeddingStore::EmbeddingStore(std::filesystem::path directory)
    : directory_(std::move(directory)), memo_(std::make_shared<Memo>()) {}

EmbeddingStore EmbeddingStore::from_environment(const std::filesystem::path& fallback) {
    if (const char* env = std::getenv("ICL_LAB_CACHE"); env && *env)
        return EmbeddingStore(std::filesystem::path(env));
    return EmbeddingStore(fallback);
}

std::shared_ptr<const EmbeddingTable> EmbeddingStore::get(std::int64_t rows, Eigen::Index dim,
                                                          std::uint64_t seed) const {
    check_table_args(rows, dim);
    const std::string id = EmbeddingTable::make_id(rows, dim, seed);
    std::lock_guard lock(memo_->mutex);
    if (auto it = memo_->tables.find(id); it != memo_->tables.end()) return it->second;
    auto remember = [&](std::shared_ptr<const EmbeddingTable> t) {
        memo_->tables.emplace(id, t);
        return t;
    };
    if (directory_.empty()) return remember(std::make_shared<const EmbeddingTable>(rows, dim, seed));
    const auto path = directory_ / (id + ".bin");
    if (auto cached = read_table(path, rows, dim, seed)) return remember(cached);
    auto table = std::make_shared<const EmbeddingTable>(rows, dim, seed);
    write_table(path, *table);
    // Another process may have published first; its content is what everyone reads.
    if (auto published = read_table(path, rows, dim, seed)) return remember(published);
    return remember(table);
}

// ---------------------------------------------------------------------------

Eigen::Index first_argmax(const Vec& scores) {
    if (scores.size() == 0) throw InvalidArgument("argmax of an empty vector");
    Eigen::Index best = 0;
    // Strict comparison keeps the lowest index on ties.
    for (Eigen::Index j = 1; j < scores.size(); ++j)
        if (scores[j] > scores[best]) best = j;
    return best;
}

std::int64_t bucket_of(const Vec& w, const Vec& x, FunctionKind feature) {
    return static_cast<std::int64_t>(std::floor(kBucketScale * w.dot(feature_map(feature, x))));
}

RetrievalInstance make_retrieval_instance(const EmbeddingStore& store, std::int64_t rows,
                                          Eigen::Index dim, ShiftRange shifts, std::size_t length,
                                          std::uint64_t embedding_seed, std::uint64_t seed) {
    check_shifts(shifts);
    if (shifts.hi + kRetrievalSourceRows >= rows)
        throw InvalidArgument("shift range does not fit inside the embedding table");
    RetrievalInstance inst;
    inst.kind = InstanceKind::retrieval;
    inst.table = store.get(rows, dim, embedding_seed);
    inst.embedding_id = inst.table->id();
    inst.seed = seed;
    inst.generator.shifts = shifts;

    Rng rng = make_rng(seed);
    inst.shift = uniform_int(rng, shifts.lo, shifts.hi);
    for (std::size_t i = 0; i < length; ++i) {
        const std::int64_t token = uniform_int(rng, 0, kRetrievalSourceRows - 1);
        inst.token_indices.push_back(token);
        inst.pairs_x.push_back(inst.table->row(token));
        inst.label_index.push_back(checked_index(token + inst.shift, rows, "label index"));
    }
    inst.query_token = uniform_int(rng, 0, kRetrievalSourceRows - 1);
    inst.query = inst.table->row(inst.query_token);
    inst.target_index = checked_index(inst.query_token + inst.shift, rows, "target index");
    return inst;
}

RetrievalInstance make_predict_retrieve_instance(const EmbeddingStore& store, std::int64_t rows,
                                                 Eigen::Index dim, ShiftRange shifts,
                                                 std::size_t length, FunctionKind function_kind,
                                                 std::uint64_t embedding_seed, std::uint64_t seed) {
    check_shifts(shifts);
    if (function_kind != FunctionKind::linear && function_kind != FunctionKind::quadratic)
        throw InvalidArgument("predict-retrieve supports linear or quadratic feature maps");
    if (dim < 1 || dim > kMaxDim) throw InvalidArgument("dimension out of range");
    // <w, phi(x)> has variance d (linear) or 3d (quadratic) marginally over w and x.
    const double score_std = std::sqrt((function_kind == FunctionKind::linear ? 1.0 : 3.0) *
                                       static_cast<double>(dim));
    const auto margin = static_cast<std::int64_t>(std::ceil(kBucketScale * 8.0 * score_std));
    if (shifts.lo - margin < 0 || shifts.hi + margin >= rows)
        throw InvalidArgument("embedding table too small to absorb 8-sigma bucket deviations");

    RetrievalInstance inst;
    inst.kind = InstanceKind::predict_retrieve;
    inst.table = store.get(rows, dim, embedding_seed);
    inst.embedding_id = inst.table->id();
    inst.seed = seed;
    inst.generator.shifts = shifts;
    inst.function_kind = function_kind;

    Rng rng = make_rng(seed);
    inst.shift = uniform_int(rng, shifts.lo, shifts.hi);
    inst.latent_w = normal_vector(rng, dim);
    auto index_of = [&](const Vec& x, const char* what) {
        return checked_index(bucket_of(inst.latent_w, x, function_kind) + inst.shift, rows, what);
    };
    for (std::size_t i = 0; i < length; ++i) {
        Vec x = normal_vector(rng, dim);
        inst.label_index.push_back(index_of(x, "label index"));
        inst.pairs_x.push_back(std::move(x));
    }
    inst.query = normal_vector(rng, dim);
    inst.target_index = index_of(inst.query, "target index");
    return inst;
}

RetrievalInstance make_word_classification_instance(const EmbeddingStore& store,
                                                    std::int64_t rows, Eigen::Index dim,
                                                    Eigen::Index hidden_dim, std::int64_t classes,
                                                    std::int64_t offset, std::size_t length,
                                                    std::uint64_t embedding_seed,
                                                    std::uint64_t seed) {
    if (classes < 1) throw InvalidArgument("word classification needs at least one class");
    if (offset < 0 || offset + classes > rows)
        throw InvalidArgument("offset + classes must not exceed the table size");
    if (hidden_dim < 1 || hidden_dim > dim) throw InvalidArgument("d_prime must lie in [1, d]");

    RetrievalInstance inst;
    inst.kind = InstanceKind::word_classification;
    inst.table = store.get(rows, dim, embedding_seed);
    inst.embedding_id = inst.table->id();
    inst.seed = seed;
    inst.generator.classes = classes;
    inst.generator.offset = offset;
    inst.generator.hidden_dim = hidden_dim;
    inst.shift = offset;

    Rng rng = make_rng(seed);
    const Mat weights = normal_matrix(rng, hidden_dim, classes);
    auto classify = [&](std::int64_t token) {
        const Vec scores = weights.transpose() * inst.table->row(token).head(hidden_dim);
        return checked_index(first_argmax(scores) + offset, rows, "label index");
    };
    for (std::size_t i = 0; i < length; ++i) {
        const std::int64_t token = uniform_int(rng, 0, rows - 1);
        inst.token_indices.push_back(token);
        inst.pairs_x.push_back(inst.table->row(token));
        inst.label_index.push_back(classify(token));
    }
    inst.query_token = uniform_int(rng, 0, rows - 1);
    inst.query = inst.table->row(inst.query_token);
    inst.target_index = classify(inst.query_token);
    return inst;
}

}  // namespace icl
