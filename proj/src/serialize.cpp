#include "icl/serialize.hpp"

#include "icl/errors.hpp"
#include "icl/json_fields.hpp"

namespace icl {

namespace {

template <class F>
auto as_validation(const std::string& path, F&& make) {
    try {
        return make();
    } catch (const ValidationError&) {
        throw;
    } catch (const Error& e) {
        throw ValidationError(path, e.what());
    }
}

Json params_to_json(const TaskParams& p) {
    Json j = Json::object();
    if (p.w.size()) j["w"] = to_json(p.w);
    if (p.w1.size()) j["w1"] = to_json(p.w1);
    if (p.w2.size()) j["w2"] = to_json(p.w2);
    return j;
}

TaskParams params_from_json(const Json& j, const std::string& path) {
    jf::only_keys(j, {"w", "w1", "w2"}, path);
    TaskParams p;
    if (jf::has(j, "w")) p.w = vec_from_json(j["w"], jf::join(path, "w"));
    if (jf::has(j, "w1")) p.w1 = vec_from_json(j["w1"], jf::join(path, "w1"));
    if (jf::has(j, "w2")) p.w2 = mat_from_json(j["w2"], jf::join(path, "w2"));
    return p;
}

FunctionKind kind_from_json(const Json& j, const std::string& path) {
    const std::string name = jf::string(j, path);
    return as_validation(path, [&] { return parse_function_kind(name); });
}

}  // namespace

Json to_json(const Vec& v) {
    Json j = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

Vec vec_from_json(const Json& j, const std::string& path) {
    const std::vector<double> xs = jf::numbers(j, path);
    return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Json to_json(const Mat& m) {
    Json j = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Vec(m.row(r).transpose())));
    return j;
}

Mat mat_from_json(const Json& j, const std::string& path) {
    jf::array(j, path);
    if (j.empty()) return Mat();
    Mat m;
    for (std::size_t r = 0; r < j.size(); ++r) {
        const Vec row = vec_from_json(j[r], jf::index(path, r));
        if (r == 0) m.resize(static_cast<Eigen::Index>(j.size()), row.size());
        if (row.size() != m.cols()) throw ValidationError(jf::index(path, r), "ragged matrix row");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

Json to_json(const Hyper& h) {
    return {{"sigma_x", h.sigma_x()}, {"sigma_y", h.sigma_y()}, {"sigma_mu", h.sigma_mu()},
            {"sigma_w", h.sigma_w()}};
}

Hyper hyper_from_json(const Json& j, const std::string& path) {
    jf::only_keys(j, {"sigma_x", "sigma_y", "sigma_mu", "sigma_w"}, path);
    auto get = [&](const char* key) { return jf::positive(jf::field(j, key, path), jf::join(path, key)); };
    const double sx = get("sigma_x");
    const double sy = get("sigma_y");
    const double smu = get("sigma_mu");
    const double sw = get("sigma_w");
    return Hyper(sx, sy, smu, sw);
}

Json to_json(const MixturePrior& prior) {
    Json comps = Json::array();
    for (const Component& c : prior.components())
        comps.push_back({{"pi", c.pi}, {"mu", to_json(c.mu)}, {"w", to_json(c.w)}});
    return {{"components", comps},
            {"hyper", to_json(prior.hyper())},
            {"dim", prior.dim()},
            {"strict_unit_norm", prior.strict_unit_norm()}};
}

MixturePrior prior_from_json(const Json& j, const std::string& path) {
    jf::only_keys(j, {"components", "hyper", "dim", "strict_unit_norm"}, path);
    const std::string cpath = jf::join(path, "components");
    const Json& cs = jf::array(jf::field(j, "components", path), cpath);
    if (cs.empty()) throw ValidationError(cpath, "needs at least one component");
    std::vector<Component> comps;
    for (std::size_t m = 0; m < cs.size(); ++m) {
        const std::string p = jf::index(cpath, m);
        jf::only_keys(cs[m], {"pi", "mu", "w"}, p);
        Component c;
        c.pi = jf::number(jf::field(cs[m], "pi", p), jf::join(p, "pi"));
        if (!(c.pi > 0.0 && c.pi <= 1.0)) throw ValidationError(jf::join(p, "pi"), "must lie in (0, 1]");
        c.mu = vec_from_json(jf::field(cs[m], "mu", p), jf::join(p, "mu"));
        c.w = vec_from_json(jf::field(cs[m], "w", p), jf::join(p, "w"));
        if (c.mu.size() != c.w.size())
            throw ValidationError(p, "mu and w must have the same dimension");
        if (m > 0 && c.mu.size() != comps.front().mu.size())
            throw ValidationError(p, "dimension differs from the first component");
        comps.push_back(std::move(c));
    }
    const Hyper hyper = jf::has(j, "hyper") ? hyper_from_json(j["hyper"], jf::join(path, "hyper"))
                                            : Hyper(1.0, 1.0, 1.0, 1.0);
    if (jf::has(j, "dim")) {
        const auto d = jf::count(j["dim"], jf::join(path, "dim"), 1);
        if (static_cast<Eigen::Index>(d) != comps.front().mu.size())
            throw ValidationError(jf::join(path, "dim"), "does not match the component vectors");
    }
    const bool strict = jf::has(j, "strict_unit_norm") &&
                        jf::boolean(j["strict_unit_norm"], jf::join(path, "strict_unit_norm"));
    return as_validation(path, [&] { return MixturePrior(std::move(comps), hyper, strict); });
}

Json to_json(const ContextSequence& context) {
    Json xs = Json::array();
    for (const Vec& x : context.xs) xs.push_back(to_json(x));
    return {{"xs", xs}, {"ys", context.ys}, {"query", to_json(context.query)}};
}

ContextSequence context_from_json(const Json& j, const std::string& path) {
    jf::only_keys(j, {"xs", "ys", "query"}, path);
    ContextSequence c;
    const std::string xpath = jf::join(path, "xs");
    const Json& xs = jf::array(jf::field(j, "xs", path), xpath);
    for (std::size_t i = 0; i < xs.size(); ++i) c.xs.push_back(vec_from_json(xs[i], jf::index(xpath, i)));
    c.ys = jf::numbers(jf::field(j, "ys", path), jf::join(path, "ys"));
    c.query = vec_from_json(jf::field(j, "query", path), jf::join(path, "query"));
    as_validation(path, [&] {
        c.validate(c.query.size());
        return 0;
    });
    return c;
}

Json to_json(const TaskFunction& task) {
    return {{"kind", std::string(to_string(task.kind()))},
            {"dim", task.dim()},
            {"params", params_to_json(task.params())}};
}

TaskFunction task_from_json(const Json& j, const std::string& path) {
    jf::only_keys(j, {"kind", "dim", "params"}, path);
    const FunctionKind kind = kind_from_json(jf::field(j, "kind", path), jf::join(path, "kind"));
    const auto dim = static_cast<Eigen::Index>(jf::count(jf::field(j, "dim", path), jf::join(path, "dim"), 1));
    TaskParams p = params_from_json(jf::field(j, "params", path), jf::join(path, "params"));
    return as_validation(path, [&] { return TaskFunction(kind, dim, std::move(p)); });
}

Json to_json(const FittedModel& model) {
    Json log = Json::array();
    for (const auto& [step, loss] : model.training_log) log.push_back({step, loss});
    return {{"kind", std::string(to_string(model.kind))},
            {"dim", model.dim},
            {"params", params_to_json(model.params)},
            {"final_loss", model.final_loss},
            {"training_log", log}};
}

FittedModel fitted_model_from_json(const Json& j, const std::string& path) {
    jf::only_keys(j, {"kind", "dim", "params", "final_loss", "training_log"}, path);
    FittedModel m;
    m.kind = kind_from_json(jf::field(j, "kind", path), jf::join(path, "kind"));
    m.dim = static_cast<Eigen::Index>(jf::count(jf::field(j, "dim", path), jf::join(path, "dim"), 1));
    m.params = params_from_json(jf::field(j, "params", path), jf::join(path, "params"));
    m.final_loss = jf::number(jf::field(j, "final_loss", path), jf::join(path, "final_loss"));
    if (jf::has(j, "training_log")) {
        const std::string lpath = jf::join(path, "training_log");
        const Json& log = jf::array(j["training_log"], lpath);
        for (std::size_t i = 0; i < log.size(); ++i) {
            const std::string p = jf::index(lpath, i);
            if (!log[i].is_array() || log[i].size() != 2) throw ValidationError(p, "expected [step, loss]");
            m.training_log.emplace_back(jf::count(log[i][0], p), jf::number(log[i][1], p));
        }
    }
    return m;
}

Json to_json(const RetrievalInstance& inst) {
    Json pairs = Json::array();
    for (std::size_t i = 0; i < inst.length(); ++i) {
        Json p = {{"x", to_json(inst.pairs_x[i])},
                  {"label_index", inst.label_index[i]},
                  {"y", to_json(inst.label(i))}};
        if (!inst.token_indices.empty()) p["token"] = inst.token_indices[i];
        pairs.push_back(std::move(p));
    }
    Json j = {{"schema", kInstanceSchema},
              {"kind", std::string(to_string(inst.kind))},
              {"embedding_id", inst.embedding_id},
              {"embedding", {{"rows", inst.table->rows()}, {"dim", inst.table->dim()}, {"seed", inst.table->seed()}}},
              {"seed", inst.seed},
              {"length", inst.length()},
              {"shift", inst.shift},
              {"pairs", pairs},
              {"query", to_json(inst.query)},
              {"target_index", inst.target_index}};
    if (inst.query_token >= 0) j["query_token"] = inst.query_token;
    switch (inst.kind) {
        case InstanceKind::retrieval:
        case InstanceKind::predict_retrieve:
            j["generator"] = {{"shifts", {inst.generator.shifts.lo, inst.generator.shifts.hi}}};
            break;
        case InstanceKind::word_classification:
            j["generator"] = {{"classes", inst.generator.classes},
                              {"offset", inst.generator.offset},
                              {"hidden_dim", inst.generator.hidden_dim}};
            break;
    }
    if (inst.function_kind) {
        j["function_kind"] = std::string(to_string(*inst.function_kind));
        j["latent_w"] = to_json(inst.latent_w);
    }
    return j;
}

RetrievalInstance regenerate_instance(const Json& j, const EmbeddingStore& store) {
    const std::string schema = jf::string(jf::field(j, "schema", ""), "schema");
    if (schema != kInstanceSchema) throw ValidationError("schema", "unsupported schema '" + schema + "'");
    const Json& emb = jf::field(j, "embedding", "");
    const auto rows = jf::integer(jf::field(emb, "rows", "embedding"), "embedding.rows");
    const auto dim = static_cast<Eigen::Index>(jf::count(jf::field(emb, "dim", "embedding"), "embedding.dim", 1));
    const auto emb_seed = jf::unsigned_integer(jf::field(emb, "seed", "embedding"), "embedding.seed");
    const auto seed = jf::unsigned_integer(jf::field(j, "seed", ""), "seed");
    const auto length = jf::count(jf::field(j, "length", ""), "length");
    const std::string kind = jf::string(jf::field(j, "kind", ""), "kind");
    const Json& gen = jf::field(j, "generator", "");
    auto shifts = [&] {
        const Json& s = jf::field(gen, "shifts", "generator");
        if (!s.is_array() || s.size() != 2) throw ValidationError("generator.shifts", "expected [lo, hi]");
        return ShiftRange{jf::integer(s[0], "generator.shifts[0]"), jf::integer(s[1], "generator.shifts[1]")};
    };
    return as_validation("", [&] {
        if (kind == "retrieval") return make_retrieval_instance(store, rows, dim, shifts(), length, emb_seed, seed);
        if (kind == "predict_retrieve") {
            const FunctionKind fk = kind_from_json(jf::field(j, "function_kind", ""), "function_kind");
            return make_predict_retrieve_instance(store, rows, dim, shifts(), length, fk, emb_seed, seed);
        }
        if (kind == "word_classification") {
            return make_word_classification_instance(
                store, rows, dim,
                static_cast<Eigen::Index>(jf::count(jf::field(gen, "hidden_dim", "generator"), "generator.hidden_dim", 1)),
                jf::integer(jf::field(gen, "classes", "generator"), "generator.classes"),
                jf::integer(jf::field(gen, "offset", "generator"), "generator.offset"), length, emb_seed, seed);
        }
        throw ValidationError("kind", "unknown instance kind '" + kind + "'");
    });
}

}  // namespace icl
