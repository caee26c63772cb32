#include "icl/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include "icl/errors.hpp"
#include "icl/json_fields.hpp"
#include "icl/metrics.hpp"
#include "icl/parallel.hpp"
#include "icl/plot.hpp"
#include "icl/random.hpp"
#include "icl/serialize.hpp"
#include "icl/theory.hpp"
#include "icl/tolerances.hpp"

#ifndef ICL_LAB_VERSION
#define ICL_LAB_VERSION "dev"
#endif

namespace icl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Sub-streams of the master seed. Part of the output contract: changing them
// changes every result file.
constexpr std::uint64_t kCurveStream = 11;
constexpr std::uint64_t kRetrievalStream = 12;
constexpr std::uint64_t kTheoremStream = 13;
constexpr std::uint64_t kLemmaStream = 14;
constexpr std::uint64_t kExploratoryStream = 15;
constexpr std::uint64_t kGradientStream = 16;
constexpr std::uint64_t kOracleStream = 17;
constexpr std::uint64_t kQuadratureStream = 18;

struct KindInfo {
    ExperimentKind kind;
    const char* name;
    std::size_t default_trials;
};

constexpr KindInfo kKinds[] = {
    {ExperimentKind::algoselect_error, "algoselect_error", 200},
    {ExperimentKind::algoselect_distance, "algoselect_distance", 200},
    {ExperimentKind::curves, "curves", 100},
    {ExperimentKind::double_descent, "double_descent", 200},
    {ExperimentKind::retrieval_eval, "retrieval_eval", 500},
    {ExperimentKind::theory_check, "theory_check", 10000},
    {ExperimentKind::oracle_check, "oracle_check", 50},
};

const KindInfo& info(ExperimentKind kind) {
    for (const KindInfo& k : kKinds)
        if (k.kind == kind) return k;
    throw InvalidArgument("unknown experiment kind");
}

bool is_algoselect(ExperimentKind k) {
    return k == ExperimentKind::algoselect_error || k == ExperimentKind::algoselect_distance;
}

// ---------------------------------------------------------------------------
// Parsing

double parse_ratio(const std::string& text, const std::string& path) {
    auto parse_one = [&](const std::string& part) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(part, &used);
        } catch (const std::exception&) {
            throw ValidationError(path, "cannot parse '" + text + "' as a number or ratio");
        }
        if (used != part.size()) throw ValidationError(path, "cannot parse '" + text + "' as a number or ratio");
        return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string::npos) return parse_one(text);
    return parse_one(text.substr(0, slash)) / parse_one(text.substr(slash + 1));
}

std::vector<NoiseLevel> parse_noise_levels(const json& j, const std::string& path) {
    jf::array(j, path);
    if (j.empty()) throw ValidationError(path, "needs at least one noise level");
    std::vector<NoiseLevel> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = jf::index(path, i);
        NoiseLevel level;
        if (j[i].is_string()) {
            level.label = j[i].get<std::string>();
            level.value = parse_ratio(level.label, p);
        } else {
            level.value = jf::number(j[i], p);
            level.label = format_number(level.value);
        }
        if (!(level.value > 0.0) || !std::isfinite(level.value)) throw ValidationError(p, "must be positive");
        out.push_back(std::move(level));
    }
    return out;
}

std::vector<NoiseLevel> default_noise_levels() {
    std::vector<NoiseLevel> out;
    for (const char* s : {"1/81", "1/9", "1", "9", "81"}) out.push_back({parse_ratio(s, ""), s});
    return out;
}

Eigen::Index parse_dim(const json& j, const std::string& path) {
    const auto d = jf::count(j, path, 1);
    if (d > static_cast<std::size_t>(kMaxDim))
        throw ValidationError(path, "must not exceed " + std::to_string(kMaxDim));
    return static_cast<Eigen::Index>(d);
}

FunctionKind parse_kind(const json& j, const std::string& path) {
    const std::string name = jf::string(j, path);
    try {
        return parse_function_kind(name);
    } catch (const Error&) {
        throw ValidationError(path, "unknown function kind '" + name + "'");
    }
}

TaskSpec parse_task(const json& j, const std::string& path, TaskSpec spec) {
    jf::only_keys(j, {"kind", "dim", "hidden_dim", "seed", "resample"}, path);
    if (jf::has(j, "kind")) spec.kind = parse_kind(j["kind"], jf::join(path, "kind"));
    if (jf::has(j, "dim")) spec.dim = parse_dim(j["dim"], jf::join(path, "dim"));
    if (jf::has(j, "hidden_dim"))
        spec.hidden_dim = static_cast<Eigen::Index>(jf::count(j["hidden_dim"], jf::join(path, "hidden_dim"), 1));
    if (jf::has(j, "seed")) spec.seed = jf::unsigned_integer(j["seed"], jf::join(path, "seed"));
    if (jf::has(j, "resample")) spec.resample = jf::boolean(j["resample"], jf::join(path, "resample"));
    return spec;
}

json task_json(const TaskSpec& t) {
    return {{"kind", std::string(to_string(t.kind))},
            {"dim", t.dim},
            {"hidden_dim", t.hidden_dim},
            {"seed", t.seed},
            {"resample", t.resample}};
}

// Strict mode combined with non-unit centers is a warning: the prior is then
// built without the unit-norm check.
MixturePrior parse_prior(const json& j, const std::string& path, std::vector<std::string>& warnings,
                         bool& strict_requested) {
    json copy = j;
    strict_requested = false;
    if (jf::has(j, "strict_unit_norm"))
        strict_requested = jf::boolean(j["strict_unit_norm"], jf::join(path, "strict_unit_norm"));
    if (strict_requested) {
        copy["strict_unit_norm"] = false;
        const MixturePrior relaxed = prior_from_json(copy, path);
        bool unit = true;
        for (const Component& c : relaxed.components())
            unit = unit && std::abs(c.mu.norm() - 1.0) <= tol::kAlgebraic &&
                   std::abs(c.w.norm() - 1.0) <= tol::kAlgebraic;
        if (unit) return prior_from_json(j, path);
        warnings.push_back(jf::join(path, "strict_unit_norm") +
                           ": component centers are not unit norm; the unit-norm check is not applied");
        return relaxed;
    }
    return prior_from_json(copy, path);
}

json prior_json(const MixturePrior& prior, bool strict_requested) {
    json j = to_json(prior);
    j["strict_unit_norm"] = strict_requested;
    return j;
}

std::vector<std::size_t> parse_lengths(const json& j, const std::string& path, std::size_t min) {
    jf::array(j, path);
    if (j.empty()) throw ValidationError(path, "needs at least one context length");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(jf::count(j[i], jf::index(path, i), min));
    return out;
}

AlgoSelectSpec parse_algoselect(const json& doc, std::vector<std::string>& warnings) {
    bool strict = false;
    AlgoSelectSpec spec(parse_prior(jf::field(doc, "prior", ""), "prior", warnings, strict));
    spec.strict_requested = strict;
    TaskSpec task;
    task.kind = FunctionKind::relu_nn;
    task.dim = spec.prior.dim();
    spec.task = task;
    spec.input_mean = Vec::Zero(spec.prior.dim());
    spec.noise_levels = default_noise_levels();
    if (jf::has(doc, "downstream")) {
        const json& ds = doc["downstream"];
        jf::only_keys(ds, {"task", "input_mean", "input_std"}, "downstream");
        if (jf::has(ds, "task")) spec.task = parse_task(ds["task"], "downstream.task", spec.task);
        if (jf::has(ds, "input_mean")) spec.input_mean = vec_from_json(ds["input_mean"], "downstream.input_mean");
        if (jf::has(ds, "input_std")) spec.input_std = jf::positive(ds["input_std"], "downstream.input_std");
    }
    if (spec.task.dim != spec.prior.dim())
        throw ValidationError("downstream.task.dim", "must equal the prior dimension " + std::to_string(spec.prior.dim()));
    if (spec.task.resample)
        throw ValidationError("downstream.task.resample", "the downstream task is fixed across trials here");
    if (spec.input_mean.size() != spec.prior.dim())
        throw ValidationError("downstream.input_mean", "must have the prior dimension");
    if (jf::has(doc, "T")) spec.length = jf::count(doc["T"], "T");
    if (jf::has(doc, "noise_levels")) spec.noise_levels = parse_noise_levels(doc["noise_levels"], "noise_levels");
    if (jf::has(doc, "error_samples")) spec.error_samples = jf::count(doc["error_samples"], "error_samples", 1);
    return spec;
}

PredictorSpec parse_predictor(const json& j, const std::string& path, Eigen::Index task_dim,
                              std::vector<std::string>& warnings) {
    jf::only_keys(j, {"name", "method", "kind", "lr", "steps", "hidden_dim", "lambda", "prior"}, path);
    PredictorSpec p;
    p.method = jf::string(jf::field(j, "method", path), jf::join(path, "method"));
    const bool gd = p.method == "gd";
    if (!gd && p.method != "posterior" && p.method != "ols_min_norm" && p.method != "ridge")
        throw ValidationError(jf::join(path, "method"),
                              "expected one of posterior, gd, ols_min_norm, ridge");
    auto only_for = [&](const char* key, bool allowed) {
        if (jf::has(j, key) && !allowed)
            throw ValidationError(jf::join(path, key), "not used by method '" + p.method + "'");
    };
    only_for("kind", gd);
    only_for("lr", gd);
    only_for("steps", gd);
    only_for("hidden_dim", gd);
    only_for("lambda", p.method == "ridge");
    only_for("prior", p.method == "posterior");
    if (gd) {
        if (jf::has(j, "kind")) p.gd_kind = parse_kind(j["kind"], jf::join(path, "kind"));
        if (jf::has(j, "lr")) p.gd.learning_rate = jf::positive(j["lr"], jf::join(path, "lr"));
        if (jf::has(j, "steps")) p.gd.steps = jf::count(j["steps"], jf::join(path, "steps"));
        if (jf::has(j, "hidden_dim"))
            p.gd.hidden_dim = static_cast<Eigen::Index>(jf::count(j["hidden_dim"], jf::join(path, "hidden_dim"), 1));
    }
    if (p.method == "ridge" && jf::has(j, "lambda")) p.lambda = jf::positive(j["lambda"], jf::join(path, "lambda"));
    if (p.method == "posterior") {
        const std::string ppath = jf::join(path, "prior");
        p.prior = parse_prior(jf::field(j, "prior", path), ppath, warnings, p.strict_requested);
        if (p.prior->dim() != task_dim)
            throw ValidationError(jf::join(ppath, "dim"), "must equal the task dimension");
    }
    if (jf::has(j, "name")) {
        p.name = jf::string(j["name"], jf::join(path, "name"));
        if (p.name.empty()) throw ValidationError(jf::join(path, "name"), "must not be empty");
    } else {
        p.name = gd ? "gd_" + std::string(to_string(p.gd_kind)) : p.method;
    }
    return p;
}

json predictor_json(const PredictorSpec& p) {
    json j = {{"name", p.name}, {"method", p.method}};
    if (p.method == "gd") {
        j["kind"] = std::string(to_string(p.gd_kind));
        j["lr"] = p.gd.learning_rate;
        j["steps"] = p.gd.steps;
        j["hidden_dim"] = p.gd.hidden_dim;
    }
    if (p.method == "ridge") j["lambda"] = p.lambda;
    if (p.method == "posterior") j["prior"] = prior_json(*p.prior, p.strict_requested);
    return j;
}

CurvesSpec parse_curves(const json& doc, ExperimentKind kind, std::vector<std::string>& warnings) {
    const bool dd = kind == ExperimentKind::double_descent;
    CurvesSpec spec;
    if (dd) {
        spec.task.kind = FunctionKind::quadratic;
        spec.task.resample = true;
        spec.lengths = {5, 10, 15, 20, 25, 30, 40, 50, 60};
    }
    if (jf::has(doc, "task")) spec.task = parse_task(doc["task"], "task", spec.task);
    if (jf::has(doc, "T_grid")) spec.lengths = parse_lengths(doc["T_grid"], "T_grid", 1);
    if (spec.lengths.empty()) throw ValidationError("T_grid", "missing required field");
    if (jf::has(doc, "predictors")) {
        const json& ps = jf::array(doc["predictors"], "predictors");
        if (ps.empty()) throw ValidationError("predictors", "needs at least one predictor");
        for (std::size_t i = 0; i < ps.size(); ++i)
            spec.predictors.push_back(parse_predictor(ps[i], jf::index("predictors", i), spec.task.dim, warnings));
    } else if (dd) {
        PredictorSpec p;
        p.name = p.method = "ols_min_norm";
        spec.predictors.push_back(p);
    } else {
        throw ValidationError("predictors", "missing required field");
    }
    for (std::size_t a = 0; a < spec.predictors.size(); ++a)
        for (std::size_t b = 0; b < a; ++b)
            if (spec.predictors[a].name == spec.predictors[b].name)
                throw ValidationError(jf::join(jf::index("predictors", a), "name"),
                                      "duplicate predictor name '" + spec.predictors[a].name + "'");
    return spec;
}

InstanceKind parse_instance_kind(const json& j, const std::string& path) {
    const std::string s = jf::string(j, path);
    if (s == "retrieval") return InstanceKind::retrieval;
    if (s == "predict_retrieve") return InstanceKind::predict_retrieve;
    if (s == "word_classification") return InstanceKind::word_classification;
    throw ValidationError(path, "expected retrieval, predict_retrieve or word_classification");
}

std::vector<RetrievalCondition> default_conditions(InstanceKind kind) {
    if (kind != InstanceKind::predict_retrieve) return {{"oracle", FunctionKind::linear, FunctionKind::linear, "oracle"}};
    return {
        {"linear", FunctionKind::linear, FunctionKind::linear, "estimate_then_retrieve"},
        {"quadratic_mismatch", FunctionKind::quadratic, FunctionKind::linear, "estimate_then_retrieve"},
        {"linear_known_w", FunctionKind::linear, FunctionKind::linear, "known_w"},
    };
}

RetrievalSpec parse_retrieval(const json& doc) {
    RetrievalSpec spec;
    if (jf::has(doc, "instance")) spec.instance = parse_instance_kind(doc["instance"], "instance");
    if (spec.instance == InstanceKind::word_classification) {
        spec.rows = 10000;
        spec.shifts = {0, 0};
    } else if (spec.instance == InstanceKind::retrieval) {
        spec.shifts = {50, 150};
    }
    if (jf::has(doc, "N")) spec.rows = static_cast<std::int64_t>(jf::count(doc["N"], "N", 1));
    if (jf::has(doc, "dim")) spec.dim = parse_dim(doc["dim"], "dim");
    if (jf::has(doc, "shifts")) {
        const json& s = jf::array(doc["shifts"], "shifts");
        if (s.size() != 2) throw ValidationError("shifts", "expected [lo, hi]");
        spec.shifts = {jf::integer(s[0], "shifts[0]"), jf::integer(s[1], "shifts[1]")};
        if (spec.shifts.lo > spec.shifts.hi) throw ValidationError("shifts", "lo must not exceed hi");
    }
    if (jf::has(doc, "T")) spec.length = jf::count(doc["T"], "T");
    if (jf::has(doc, "embedding_seed")) spec.embedding_seed = jf::unsigned_integer(doc["embedding_seed"], "embedding_seed");
    if (jf::has(doc, "lambda")) spec.lambda = jf::positive(doc["lambda"], "lambda");
    if (jf::has(doc, "d_prime")) spec.hidden_dim = static_cast<Eigen::Index>(jf::count(doc["d_prime"], "d_prime", 1));
    if (jf::has(doc, "classes")) spec.classes = static_cast<std::int64_t>(jf::count(doc["classes"], "classes", 1));
    if (jf::has(doc, "offset")) spec.offset = static_cast<std::int64_t>(jf::count(doc["offset"], "offset"));
    if (jf::has(doc, "write_instances")) spec.write_instances = jf::boolean(doc["write_instances"], "write_instances");

    if (jf::has(doc, "conditions")) {
        const json& cs = jf::array(doc["conditions"], "conditions");
        if (cs.empty()) throw ValidationError("conditions", "needs at least one condition");
        for (std::size_t i = 0; i < cs.size(); ++i) {
            const std::string p = jf::index("conditions", i);
            jf::only_keys(cs[i], {"name", "function_kind", "estimator_features", "method"}, p);
            RetrievalCondition c;
            c.method = jf::string(jf::field(cs[i], "method", p), jf::join(p, "method"));
            if (c.method != "oracle" && c.method != "estimate_then_retrieve" && c.method != "known_w")
                throw ValidationError(jf::join(p, "method"), "expected oracle, estimate_then_retrieve or known_w");
            if (c.method != "oracle" && spec.instance != InstanceKind::predict_retrieve)
                throw ValidationError(jf::join(p, "method"), "only the oracle applies to this instance kind");
            if (jf::has(cs[i], "function_kind"))
                c.function_kind = parse_kind(cs[i]["function_kind"], jf::join(p, "function_kind"));
            c.estimator_features = c.function_kind;
            if (jf::has(cs[i], "estimator_features"))
                c.estimator_features = parse_kind(cs[i]["estimator_features"], jf::join(p, "estimator_features"));
            for (FunctionKind k : {c.function_kind, c.estimator_features})
                if (k != FunctionKind::linear && k != FunctionKind::quadratic)
                    throw ValidationError(p, "feature maps must be linear or quadratic");
            c.name = jf::has(cs[i], "name") ? jf::string(cs[i]["name"], jf::join(p, "name")) : c.method;
            for (const RetrievalCondition& other : spec.conditions)
                if (other.name == c.name) throw ValidationError(jf::join(p, "name"), "duplicate condition name");
            spec.conditions.push_back(c);
        }
    } else {
        spec.conditions = default_conditions(spec.instance);
    }

    // Generator preconditions depend only on the config; check them now, on an
    // in-memory table, so a bad config fails before any output exists.
    const EmbeddingStore scratch;
    for (const RetrievalCondition& c : spec.conditions) {
        try {
            switch (spec.instance) {
                case InstanceKind::retrieval:
                    make_retrieval_instance(scratch, spec.rows, spec.dim, spec.shifts, 0, spec.embedding_seed, 0);
                    break;
                case InstanceKind::predict_retrieve:
                    make_predict_retrieve_instance(scratch, spec.rows, spec.dim, spec.shifts, 0, c.function_kind,
                                                   spec.embedding_seed, 0);
                    break;
                case InstanceKind::word_classification:
                    make_word_classification_instance(scratch, spec.rows, spec.dim, spec.hidden_dim, spec.classes,
                                                      spec.offset, 0, spec.embedding_seed, 0);
                    break;
            }
        } catch (const ValidationError&) {
            throw;
        } catch (const Error& e) {
            throw ValidationError("N", e.what());
        }
    }
    return spec;
}

json retrieval_json(const RetrievalSpec& s) {
    json conds = json::array();
    for (const RetrievalCondition& c : s.conditions)
        conds.push_back({{"name", c.name},
                         {"function_kind", std::string(to_string(c.function_kind))},
                         {"estimator_features", std::string(to_string(c.estimator_features))},
                         {"method", c.method}});
    json j = {{"instance", std::string(to_string(s.instance))},
              {"N", s.rows},
              {"dim", s.dim},
              {"T", s.length},
              {"embedding_seed", s.embedding_seed},
              {"conditions", conds},
              {"write_instances", s.write_instances}};
    if (s.instance == InstanceKind::word_classification) {
        j["d_prime"] = s.hidden_dim;
        j["classes"] = s.classes;
        j["offset"] = s.offset;
    } else {
        j["shifts"] = {s.shifts.lo, s.shifts.hi};
    }
    if (s.instance == InstanceKind::predict_retrieve) j["lambda"] = s.lambda;
    return j;
}

TheorySpec parse_theory(const json& doc) {
    TheorySpec spec;
    spec.lemma1.mu_star = Vec::Zero(3);
    spec.lemma1.mu_alpha = Vec::Zero(3);
    spec.lemma1.mu_beta = Vec::Unit(3, 0);
    spec.lemma1.schedule = {10, 100, 1000, 10000};
    spec.exploratory_dims = {2, 3};
    if (jf::has(doc, "theorem1")) {
        const json& t = doc["theorem1"];
        jf::only_keys(t, {"max_length"}, "theorem1");
        if (jf::has(t, "max_length")) spec.max_length = jf::count(t["max_length"], "theorem1.max_length", 1);
    }
    if (jf::has(doc, "lemma1")) {
        const json& l = doc["lemma1"];
        const std::string p = "lemma1";
        jf::only_keys(l, {"mu_star", "mu_alpha", "mu_beta", "tau_x", "hyper", "schedule", "repetitions"}, p);
        if (jf::has(l, "mu_star")) spec.lemma1.mu_star = vec_from_json(l["mu_star"], "lemma1.mu_star");
        if (jf::has(l, "mu_alpha")) spec.lemma1.mu_alpha = vec_from_json(l["mu_alpha"], "lemma1.mu_alpha");
        if (jf::has(l, "mu_beta")) spec.lemma1.mu_beta = vec_from_json(l["mu_beta"], "lemma1.mu_beta");
        if (jf::has(l, "tau_x")) {
            spec.lemma1.tau_x = jf::number(l["tau_x"], "lemma1.tau_x");
            if (spec.lemma1.tau_x < 0.0) throw ValidationError("lemma1.tau_x", "must be non-negative");
        }
        if (jf::has(l, "hyper")) spec.lemma1.hyper = hyper_from_json(l["hyper"], "lemma1.hyper");
        if (jf::has(l, "schedule")) spec.lemma1.schedule = parse_lengths(l["schedule"], "lemma1.schedule", 0);
        if (jf::has(l, "repetitions")) spec.lemma1.repetitions = jf::count(l["repetitions"], "lemma1.repetitions", 1);
    }
    const Lemma1Spec& l = spec.lemma1;
    if (l.mu_alpha.size() != l.mu_star.size() || l.mu_beta.size() != l.mu_star.size() || l.mu_star.size() == 0)
        throw ValidationError("lemma1", "mu_star, mu_alpha and mu_beta must share one positive dimension");
    if ((l.mu_beta - l.mu_star).squaredNorm() < (l.mu_alpha - l.mu_star).squaredNorm())
        throw ValidationError("lemma1.mu_beta", "must be at least as far from mu_star as mu_alpha");
    if (jf::has(doc, "exploratory")) {
        const json& e = doc["exploratory"];
        jf::only_keys(e, {"dims", "trials"}, "exploratory");
        if (jf::has(e, "dims")) {
            spec.exploratory_dims.clear();
            const json& ds = jf::array(e["dims"], "exploratory.dims");
            for (std::size_t i = 0; i < ds.size(); ++i) {
                const std::string p = jf::index("exploratory.dims", i);
                const Eigen::Index d = parse_dim(ds[i], p);
                if (d < 2) throw ValidationError(p, "exploratory runs need d >= 2");
                spec.exploratory_dims.push_back(d);
            }
        }
        if (jf::has(e, "trials")) spec.exploratory_trials = jf::count(e["trials"], "exploratory.trials", 1);
    }
    if (jf::has(doc, "gradient")) {
        const json& g = doc["gradient"];
        jf::only_keys(g, {"draws", "dim", "hidden_dim", "T"}, "gradient");
        if (jf::has(g, "draws")) spec.gradient_draws = jf::count(g["draws"], "gradient.draws", 1);
        if (jf::has(g, "dim")) spec.gradient_dim = parse_dim(g["dim"], "gradient.dim");
        if (jf::has(g, "hidden_dim"))
            spec.gradient_hidden_dim = static_cast<Eigen::Index>(jf::count(g["hidden_dim"], "gradient.hidden_dim", 1));
        if (jf::has(g, "T")) spec.gradient_length = jf::count(g["T"], "gradient.T", 1);
    }
    return spec;
}

json theory_json(const TheorySpec& s) {
    return {{"theorem1", {{"max_length", s.max_length}}},
            {"lemma1",
             {{"mu_star", to_json(s.lemma1.mu_star)},
              {"mu_alpha", to_json(s.lemma1.mu_alpha)},
              {"mu_beta", to_json(s.lemma1.mu_beta)},
              {"tau_x", s.lemma1.tau_x},
              {"hyper", to_json(s.lemma1.hyper)},
              {"schedule", s.lemma1.schedule},
              {"repetitions", s.lemma1.repetitions}}},
            {"exploratory", {{"dims", s.exploratory_dims}, {"trials", s.exploratory_trials}}},
            {"gradient",
             {{"draws", s.gradient_draws},
              {"dim", s.gradient_dim},
              {"hidden_dim", s.gradient_hidden_dim},
              {"T", s.gradient_length}}}};
}

OracleSpec parse_oracle(const json& doc) {
    OracleSpec spec;
    if (jf::has(doc, "mc_samples")) {
        spec.mc_samples = jf::count(doc["mc_samples"], "mc_samples", kMinOracleSamples);
    }
    if (jf::has(doc, "max_dim")) spec.max_dim = parse_dim(doc["max_dim"], "max_dim");
    if (jf::has(doc, "max_components")) spec.max_components = jf::count(doc["max_components"], "max_components", 1);
    if (jf::has(doc, "max_length")) spec.max_length = jf::count(doc["max_length"], "max_length", 1);
    if (jf::has(doc, "quadrature_instances"))
        spec.quadrature_instances = jf::count(doc["quadrature_instances"], "quadrature_instances");
    if (jf::has(doc, "grid_points")) spec.grid_points = jf::count(doc["grid_points"], "grid_points", 256);
    return spec;
}

json oracle_json(const OracleSpec& s) {
    return {{"mc_samples", s.mc_samples},
            {"max_dim", s.max_dim},
            {"max_components", s.max_components},
            {"max_length", s.max_length},
            {"quadrature_instances", s.quadrature_instances},
            {"grid_points", s.grid_points}};
}

// ---------------------------------------------------------------------------
// Execution

ResultTable run_algoselect(const ExperimentConfig& cfg, const AlgoSelectSpec& spec, unsigned threads) {
    Downstream downstream{sample_task(spec.task.kind, spec.task.dim, spec.task.hidden_dim, spec.task.seed),
                          spec.input_mean, spec.input_std};
    std::vector<double> levels;
    SelectionOptions options;
    options.threads = threads;
    options.error_samples = spec.error_samples;
    for (const NoiseLevel& l : spec.noise_levels) {
        levels.push_back(l.value);
        options.level_labels.push_back(l.label);
    }
    SelectionReport report = selection_report(spec.prior, downstream, spec.length, cfg.trials, levels, cfg.seed, options);
    return std::move(report.table);
}

Predictor make_predictor(const PredictorSpec& p) {
    if (p.method == "posterior") {
        const MixturePrior prior = *p.prior;
        return [prior](const ContextSequence& ctx, std::uint64_t) { return posterior(prior, ctx).prediction; };
    }
    if (p.method == "ols_min_norm")
        return [](const ContextSequence& ctx, std::uint64_t) { return ols_min_norm(ctx).dot(ctx.query); };
    if (p.method == "ridge") {
        const double lambda = p.lambda;
        return [lambda](const ContextSequence& ctx, std::uint64_t) { return ridge_fit(ctx, lambda).dot(ctx.query); };
    }
    const FunctionKind kind = p.gd_kind;
    const GdOptions gd = p.gd;
    return [kind, gd](const ContextSequence& ctx, std::uint64_t seed) {
        try {
            return gd_fit(kind, ctx, gd, seed).predict(ctx.query);
        } catch (const DivergenceError&) {
            // Reported as a missing cell rather than aborting the whole grid.
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
}

ResultTable run_curves(const ExperimentConfig& cfg, const CurvesSpec& spec, unsigned threads) {
    const TaskSpec& t = spec.task;
    const std::optional<Eigen::Index> hidden =
        is_network(t.kind) ? std::optional<Eigen::Index>(t.hidden_dim) : std::nullopt;
    const TaskSampler sampler =
        t.resample ? resampled_task(t.kind, t.dim, hidden) : fixed_task(sample_task(t.kind, t.dim, hidden, t.seed));

    std::vector<std::string> names;
    for (const PredictorSpec& p : spec.predictors) names.push_back(p.name);
    std::vector<std::string> lengths;
    for (std::size_t T : spec.lengths) lengths.push_back(std::to_string(T));
    ResultTable table("squared_error", {{"predictor", names},
                                        {"context_length", lengths},
                                        {"statistic", {"mean_squared_error", "std_error"}}});
    CurveOptions options;
    options.threads = threads;
    // Every predictor sees the same tasks and contexts.
    const std::uint64_t seed = derive_seed(cfg.seed, kCurveStream);
    for (std::size_t p = 0; p < spec.predictors.size(); ++p) {
        const ResultTable curve =
            error_curve(make_predictor(spec.predictors[p]), sampler, spec.lengths, cfg.trials, seed, options);
        for (std::size_t li = 0; li < spec.lengths.size(); ++li)
            for (std::size_t s = 0; s < 2; ++s)
                table.set({p, li, s}, curve.get({li, s}).value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    return table;
}

struct RetrievalTrial {
    bool correct = false;
    bool present = false;
    bool matched = false;
    bool conflicting = false;
    double chance = 0.0;
};

ResultTable run_retrieval(const ExperimentConfig& cfg, const RetrievalSpec& spec, unsigned threads,
                          const EmbeddingStore& store, std::vector<json>& records) {
    const std::vector<std::string> metrics{"accuracy", "label_present_rate", "chance_rate", "no_match_rate",
                                           "conflict_rate"};
    std::vector<std::string> names;
    for (const RetrievalCondition& c : spec.conditions) names.push_back(c.name);
    ResultTable table("retrieval", {{"condition", names}, {"metric", metrics}});

    for (std::size_t ci = 0; ci < spec.conditions.size(); ++ci) {
        const RetrievalCondition& c = spec.conditions[ci];
        std::vector<RetrievalTrial> trials(cfg.trials);
        std::vector<json> instance_records(spec.write_instances ? cfg.trials : 0);
        parallel_for(cfg.trials, threads, [&](std::size_t t) {
            // Instances depend on the trial only, so conditions that share a
            // generator see the same prompts.
            const std::uint64_t seed = derive_seed(cfg.seed, kRetrievalStream, t);
            RetrievalInstance inst;
            switch (spec.instance) {
                case InstanceKind::retrieval:
                    inst = make_retrieval_instance(store, spec.rows, spec.dim, spec.shifts, spec.length,
                                                   spec.embedding_seed, seed);
                    break;
                case InstanceKind::predict_retrieve:
                    inst = make_predict_retrieve_instance(store, spec.rows, spec.dim, spec.shifts, spec.length,
                                                          c.function_kind, spec.embedding_seed, seed);
                    break;
                case InstanceKind::word_classification:
                    inst = make_word_classification_instance(store, spec.rows, spec.dim, spec.hidden_dim,
                                                             spec.classes, spec.offset, spec.length,
                                                             spec.embedding_seed, seed);
                    break;
            }
            RetrievalOutcome out;
            if (c.method == "oracle") {
                out = retrieval_oracle(inst);
            } else if (c.method == "known_w") {
                out = bucket_retrieve(inst, inst.latent_w, c.function_kind);
            } else {
                out = estimate_then_retrieve(inst, recovered_context(inst, c.estimator_features), spec.lambda);
            }
            RetrievalTrial& r = trials[t];
            r.matched = out.matched();
            r.conflicting = out.conflicting;
            r.correct = out.matched() && *out.label_index == inst.target_index;
            const auto hits = std::count(inst.label_index.begin(), inst.label_index.end(), inst.target_index);
            r.present = hits > 0;
            r.chance = inst.length() ? static_cast<double>(hits) / static_cast<double>(inst.length()) : 0.0;
            if (spec.write_instances) {
                json rec = to_json(inst);
                rec["condition"] = c.name;
                instance_records[t] = std::move(rec);
            }
        });
        double acc = 0, present = 0, chance = 0, nomatch = 0, conflict = 0;
        for (const RetrievalTrial& r : trials) {
            acc += r.correct;
            present += r.present;
            chance += r.chance;
            nomatch += !r.matched;
            conflict += r.conflicting;
        }
        const double n = static_cast<double>(cfg.trials);
        const double values[] = {acc / n, present / n, chance / n, nomatch / n, conflict / n};
        for (std::size_t m = 0; m < metrics.size(); ++m) table.set({ci, m}, values[m]);
        for (json& rec : instance_records) records.push_back(std::move(rec));
    }
    return table;
}

ResultTable run_theory(const ExperimentConfig& cfg, const TheorySpec& spec, unsigned threads,
                       std::size_t& violations) {
    std::vector<std::pair<std::string, double>> rows;

    Theorem1Options t1;
    t1.max_length = spec.max_length;
    t1.threads = threads;
    const Theorem1Report r1 = theorem1_property_trial(derive_seed(cfg.seed, kTheoremStream), cfg.trials, t1);
    violations = r1.violations;
    rows.emplace_back("theorem1.requested", static_cast<double>(r1.requested));
    rows.emplace_back("theorem1.filtered", static_cast<double>(r1.filtered));
    rows.emplace_back("theorem1.attempts", static_cast<double>(r1.attempts));
    rows.emplace_back("theorem1.violations", static_cast<double>(r1.violations));
    rows.emplace_back("theorem1.min_psi_w", r1.min_psi_w);

    const Lemma1Spec& l = spec.lemma1;
    const double limit = lemma1_analytic_limit(l.mu_star, l.mu_alpha, l.mu_beta, l.hyper);
    std::vector<std::vector<LimitPoint>> reps(l.repetitions);
    parallel_for(l.repetitions, threads, [&](std::size_t r) {
        reps[r] = lemma1_limit_check(l.mu_star, l.tau_x, l.mu_alpha, l.mu_beta, l.hyper, l.schedule,
                                     derive_seed(cfg.seed, kLemmaStream, r));
    });
    rows.emplace_back("lemma1.analytic_limit", limit);
    bool monotone = true;
    double previous_gap = std::numeric_limits<double>::infinity();
    double final_relative = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < l.schedule.size(); ++k) {
        double mean = 0.0;
        double gap = 0.0;
        for (const auto& rep : reps) {
            mean += rep[k].psi_mu_pair;
            gap += std::abs(rep[k].psi_mu_pair - limit);
        }
        mean /= static_cast<double>(reps.size());
        gap /= static_cast<double>(reps.size());
        const std::string T = std::to_string(l.schedule[k]);
        rows.emplace_back("lemma1.T" + T + ".mean_psi_mu", mean);
        rows.emplace_back("lemma1.T" + T + ".mean_abs_gap", gap);
        monotone = monotone && gap <= previous_gap;
        previous_gap = gap;
        final_relative = limit != 0.0 ? std::abs(mean - limit) / std::abs(limit) : std::abs(mean);
    }
    rows.emplace_back("lemma1.final_relative_error", final_relative);
    rows.emplace_back("lemma1.monotone", monotone ? 1.0 : 0.0);

    for (Eigen::Index d : spec.exploratory_dims) {
        const ExploratoryReport e =
            theorem1_exploratory(derive_seed(cfg.seed, kExploratoryStream, static_cast<std::uint64_t>(d)), d,
                                 spec.exploratory_trials, threads);
        const std::string p = "exploratory.d" + std::to_string(d);
        rows.emplace_back(p + ".risk_favored", static_cast<double>(e.risk_favored));
        rows.emplace_back(p + ".sign_violations", static_cast<double>(e.sign_violations));
        rows.emplace_back(p + ".violation_rate", e.violation_rate);
    }

    const FunctionKind kinds[] = {FunctionKind::linear, FunctionKind::quadratic, FunctionKind::relu_nn,
                                  FunctionKind::sqrt_linear, FunctionKind::cubic,
                                  FunctionKind::linear_plus_quadratic, FunctionKind::sigmoid_nn};
    std::vector<GradientCheck> checks(std::size(kinds));
    parallel_for(checks.size(), threads, [&](std::size_t k) {
        checks[k] = gradient_check(kinds[k], spec.gradient_dim, spec.gradient_hidden_dim, spec.gradient_length,
                                   spec.gradient_draws, tol::kFiniteDifferenceStep,
                                   derive_seed(cfg.seed, kGradientStream, k));
    });
    for (const GradientCheck& g : checks)
        rows.emplace_back("gradient." + std::string(to_string(g.kind)) + ".max_relative_error", g.max_relative_error);

    std::vector<std::string> labels;
    for (const auto& r : rows) labels.push_back(r.first);
    ResultTable table("theory_check", {{"quantity", labels}});
    for (std::size_t i = 0; i < rows.size(); ++i) table.set({i}, rows[i].second);
    return table;
}

struct OracleInstance {
    MixturePrior prior;
    ContextSequence context;
};

double log_uniform(Rng& rng, double lo, double hi) {
    return std::exp(std::log(lo) + uniform01(rng) * (std::log(hi) - std::log(lo)));
}

OracleInstance random_oracle_instance(const OracleSpec& spec, Eigen::Index forced_dim, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    const auto d = forced_dim > 0 ? forced_dim : static_cast<Eigen::Index>(pick(1, static_cast<std::size_t>(spec.max_dim)));
    const std::size_t M = pick(1, spec.max_components);
    const std::size_t T = pick(1, spec.max_length);
    std::vector<Component> comps(M);
    double total = 0.0;
    for (Component& c : comps) {
        c.pi = 0.2 + uniform01(rng);
        total += c.pi;
        c.mu = normal_vector(rng, d);
        c.w = normal_vector(rng, d);
    }
    for (Component& c : comps) c.pi /= total;
    const Hyper hyper(log_uniform(rng, 0.7, 1.4), log_uniform(rng, 0.7, 1.4), log_uniform(rng, 0.7, 1.4),
                      log_uniform(rng, 0.7, 1.4));
    MixturePrior prior(std::move(comps), hyper);
    ContextSequence ctx = sample_pretrain_sequence(prior, T, derive_seed(seed, 1)).context;
    return {std::move(prior), std::move(ctx)};
}

ResultTable run_oracle(const ExperimentConfig& cfg, const OracleSpec& spec, unsigned threads) {
    const std::vector<std::string> fields{"closed_form", "reference", "std_error", "effective_sample_size",
                                          "abs_difference", "z_score"};
    const std::size_t n_mc = cfg.trials;
    const std::size_t n_q = spec.quadrature_instances;
    std::vector<std::string> labels;
    auto label = [](const char* prefix, std::size_t i) {
        std::ostringstream s;
        s << prefix << std::setw(3) << std::setfill('0') << i + 1;
        return s.str();
    };
    for (std::size_t i = 0; i < n_mc; ++i) labels.push_back(label("mc", i));
    for (std::size_t i = 0; i < n_q; ++i) labels.push_back(label("quad", i));
    ResultTable table("oracle_check", {{"instance", labels}, {"field", fields}});

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::array<double, 6>> cells(n_mc + n_q);
    parallel_for(n_mc + n_q, threads, [&](std::size_t k) {
        const bool mc = k < n_mc;
        const std::size_t i = mc ? k : k - n_mc;
        const std::uint64_t seed = derive_seed(cfg.seed, mc ? kOracleStream : kQuadratureStream, i);
        const OracleInstance inst = random_oracle_instance(spec, mc ? 0 : 1, seed);
        const double cf = posterior(inst.prior, inst.context).prediction;
        if (mc) {
            try {
                const OracleEstimate est = mc_bayes_oracle(inst.prior, inst.context, spec.mc_samples, derive_seed(seed, 2));
                const double diff = std::abs(cf - est.mean);
                cells[k] = {cf, est.mean, est.std_error, est.effective_sample_size, diff,
                            est.std_error > 0.0 ? diff / est.std_error : nan};
            } catch (const LowConfidenceError& e) {
                cells[k] = {cf, nan, nan, e.effective_sample_size(), nan, nan};
            }
        } else {
            const double q = quadrature_oracle_1d(inst.prior, inst.context, spec.grid_points);
            cells[k] = {cf, q, nan, nan, std::abs(cf - q), nan};
        }
    });
    for (std::size_t k = 0; k < cells.size(); ++k)
        for (std::size_t f = 0; f < fields.size(); ++f) table.set({k, f}, cells[k][f]);
    return table;
}

// ---------------------------------------------------------------------------
// Output

std::string plot_for(const ExperimentConfig& cfg, const ResultTable& table) {
    ChartSpec chart;
    std::vector<Series> series;
    const auto& axes = table.axes();
    auto value = [&](const std::vector<std::string>& labels) {
        return table.at(labels).value_or(std::numeric_limits<double>::quiet_NaN());
    };
    switch (cfg.kind) {
        case ExperimentKind::algoselect_error:
        case ExperimentKind::algoselect_distance: {
            chart = {"Posterior weight per component", "noise level", "mean posterior weight", axes[0].labels, false};
            for (const std::string& comp : axes[1].labels) {
                if (comp == "all") continue;
                Series s{"component " + comp, {}};
                for (const std::string& level : axes[0].labels) s.values.push_back(value({level, comp, "tilde_pi"}));
                series.push_back(std::move(s));
            }
            break;
        }
        case ExperimentKind::curves:
        case ExperimentKind::double_descent: {
            chart = {"Test squared error", "context length", "mean squared error", axes[1].labels, true};
            for (const std::string& p : axes[0].labels) {
                Series s{p, {}};
                for (const std::string& T : axes[1].labels) s.values.push_back(value({p, T, "mean_squared_error"}));
                series.push_back(std::move(s));
            }
            break;
        }
        case ExperimentKind::retrieval_eval: {
            chart = {"Retrieval accuracy", "condition", "rate", axes[0].labels, false};
            for (const char* m : {"accuracy", "label_present_rate", "chance_rate"}) {
                Series s{m, {}};
                for (const std::string& c : axes[0].labels) s.values.push_back(value({c, m}));
                series.push_back(std::move(s));
            }
            break;
        }
        case ExperimentKind::theory_check: {
            const auto& spec = std::get<TheorySpec>(cfg.body);
            std::vector<std::string> ticks;
            Series mean{"mean psi_mu", {}};
            Series limit{"analytic limit", {}};
            for (std::size_t T : spec.lemma1.schedule) {
                ticks.push_back(std::to_string(T));
                mean.values.push_back(value({"lemma1.T" + std::to_string(T) + ".mean_psi_mu"}));
                limit.values.push_back(value({"lemma1.analytic_limit"}));
            }
            chart = {"Input-mean log-ratio against its limit", "context length", "psi_mu(alpha, beta)", ticks, false};
            series = {mean, limit};
            break;
        }
        case ExperimentKind::oracle_check: {
            std::vector<std::string> ticks;
            Series z{"|closed form - oracle| / std error", {}};
            for (const std::string& inst : axes[0].labels) {
                if (inst.rfind("mc", 0) != 0) continue;
                ticks.push_back(inst.substr(2));
                z.values.push_back(value({inst, "z_score"}));
            }
            chart = {"Closed form against the importance-sampling oracle", "instance", "z score", ticks, false};
            series = {z};
            break;
        }
    }
    return line_chart_svg(chart, series);
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << content;
    out.close();
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

std::string_view to_string(ExperimentKind kind) { return info(kind).name; }

ExperimentConfig parse_config(const json& doc) {
    jf::object(doc, "");
    ExperimentConfig cfg;
    const std::string name = jf::string(jf::field(doc, "experiment", ""), "experiment");
    bool known = false;
    for (const KindInfo& k : kKinds)
        if (name == k.name) {
            cfg.kind = k.kind;
            known = true;
        }
    if (!known) throw ValidationError("experiment", "unknown experiment '" + name + "'");

    switch (cfg.kind) {
        case ExperimentKind::algoselect_error:
        case ExperimentKind::algoselect_distance:
            jf::only_keys(doc, {"experiment", "seed", "trials", "output_dir", "metadata", "description", "prior",
                                "downstream", "T", "noise_levels", "error_samples"}, "");
            break;
        case ExperimentKind::curves:
        case ExperimentKind::double_descent:
            jf::only_keys(doc, {"experiment", "seed", "trials", "output_dir", "metadata", "description", "task",
                                "T_grid", "predictors"}, "");
            break;
        case ExperimentKind::retrieval_eval:
            jf::only_keys(doc, {"experiment", "seed", "trials", "output_dir", "metadata", "description", "instance",
                                "N", "dim", "shifts", "T", "embedding_seed", "lambda", "d_prime", "classes",
                                "offset", "conditions", "write_instances"}, "");
            break;
        case ExperimentKind::theory_check:
            jf::only_keys(doc, {"experiment", "seed", "trials", "output_dir", "metadata", "description", "theorem1",
                                "lemma1", "exploratory", "gradient"}, "");
            break;
        case ExperimentKind::oracle_check:
            jf::only_keys(doc, {"experiment", "seed", "trials", "output_dir", "metadata", "description",
                                "mc_samples", "max_dim", "max_components", "max_length", "quadrature_instances",
                                "grid_points"}, "");
            break;
    }

    if (jf::has(doc, "seed")) cfg.seed = jf::unsigned_integer(doc["seed"], "seed");
    cfg.trials = jf::has(doc, "trials") ? jf::count(doc["trials"], "trials", 1) : info(cfg.kind).default_trials;
    if (jf::has(doc, "output_dir")) {
        cfg.output_dir = jf::string(doc["output_dir"], "output_dir");
        if (cfg.output_dir->empty()) throw ValidationError("output_dir", "must not be empty");
    }
    if (jf::has(doc, "description")) jf::string(doc["description"], "description");
    if (jf::has(doc, "metadata")) jf::object(doc["metadata"], "metadata");

    switch (cfg.kind) {
        case ExperimentKind::algoselect_error:
        case ExperimentKind::algoselect_distance:
            cfg.body = parse_algoselect(doc, cfg.warnings);
            break;
        case ExperimentKind::curves:
        case ExperimentKind::double_descent:
            cfg.body = parse_curves(doc, cfg.kind, cfg.warnings);
            break;
        case ExperimentKind::retrieval_eval:
            cfg.body = parse_retrieval(doc);
            break;
        case ExperimentKind::theory_check:
            cfg.body = parse_theory(doc);
            break;
        case ExperimentKind::oracle_check:
            cfg.body = parse_oracle(doc);
            break;
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw ValidationError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc);
}

json resolved_json(const ExperimentConfig& cfg) {
    json j = {{"experiment", std::string(to_string(cfg.kind))}, {"seed", cfg.seed}, {"trials", cfg.trials}};
    if (cfg.output_dir) j["output_dir"] = *cfg.output_dir;
    std::visit(
        [&](const auto& spec) {
            using S = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<S, AlgoSelectSpec>) {
                j["prior"] = prior_json(spec.prior, spec.strict_requested);
                j["downstream"] = {{"task", task_json(spec.task)},
                                   {"input_mean", to_json(spec.input_mean)},
                                   {"input_std", spec.input_std}};
                j["T"] = spec.length;
                json levels = json::array();
                for (const NoiseLevel& l : spec.noise_levels) levels.push_back(l.label);
                j["noise_levels"] = levels;
                j["error_samples"] = spec.error_samples;
            } else if constexpr (std::is_same_v<S, CurvesSpec>) {
                j["task"] = task_json(spec.task);
                j["T_grid"] = spec.lengths;
                json ps = json::array();
                for (const PredictorSpec& p : spec.predictors) ps.push_back(predictor_json(p));
                j["predictors"] = ps;
            } else if constexpr (std::is_same_v<S, RetrievalSpec>) {
                j.update(retrieval_json(spec));
            } else if constexpr (std::is_same_v<S, TheorySpec>) {
                j.update(theory_json(spec));
            } else {
                j.update(oracle_json(spec));
            }
        },
        cfg.body);
    return j;
}

std::string content_hash(const std::string& content) {
    const std::string framed = "blob " + std::to_string(content.size()) + '\0' + content;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(framed.data(), framed.size(), digest, &len, EVP_sha1(), nullptr) != 1)
        throw Error("SHA-1 digest failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

ExperimentResult execute(const ExperimentConfig& cfg, unsigned threads, const fs::path& cache_dir) {
    if (threads == 0) throw InvalidArgument("thread count must be positive");
    ExperimentResult result;
    std::visit(
        [&](const auto& spec) {
            using S = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<S, AlgoSelectSpec>) {
                result.table = run_algoselect(cfg, spec, threads);
            } else if constexpr (std::is_same_v<S, CurvesSpec>) {
                result.table = run_curves(cfg, spec, threads);
            } else if constexpr (std::is_same_v<S, RetrievalSpec>) {
                const EmbeddingStore store = EmbeddingStore::from_environment(cache_dir);
                result.table = run_retrieval(cfg, spec, threads, store, result.instances);
            } else if constexpr (std::is_same_v<S, TheorySpec>) {
                result.table = run_theory(cfg, spec, threads, result.property_violations);
            } else {
                result.table = run_oracle(cfg, spec, threads);
            }
        },
        cfg.body);
    return result;
}

fs::path default_output_dir(const ExperimentConfig& cfg) {
    if (cfg.output_dir) return fs::path(*cfg.output_dir);
    return fs::path("results") / std::string(to_string(cfg.kind));
}

RunOutcome run(const ExperimentConfig& cfg, const RunOptions& options) {
    RunOutcome outcome;
    outcome.output_dir = options.output_dir.empty() ? default_output_dir(cfg) : options.output_dir;
    const fs::path& dir = outcome.output_dir;

    outcome.result = execute(cfg, std::max(1u, options.threads), dir / "embeddings");

    const json resolved = resolved_json(cfg);
    json echo = resolved;
    json meta = {{"input_hash", content_hash(resolved.dump())},
                 {"version", ICL_LAB_VERSION},
                 {"seed_derivation", "splitmix64 counter split of the master seed per trial"},
                 {"warnings", cfg.warnings}};
    if (is_algoselect(cfg.kind))
        meta["noise_realization"] = "sigma_x = sigma_y = 1, sigma_mu^2 = sigma_w^2 = noise level";
    echo["metadata"] = meta;
    outcome.result.table.metadata() = meta;

    std::vector<std::pair<std::string, std::string>> files{{"results.csv", outcome.result.table.to_csv()},
                                                           {"config.echo.json", echo.dump(2) + "\n"}};
    if (options.plot) files.emplace_back("plot.svg", plot_for(cfg, outcome.result.table));
    if (!outcome.result.instances.empty()) {
        std::string lines;
        for (const json& rec : outcome.result.instances) lines += rec.dump() + "\n";
        files.emplace_back("instances.jsonl", lines);
    }

    fs::create_directories(dir);
    std::vector<fs::path> temps;
    try {
        for (const auto& [name, content] : files) {
            temps.push_back(dir / ("." + name + ".tmp"));
            write_file(temps.back(), content);
        }
    } catch (...) {
        std::error_code ec;
        for (const fs::path& t : temps) fs::remove(t, ec);
        throw;
    }
    for (std::size_t i = 0; i < files.size(); ++i) fs::rename(temps[i], dir / files[i].first);
    return outcome;
}

}  // namespace icl
