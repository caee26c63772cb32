#include "icl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "icl/errors.hpp"
#include "icl/random.hpp"
#include "icl/tolerances.hpp"

namespace icl {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double evaluate(FunctionKind kind, const TaskParams& p, const Vec& x) {
    switch (kind) {
        case FunctionKind::linear:
        case FunctionKind::quadratic:
        case FunctionKind::cubic:
        case FunctionKind::sqrt_linear:
            return p.w.dot(feature_map(kind, x));
        case FunctionKind::linear_plus_quadratic:
            return p.w1.dot(x.array().square().matrix()) + p.w.dot(x);
        case FunctionKind::relu_nn:
            return p.w1.dot((p.w2 * x).cwiseMax(0.0));
        case FunctionKind::sigmoid_nn:
            return p.w1.dot((p.w2 * x).unaryExpr(&sigmoid));
    }
    return 0.0;
}

TaskParams zeros_like(const TaskParams& p) {
    TaskParams z;
    z.w = Vec::Zero(p.w.size());
    z.w1 = Vec::Zero(p.w1.size());
    z.w2 = Mat::Zero(p.w2.rows(), p.w2.cols());
    return z;
}

void axpy(double a, const TaskParams& x, TaskParams& y) {
    if (y.w.size()) y.w += a * x.w;
    if (y.w1.size()) y.w1 += a * x.w1;
    if (y.w2.size()) y.w2 += a * x.w2;
}

bool finite(const TaskParams& p) { return p.w.allFinite() && p.w1.allFinite() && p.w2.allFinite(); }

std::optional<std::size_t> most_recent(const RetrievalInstance& inst,
                                       const std::function<bool(std::size_t)>& match) {
    for (std::size_t i = inst.length(); i-- > 0;)
        if (match(i)) return i;
    return std::nullopt;
}

RetrievalOutcome outcome_for(const RetrievalInstance& inst,
                             const std::function<bool(std::size_t)>& match) {
    RetrievalOutcome out;
    out.position = most_recent(inst, match);
    if (!out.position) return out;
    out.label_index = inst.label_index[*out.position];
    for (std::size_t i = 0; i < inst.length(); ++i)
        if (match(i) && inst.label_index[i] != *out.label_index) out.conflicting = true;
    return out;
}

}  // namespace

double FittedModel::predict(const Vec& x) const {
    if (x.size() != dim) throw DimensionMismatch("model input has wrong dimension");
    return evaluate(kind, params, x);
}

double hypothesis_objective(FunctionKind kind, const TaskParams& params,
                            const ContextSequence& context) {
    double total = 0.0;
    for (std::size_t i = 0; i < context.length(); ++i) {
        const double r = evaluate(kind, params, context.xs[i]) - context.ys[i];
        total += 0.5 * r * r;
    }
    return total;
}

double mean_squared_error(FunctionKind kind, const TaskParams& params,
                          const ContextSequence& context) {
    if (context.length() == 0) return 0.0;
    return 2.0 * hypothesis_objective(kind, params, context) / static_cast<double>(context.length());
}

TaskParams hypothesis_gradient(FunctionKind kind, const TaskParams& params,
                               const ContextSequence& context) {
    TaskParams g = zeros_like(params);
    for (std::size_t i = 0; i < context.length(); ++i) {
        const Vec& x = context.xs[i];
        const double r = evaluate(kind, params, x) - context.ys[i];
        switch (kind) {
            case FunctionKind::linear:
            case FunctionKind::quadratic:
            case FunctionKind::cubic:
            case FunctionKind::sqrt_linear:
                g.w.noalias() += r * feature_map(kind, x);
                break;
            case FunctionKind::linear_plus_quadratic:
                g.w1.noalias() += r * x.array().square().matrix();
                g.w.noalias() += r * x;
                break;
            case FunctionKind::relu_nn: {
                const Vec pre = params.w2 * x;
                const Vec act = pre.cwiseMax(0.0);
                const Vec gate = pre.unaryExpr([](double t) { return t > 0.0 ? 1.0 : 0.0; });
                g.w1.noalias() += r * act;
                g.w2.noalias() += (r * params.w1.cwiseProduct(gate)) * x.transpose();
                break;
            }
            case FunctionKind::sigmoid_nn: {
                const Vec act = (params.w2 * x).unaryExpr(&sigmoid);
                const Vec slope = act.array() * (1.0 - act.array());
                g.w1.noalias() += r * act;
                g.w2.noalias() += (r * params.w1.cwiseProduct(slope)) * x.transpose();
                break;
            }
        }
    }
    return g;
}

Vec flatten(FunctionKind kind, const TaskParams& p) {
    (void)kind;
    Vec flat(p.w.size() + p.w1.size() + p.w2.size());
    flat << p.w, p.w1, Eigen::Map<const Vec>(p.w2.data(), p.w2.size());
    return flat;
}

TaskParams unflatten(FunctionKind kind, const Vec& flat, Eigen::Index dim, Eigen::Index hidden_dim) {
    TaskParams p;
    Eigen::Index at = 0;
    auto take = [&](Eigen::Index n) {
        if (at + n > flat.size()) throw DimensionMismatch("flat parameter vector too short");
        Vec v = flat.segment(at, n);
        at += n;
        return v;
    };
    if (is_network(kind)) {
        p.w = Vec();
        p.w1 = take(hidden_dim);
        const Vec w2 = take(hidden_dim * dim);
        p.w2 = Eigen::Map<const Mat>(w2.data(), hidden_dim, dim);
    } else if (kind == FunctionKind::linear_plus_quadratic) {
        p.w = take(dim);
        p.w1 = take(dim);
    } else {
        p.w = take(dim);
    }
    if (at != flat.size()) throw DimensionMismatch("flat parameter vector too long");
    return p;
}

TaskParams initial_params(FunctionKind kind, Eigen::Index dim, Eigen::Index hidden_dim,
                          std::uint64_t seed) {
    Rng rng = make_rng(seed);
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(dim));
    TaskParams p;
    if (is_network(kind)) {
        if (hidden_dim < 1) throw InvalidArgument("network kinds need a positive hidden width");
        p.w1 = normal_vector(rng, hidden_dim, 0.0, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
        p.w2 = normal_matrix(rng, hidden_dim, dim, in_scale);
    } else if (kind == FunctionKind::linear_plus_quadratic) {
        p.w1 = normal_vector(rng, dim, 0.0, in_scale);
        p.w = normal_vector(rng, dim, 0.0, in_scale);
    } else {
        p.w = normal_vector(rng, dim, 0.0, in_scale);
    }
    return p;
}

GradientCheck gradient_check(FunctionKind kind, Eigen::Index dim, Eigen::Index hidden_dim,
                             std::size_t length, std::size_t draws, double h, std::uint64_t seed) {
    if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
    GradientCheck out;
    out.kind = kind;
    out.draws = draws;
    for (std::size_t k = 0; k < draws; ++k) {
        Rng rng = make_rng(derive_seed(seed, k));
        // Unit-scale parameters rather than the 1/sqrt(fan_in) initialization, so
        // every nonlinearity is exercised away from the origin.
        const Vec theta0 = flatten(kind, initial_params(kind, dim, hidden_dim, derive_seed(seed, k, 1))) *
                           std::sqrt(static_cast<double>(dim));
        ContextSequence ctx;
        for (std::size_t i = 0; i < length; ++i) {
            ctx.xs.push_back(normal_vector(rng, dim));
            ctx.ys.push_back(standard_normal(rng));
        }
        ctx.query = normal_vector(rng, dim);

        const Vec analytic = flatten(kind, hypothesis_gradient(kind, unflatten(kind, theta0, dim, hidden_dim), ctx));
        Vec numeric(theta0.size());
        for (Eigen::Index i = 0; i < theta0.size(); ++i) {
            Vec plus = theta0;
            Vec minus = theta0;
            plus[i] += h;
            minus[i] -= h;
            numeric[i] = (hypothesis_objective(kind, unflatten(kind, plus, dim, hidden_dim), ctx) -
                          hypothesis_objective(kind, unflatten(kind, minus, dim, hidden_dim), ctx)) /
                         (2.0 * h);
        }
        const double scale = std::max({analytic.norm(), numeric.norm(), 1.0});
        out.max_relative_error = std::max(out.max_relative_error, (analytic - numeric).norm() / scale);
    }
    return out;
}

FittedModel gd_fit(FunctionKind kind, const ContextSequence& context, const GdOptions& options,
                   std::uint64_t seed) {
    if (context.length() == 0) throw InvalidArgument("gd_fit needs at least one context pair");
    context.validate(context.dim());
    FittedModel model;
    model.kind = kind;
    model.dim = context.dim();
    model.params = initial_params(kind, model.dim, options.hidden_dim, seed);

    const std::size_t every = std::max<std::size_t>(1, options.log_every);
    for (std::size_t step = 0; step < options.steps; ++step) {
        if (step % every == 0)
            model.training_log.emplace_back(step, mean_squared_error(kind, model.params, context));
        axpy(-options.learning_rate, hypothesis_gradient(kind, model.params, context), model.params);
        const double loss = mean_squared_error(kind, model.params, context);
        if (!finite(model.params) || !std::isfinite(loss) || loss > tol::kDivergenceLoss) {
            std::ostringstream msg;
            msg << "gradient descent on " << to_string(kind) << " diverged at step " << step + 1
                << " (mse " << loss << ", lr " << options.learning_rate << ", T "
                << context.length() << ")";
            throw DivergenceError(msg.str());
        }
    }
    model.final_loss = mean_squared_error(kind, model.params, context);
    model.training_log.emplace_back(options.steps, model.final_loss);
    return model;
}

Vec ols_min_norm(const Mat& design, const Vec& targets) {
    if (design.rows() != targets.size()) throw DimensionMismatch("design and targets disagree");
    if (design.rows() == 0) throw InvalidArgument("least squares needs at least one row");
    Eigen::JacobiSVD<Mat> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(tol::kPseudoInverseCutoff);
    return svd.solve(targets);
}

Vec ols_min_norm(const ContextSequence& context) {
    context.validate(context.dim());
    return ols_min_norm(context.design(), context.labels());
}

Vec ridge_fit(const Mat& design, const Vec& targets, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("ridge lambda must be positive");
    if (design.rows() != targets.size()) throw DimensionMismatch("design and targets disagree");
    if (design.rows() == 0) throw InvalidArgument("ridge needs at least one row");
    Mat gram = design.transpose() * design;
    gram.diagonal().array() += lambda;
    Eigen::LLT<Mat> llt(gram);
    if (llt.info() != Eigen::Success) throw Error("ridge normal equations are not positive definite");
    return llt.solve(design.transpose() * targets);
}

Vec ridge_fit(const ContextSequence& context, double lambda) {
    context.validate(context.dim());
    return ridge_fit(context.design(), context.labels(), lambda);
}

RetrievalOutcome retrieval_oracle(const RetrievalInstance& instance) {
    if (!instance.token_indices.empty() && instance.query_token >= 0) {
        return outcome_for(instance, [&](std::size_t i) {
            return instance.token_indices[i] == instance.query_token;
        });
    }
    return outcome_for(instance, [&](std::size_t i) { return instance.pairs_x[i] == instance.query; });
}

ContextSequence recovered_context(const RetrievalInstance& instance, FunctionKind features) {
    ContextSequence ctx;
    for (std::size_t i = 0; i < instance.length(); ++i) {
        const double bucket = static_cast<double>(instance.label_index[i] - instance.shift);
        ctx.xs.push_back(feature_map(features, instance.pairs_x[i]));
        ctx.ys.push_back((bucket + 0.5) / kBucketScale);
    }
    ctx.query = feature_map(features, instance.query);
    return ctx;
}

RetrievalOutcome estimate_then_retrieve(const RetrievalInstance& instance,
                                        const ContextSequence& context, double lambda) {
    if (context.length() != instance.length())
        throw InvalidArgument("regression view does not match the instance length");
    const Vec w_hat = ridge_fit(context, lambda);
    const auto bucket =
        static_cast<std::int64_t>(std::floor(kBucketScale * w_hat.dot(context.query)));
    return outcome_for(instance, [&](std::size_t i) {
        return instance.label_index[i] - instance.shift == bucket;
    });
}

RetrievalOutcome bucket_retrieve(const RetrievalInstance& instance, const Vec& w,
                                 FunctionKind features) {
    const std::int64_t bucket = bucket_of(w, instance.query, features);
    return outcome_for(instance, [&](std::size_t i) {
        return instance.label_index[i] - instance.shift == bucket;
    });
}

}  // namespace icl
