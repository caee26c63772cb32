#include "icl/mixprior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "icl/errors.hpp"
#include "icl/random.hpp"
#include "icl/tolerances.hpp"

namespace icl {

namespace {

void require_positive(double value, const char* name) {
    if (!std::isfinite(value) || value <= 0.0)
        throw InvalidArgument(std::string("hyper.") + name + " must be positive and finite");
}

bool all_finite(const Vec& v) { return v.allFinite(); }

// Pair order sorted lexicographically on (x, y). Every sum over the context
// runs in this order so permuting the examples cannot change a single bit.
std::vector<std::size_t> canonical_order(const ContextSequence& ctx) {
    std::vector<std::size_t> order(ctx.length());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Vec& xa = ctx.xs[a];
        const Vec& xb = ctx.xs[b];
        for (Eigen::Index k = 0; k < xa.size(); ++k) {
            if (xa[k] < xb[k]) return true;
            if (xb[k] < xa[k]) return false;
        }
        return ctx.ys[a] < ctx.ys[b];
    });
    return order;
}

struct ContextStats {
    Mat xtx;
    Vec xty;
};

ContextStats context_stats(const ContextSequence& ctx) {
    const Eigen::Index d = ctx.dim();
    ContextStats s{Mat::Zero(d, d), Vec::Zero(d)};
    for (std::size_t i : canonical_order(ctx)) {
        s.xtx.noalias() += ctx.xs[i] * ctx.xs[i].transpose();
        s.xty.noalias() += ctx.ys[i] * ctx.xs[i];
    }
    return s;
}

void check_component(const Component& c, const ContextSequence& ctx) {
    ctx.validate(ctx.dim());
    if (c.mu.size() != ctx.dim() || c.w.size() != ctx.dim())
        throw DimensionMismatch("component dimension does not match context dimension");
}

double squared_distance_sum(const Vec& center, const ContextSequence& ctx) {
    double total = 0.0;
    for (std::size_t i : canonical_order(ctx)) total += (center - ctx.xs[i]).squaredNorm();
    return total + (center - ctx.query).squaredNorm();
}

double psi_mu_from_sum(double distance_sum, std::size_t length, const Hyper& hyper) {
    const double n = static_cast<double>(length + 1);
    const double sx2 = hyper.sigma_x() * hyper.sigma_x();
    return -distance_sum / (2.0 * sx2 * (1.0 + n * hyper.delta_mu()));
}

// A = I + dw X^T X is symmetric positive definite for every context.
Eigen::LLT<Mat> factor_precision(const ContextStats& stats, double delta_w) {
    Mat a = Mat::Identity(stats.xtx.rows(), stats.xtx.cols()) + delta_w * stats.xtx;
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success) throw Error("posterior precision factorization failed");
    return llt;
}

double psi_w_from_factor(const Vec& w_center, const ContextStats& stats,
                         const Eigen::LLT<Mat>& llt, const Hyper& hyper) {
    const Vec b = w_center + hyper.delta_w() * stats.xty;
    const double quad = b.dot(llt.solve(b));
    const double sw2 = hyper.sigma_w() * hyper.sigma_w();
    return (quad - w_center.squaredNorm()) / (2.0 * sw2);
}

}  // namespace

Hyper::Hyper(double sigma_x, double sigma_y, double sigma_mu, double sigma_w)
    : sigma_x_(sigma_x), sigma_y_(sigma_y), sigma_mu_(sigma_mu), sigma_w_(sigma_w) {
    require_positive(sigma_x, "sigma_x");
    require_positive(sigma_y, "sigma_y");
    require_positive(sigma_mu, "sigma_mu");
    require_positive(sigma_w, "sigma_w");
}

Hyper Hyper::from_noise_level(double delta) {
    if (!std::isfinite(delta) || delta <= 0.0)
        throw InvalidArgument("noise level must be positive and finite");
    const double s = std::sqrt(delta);
    return Hyper(1.0, 1.0, s, s);
}

MixturePrior::MixturePrior(std::vector<Component> components, Hyper hyper, bool strict_unit_norm)
    : components_(std::move(components)), hyper_(hyper), dim_(0), strict_(strict_unit_norm) {
    if (components_.empty()) throw InvalidArgument("mixture prior needs at least one component");
    dim_ = components_.front().mu.size();
    if (dim_ < 1 || dim_ > kMaxDim)
        throw InvalidArgument("component dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
    double total = 0.0;
    for (std::size_t m = 0; m < components_.size(); ++m) {
        const Component& c = components_[m];
        const std::string where = "components[" + std::to_string(m) + "]";
        if (!std::isfinite(c.pi) || c.pi <= 0.0 || c.pi > 1.0)
            throw InvalidArgument(where + ".pi must lie in (0, 1]");
        if (c.mu.size() != dim_ || c.w.size() != dim_)
            throw DimensionMismatch(where + " has inconsistent dimension");
        if (!all_finite(c.mu) || !all_finite(c.w))
            throw InvalidArgument(where + " has non-finite centers");
        if (strict_ && (std::abs(c.mu.norm() - 1.0) > 1e-9 || std::abs(c.w.norm() - 1.0) > 1e-9))
            throw InvalidArgument(where + " violates the unit-norm center requirement");
        total += c.pi;
    }
    if (std::abs(total - 1.0) > tol::kPriorWeightSum)
        throw InvalidArgument("mixture weights must sum to 1");
}

MixturePrior MixturePrior::with_hyper(const Hyper& hyper) const {
    return MixturePrior(components_, hyper, strict_);
}

void ContextSequence::validate(Eigen::Index expected_dim) const {
    if (xs.size() != ys.size()) throw InvalidArgument("context has mismatched xs/ys lengths");
    if (query.size() != expected_dim) throw DimensionMismatch("query has wrong dimension");
    if (!query.allFinite()) throw InvalidArgument("query is not finite");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].size() != expected_dim)
            throw DimensionMismatch("xs[" + std::to_string(i) + "] has wrong dimension");
        if (!xs[i].allFinite() || !std::isfinite(ys[i]))
            throw InvalidArgument("context pair " + std::to_string(i) + " is not finite");
    }
}

Mat ContextSequence::design() const {
    Mat x(static_cast<Eigen::Index>(xs.size()), dim());
    for (std::size_t i = 0; i < xs.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = xs[i];
    return x;
}

Vec ContextSequence::labels() const {
    return Eigen::Map<const Vec>(ys.data(), static_cast<Eigen::Index>(ys.size()));
}

PretrainSample sample_pretrain_sequence(const MixturePrior& prior, std::size_t length,
                                        std::uint64_t seed) {
    const Hyper& h = prior.hyper();
    Rng rng = make_rng(seed);

    std::vector<double> weights;
    for (const auto& c : prior.components()) weights.push_back(c.pi);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

    PretrainSample out;
    out.component = pick(rng);
    const Component& c = prior.component(out.component);
    out.mu = normal_vector(rng, c.mu, h.sigma_mu());
    out.w = normal_vector(rng, c.w, h.sigma_w());

    auto draw_pair = [&](Vec& x, double& y) {
        x = normal_vector(rng, out.mu, h.sigma_x());
        y = x.dot(out.w) + h.sigma_y() * standard_normal(rng);
    };
    out.context.xs.resize(length);
    out.context.ys.resize(length);
    for (std::size_t i = 0; i < length; ++i) draw_pair(out.context.xs[i], out.context.ys[i]);
    draw_pair(out.context.query, out.query_label);
    return out;
}

double log_evidence_mu(const Component& component, const ContextSequence& context,
                       const Hyper& hyper) {
    check_component(component, context);
    return psi_mu_from_sum(squared_distance_sum(component.mu, context), context.length(), hyper);
}

double log_evidence_w(const Component& component, const ContextSequence& context,
                      const Hyper& hyper) {
    check_component(component, context);
    if (context.length() == 0) return 0.0;
    const ContextStats stats = context_stats(context);
    return psi_w_from_factor(component.w, stats, factor_precision(stats, hyper.delta_w()), hyper);
}

Vec posterior_w_mean(const Component& component, const ContextSequence& context,
                     const Hyper& hyper) {
    check_component(component, context);
    if (context.length() == 0) return component.w;
    const ContextStats stats = context_stats(context);
    const auto llt = factor_precision(stats, hyper.delta_w());
    return llt.solve(component.w + hyper.delta_w() * stats.xty);
}

PosteriorSummary posterior(const MixturePrior& prior, const ContextSequence& context) {
    context.validate(prior.dim());
    const Hyper& h = prior.hyper();
    const std::size_t M = prior.size();
    const bool empty = context.length() == 0;

    const ContextStats stats = context_stats(context);
    const auto llt = factor_precision(stats, h.delta_w());

    PosteriorSummary out;
    out.psi_mu.resize(M);
    out.psi_w.resize(M);
    out.log_tilde_pi.resize(M);
    out.tilde_pi.resize(M);
    out.tilde_w.resize(M);

    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < M; ++m) {
        const Component& c = prior.component(m);
        out.psi_mu[m] =
            psi_mu_from_sum(squared_distance_sum(c.mu, context), context.length(), h);
        out.psi_w[m] = empty ? 0.0 : psi_w_from_factor(c.w, stats, llt, h);
        out.tilde_w[m] = empty ? c.w : Vec(llt.solve(c.w + h.delta_w() * stats.xty));
        out.log_tilde_pi[m] = std::log(c.pi) + out.psi_mu[m] + out.psi_w[m];
        max_log = std::max(max_log, out.log_tilde_pi[m]);
    }
    if (!std::isfinite(max_log)) throw Error("posterior log weights are not finite");

    double norm = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        out.tilde_pi[m] = std::exp(out.log_tilde_pi[m] - max_log);
        norm += out.tilde_pi[m];
    }
    const double log_norm = max_log + std::log(norm);
    Vec mixed = Vec::Zero(prior.dim());
    for (std::size_t m = 0; m < M; ++m) {
        out.tilde_pi[m] /= norm;
        out.log_tilde_pi[m] -= log_norm;
        mixed.noalias() += out.tilde_pi[m] * out.tilde_w[m];
    }
    out.prediction = context.query.dot(mixed);
    return out;
}

WeightRatio weight_ratio(const MixturePrior& prior, const ContextSequence& context,
                         std::size_t alpha, std::size_t beta) {
    if (alpha >= prior.size() || beta >= prior.size())
        throw InvalidArgument("component index out of range");
    if (alpha == beta) throw InvalidArgument("weight_ratio needs two distinct components");
    context.validate(prior.dim());
    const Hyper& h = prior.hyper();
    const Component& a = prior.component(alpha);
    const Component& b = prior.component(beta);

    WeightRatio out;
    out.psi_mu = log_evidence_mu(a, context, h) - log_evidence_mu(b, context, h);
    out.psi_w = log_evidence_w(a, context, h) - log_evidence_w(b, context, h);
    out.ratio = (a.pi / b.pi) * std::exp(out.psi_mu + out.psi_w);
    return out;
}

}  // namespace icl
