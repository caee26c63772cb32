#include "icl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "icl/errors.hpp"
#include "icl/parallel.hpp"
#include "icl/random.hpp"
#include "icl/tolerances.hpp"

namespace icl {

namespace {

// Stream tags keep the derived RNG streams of different purposes apart.
constexpr std::uint64_t kBootstrapStream = 0xb007'57a9ULL;

struct TrialDraw {
    bool filtered = false;
    double psi_w = 0.0;
};

double log_uniform(Rng& rng, double lo, double hi) {
    return std::exp(std::log(lo) + uniform01(rng) * (std::log(hi) - std::log(lo)));
}

TrialDraw theorem1_draw(std::uint64_t seed, std::size_t max_length) {
    Rng rng = make_rng(seed);
    std::uniform_int_distribution<std::size_t> length_dist(1, max_length);
    std::bernoulli_distribution coin(0.5);
    const std::size_t T = length_dist(rng);

    const Hyper hyper(1.0, log_uniform(rng, 0.1, 10.0), 1.0, log_uniform(rng, 0.1, 10.0));
    const Vec w_alpha = normal_vector(rng, 1, 0.0, 2.0);
    const Vec w_beta = normal_vector(rng, 1, 0.0, 2.0);

    ContextSequence ctx;
    for (std::size_t i = 0; i < T; ++i) {
        Vec x(1);
        x[0] = coin(rng) ? 1.0 : -1.0;
        ctx.xs.push_back(x);
        ctx.ys.push_back(2.0 * standard_normal(rng));
    }
    ctx.query = Vec::Ones(1);

    TrialDraw out;
    if (empirical_risk_gap(ctx, w_alpha, w_beta) < 0.0) return out;
    if (!check_assumption2(ctx, hyper, w_alpha, w_beta).cond_cross) return out;
    out.filtered = true;
    out.psi_w = psi_w_pair(ctx, hyper, w_alpha, w_beta);
    return out;
}

double normal_logpdf_unnormalized(double x, double mean, double inv_two_var) {
    const double z = x - mean;
    return -z * z * inv_two_var;
}

}  // namespace

bool Assumption2Report::all_min_eig() const {
    return std::all_of(cond_min_eig.begin(), cond_min_eig.end(), [](bool b) { return b; });
}

Assumption2Report check_assumption2(const ContextSequence& context, const Hyper& hyper,
                                    const Vec& w_alpha, const Vec& w_beta) {
    const std::size_t T = context.length();
    if (T == 0) throw InvalidArgument("assumption check needs at least one context pair");
    context.validate(context.dim());
    const Eigen::Index d = context.dim();
    if (w_alpha.size() != d || w_beta.size() != d)
        throw DimensionMismatch("task weights do not match the context dimension");

    Assumption2Report report;
    Mat sum_outer = Mat::Zero(d, d);
    for (const Vec& x : context.xs) {
        const Mat outer = x * x.transpose();
        Eigen::SelfAdjointEigenSolver<Mat> eig(outer, Eigen::EigenvaluesOnly);
        report.cond_min_eig.push_back(eig.eigenvalues().minCoeff() >= 1.0);
        sum_outer += outer;
    }

    const double dw = hyper.delta_w();
    const double Td = static_cast<double>(T);
    Mat precision = Mat::Identity(d, d) + dw * sum_outer;
    const Mat product = (1.0 + Td * dw) * precision.inverse();
    report.cond_identity =
        (product - Mat::Identity(d, d)).cwiseAbs().maxCoeff() <= tol::kIdentityCheck;

    const Vec diff = w_alpha - w_beta;
    double outer_sum = 0.0;
    for (std::size_t i = 0; i < T; ++i) {
        const double yi = context.ys[i];
        if (yi == 0.0) {
            report.zero_label_indices.push_back(i);
            continue;
        }
        const Vec& xi = context.xs[i];
        double inner = 0.0;
        for (std::size_t j = 0; j < T; ++j)
            inner += context.xs[j].dot(xi) * context.ys[j] / yi - xi.squaredNorm();
        outer_sum += 2.0 * diff.dot(xi) * yi * (inner / Td);
    }
    report.cross_value = outer_sum / Td;
    report.cond_cross = report.cross_value >= 0.0;
    report.all_hold = report.all_min_eig() && report.cond_identity && report.cond_cross;
    return report;
}

double empirical_risk_gap(const ContextSequence& context, const Vec& w_alpha, const Vec& w_beta) {
    if (context.length() == 0) return 0.0;
    double gap = 0.0;
    for (std::size_t i = 0; i < context.length(); ++i) {
        const double rb = w_beta.dot(context.xs[i]) - context.ys[i];
        const double ra = w_alpha.dot(context.xs[i]) - context.ys[i];
        gap += rb * rb - ra * ra;
    }
    return gap / static_cast<double>(context.length());
}

double psi_w_pair(const ContextSequence& context, const Hyper& hyper, const Vec& w_alpha,
                  const Vec& w_beta) {
    const Eigen::Index d = context.dim();
    const Component a{0.5, Vec::Zero(d), w_alpha};
    const Component b{0.5, Vec::Zero(d), w_beta};
    return log_evidence_w(a, context, hyper) - log_evidence_w(b, context, hyper);
}

Theorem1Report theorem1_property_trial(std::uint64_t seed, std::size_t trials,
                                       const Theorem1Options& options) {
    if (trials == 0) throw InvalidArgument("theorem1_property_trial needs at least one trial");
    Theorem1Report report;
    report.requested = trials;
    report.min_psi_w = std::numeric_limits<double>::infinity();

    const std::size_t max_attempts = trials * std::max<std::size_t>(1, options.attempt_factor);
    const std::size_t block = std::max<std::size_t>(trials, 1024);
    std::vector<TrialDraw> draws;
    while (report.filtered < trials && report.attempts < max_attempts) {
        const std::size_t base = report.attempts;
        const std::size_t n = std::min(block, max_attempts - base);
        draws.assign(n, TrialDraw{});
        parallel_for(n, options.threads, [&](std::size_t k) {
            draws[k] = theorem1_draw(derive_seed(seed, base + k), options.max_length);
        });
        // Consume in attempt order so the filtered set does not depend on threads.
        for (std::size_t k = 0; k < n && report.filtered < trials; ++k) {
            ++report.attempts;
            if (!draws[k].filtered) continue;
            ++report.filtered;
            report.min_psi_w = std::min(report.min_psi_w, draws[k].psi_w);
            if (draws[k].psi_w < -tol::kTheoremSlack) ++report.violations;
        }
    }
    return report;
}

ExploratoryReport theorem1_exploratory(std::uint64_t seed, Eigen::Index dim, std::size_t trials,
                                       unsigned threads) {
    if (dim < 2) throw InvalidArgument("exploratory mode is for d >= 2");
    struct Draw {
        bool favored = false;
        bool violated = false;
    };
    std::vector<Draw> draws(trials);
    parallel_for(trials, threads, [&](std::size_t k) {
        Rng rng = make_rng(derive_seed(seed, k));
        std::uniform_int_distribution<std::size_t> length_dist(1, 32);
        const std::size_t T = length_dist(rng);
        const Hyper hyper(1.0, log_uniform(rng, 0.1, 10.0), 1.0, log_uniform(rng, 0.1, 10.0));
        const Vec w_alpha = normal_vector(rng, dim);
        const Vec w_beta = normal_vector(rng, dim);
        ContextSequence ctx;
        for (std::size_t i = 0; i < T; ++i) {
            ctx.xs.push_back(normal_vector(rng, dim));
            ctx.ys.push_back(standard_normal(rng) * 2.0);
        }
        ctx.query = Vec::Zero(dim);
        if (empirical_risk_gap(ctx, w_alpha, w_beta) < 0.0) return;
        draws[k].favored = true;
        draws[k].violated = psi_w_pair(ctx, hyper, w_alpha, w_beta) < -tol::kTheoremSlack;
    });
    ExploratoryReport report;
    report.dim = dim;
    report.trials = trials;
    for (const Draw& d : draws) {
        report.risk_favored += d.favored ? 1 : 0;
        report.sign_violations += d.violated ? 1 : 0;
    }
    report.violation_rate = report.risk_favored == 0
                                ? 0.0
                                : static_cast<double>(report.sign_violations) /
                                      static_cast<double>(report.risk_favored);
    return report;
}

double lemma1_analytic_limit(const Vec& mu_star, const Vec& mu_alpha, const Vec& mu_beta,
                             const Hyper& hyper) {
    const double gap = (mu_beta - mu_star).squaredNorm() - (mu_alpha - mu_star).squaredNorm();
    return gap / (2.0 * hyper.sigma_mu() * hyper.sigma_mu());
}

std::vector<LimitPoint> lemma1_limit_check(const Vec& mu_star, double tau_x, const Vec& mu_alpha,
                                           const Vec& mu_beta, const Hyper& hyper,
                                           const std::vector<std::size_t>& schedule,
                                           std::uint64_t seed) {
    const Eigen::Index d = mu_star.size();
    if (mu_alpha.size() != d || mu_beta.size() != d)
        throw DimensionMismatch("lemma1_limit_check centers disagree in dimension");
    if (!(tau_x >= 0.0)) throw InvalidArgument("tau_x must be non-negative");
    if ((mu_beta - mu_star).squaredNorm() < (mu_alpha - mu_star).squaredNorm())
        throw InvalidArgument("mu_alpha must be at least as close to mu* as mu_beta");

    const double limit = lemma1_analytic_limit(mu_star, mu_alpha, mu_beta, hyper);
    const Component a{0.5, mu_alpha, Vec::Zero(d)};
    const Component b{0.5, mu_beta, Vec::Zero(d)};
    std::vector<LimitPoint> points;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        Rng rng = make_rng(derive_seed(seed, k));
        const std::size_t T = schedule[k];
        ContextSequence ctx;
        ctx.xs.reserve(T);
        for (std::size_t i = 0; i < T; ++i) ctx.xs.push_back(normal_vector(rng, mu_star, tau_x));
        ctx.ys.assign(T, 0.0);
        ctx.query = normal_vector(rng, mu_star, tau_x);
        const double psi = log_evidence_mu(a, ctx, hyper) - log_evidence_mu(b, ctx, hyper);
        points.push_back({T, psi, limit});
    }
    return points;
}

OracleEstimate mc_bayes_oracle(const MixturePrior& prior, const ContextSequence& context,
                               std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < kMinOracleSamples)
        throw InvalidArgument("mc_bayes_oracle needs at least 1000 samples");
    context.validate(prior.dim());
    const Hyper& h = prior.hyper();
    const Eigen::Index d = prior.dim();
    const std::size_t T = context.length();

    std::vector<double> pis;
    for (const auto& c : prior.components()) pis.push_back(c.pi);
    std::discrete_distribution<std::size_t> pick(pis.begin(), pis.end());
    std::normal_distribution<double> normal(0.0, 1.0);

    const double inv2vx = 1.0 / (2.0 * h.sigma_x() * h.sigma_x());
    const double inv2vy = 1.0 / (2.0 * h.sigma_y() * h.sigma_y());

    std::vector<double> log_w(n_samples);
    std::vector<double> value(n_samples);
    Vec mu(d);
    Vec w(d);
    Rng rng = make_rng(seed);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const Component& c = prior.component(pick(rng));
        for (Eigen::Index k = 0; k < d; ++k) mu[k] = c.mu[k] + h.sigma_mu() * normal(rng);
        for (Eigen::Index k = 0; k < d; ++k) w[k] = c.w[k] + h.sigma_w() * normal(rng);
        double lw = 0.0;
        for (std::size_t i = 0; i < T; ++i) {
            const Vec& x = context.xs[i];
            for (Eigen::Index k = 0; k < d; ++k)
                lw += normal_logpdf_unnormalized(x[k], mu[k], inv2vx);
            double pred = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) pred += x[k] * w[k];
            lw += normal_logpdf_unnormalized(context.ys[i], pred, inv2vy);
        }
        double q = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) {
            lw += normal_logpdf_unnormalized(context.query[k], mu[k], inv2vx);
            q += context.query[k] * w[k];
        }
        log_w[s] = lw;
        value[s] = q;
    }

    const double max_lw = *std::max_element(log_w.begin(), log_w.end());
    constexpr std::size_t kBatches = 100;
    std::vector<double> batch_weight(kBatches, 0.0);
    std::vector<double> batch_value(kBatches, 0.0);
    double sum_w = 0.0;
    double sum_w2 = 0.0;
    double sum_wf = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const double wt = std::exp(log_w[s] - max_lw);
        const std::size_t b = s * kBatches / n_samples;
        batch_weight[b] += wt;
        batch_value[b] += wt * value[s];
        sum_w += wt;
        sum_w2 += wt * wt;
        sum_wf += wt * value[s];
    }

    OracleEstimate est;
    est.n_samples = n_samples;
    est.mean = sum_wf / sum_w;
    est.effective_sample_size = sum_w * sum_w / sum_w2;
    if (est.effective_sample_size < tol::kMinEffectiveSampleSize)
        throw LowConfidenceError("importance sampler effective sample size below 50",
                                 est.effective_sample_size);

    // Batch bootstrap: resample the 100 contiguous batches with replacement.
    constexpr std::size_t kResamples = 1000;
    Rng boot = make_rng(derive_seed(seed, kBootstrapStream));
    std::uniform_int_distribution<std::size_t> any_batch(0, kBatches - 1);
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t r = 0; r < kResamples; ++r) {
        double bw = 0.0;
        double bv = 0.0;
        for (std::size_t k = 0; k < kBatches; ++k) {
            const std::size_t b = any_batch(boot);
            bw += batch_weight[b];
            bv += batch_value[b];
        }
        const double e = bw > 0.0 ? bv / bw : est.mean;
        m1 += e;
        m2 += e * e;
    }
    m1 /= kResamples;
    est.std_error = std::sqrt(std::max(0.0, m2 / kResamples - m1 * m1));
    return est;
}

double quadrature_oracle_1d(const MixturePrior& prior, const ContextSequence& context,
                            std::size_t grid_points) {
    if (prior.dim() != 1) throw InvalidArgument("quadrature oracle supports d = 1 only");
    if (grid_points < 256) throw InvalidArgument("quadrature oracle needs at least 256 grid points");
    context.validate(1);
    const Hyper& h = prior.hyper();
    const std::size_t T = context.length();
    const std::size_t G = grid_points;
    const double q = context.query[0];

    auto log_normal = [](double x, double mean, double sd) {
        const double z = (x - mean) / sd;
        return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
    };

    struct Grid {
        std::vector<double> node;
        std::vector<double> log_factor;  // log of trapezoid weight times 1-D integrand factor
    };
    auto make_grid = [&](double center, double sd, auto&& log_likelihood) {
        Grid g;
        const double lo = center - 8.0 * sd;
        const double step = 16.0 * sd / static_cast<double>(G - 1);
        for (std::size_t k = 0; k < G; ++k) {
            const double t = lo + step * static_cast<double>(k);
            const double trap = (k == 0 || k == G - 1) ? 0.5 * step : step;
            g.node.push_back(t);
            g.log_factor.push_back(std::log(trap) + log_normal(t, center, sd) + log_likelihood(t));
        }
        return g;
    };

    struct Cell {
        double log_weight;
        double value;
    };
    std::vector<Cell> cells;
    cells.reserve(prior.size() * G * G);
    double max_log = -std::numeric_limits<double>::infinity();
    for (const Component& c : prior.components()) {
        const Grid mu_grid = make_grid(c.mu[0], h.sigma_mu(), [&](double mu) {
            double s = log_normal(q, mu, h.sigma_x());
            for (std::size_t i = 0; i < T; ++i) s += log_normal(context.xs[i][0], mu, h.sigma_x());
            return s;
        });
        const Grid w_grid = make_grid(c.w[0], h.sigma_w(), [&](double w) {
            double s = 0.0;
            for (std::size_t i = 0; i < T; ++i)
                s += log_normal(context.ys[i], context.xs[i][0] * w, h.sigma_y());
            return s;
        });
        const double log_pi = std::log(c.pi);
        for (std::size_t a = 0; a < G; ++a) {
            for (std::size_t b = 0; b < G; ++b) {
                const double lw = log_pi + mu_grid.log_factor[a] + w_grid.log_factor[b];
                cells.push_back({lw, q * w_grid.node[b]});
                max_log = std::max(max_log, lw);
            }
        }
    }
    double z = 0.0;
    double num = 0.0;
    for (const Cell& cell : cells) {
        const double e = std::exp(cell.log_weight - max_log);
        z += e;
        num += e * cell.value;
    }
    return num / z;
}

}  // namespace icl
