#include "icl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "icl/errors.hpp"
#include "icl/parallel.hpp"
#include "icl/random.hpp"
#include "icl/tolerances.hpp"

namespace icl {

namespace {

constexpr std::uint64_t kTaskStream = 1;
constexpr std::uint64_t kContextStream = 2;
constexpr std::uint64_t kPredictorStream = 3;
constexpr std::uint64_t kErrorStream = 4;

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
        i = j + 1;
    }
    return rank;
}

std::string label_of(double value) { return format_number(value); }

}  // namespace

TaskSampler fixed_task(TaskFunction task) {
    return [task = std::move(task)](std::uint64_t) { return task; };
}

TaskSampler resampled_task(FunctionKind kind, Eigen::Index dim, std::optional<Eigen::Index> hidden_dim) {
    return [=](std::uint64_t seed) { return sample_task(kind, dim, hidden_dim, seed); };
}

ResultTable error_curve(const Predictor& predictor, const TaskSampler& task,
                        const std::vector<std::size_t>& lengths, std::size_t trials,
                        std::uint64_t seed, const CurveOptions& options) {
    if (trials == 0) throw InvalidArgument("error_curve needs at least one trial");
    if (lengths.empty()) throw InvalidArgument("error_curve needs a context-length grid");

    const std::size_t cells = lengths.size() * trials;
    std::vector<double> errors(cells);
    parallel_for(cells, options.threads, [&](std::size_t k) {
        const std::size_t li = k / trials;
        const std::size_t trial = k % trials;
        const std::uint64_t trial_seed = derive_seed(seed, li, trial);
        const TaskFunction f = task(derive_seed(trial_seed, kTaskStream));
        const Vec mean = options.input_mean.size() ? options.input_mean : Vec::Zero(f.dim());
        const LabeledBatch batch =
            sample_icl_batch(f, lengths[li], derive_seed(trial_seed, kContextStream), mean,
                             options.input_std);
        const double pred = predictor(batch.context, derive_seed(trial_seed, kPredictorStream));
        const double r = pred - batch.query_label;
        errors[k] = r * r;
    });

    std::vector<std::string> length_labels;
    for (std::size_t T : lengths) length_labels.push_back(std::to_string(T));
    ResultTable table("squared_error", {{"context_length", length_labels},
                                        {"statistic", {"mean_squared_error", "std_error"}}});
    for (std::size_t li = 0; li < lengths.size(); ++li) {
        double sum = 0.0;
        double sum2 = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const double e = errors[li * trials + t];
            sum += e;
            sum2 += e * e;
        }
        const double n = static_cast<double>(trials);
        const double mean = sum / n;
        const double var = trials > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0)) : 0.0;
        table.set({li, 0}, mean);
        table.set({li, 1}, std::sqrt(var / n));
    }
    return table;
}

LabeledBatch Downstream::sample(std::size_t length, std::uint64_t seed) const {
    const Vec mean = input_mean.size() ? input_mean : Vec::Zero(task.dim());
    return sample_icl_batch(task, length, seed, mean, input_std);
}

MeanEstimate component_test_error_stats(const MixturePrior& prior, std::size_t component,
                                        const Downstream& downstream, std::size_t n,
                                        std::uint64_t seed) {
    if (component >= prior.size()) throw InvalidArgument("component index out of range");
    if (n == 0) throw InvalidArgument("component_test_error needs at least one draw");
    if (downstream.task.dim() != prior.dim())
        throw DimensionMismatch("downstream task dimension differs from the prior");
    const Vec& w = prior.component(component).w;
    const LabeledBatch draws = downstream.sample(n - 1, seed);
    double sum = 0.0;
    double sum2 = 0.0;
    auto add = [&](const Vec& x, double y) {
        const double r = w.dot(x) - y;
        sum += r * r;
        sum2 += r * r * r * r;
    };
    for (std::size_t i = 0; i + 1 < n; ++i) add(draws.context.xs[i], draws.context.ys[i]);
    add(draws.context.query, draws.query_label);
    const double nd = static_cast<double>(n);
    MeanEstimate est;
    est.mean = sum / nd;
    const double var = n > 1 ? std::max(0.0, (sum2 - nd * est.mean * est.mean) / (nd - 1.0)) : 0.0;
    est.std_error = std::sqrt(var / nd);
    return est;
}

double component_test_error(const MixturePrior& prior, std::size_t component,
                            const Downstream& downstream, std::size_t n, std::uint64_t seed) {
    return component_test_error_stats(prior, component, downstream, n, seed).mean;
}

double input_distance(const Vec& mu_pretrain, const Vec& mu_downstream) {
    if (mu_pretrain.size() != mu_downstream.size())
        throw DimensionMismatch("input means differ in dimension");
    return (mu_pretrain - mu_downstream).norm();
}

std::optional<double> prefix_matching_score(const Mat& attention,
                                            const std::vector<std::int64_t>& tokens) {
    const auto T = static_cast<Eigen::Index>(tokens.size());
    if (T < 2) throw InvalidArgument("prefix matching score needs at least two tokens");
    if (attention.rows() != T || attention.cols() != T)
        throw DimensionMismatch("attention matrix must be T x T");
    for (Eigen::Index i = 0; i < T; ++i) {
        if ((attention.row(i).array() < 0.0).any() || !attention.row(i).allFinite())
            throw InvalidArgument("attention row " + std::to_string(i) + " has negative entries");
        const double causal = attention.row(i).head(i + 1).sum();
        if (std::abs(causal - 1.0) > tol::kStochasticRows)
            throw InvalidArgument("attention row " + std::to_string(i) +
                                  " does not sum to 1 over its causal support");
    }
    double total = 0.0;
    std::size_t counted = 0;
    for (Eigen::Index i = 0; i < T; ++i) {
        bool any = false;
        double mass = 0.0;
        for (Eigen::Index j = 1; j <= i; ++j) {
            if (tokens[static_cast<std::size_t>(j - 1)] == tokens[static_cast<std::size_t>(i)]) {
                any = true;
                mass += attention(i, j);
            }
        }
        if (any) {
            total += mass;
            ++counted;
        }
    }
    if (counted == 0) return std::nullopt;
    return total / static_cast<double>(counted);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionMismatch("spearman inputs differ in length");
    if (a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

SelectionReport selection_report(const MixturePrior& prior, const Downstream& downstream,
                                 std::size_t length, std::size_t trials,
                                 const std::vector<double>& noise_levels, std::uint64_t seed,
                                 const SelectionOptions& options) {
    if (trials == 0) throw InvalidArgument("selection_report needs at least one trial");
    if (noise_levels.empty()) throw InvalidArgument("selection_report needs noise levels");
    if (downstream.task.dim() != prior.dim())
        throw DimensionMismatch("downstream task dimension differs from the prior");
    const std::size_t M = prior.size();
    const Vec ds_mean = downstream.input_mean.size() ? downstream.input_mean : Vec::Zero(prior.dim());

    // Fixed-center errors and distances do not depend on the noise level.
    std::vector<double> comp_error(M);
    std::vector<double> distance(M);
    for (std::size_t m = 0; m < M; ++m) {
        comp_error[m] = component_test_error(prior, m, downstream, options.error_samples,
                                             derive_seed(seed, kErrorStream));
        distance[m] = input_distance(prior.component(m).mu, ds_mean);
    }

    struct TrialResult {
        std::vector<double> pi;
        double sq_error = 0.0;
    };

    SelectionReport report;
    for (std::size_t level = 0; level < noise_levels.size(); ++level) {
        const MixturePrior p = prior.with_hyper(Hyper::from_noise_level(noise_levels[level]));
        std::vector<TrialResult> results(trials);
        parallel_for(trials, options.threads, [&](std::size_t t) {
            const LabeledBatch batch =
                downstream.sample(length, derive_seed(seed, kContextStream, t));
            const PosteriorSummary post = posterior(p, batch.context);
            results[t].pi = post.tilde_pi;
            const double r = post.prediction - batch.query_label;
            results[t].sq_error = r * r;
        });

        NoiseLevelSummary s;
        s.noise_level = noise_levels[level];
        s.mean_component_error = comp_error;
        s.input_distance = distance;
        s.mean_tilde_pi.assign(M, 0.0);
        for (const TrialResult& r : results) {
            double total = 0.0;
            for (std::size_t m = 0; m < M; ++m) {
                s.mean_tilde_pi[m] += r.pi[m];
                total += r.pi[m];
            }
            s.max_normalization_error = std::max(s.max_normalization_error, std::abs(total - 1.0));
            s.icl_squared_error += r.sq_error;
        }
        for (double& v : s.mean_tilde_pi) v /= static_cast<double>(trials);
        s.icl_squared_error /= static_cast<double>(trials);
        s.spearman_pi_error = spearman(s.mean_tilde_pi, s.mean_component_error);
        const auto best_error = std::min_element(comp_error.begin(), comp_error.end()) - comp_error.begin();
        const auto best_pi =
            std::max_element(s.mean_tilde_pi.begin(), s.mean_tilde_pi.end()) - s.mean_tilde_pi.begin();
        s.top_rank_agrees = best_error == best_pi;
        report.levels.push_back(std::move(s));
    }

    std::vector<std::string> level_labels = options.level_labels;
    if (level_labels.empty())
        for (double v : noise_levels) level_labels.push_back(label_of(v));
    if (level_labels.size() != noise_levels.size())
        throw InvalidArgument("one label per noise level required");
    std::vector<std::string> component_labels;
    for (std::size_t m = 0; m < M; ++m) component_labels.push_back(std::to_string(m + 1));
    component_labels.push_back("all");
    const std::vector<std::string> metrics{"component_test_error", "tilde_pi", "input_distance",
                                           "icl_squared_error", "spearman_pi_error"};
    report.table = ResultTable("algorithm_selection", {{"noise_level", level_labels},
                                                       {"component", component_labels},
                                                       {"metric", metrics}});
    for (std::size_t level = 0; level < report.levels.size(); ++level) {
        const NoiseLevelSummary& s = report.levels[level];
        for (std::size_t m = 0; m < M; ++m) {
            report.table.set({level, m, 0}, s.mean_component_error[m]);
            report.table.set({level, m, 1}, s.mean_tilde_pi[m]);
            report.table.set({level, m, 2}, s.input_distance[m]);
        }
        report.table.set({level, M, 3}, s.icl_squared_error);
        report.table.set({level, M, 4}, s.spearman_pi_error);
    }
    return report;
}

}  // namespace icl
