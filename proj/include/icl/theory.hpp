#pragma once

#include <cstdint>
#include <vector>

#include "icl/mixprior.hpp"

namespace icl {

/// Literal evaluation of the three downstream-context conditions under which
/// the task-weight term favors the lower-risk component.
struct Assumption2Report {
    // lambda_min(x_i x_i^T) >= 1, one flag per example.
    std::vector<bool> cond_min_eig;
    bool cond_identity = false;
    bool cond_cross = false;
    double cross_value = 0.0;
    // Examples with y_i = 0, skipped in the cross condition.
    std::vector<std::size_t> zero_label_indices;
    bool all_hold = false;

    bool all_min_eig() const;
};

Assumption2Report check_assumption2(const ContextSequence& context, const Hyper& hyper,
                                    const Vec& w_alpha, const Vec& w_beta);

// (1/T) sum_i (|<w_beta, x_i> - y_i|^2 - |<w_alpha, x_i> - y_i|^2).
double empirical_risk_gap(const ContextSequence& context, const Vec& w_alpha, const Vec& w_beta);

// Psi_w(alpha, beta) for two bare task-weight centers.
double psi_w_pair(const ContextSequence& context, const Hyper& hyper, const Vec& w_alpha,
                  const Vec& w_beta);

struct Theorem1Report {
    std::size_t requested = 0;
    std::size_t filtered = 0;
    std::size_t attempts = 0;
    std::size_t violations = 0;
    double min_psi_w = 0.0;
};

struct Theorem1Options {
    std::size_t max_length = 16;
    // Candidate draws allowed per requested filtered trial.
    std::size_t attempt_factor = 50;
    unsigned threads = 1;
};

/// Draws d = 1 contexts with x_i in {-1, +1}; whenever the risk gap and the
/// cross condition hold, counts Psi_w < -1e-10 as a violation.
Theorem1Report theorem1_property_trial(std::uint64_t seed, std::size_t trials,
                                       const Theorem1Options& options = {});

struct ExploratoryReport {
    Eigen::Index dim = 0;
    std::size_t trials = 0;
    std::size_t risk_favored = 0;
    std::size_t sign_violations = 0;
    double violation_rate = 0.0;
};

/// Empirical Psi_w sign-violation rate at d >= 2 with Gaussian inputs. Nothing
/// is asserted: the per-example eigenvalue condition cannot hold there.
ExploratoryReport theorem1_exploratory(std::uint64_t seed, Eigen::Index dim, std::size_t trials,
                                       unsigned threads = 1);

struct LimitPoint {
    std::size_t length = 0;
    double psi_mu_pair = 0.0;
    double analytic_limit = 0.0;
};

/// Psi_mu(alpha, beta) on contexts x_i ~ N(mu*, tau_x^2 I) for each T in the
/// schedule, reported next to (|mu_beta - mu*|^2 - |mu_alpha - mu*|^2) / (2 sigma_mu^2).
/// tau_x = 0 places every input exactly on mu*.
std::vector<LimitPoint> lemma1_limit_check(const Vec& mu_star, double tau_x, const Vec& mu_alpha,
                                           const Vec& mu_beta, const Hyper& hyper,
                                           const std::vector<std::size_t>& schedule,
                                           std::uint64_t seed);

double lemma1_analytic_limit(const Vec& mu_star, const Vec& mu_alpha, const Vec& mu_beta,
                             const Hyper& hyper);

struct OracleEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    double effective_sample_size = 0.0;
};

inline constexpr std::size_t kMinOracleSamples = 1000;

/// Self-normalized importance sampling of E[<query, w> | context] with the
/// generative prior as proposal. Standard error from a batch bootstrap.
/// Throws LowConfidenceError when the effective sample size falls below 50.
OracleEstimate mc_bayes_oracle(const MixturePrior& prior, const ContextSequence& context,
                               std::size_t n_samples, std::uint64_t seed);

/// E[<query, w> | context] by tensor-grid trapezoid quadrature over (mu, w)
/// on center +/- 8 prior std per component. d = 1 only.
double quadrature_oracle_1d(const MixturePrior& prior, const ContextSequence& context,
                            std::size_t grid_points);

}  // namespace icl
