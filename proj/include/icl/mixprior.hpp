#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace icl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Largest input dimension accepted anywhere in the library.
inline constexpr Eigen::Index kMaxDim = 64;

/// Noise scales of the mixed-Gaussian pretraining distribution.
class Hyper {
public:
    Hyper(double sigma_x, double sigma_y, double sigma_mu, double sigma_w);

    double sigma_x() const { return sigma_x_; }
    double sigma_y() const { return sigma_y_; }
    double sigma_mu() const { return sigma_mu_; }
    double sigma_w() const { return sigma_w_; }

    double delta_mu() const { return (sigma_mu_ * sigma_mu_) / (sigma_x_ * sigma_x_); }
    double delta_w() const { return (sigma_w_ * sigma_w_) / (sigma_y_ * sigma_y_); }

    // sigma_x = sigma_y = 1, sigma_mu^2 = sigma_w^2 = delta.
    static Hyper from_noise_level(double delta);

    bool operator==(const Hyper&) const = default;

private:
    double sigma_x_;
    double sigma_y_;
    double sigma_mu_;
    double sigma_w_;
};

struct Component {
    double pi = 0.0;
    Vec mu;
    Vec w;
};

/// Mixture over (input mean, task weight) centers sharing one set of noise scales.
///
/// Construction validates the invariants: at least one component, weights in
/// (0, 1] summing to one, matching finite center dimensions. With
/// `strict_unit_norm` every center must also have unit Euclidean norm.
class MixturePrior {
public:
    MixturePrior(std::vector<Component> components, Hyper hyper, bool strict_unit_norm = false);

    const std::vector<Component>& components() const { return components_; }
    const Component& component(std::size_t m) const { return components_.at(m); }
    std::size_t size() const { return components_.size(); }
    const Hyper& hyper() const { return hyper_; }
    Eigen::Index dim() const { return dim_; }
    bool strict_unit_norm() const { return strict_; }

    MixturePrior with_hyper(const Hyper& hyper) const;

private:
    std::vector<Component> components_;
    Hyper hyper_;
    Eigen::Index dim_;
    bool strict_;
};

/// T labeled pairs plus one unlabeled query input.
struct ContextSequence {
    std::vector<Vec> xs;
    std::vector<double> ys;
    Vec query;

    std::size_t length() const { return xs.size(); }
    Eigen::Index dim() const { return query.size(); }

    // Throws DimensionMismatch / InvalidArgument when the shape or values are bad.
    void validate(Eigen::Index expected_dim) const;
    // Inputs stacked as a T x d matrix.
    Mat design() const;
    Vec labels() const;
};

struct PretrainSample {
    ContextSequence context;
    double query_label = 0.0;
    std::size_t component = 0;
    Vec mu;
    Vec w;
};

struct PosteriorSummary {
    std::vector<double> psi_mu;
    std::vector<double> psi_w;
    std::vector<double> log_tilde_pi;
    std::vector<double> tilde_pi;
    std::vector<Vec> tilde_w;
    double prediction = 0.0;
};

struct WeightRatio {
    double ratio = 1.0;
    double psi_mu = 0.0;
    double psi_w = 0.0;
};

/// Draws m ~ pi, mu ~ N(mu_m, sigma_mu^2 I), w ~ N(w_m, sigma_w^2 I), then T + 1
/// labeled points; the last becomes the query and its label is held out.
PretrainSample sample_pretrain_sequence(const MixturePrior& prior, std::size_t length,
                                        std::uint64_t seed);

/// Input-mean log evidence of one component, up to a component-independent
/// constant. Sums over the context inputs and the query.
double log_evidence_mu(const Component& component, const ContextSequence& context,
                       const Hyper& hyper);

/// Task-weight log evidence of one component, up to a component-independent
/// constant: (||w_m + T dw wbar||^2_G - ||w_m||^2) / (2 sigma_w^2) with
/// G = (I + T dw Sigma_bar)^-1. Zero for an empty context.
double log_evidence_w(const Component& component, const ContextSequence& context,
                      const Hyper& hyper);

/// Conjugate posterior mean (I + dw X^T X)^-1 (w_m + dw X^T y).
Vec posterior_w_mean(const Component& component, const ContextSequence& context,
                     const Hyper& hyper);

PosteriorSummary posterior(const MixturePrior& prior, const ContextSequence& context);

/// pi~_alpha / pi~_beta together with its two log-ratio terms.
WeightRatio weight_ratio(const MixturePrior& prior, const ContextSequence& context,
                         std::size_t alpha, std::size_t beta);

}  // namespace icl
