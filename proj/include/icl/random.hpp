#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace icl {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent per-trial streams from a
// master seed by a counter split, so results do not depend on scheduling.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
    return mix64(mix64(master) ^ mix64(counter + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

inline double standard_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline double uniform01(Rng& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline Eigen::VectorXd normal_vector(Rng& rng, Eigen::Index dim, double mean = 0.0,
                                     double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = mean + stddev * dist(rng);
    return v;
}

inline Eigen::VectorXd normal_vector(Rng& rng, const Eigen::VectorXd& mean, double stddev) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd v(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i) v[i] = mean[i] + stddev * dist(rng);
    return v;
}

inline Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                     double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    // Row-major fill so the draw order matches the natural reading order.
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = stddev * dist(rng);
    return m;
}

}  // namespace icl
