#pragma once

#include <initializer_list>
#include <vector>

#include "icl/mixprior.hpp"
#include "icl/random.hpp"

namespace icl::testing {

inline Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

// Scalar-input context.
inline ContextSequence ctx1(std::initializer_list<double> xs, std::initializer_list<double> ys, double query) {
    ContextSequence c;
    for (double x : xs) c.xs.push_back(vec({x}));
    c.ys = ys;
    c.query = vec({query});
    return c;
}

inline ContextSequence random_context(Rng& rng, Eigen::Index d, std::size_t T) {
    ContextSequence c;
    for (std::size_t i = 0; i < T; ++i) {
        c.xs.push_back(normal_vector(rng, d));
        c.ys.push_back(standard_normal(rng));
    }
    c.query = normal_vector(rng, d);
    return c;
}

inline MixturePrior random_prior(Rng& rng, Eigen::Index d, std::size_t M, const Hyper& hyper) {
    std::vector<Component> comps(M);
    double total = 0.0;
    for (Component& c : comps) {
        c.pi = 0.1 + uniform01(rng);
        total += c.pi;
        c.mu = normal_vector(rng, d);
        c.w = normal_vector(rng, d);
    }
    for (Component& c : comps) c.pi /= total;
    return MixturePrior(std::move(comps), hyper);
}

}  // namespace icl::testing
