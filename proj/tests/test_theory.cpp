#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "icl/errors.hpp"
#include "icl/mixprior.hpp"
#include "icl/theory.hpp"
#include "icl/tolerances.hpp"

using namespace icl;
using icl::testing::ctx1;
using icl::testing::random_context;
using icl::testing::random_prior;
using icl::testing::vec;

TEST(Assumption2, PlusMinusOneInputsSatisfyEigenAndIdentity) {
    const ContextSequence c = ctx1({1.0, -1.0, 1.0}, {0.5, -0.5, 0.5}, 1.0);
    const Assumption2Report r = check_assumption2(c, Hyper(1, 1, 1, 1), vec({1.0}), vec({0.0}));
    EXPECT_TRUE(r.all_min_eig());
    EXPECT_TRUE(r.cond_identity);
    EXPECT_TRUE(r.zero_label_indices.empty());
}

TEST(Assumption2, CrossTermVanishesOnRepeatedPair) {
    const ContextSequence c = ctx1({1.0, 1.0}, {1.0, 1.0}, 0.0);
    const Assumption2Report r = check_assumption2(c, Hyper(1, 1, 1, 1), vec({1.0}), vec({0.0}));
    EXPECT_EQ(r.cross_value, 0.0);
    EXPECT_TRUE(r.cond_cross);
    EXPECT_TRUE(r.all_hold);
}

TEST(Assumption2, GaussianInputsInTwoDimsFailEigenCondition) {
    Rng rng(5);
    const ContextSequence c = random_context(rng, 2, 4);
    const Assumption2Report r = check_assumption2(c, Hyper(1, 1, 1, 1), vec({1, 0}), vec({0, 1}));
    ASSERT_EQ(r.cond_min_eig.size(), 4u);
    EXPECT_FALSE(r.all_min_eig());
    EXPECT_FALSE(r.all_hold);
}

TEST(Assumption2, SmallInputFailsEigenCondition) {
    const ContextSequence c = ctx1({0.5, 1.0}, {1.0, 1.0}, 0.0);
    const Assumption2Report r = check_assumption2(c, Hyper(1, 1, 1, 1), vec({1.0}), vec({0.0}));
    EXPECT_FALSE(r.cond_min_eig[0]);
    EXPECT_TRUE(r.cond_min_eig[1]);
    EXPECT_FALSE(r.cond_identity);
}

TEST(Assumption2, ZeroLabelsAreSkippedAndReported) {
    const ContextSequence c = ctx1({1.0, -1.0, 1.0}, {0.0, 1.0, 0.0}, 0.0);
    const Assumption2Report r = check_assumption2(c, Hyper(1, 1, 1, 1), vec({1.0}), vec({-1.0}));
    ASSERT_EQ(r.zero_label_indices.size(), 2u);
    EXPECT_EQ(r.zero_label_indices[0], 0u);
    EXPECT_EQ(r.zero_label_indices[1], 2u);
    EXPECT_TRUE(std::isfinite(r.cross_value));
}

TEST(Assumption2, Errors) {
    ContextSequence empty;
    empty.query = vec({0.0});
    EXPECT_THROW(check_assumption2(empty, Hyper(1, 1, 1, 1), vec({1}), vec({0})), InvalidArgument);
    EXPECT_THROW(check_assumption2(ctx1({1}, {1}, 0), Hyper(1, 1, 1, 1), vec({1, 0}), vec({0, 0})),
                 DimensionMismatch);
}

TEST(EmpiricalRiskGap, HandValue) {
    // beta residuals 1 and 2, alpha residuals 0 and 0.
    const ContextSequence c = ctx1({1.0, 2.0}, {1.0, 2.0}, 0.0);
    EXPECT_DOUBLE_EQ(empirical_risk_gap(c, vec({1.0}), vec({0.0})), 2.5);
    EXPECT_DOUBLE_EQ(empirical_risk_gap(c, vec({0.0}), vec({1.0})), -2.5);
}

TEST(Theorem1, PlusMinusOneContextsNeverViolate) {
    // d = 1, x = +/-1: whenever the lower-risk component is alpha, psi_w >= 0.
    Rng rng(17);
    const Hyper h(1.0, 0.8, 1.0, 1.3);
    int checked = 0;
    for (int t = 0; t < 2000; ++t) {
        ContextSequence c;
        const int T = 1 + t % 10;
        for (int i = 0; i < T; ++i) {
            c.xs.push_back(vec({uniform01(rng) < 0.5 ? -1.0 : 1.0}));
            c.ys.push_back(standard_normal(rng));
        }
        c.query = vec({1.0});
        const Vec wa = normal_vector(rng, 1);
        const Vec wb = normal_vector(rng, 1);
        if (empirical_risk_gap(c, wa, wb) < 0.0) continue;
        if (!check_assumption2(c, h, wa, wb).all_hold) continue;
        ++checked;
        EXPECT_GE(psi_w_pair(c, h, wa, wb), -tol::kTheoremSlack);
    }
    EXPECT_GT(checked, 100);
}

TEST(Theorem1, PropertyTrialReportsZeroViolations) {
    const Theorem1Report r = theorem1_property_trial(99, 500);
    EXPECT_EQ(r.requested, 500u);
    EXPECT_EQ(r.filtered, 500u);
    EXPECT_GE(r.attempts, r.filtered);
    EXPECT_EQ(r.violations, 0u);
    EXPECT_GE(r.min_psi_w, -tol::kTheoremSlack);
}

TEST(Theorem1, ThreadCountDoesNotChangeTheReport) {
    Theorem1Options one;
    Theorem1Options four;
    four.threads = 4;
    const Theorem1Report a = theorem1_property_trial(3, 300, one);
    const Theorem1Report b = theorem1_property_trial(3, 300, four);
    EXPECT_EQ(a.attempts, b.attempts);
    EXPECT_EQ(a.min_psi_w, b.min_psi_w);
}

TEST(Theorem1, ZeroTrialsIsAnError) {
    EXPECT_THROW(theorem1_property_trial(1, 0), InvalidArgument);
}

TEST(Theorem1, ExploratoryModeRequiresTwoDims) {
    EXPECT_THROW(theorem1_exploratory(1, 1, 10), InvalidArgument);
    const ExploratoryReport r = theorem1_exploratory(1, 2, 200);
    EXPECT_EQ(r.trials, 200u);
    EXPECT_LE(r.sign_violations, r.risk_favored);
    EXPECT_DOUBLE_EQ(r.violation_rate,
                     r.risk_favored == 0 ? 0.0 : static_cast<double>(r.sign_violations) / r.risk_favored);
}

TEST(Lemma1, AnalyticLimitOfDocumentedInstance) {
    EXPECT_DOUBLE_EQ(lemma1_analytic_limit(Vec::Zero(3), Vec::Zero(3), Vec::Unit(3, 0), Hyper(1, 1, 1, 1)), 0.5);
    EXPECT_DOUBLE_EQ(lemma1_analytic_limit(Vec::Zero(1), vec({0.0}), vec({2.0}), Hyper(1, 1, 2, 1)), 0.5);
}

TEST(Lemma1, NoiselessInputsConvergeMonotonically) {
    const std::vector<std::size_t> schedule{10, 100, 1000, 10000};
    const auto pts = lemma1_limit_check(Vec::Zero(3), 0.0, Vec::Zero(3), Vec::Unit(3, 0), Hyper(1, 1, 1, 1),
                                        schedule, 1);
    ASSERT_EQ(pts.size(), schedule.size());
    double prev = INFINITY;
    for (const LimitPoint& p : pts) {
        const double gap = std::abs(p.psi_mu_pair - p.analytic_limit);
        EXPECT_LE(gap, prev);
        prev = gap;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(Lemma1, Errors) {
    const Hyper h(1, 1, 1, 1);
    EXPECT_THROW(lemma1_limit_check(Vec::Zero(2), 1.0, Vec::Unit(2, 0), Vec::Zero(2), h, {10}, 1), InvalidArgument);
    EXPECT_THROW(lemma1_limit_check(Vec::Zero(2), -1.0, Vec::Zero(2), Vec::Unit(2, 0), h, {10}, 1), InvalidArgument);
    EXPECT_THROW(lemma1_limit_check(Vec::Zero(2), 1.0, Vec::Zero(3), Vec::Unit(2, 0), h, {10}, 1), DimensionMismatch);
}

TEST(MonteCarloOracle, AgreesWithClosedFormOnSmallInstance) {
    Rng rng(21);
    const MixturePrior prior = random_prior(rng, 2, 3, Hyper(1.0, 1.0, 1.0, 1.0));
    const ContextSequence c = random_context(rng, 2, 3);
    const OracleEstimate est = mc_bayes_oracle(prior, c, 200000, 4);
    const double closed = posterior(prior, c).prediction;
    EXPECT_GT(est.std_error, 0.0);
    EXPECT_LT(std::abs(est.mean - closed), 4.0 * est.std_error);
    EXPECT_EQ(est.n_samples, 200000u);
}

TEST(MonteCarloOracle, EmptyContextReturnsPriorMean) {
    const MixturePrior prior({{0.5, vec({0}), vec({2})}, {0.5, vec({0}), vec({-2})}}, Hyper(1, 1, 1, 0.1));
    ContextSequence c;
    c.query = vec({0.0});
    // Query at zero makes every sample's value zero.
    const OracleEstimate est = mc_bayes_oracle(prior, c, 1000, 1);
    EXPECT_EQ(est.mean, 0.0);
    EXPECT_EQ(est.std_error, 0.0);
}

TEST(MonteCarloOracle, SameSeedSameEstimate) {
    Rng rng(2);
    const MixturePrior prior = random_prior(rng, 1, 2, Hyper(1, 1, 1, 1));
    const ContextSequence c = random_context(rng, 1, 2);
    const OracleEstimate a = mc_bayes_oracle(prior, c, 5000, 8);
    const OracleEstimate b = mc_bayes_oracle(prior, c, 5000, 8);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
    EXPECT_EQ(a.effective_sample_size, b.effective_sample_size);
}

TEST(MonteCarloOracle, SharpLikelihoodRaisesLowConfidence) {
    const MixturePrior prior({{1.0, vec({0}), vec({0})}}, Hyper(1.0, 0.01, 1.0, 1.0));
    const ContextSequence c = ctx1({1, -1, 1, -1, 1, -1}, {0.7, -0.7, 0.7, -0.7, 0.7, -0.7}, 1.0);
    try {
        mc_bayes_oracle(prior, c, 1000, 3);
        FAIL() << "expected LowConfidenceError";
    } catch (const LowConfidenceError& e) {
        EXPECT_LT(e.effective_sample_size(), tol::kMinEffectiveSampleSize);
    }
}

TEST(MonteCarloOracle, RejectsTooFewSamples) {
    const MixturePrior prior({{1.0, vec({0}), vec({0})}}, Hyper(1, 1, 1, 1));
    EXPECT_THROW(mc_bayes_oracle(prior, ctx1({1}, {1}, 1), 999, 1), InvalidArgument);
}

TEST(QuadratureOracle, SingleComponentMatchesConjugateMean) {
    const MixturePrior prior({{1.0, vec({0.3}), vec({-0.4})}}, Hyper(1.0, 0.7, 1.2, 0.9));
    const ContextSequence c = ctx1({0.5, -1.2, 2.0}, {0.1, 0.9, -0.8}, 1.5);
    EXPECT_NEAR(quadrature_oracle_1d(prior, c, 512), posterior(prior, c).prediction, 1e-6);
}

TEST(QuadratureOracle, MixtureMatchesClosedFormAndRefines) {
    Rng rng(12);
    const MixturePrior prior = random_prior(rng, 1, 3, Hyper(1.0, 0.8, 1.0, 1.1));
    const ContextSequence c = random_context(rng, 1, 5);
    const double coarse = quadrature_oracle_1d(prior, c, 512);
    const double fine = quadrature_oracle_1d(prior, c, 1024);
    const double closed = posterior(prior, c).prediction;
    EXPECT_NEAR(coarse, closed, tol::kQuadratureAgreement);
    EXPECT_LE(std::abs(fine - closed), std::abs(coarse - closed) + 1e-12);
}

TEST(QuadratureOracle, SignFlipNegatesPrediction) {
    const Hyper h(1.0, 1.0, 1.0, 1.0);
    const MixturePrior prior({{0.4, vec({1.0}), vec({0.5})}, {0.6, vec({-1.0}), vec({-2.0})}}, h);
    const MixturePrior flipped({{0.4, vec({1.0}), vec({-0.5})}, {0.6, vec({-1.0}), vec({2.0})}}, h);
    const ContextSequence c = ctx1({0.3, -0.8}, {0.4, 1.1}, 0.7);
    const ContextSequence cf = ctx1({0.3, -0.8}, {-0.4, -1.1}, 0.7);
    EXPECT_NEAR(quadrature_oracle_1d(prior, c, 512), -quadrature_oracle_1d(flipped, cf, 512), 1e-12);
}

TEST(QuadratureOracle, Errors) {
    const MixturePrior two_d({{1.0, vec({0, 0}), vec({0, 0})}}, Hyper(1, 1, 1, 1));
    ContextSequence c2;
    c2.query = vec({0, 0});
    EXPECT_THROW(quadrature_oracle_1d(two_d, c2, 512), InvalidArgument);
    const MixturePrior one_d({{1.0, vec({0}), vec({0})}}, Hyper(1, 1, 1, 1));
    EXPECT_THROW(quadrature_oracle_1d(one_d, ctx1({1}, {1}, 1), 255), InvalidArgument);
}
