#include <chip/hawkes.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

using namespace chip;

namespace {

// Direct double sum over event pairs.
double quadratic_loglik(const HawkesParams& p, const std::vector<double>& t, double horizon) {
    double ll = -p.mu * horizon;
    for (std::size_t q = 0; q < t.size(); ++q) {
        double excite = 0.0;
        for (std::size_t i = 0; i < q; ++i) excite += std::exp(-p.beta * (t[q] - t[i]));
        ll += std::log(p.mu + p.alpha * excite);
        ll -= p.alpha / p.beta * (1.0 - std::exp(-p.beta * (horizon - t[q])));
    }
    return ll;
}

double direct_intensity(const HawkesParams& p, const std::vector<double>& t, double at) {
    double v = p.mu;
    for (double ti : t)
        if (ti < at) v += p.alpha * std::exp(-p.beta * (at - ti));
    return v;
}

std::vector<double> sorted_uniform(std::size_t l, double horizon, std::mt19937_64& g) {
    std::uniform_real_distribution<double> u(0.0, horizon);
    std::vector<double> t(l);
    for (auto& x : t) x = u(g);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

}  // namespace

TEST(HawkesParams, StationarityFlag) {
    EXPECT_TRUE((HawkesParams{1.0, 0.5, 1.0}).stationary());
    EXPECT_FALSE((HawkesParams{1.0, 1.0, 1.0}).stationary());
    EXPECT_FALSE((HawkesParams{1.0, 2.0, 1.0}).stationary());
}

TEST(HawkesParams, ValidateRejectsBadValues) {
    EXPECT_THROW((HawkesParams{0.0, 0.5, 1.0}).validate(), DomainError);
    EXPECT_THROW((HawkesParams{1.0, -0.1, 1.0}).validate(), DomainError);
    EXPECT_THROW((HawkesParams{1.0, 0.5, 0.0}).validate(), DomainError);
    EXPECT_NO_THROW((HawkesParams{1.0, 0.0, 1.0}).validate());
}

TEST(EventTimes, RejectsUnsortedDuplicateAndOutOfWindow) {
    EXPECT_THROW(EventTimes({1.0, 0.5}, 2.0), DomainError);
    EXPECT_THROW(EventTimes({1.0, 1.0}, 2.0), DomainError);
    EXPECT_THROW(EventTimes({1.0, 3.0}, 2.0), DomainError);
    EXPECT_THROW(EventTimes({-0.1}, 2.0), DomainError);
    EXPECT_NO_THROW(EventTimes({0.0, 2.0}, 2.0));
}

TEST(Intensity, MatchesDirectSum) {
    const HawkesParams p{0.3, 0.8, 1.7};
    const EventTimes ev({0.5, 1.0, 2.5, 4.0}, 5.0);
    for (double t : {0.0, 0.5, 0.7, 1.0, 2.0, 3.3, 4.0, 5.0})
        EXPECT_NEAR(intensity_at(p, ev, t), direct_intensity(p, {0.5, 1.0, 2.5, 4.0}, t), 1e-14);
}

TEST(Intensity, NoEventsGivesBaseline) {
    const HawkesParams p{0.3, 0.8, 1.7};
    EXPECT_DOUBLE_EQ(intensity_at(p, EventTimes({}, 3.0), 1.0), 0.3);
}

TEST(Intensity, JumpsByAlphaJustAfterAnEvent) {
    const HawkesParams p{0.3, 0.8, 1.7};
    const EventTimes ev({1.0, 2.0}, 5.0);
    const double at = intensity_at(p, ev, 2.0);
    const double after = intensity_at(p, ev, 2.0 + 1e-12);
    EXPECT_NEAR(after - at, p.alpha, 1e-9);
    EXPECT_GE(at, p.mu);
}

TEST(Intensity, OutsideWindowThrows) {
    const EventTimes ev({1.0}, 2.0);
    EXPECT_THROW(intensity_at({1, 0.5, 1}, ev, -0.1), DomainError);
    EXPECT_THROW(intensity_at({1, 0.5, 1}, ev, 2.1), DomainError);
}

TEST(LogLikelihood, SingleEventIsBaselineTerm) {
    const HawkesParams p{0.4, 0.6, 2.0};
    const double expected = -0.4 * 3.0 - 0.3 * (1.0 - std::exp(-2.0 * 2.0)) + std::log(0.4);
    EXPECT_NEAR(log_likelihood(p, std::vector<double>{1.0}, 3.0), expected, 1e-14);
}

TEST(LogLikelihood, EmptyPathIsMinusMuT) {
    EXPECT_DOUBLE_EQ(log_likelihood({0.25, 0.5, 1.0}, std::vector<double>{}, 4.0), -1.0);
}

TEST(LogLikelihood, MatchesQuadraticOracleOnRandomPaths) {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    std::uniform_int_distribution<std::size_t> len(1, 120);
    for (int trial = 0; trial < 200; ++trial) {
        const double horizon = 10.0 * u(g);
        const HawkesParams p{u(g), u(g), u(g) + 0.1};
        const auto t = sorted_uniform(len(g), horizon, g);
        const double ref = quadratic_loglik(p, t, horizon);
        EXPECT_NEAR(log_likelihood(p, t, horizon), ref, 1e-10 * std::abs(ref)) << "trial " << trial;
    }
}

TEST(LogLikelihood, EventAtHorizonIncluded) {
    const HawkesParams p{0.5, 0.5, 1.0};
    const std::vector<double> t{1.0, 4.0};
    EXPECT_NEAR(log_likelihood(p, t, 4.0), quadratic_loglik(p, t, 4.0), 1e-13);
}

TEST(LogLikelihood, LongGapsDoNotProduceNaN) {
    const HawkesParams p{0.1, 5.0, 10.0};
    const std::vector<double> t{0.0, 1e4, 2e4};
    const double ll = log_likelihood(p, t, 3e4);
    EXPECT_TRUE(std::isfinite(ll));
    EXPECT_NEAR(ll, -0.1 * 3e4 - 1.5 + 3 * std::log(0.1), 1e-9);
}

TEST(LogLikelihood, ZeroRateThrows) {
    EXPECT_THROW(log_likelihood({0.0, 1.0, 1.0}, std::vector<double>{1.0}, 2.0), NumericalError);
}

TEST(ClampedExp, BelowCutoffIsZero) {
    EXPECT_EQ(clamped_exp(-701.0), 0.0);
    EXPECT_EQ(clamped_exp(-1.0), std::exp(-1.0));
}

TEST(Profiled, EqualsPlainLikelihoodWithAlphaFromRatio) {
    const std::vector<std::vector<double>> paths{{0.5, 1.2, 3.0}, {}, {2.0, 2.1}};
    const double beta = 1.3, ratio = 0.4, mu = 0.2, horizon = 5.0;
    double expected = 0.0;
    for (const auto& p : paths) expected += log_likelihood({mu, beta * ratio, beta}, p, horizon);
    EXPECT_NEAR(profiled_log_likelihood(beta, ratio, mu, paths, horizon), expected, 1e-13);
}

TEST(Profiled, InvariantUnderPermutationOfPaths) {
    std::mt19937_64 g(3);
    std::vector<std::vector<double>> paths;
    for (int i = 0; i < 6; ++i) paths.push_back(sorted_uniform(10 + i, 20.0, g));
    const double a = profiled_log_likelihood(0.7, 0.5, 0.3, paths, 20.0);
    std::vector<std::vector<double>> shuffled = paths;
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    std::reverse(shuffled.begin(), shuffled.end());
    EXPECT_NEAR(profiled_log_likelihood(0.7, 0.5, 0.3, shuffled, 20.0), a, 1e-10 * std::abs(a));
}

TEST(Profiled, EventTimesOverloadChecksHorizon) {
    const std::array<EventTimes, 2> same{EventTimes({1.0}, 4.0), EventTimes({2.0}, 4.0)};
    EXPECT_NO_THROW(profiled_log_likelihood(1.0, 0.5, 0.2, std::span<const EventTimes>(same)));
    const std::array<EventTimes, 2> mixed{EventTimes({1.0}, 4.0), EventTimes({2.0}, 5.0)};
    EXPECT_THROW(profiled_log_likelihood(1.0, 0.5, 0.2, std::span<const EventTimes>(mixed)), DomainError);
}

TEST(Profiled, RejectsRatioOutsideUnitInterval) {
    const std::vector<std::vector<double>> paths{{1.0}};
    EXPECT_THROW(profiled_log_likelihood(1.0, 1.0, 0.2, paths, 2.0), DomainError);
    EXPECT_THROW(profiled_log_likelihood(0.0, 0.5, 0.2, paths, 2.0), DomainError);
}

TEST(Simulate, ReproducibleForFixedSeed) {
    const HawkesParams p{0.5, 0.6, 1.0};
    Rng a(42), b(42);
    EXPECT_EQ(simulate_times(p, 200.0, a), simulate_times(p, 200.0, b));
}

TEST(Simulate, PathIsValidEventTimes) {
    const HawkesParams p{0.5, 0.9, 1.0};
    Rng g(5);
    const auto ev = simulate(p, 100.0, g);
    EXPECT_GT(ev.size(), 0u);
    EXPECT_NO_THROW(EventTimes::validate(ev.times(), 100.0));
}

TEST(Simulate, PoissonCaseMatchesMeanAndVariance) {
    const HawkesParams p{2.0, 0.0, 1.0};
    const double horizon = 10.0;
    const int reps = 2000;
    Rng g(9);
    double sum = 0, sumsq = 0;
    for (int r = 0; r < reps; ++r) {
        const double c = static_cast<double>(simulate_times(p, horizon, g).size());
        sum += c;
        sumsq += c * c;
    }
    const double mean = sum / reps;
    const double var = (sumsq - reps * mean * mean) / (reps - 1);
    const double lambda = p.mu * horizon;
    EXPECT_NEAR(mean, lambda, 3.0 * std::sqrt(lambda / reps));
    // Sample variance of Poisson counts has variance about 2 lambda^2 / reps for large lambda.
    EXPECT_NEAR(var, lambda, 3.0 * std::sqrt((lambda + 2.0 * lambda * lambda) / reps));
}

TEST(Simulate, NonstationaryParametersStillSimulate) {
    const HawkesParams p{0.1, 1.0, 1.0};
    Rng g(1);
    EXPECT_NO_THROW(simulate_times(p, 5.0, g));
}
