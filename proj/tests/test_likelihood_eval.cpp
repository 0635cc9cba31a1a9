#include <chip/generator.hpp>
#include <chip/likelihood_eval.hpp>
#include <chip/metrics.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace chip;

namespace {

EventLog bursty_log(std::uint64_t seed, std::size_t n = 40, double horizon = 400.0) {
    const SimplifiedSpec s{n, 2, 0.01, 0.8, 1.0, 0.002, 0.6, 1.0, horizon};
    return sample_network(expand_simplified(s), round_robin_assignment(n, 2), seed);
}

// Conditional log-likelihood of the test events given the training history,
// with intensities summed directly over earlier events of the same pair.
double conditional_test_loglik(const EvalResult& r, const SplitLog& split) {
    const double t0 = split.train.horizon, t1 = split.test.horizon;
    const auto n = r.n;
    std::vector<std::vector<double>> history(n * n);
    for (const auto& e : split.train.events) history[e.sender * n + e.receiver].push_back(e.time);
    double ll = 0.0;
    for (const auto& e : split.test.events) {
        const auto p = r.params.block_params(r.assignment.labels[e.sender], r.assignment.labels[e.receiver]);
        double lambda = p.mu;
        for (double s : history[e.sender * n + e.receiver])
            if (s < e.time) lambda += p.alpha * std::exp(-p.beta * (e.time - s));
        ll += std::log(lambda);
        history[e.sender * n + e.receiver].push_back(e.time);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto p = r.params.block_params(r.assignment.labels[i], r.assignment.labels[j]);
            ll -= p.mu * (t1 - t0);
            for (double s : history[i * n + j])
                ll -= p.alpha / p.beta * (std::exp(-p.beta * std::max(0.0, t0 - s)) - std::exp(-p.beta * (t1 - s)));
        }
    return ll;
}

double poisson_test_loglik(const EvalResult& r, const SplitLog& split) {
    const double dt = split.test.horizon - split.train.horizon;
    double ll = 0.0;
    for (const auto& e : split.test.events)
        ll += std::log(r.poisson_rate(r.assignment.labels[e.sender], r.assignment.labels[e.receiver]));
    for (std::size_t i = 0; i < r.n; ++i)
        for (std::size_t j = 0; j < r.n; ++j)
            if (i != j) ll -= r.poisson_rate(r.assignment.labels[i], r.assignment.labels[j]) * dt;
    return ll;
}

}  // namespace

TEST(Split, ChronologicalWithHorizons) {
    EventLog log{{{0, 1, 1.0}, {1, 0, 2.0}, {0, 1, 3.0}, {1, 0, 4.0}, {0, 1, 5.0}}, 2, 10.0};
    const auto s = split_by_count(log, 2);
    EXPECT_EQ(s.train.size(), 3u);
    EXPECT_EQ(s.test.size(), 2u);
    EXPECT_DOUBLE_EQ(s.train.horizon, 3.0);
    EXPECT_DOUBLE_EQ(s.test.horizon, 10.0);
    EXPECT_EQ(merge(s), log);
    EXPECT_EQ(split_by_fraction(log, 0.2).test.size(), 1u);
}

TEST(Split, RejectsEmptySides) {
    EventLog log{{{0, 1, 1.0}, {1, 0, 2.0}}, 2, 3.0};
    EXPECT_THROW(split_by_count(log, 0), DomainError);
    EXPECT_THROW(split_by_count(log, 2), DomainError);
    EXPECT_THROW(split_by_fraction(log, 1.0), DomainError);
}

TEST(Split, TieMayStraddleBoundary) {
    EventLog log{{{0, 1, 1.0}, {1, 0, 2.0}, {0, 2, 2.0}}, 3, 3.0};
    const auto s = split_by_count(log, 1);
    EXPECT_EQ(s.test.events.front(), (Event{0, 2, 2.0}));
    EXPECT_DOUBLE_EQ(s.train.horizon, 2.0);
}

TEST(FullLogLikelihood, MatchesPerPairSum) {
    const auto log = bursty_log(3, 12, 100.0);
    const PairEvents pairs(log);
    const auto fit = fit_chip(pairs, 2);
    double expected = 0.0;
    std::vector<std::vector<std::vector<double>>> by_pair(12, std::vector<std::vector<double>>(12));
    for (const auto& e : log.events) by_pair[e.sender][e.receiver].push_back(e.time);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 12; ++j)
            if (i != j)
                expected += log_likelihood(
                    fit.params.block_params(fit.assignment.labels[i], fit.assignment.labels[j]), by_pair[i][j], 100.0);
    EXPECT_NEAR(full_log_likelihood(fit.params, fit.assignment, pairs, 100.0), expected, 1e-9 * std::abs(expected));
}

TEST(EvaluateSplit, MatchesConditionalOracle) {
    const auto log = bursty_log(5);
    const auto split = split_by_fraction(log, 0.2);
    const auto r = evaluate_split(split, 2);
    const double ref = conditional_test_loglik(r, split) / static_cast<double>(split.test.size());
    EXPECT_NEAR(r.chip_ll_per_event, ref, 1e-10 * std::abs(ref));
    const double pref = poisson_test_loglik(r, split) / static_cast<double>(split.test.size());
    EXPECT_NEAR(r.poisson_ll_per_event, pref, 1e-10 * std::abs(pref));
}

TEST(EvaluateSplit, PoissonRateIsMeanCountOverTrainingWindow) {
    const auto log = bursty_log(6);
    const auto split = split_by_count(log, 100);
    const auto r = evaluate_split(split, 2);
    const auto stats = block_pair_stats(build_matrices(split.train, Mode::directed).counts, r.assignment);
    for (Eigen::Index a = 0; a < 2; ++a)
        for (Eigen::Index b = 0; b < 2; ++b)
            EXPECT_NEAR(r.poisson_rate(a, b), stats.mean(a, b) / split.train.horizon, 1e-15);
    EXPECT_EQ(r.l_train + r.l_test, log.size());
    EXPECT_EQ(r.n, log.num_nodes);
}

TEST(EvaluateSplit, InvariantUnderNodeRelabeling) {
    const auto log = bursty_log(7, 30, 300.0);
    // Reverse the node ids.
    EventLog rev = log;
    for (auto& e : rev.events) {
        e.sender = static_cast<NodeId>(29 - e.sender);
        e.receiver = static_cast<NodeId>(29 - e.receiver);
    }
    const auto a = evaluate_split(split_by_fraction(log, 0.25), 2);
    const auto b = evaluate_split(split_by_fraction(rev, 0.25), 2);
    ASSERT_DOUBLE_EQ(adjusted_rand(a.assignment.labels, std::vector<Label>(b.assignment.labels.rbegin(),
                                                                          b.assignment.labels.rend())),
                     1.0);
    EXPECT_NEAR(a.chip_ll_per_event, b.chip_ll_per_event, 1e-6 * std::abs(a.chip_ll_per_event));
    EXPECT_NEAR(a.poisson_ll_per_event, b.poisson_ll_per_event, 1e-9 * std::abs(a.poisson_ll_per_event));
}

// Complete directed graphs within each group, `weight` events per ordered
// pair per round. Group sizes and weights are chosen so the two leading
// singular values come from different groups.
void add_groups(EventLog& log, double& t, const std::vector<std::vector<NodeId>>& groups,
                const std::vector<int>& weight, int rounds) {
    for (int rep = 0; rep < rounds; ++rep)
        for (std::size_t g = 0; g < groups.size(); ++g)
            for (int w = 0; w < weight[g]; ++w)
                for (NodeId i : groups[g])
                    for (NodeId j : groups[g])
                        if (i != j) log.events.push_back({i, j, t += 0.01});
}

TEST(EvaluateSplit, UnseenNodesJoinLargestBlock) {
    // Nodes 0-11 talk in training; node 12 appears only in the test window.
    EventLog log{{}, 13, 0.0};
    double t = 0.0;
    add_groups(log, t, {{0, 1, 2, 3, 4, 5, 6, 7}, {8, 9, 10, 11}}, {1, 1}, 5);
    log.events.push_back({12, 9, t += 0.01});
    log.events.push_back({9, 12, t += 0.01});
    log.horizon = t;
    const auto split = split_by_count(log, 2);
    const auto r = evaluate_split(split, 2);
    EXPECT_EQ(r.n_train_nodes, 12u);
    EXPECT_NE(r.assignment.labels[0], r.assignment.labels[8]);
    EXPECT_EQ(r.assignment.labels[12], r.assignment.labels[0]);  // block of nodes 0-7 is largest
    EXPECT_TRUE(std::isfinite(r.chip_ll_per_event));
    EXPECT_TRUE(std::isfinite(r.poisson_ll_per_event));
}

TEST(EvaluateSplit, TestEventInEmptyBlockPairUsesFloor) {
    EventLog log{{}, 8, 0.0};
    double t = 0.0;
    add_groups(log, t, {{0, 1, 2, 3}, {4, 5, 6, 7}}, {1, 2}, 5);
    log.events.push_back({0, 7, t += 0.01});
    log.horizon = t;
    const auto split = split_by_count(log, 1);
    const auto r = evaluate_split(split, 2);
    const Label a = r.assignment.labels[0], b = r.assignment.labels[7];
    ASSERT_NE(a, b);
    EXPECT_DOUBLE_EQ(r.poisson_rate(a, b), detail::rate_floor(16.0, split.train.horizon));
    EXPECT_DOUBLE_EQ(r.params.mu(a, b), detail::rate_floor(16.0, split.train.horizon));
    EXPECT_TRUE(std::isfinite(r.chip_ll_per_event));
}

TEST(EvaluateSplit, HawkesBeatsPoissonOnBurstyData) {
    const auto log = bursty_log(9, 60, 600.0);
    const auto r = evaluate_split(split_by_fraction(log, 0.2), 2);
    EXPECT_GT(r.chip_ll_per_event, r.poisson_ll_per_event);
}

TEST(EvaluateSplit, KTooLargeThrows) {
    EventLog log{{{0, 1, 1.0}, {1, 0, 2.0}, {0, 1, 3.0}}, 5, 3.0};
    EXPECT_THROW(evaluate_split(split_by_count(log, 1), 3), DomainError);
}
