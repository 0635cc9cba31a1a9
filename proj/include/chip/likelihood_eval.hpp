#pragma once

// Held-out evaluation: fit on the chronologically first events, then score the
// remaining ones by LL(full log, T) - LL(training log, T_train), per test event.

#include <chip/estimation.hpp>
#include <chip/event_log.hpp>

#include <cmath>
#include <unordered_map>
#include <vector>

namespace chip {

struct SplitLog {
    EventLog train;  // horizon = last training timestamp
    EventLog test;   // horizon = horizon of the full log
};

/// Chronological split keeping the last `test_count` events for testing.
/// Events sharing a timestamp stay in input order, so a tie can straddle the
/// boundary.
inline SplitLog split_by_count(const EventLog& log, std::size_t test_count) {
    if (test_count == 0 || test_count >= log.size())
        throw DomainError("split_by_count: test size must lie strictly between 0 and the event count");
    const std::size_t train_count = log.size() - test_count;
    SplitLog s;
    s.train.num_nodes = s.test.num_nodes = log.num_nodes;
    s.train.events.assign(log.events.begin(), log.events.begin() + static_cast<std::ptrdiff_t>(train_count));
    s.test.events.assign(log.events.begin() + static_cast<std::ptrdiff_t>(train_count), log.events.end());
    s.train.horizon = s.train.events.back().time;
    s.test.horizon = log.horizon;
    if (!(s.train.horizon > 0.0)) throw DomainError("split_by_count: training window has zero length");
    return s;
}

/// Test size is round(fraction * event count).
inline SplitLog split_by_fraction(const EventLog& log, double test_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DomainError("split_by_fraction: fraction must lie in (0, 1)");
    return split_by_count(log, static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(log.size()))));
}

inline EventLog merge(const SplitLog& s) {
    EventLog log;
    log.num_nodes = s.train.num_nodes;
    log.horizon = s.test.horizon;
    log.events = s.train.events;
    log.events.insert(log.events.end(), s.test.events.begin(), s.test.events.end());
    return log;
}

/// Sum over every ordered pair i != j of the pair's Hawkes log-likelihood on
/// [0, horizon]; pairs without events contribute -mu_ab * horizon.
inline double full_log_likelihood(const BlockParamEstimates& params, const CommunityAssignment& c,
                                  const PairEvents& pairs, double horizon) {
    c.validate();
    if (c.num_nodes() != pairs.num_nodes()) throw DomainError("full_log_likelihood: assignment size differs");
    if (c.k != params.k) throw DomainError("full_log_likelihood: block count differs");
    const auto sizes = block_pair_sizes(c);
    Eigen::MatrixXd idle = sizes;
    double total = 0.0;
    for (std::size_t p = 0; p < pairs.num_pairs(); ++p) {
        const auto& pr = pairs.pair(p);
        const Label a = c.labels[pr.sender], b = c.labels[pr.receiver];
        total += log_likelihood(params.block_params(a, b), pairs.times(p), horizon);
        idle(a, b) -= 1.0;
    }
    for (Eigen::Index a = 0; a < idle.rows(); ++a)
        for (Eigen::Index b = 0; b < idle.cols(); ++b) total -= params.mu(a, b) * horizon * idle(a, b);
    return total;
}

/// Homogeneous Poisson counterpart: -rate * horizon + N_ij log rate per pair.
inline double poisson_log_likelihood(const Eigen::MatrixXd& rate, const CommunityAssignment& c, const PairEvents& pairs,
                                     double horizon) {
    const auto sizes = block_pair_sizes(c);
    double total = 0.0;
    for (Eigen::Index a = 0; a < sizes.rows(); ++a)
        for (Eigen::Index b = 0; b < sizes.cols(); ++b) total -= rate(a, b) * horizon * sizes(a, b);
    for (std::size_t p = 0; p < pairs.num_pairs(); ++p) {
        const auto& pr = pairs.pair(p);
        const double r = rate(c.labels[pr.sender], c.labels[pr.receiver]);
        if (!(r > 0.0)) throw NumericalError("poisson_log_likelihood: event in a block pair with zero rate");
        total += static_cast<double>(pairs.times(p).size()) * std::log(r);
    }
    return total;
}

struct EvalResult {
    double chip_ll_per_event{0.0};
    double poisson_ll_per_event{0.0};
    std::size_t n{0};
    std::size_t n_train_nodes{0};
    std::size_t l_train{0};
    std::size_t l_test{0};
    double train_horizon{0.0};
    double horizon{0.0};
    CommunityAssignment assignment;  // over all n nodes
    BlockParamEstimates params;
    Eigen::MatrixXd poisson_rate;
};

namespace detail {

// Node ids that occur in `log`, in increasing order.
inline std::vector<NodeId> active_nodes(const EventLog& log) {
    std::vector<bool> seen(log.num_nodes, false);
    for (const auto& e : log.events) seen[e.sender] = seen[e.receiver] = true;
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (seen[i]) out.push_back(static_cast<NodeId>(i));
    return out;
}

// Rates at zero are raised to half an event over the block pair's window so
// that test events there keep a finite likelihood.
inline double rate_floor(double pair_count, double horizon) { return 0.5 / (std::max(pair_count, 1.0) * horizon); }

}  // namespace detail

/// Fits CHIP on the training events (clustering only nodes seen in training;
/// unseen nodes join the largest block) and scores both CHIP and the
/// block-Poisson baseline on the test events.
inline EvalResult evaluate_split(const SplitLog& split, std::size_t k, const FitOptions& opt = {}) {
    if (split.test.empty()) throw DomainError("evaluate_split: empty test set");
    if (k < 1) throw DomainError("evaluate_split: k must be at least 1");
    const std::size_t n = split.train.num_nodes;
    const double t_train = split.train.horizon;
    const double t_full = split.test.horizon;

    const auto active = detail::active_nodes(split.train);
    if (k > active.size()) throw DomainError("evaluate_split: k exceeds the number of nodes seen in training");
    std::vector<std::int64_t> compact(n, -1);
    for (std::size_t i = 0; i < active.size(); ++i) compact[active[i]] = static_cast<std::int64_t>(i);
    EventLog train_compact;
    train_compact.num_nodes = active.size();
    train_compact.horizon = t_train;
    train_compact.events.reserve(split.train.size());
    for (const auto& e : split.train.events)
        train_compact.events.push_back(
            {static_cast<NodeId>(compact[e.sender]), static_cast<NodeId>(compact[e.receiver]), e.time});

    const PairEvents train_pairs_compact(train_compact);
    const ChipFit fit = fit_chip(train_pairs_compact, k, opt);

    EvalResult r;
    r.n = n;
    r.n_train_nodes = active.size();
    r.l_train = split.train.size();
    r.l_test = split.test.size();
    r.train_horizon = t_train;
    r.horizon = t_full;
    r.params = fit.params;

    const Label largest = fit.assignment.largest_block();
    r.assignment = CommunityAssignment{std::vector<Label>(n, largest), k};
    for (std::size_t i = 0; i < active.size(); ++i) r.assignment.labels[active[i]] = fit.assignment.labels[i];

    const BlockPairStats stats =
        block_pair_stats(build_matrices(train_pairs_compact, Mode::directed).counts, fit.assignment);
    r.poisson_rate = Eigen::MatrixXd(stats.mean.rows(), stats.mean.cols());
    for (Eigen::Index a = 0; a < stats.mean.rows(); ++a)
        for (Eigen::Index b = 0; b < stats.mean.cols(); ++b) {
            const double floor = detail::rate_floor(stats.pair_count(a, b), t_train);
            const double mean = stats.mean(a, b);
            r.poisson_rate(a, b) = std::isfinite(mean) && mean > 0.0 ? mean / t_train : floor;
            if (!(r.params.mu(a, b) > 0.0)) r.params.mu(a, b) = floor;
        }

    const EventLog full = merge(split);
    const PairEvents full_pairs(full);
    const PairEvents train_pairs(split.train);
    const double test_events = static_cast<double>(split.test.size());
    r.chip_ll_per_event = (full_log_likelihood(r.params, r.assignment, full_pairs, t_full) -
                           full_log_likelihood(r.params, r.assignment, train_pairs, t_train)) /
                          test_events;
    r.poisson_ll_per_event = (poisson_log_likelihood(r.poisson_rate, r.assignment, full_pairs, t_full) -
                              poisson_log_likelihood(r.poisson_rate, r.assignment, train_pairs, t_train)) /
                             test_events;
    return r;
}

inline double mean_test_loglik_per_event(const SplitLog& split, std::size_t k, const FitOptions& opt = {}) {
    return evaluate_split(split, k, opt).chip_ll_per_event;
}

inline double poisson_baseline(const SplitLog& split, std::size_t k, const FitOptions& opt = {}) {
    return evaluate_split(split, k, opt).poisson_ll_per_event;
}

}  // namespace chip
