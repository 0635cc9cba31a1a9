#pragma once

// Sampling relational-event networks: node blocks are drawn (or fixed), then
// every ordered pair i != j runs an independent Hawkes process whose
// parameters depend only on the pair's block pair.

#include <chip/community.hpp>
#include <chip/event_log.hpp>
#include <chip/hawkes.hpp>
#include <chip/parallel.hpp>
#include <chip/random.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

namespace chip {

struct ChipModelSpec {
    std::size_t n{0};
    std::size_t k{1};
    std::vector<double> pi;
    Eigen::MatrixXd mu;
    Eigen::MatrixXd alpha;
    Eigen::MatrixXd beta;
    double horizon{1.0};

    HawkesParams block_params(Label a, Label b) const { return {mu(a, b), alpha(a, b), beta(a, b)}; }

    void validate() const {
        if (k == 0) throw DomainError("model spec: k must be positive");
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("model spec: horizon must be positive");
        if (pi.size() != k) throw DomainError("model spec: pi must have k entries");
        double total = 0.0;
        for (double p : pi) {
            if (!(p >= 0.0)) throw DomainError("model spec: pi entries must be nonnegative");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12) throw DomainError("model spec: pi must sum to 1");
        const auto kk = static_cast<Eigen::Index>(k);
        for (const Eigen::MatrixXd* m : {&mu, &alpha, &beta})
            if (m->rows() != kk || m->cols() != kk) throw DomainError("model spec: parameter matrices must be k x k");
        if (!(mu.array() > 0.0).all()) throw DomainError("model spec: mu must be positive");
        if (!(beta.array() > 0.0).all()) throw DomainError("model spec: beta must be positive");
        if (!(alpha.array() >= 0.0).all()) throw DomainError("model spec: alpha must be nonnegative");
    }

    /// Block pairs (a, b) with alpha >= beta.
    std::vector<std::pair<Label, Label>> nonstationary_pairs() const {
        std::vector<std::pair<Label, Label>> out;
        for (Eigen::Index a = 0; a < mu.rows(); ++a)
            for (Eigen::Index b = 0; b < mu.cols(); ++b)
                if (!(alpha(a, b) < beta(a, b))) out.emplace_back(static_cast<Label>(a), static_cast<Label>(b));
        return out;
    }
};

/// Two-value parameterization: (mu1, alpha1, beta1) on diagonal block pairs,
/// (mu2, alpha2, beta2) off the diagonal, equal block probabilities.
struct SimplifiedSpec {
    std::size_t n{0};
    std::size_t k{1};
    double mu1{0.0}, alpha1{0.0}, beta1{1.0};
    double mu2{0.0}, alpha2{0.0}, beta2{1.0};
    double horizon{1.0};
};

inline ChipModelSpec expand_simplified(const SimplifiedSpec& s) {
    if (s.k == 0) throw DomainError("expand_simplified: k must be positive");
    const auto k = static_cast<Eigen::Index>(s.k);
    ChipModelSpec spec;
    spec.n = s.n;
    spec.k = s.k;
    spec.pi.assign(s.k, 1.0 / static_cast<double>(s.k));
    spec.horizon = s.horizon;
    auto pattern = [k](double diag, double off) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Constant(k, k, off);
        m.diagonal().setConstant(diag);
        return m;
    };
    spec.mu = pattern(s.mu1, s.mu2);
    spec.alpha = pattern(s.alpha1, s.alpha2);
    spec.beta = pattern(s.beta1, s.beta2);
    return spec;
}

/// Independent categorical draws from pi.
inline CommunityAssignment sample_communities(const ChipModelSpec& spec, Rng& rng) {
    spec.validate();
    std::discrete_distribution<Label> draw(spec.pi.begin(), spec.pi.end());
    CommunityAssignment c{std::vector<Label>(spec.n), spec.k};
    for (auto& l : c.labels) l = draw(rng);
    return c;
}

/// Per-pair event times generated pair by pair, in (sender, receiver) order.
/// This is the natural output of the generator; EventLog is its time-sorted
/// flattening.
struct PairTimes {
    std::size_t num_nodes{0};
    double horizon{1.0};
    std::vector<NodeId> senders;
    std::vector<NodeId> receivers;
    std::vector<std::vector<double>> times;
};

using WarningSink = std::function<void(const std::string&)>;

inline void warn_to_stderr(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

/// Simulates every ordered pair i != j. Pair (i, j) draws from a stream seeded
/// by (seed, i, j), so the result does not depend on thread scheduling.
/// Pairs with no events are dropped.
inline PairTimes simulate_pairs(const ChipModelSpec& spec, const CommunityAssignment& assignment, std::uint64_t seed,
                                const WarningSink& warn = warn_to_stderr) {
    spec.validate();
    assignment.validate();
    if (assignment.num_nodes() != spec.n) throw DomainError("sample_network: assignment must cover all nodes");
    if (assignment.k != spec.k) throw DomainError("sample_network: assignment block count differs from spec");
    for (auto [a, b] : spec.nonstationary_pairs())
        if (warn)
            warn("block pair (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                 ") has alpha >= beta; simulating a nonstationary process");

    const std::size_t n = spec.n;
    std::vector<PairTimes> rows(n);
    parallel_for(n, [&](std::size_t i) {
        PairTimes& row = rows[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            Rng rng = make_rng(seed, {i, j});
            auto t = simulate_times(spec.block_params(assignment.labels[i], assignment.labels[j]), spec.horizon, rng);
            if (t.empty()) continue;
            row.senders.push_back(static_cast<NodeId>(i));
            row.receivers.push_back(static_cast<NodeId>(j));
            row.times.push_back(std::move(t));
        }
    });

    PairTimes out;
    out.num_nodes = n;
    out.horizon = spec.horizon;
    for (auto& row : rows) {
        out.senders.insert(out.senders.end(), row.senders.begin(), row.senders.end());
        out.receivers.insert(out.receivers.end(), row.receivers.begin(), row.receivers.end());
        for (auto& t : row.times) out.times.push_back(std::move(t));
    }
    return out;
}

inline EventLog flatten(const PairTimes& pairs) {
    EventLog log;
    log.num_nodes = pairs.num_nodes;
    log.horizon = pairs.horizon;
    std::size_t total = 0;
    for (const auto& t : pairs.times) total += t.size();
    log.events.reserve(total);
    for (std::size_t p = 0; p < pairs.times.size(); ++p)
        for (double t : pairs.times[p]) log.events.push_back({pairs.senders[p], pairs.receivers[p], t});
    sort_by_time(log.events);
    return log;
}

inline PairEvents to_pair_events(const PairTimes& pairs) {
    PairEvents out(pairs.num_nodes, pairs.horizon);
    for (std::size_t p = 0; p < pairs.times.size(); ++p) out.append(pairs.senders[p], pairs.receivers[p], pairs.times[p]);
    return out;
}

/// Full network sample, events sorted by timestamp (ties by pair order).
inline EventLog sample_network(const ChipModelSpec& spec, const CommunityAssignment& assignment, std::uint64_t seed,
                               const WarningSink& warn = warn_to_stderr) {
    return flatten(simulate_pairs(spec, assignment, seed, warn));
}

}  // namespace chip
