#pragma once

// JSON views of fits and held-out evaluations, and the full real-data report.

#include <chip/estimation.hpp>
#include <chip/likelihood_eval.hpp>
#include <chip/spectral.hpp>

#include <json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace chip {

using Json = nlohmann::ordered_json;

namespace detail {

// NaN and infinities become null.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json matrix_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Json interval_json(const Interval& ci) {
    return {{"estimate", number(ci.center)},
            {"lower", ci.defined ? number(ci.lower()) : Json(nullptr)},
            {"upper", ci.defined ? number(ci.upper()) : Json(nullptr)}};
}

}  // namespace detail

/// {k, pi_hat, mu_hat, alpha_hat, beta_hat, m_hat, flags}; flags is a k x k
/// table of flag-name lists. Undefined entries are null.
inline Json fit_json(const BlockParamEstimates& p) {
    Json flags = Json::array();
    for (std::size_t a = 0; a < p.k; ++a) {
        Json row = Json::array();
        for (std::size_t b = 0; b < p.k; ++b) row.push_back(p.flag(static_cast<Label>(a), static_cast<Label>(b)).names());
        flags.push_back(std::move(row));
    }
    return {{"k", p.k},
            {"pi_hat", p.pi},
            {"mu_hat", detail::matrix_json(p.mu)},
            {"alpha_hat", detail::matrix_json(p.alpha)},
            {"beta_hat", detail::matrix_json(p.beta)},
            {"m_hat", detail::matrix_json(p.ratio)},
            {"flags", flags}};
}

inline Json eval_json(const std::string& dataset, std::size_t k, const std::string& model, double ll_per_event,
                      const EvalResult& r, std::uint64_t seed) {
    return {{"dataset", dataset}, {"k", k},           {"model", model},         {"test_ll_per_event", detail::number(ll_per_event)},
            {"n", r.n},           {"l_train", r.l_train}, {"l_test", r.l_test}, {"seed", seed}};
}

/// Both models' entries for one evaluation.
inline Json eval_json(const std::string& dataset, std::size_t k, const EvalResult& r, std::uint64_t seed) {
    return Json::array({eval_json(dataset, k, "chip", r.chip_ll_per_event, r, seed),
                        eval_json(dataset, k, "poisson", r.poisson_ll_per_event, r, seed)});
}

struct SplitSpec {
    std::optional<std::size_t> test_count{};
    double test_fraction{0.2};

    SplitLog apply(const EventLog& log) const {
        return test_count ? split_by_count(log, *test_count) : split_by_fraction(log, test_fraction);
    }
};

struct RealFitOptions {
    std::optional<std::size_t> k{};  // empty: choose by eigengap
    std::size_t k_max{10};
    SplitSpec split{};
    FitOptions fit{};
    double theta{0.05};
};

struct RealFitReport {
    std::size_t k{1};
    bool k_from_eigengap{false};
    std::vector<double> singular_values;
    EvalResult eval;
    BlockPairStats stats;  // training counts under the fitted blocks
    std::vector<std::size_t> block_sizes;
    std::vector<Interval> m_intervals;
    std::vector<MuDifference> mu_differences;
};

/// Held-out evaluation plus the exploratory tables: singular values of the
/// training matrix, block sizes, block-pair event counts, and confidence
/// intervals for m and mu differences on the training window.
inline RealFitReport fit_real(const EventLog& log, const RealFitOptions& opt = {}) {
    RealFitReport rep;
    const SplitLog split = opt.split.apply(log);
    const auto active = detail::active_nodes(split.train);

    // Training events over the nodes that occur in them.
    std::vector<std::int64_t> compact(split.train.num_nodes, -1);
    for (std::size_t i = 0; i < active.size(); ++i) compact[active[i]] = static_cast<std::int64_t>(i);
    EventLog train = split.train;
    train.num_nodes = active.size();
    for (auto& e : train.events) {
        e.sender = static_cast<NodeId>(compact[e.sender]);
        e.receiver = static_cast<NodeId>(compact[e.receiver]);
    }
    const PairEvents pairs(train);
    const auto mats = build_matrices(pairs, opt.fit.mode);
    const SparseMatrix& m = opt.fit.matrix == MatrixKind::weighted ? mats.counts.values : mats.binary.values;

    const std::size_t k_max = std::min(opt.k_max, active.size());
    if (opt.k) {
        if (*opt.k > log.num_nodes) throw DomainError("fit_real: k exceeds the number of nodes");
        rep.k = *opt.k;
    }
    if (k_max >= 2) {
        const auto gap = eigengap_select_k(m, k_max, opt.fit.spectral.svd);
        rep.singular_values = gap.singular_values;
        if (!opt.k) {
            rep.k = gap.k;
            rep.k_from_eigengap = true;
        }
    } else if (!opt.k) {
        rep.k = 1;
    }

    rep.eval = evaluate_split(split, rep.k, opt.fit);
    CommunityAssignment train_assignment{std::vector<Label>(active.size()), rep.k};
    for (std::size_t i = 0; i < active.size(); ++i) train_assignment.labels[i] = rep.eval.assignment.labels[active[i]];
    rep.block_sizes = train_assignment.block_sizes();
    rep.stats = block_pair_stats(build_matrices(pairs, Mode::directed).counts, train_assignment);
    rep.m_intervals = m_confidence_intervals(rep.stats, rep.eval.params.ratio, opt.theta);
    rep.mu_differences = mu_pairwise_difference_intervals(rep.stats, rep.eval.params.mu, split.train.horizon, opt.theta);
    return rep;
}

inline Json report_json(const std::string& dataset, const RealFitReport& rep, std::uint64_t seed, double theta) {
    Json m_ci = Json::array();
    for (std::size_t idx = 0; idx < rep.m_intervals.size(); ++idx) {
        Json row = detail::interval_json(rep.m_intervals[idx]);
        row["a"] = idx / rep.k;
        row["b"] = idx % rep.k;
        m_ci.push_back(std::move(row));
    }
    Json mu_ci = Json::array();
    for (const auto& d : rep.mu_differences) {
        Json row = detail::interval_json(d.interval);
        row["minuend"] = {d.a, d.b};
        row["subtrahend"] = {d.c, d.d};
        mu_ci.push_back(std::move(row));
    }
    return {{"dataset", dataset},
            {"k", rep.k},
            {"k_from_eigengap", rep.k_from_eigengap},
            {"singular_values", rep.singular_values},
            {"evaluation", eval_json(dataset, rep.k, rep.eval, seed)},
            {"train_horizon", rep.eval.train_horizon},
            {"horizon", rep.eval.horizon},
            {"n_train_nodes", rep.eval.n_train_nodes},
            {"fit", fit_json(rep.eval.params)},
            {"block_sizes", rep.block_sizes},
            {"block_event_counts", detail::matrix_json(rep.stats.event_count)},
            {"theta", theta},
            {"m_intervals", m_ci},
            {"mu_difference_intervals", mu_ci}};
}

}  // namespace chip
