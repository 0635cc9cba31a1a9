#pragma once

// Block-pair parameter estimation given community assignments: count moments,
// method-of-moments (m, mu), a line search for beta on the profiled
// likelihood, block proportions, and normal-theory confidence intervals.

#include <chip/community.hpp>
#include <chip/event_log.hpp>
#include <chip/golden_section.hpp>
#include <chip/hawkes.hpp>
#include <chip/matrices.hpp>
#include <chip/parallel.hpp>
#include <chip/spectral.hpp>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace chip {

/// Per ordered block pair: number of node pairs, sample mean and unbiased
/// sample variance of the pair counts (pairs with no events count as zeros).
struct BlockPairStats {
    std::size_t k{1};
    Eigen::MatrixXd pair_count;  // n_ab
    Eigen::MatrixXd mean;        // NaN when n_ab == 0
    Eigen::MatrixXd variance;    // NaN when n_ab < 2
    Eigen::MatrixXd event_count;

    bool degenerate(Label a, Label b) const { return pair_count(a, b) < 2.0; }
};

/// Ordered node pairs per block pair: |a||b| off the diagonal, |a|(|a|-1) on it.
inline Eigen::MatrixXd block_pair_sizes(const CommunityAssignment& c) {
    const auto sizes = c.block_sizes();
    const auto k = static_cast<Eigen::Index>(c.k);
    Eigen::MatrixXd out(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) {
            const double sa = static_cast<double>(sizes[static_cast<std::size_t>(a)]);
            const double sb = static_cast<double>(sizes[static_cast<std::size_t>(b)]);
            out(a, b) = a == b ? sa * std::max(sa - 1.0, 0.0) : sa * sb;
        }
    return out;
}

/// Counts must be directed with a zero diagonal; labels index its rows.
inline BlockPairStats block_pair_stats(const SparseMatrix& counts, const CommunityAssignment& c) {
    c.validate();
    if (static_cast<std::size_t>(counts.rows()) != c.num_nodes() || counts.rows() != counts.cols())
        throw DomainError("block_pair_stats: matrix size differs from assignment");
    const auto k = static_cast<Eigen::Index>(c.k);
    BlockPairStats s;
    s.k = c.k;
    s.pair_count = block_pair_sizes(c);
    s.event_count = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd nonzero = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index r = 0; r < counts.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(counts, r); it; ++it) {
            if (it.row() == it.col() || it.value() == 0.0) continue;
            s.event_count(c.labels[static_cast<std::size_t>(it.row())], c.labels[static_cast<std::size_t>(it.col())]) +=
                it.value();
        }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.mean = Eigen::MatrixXd::Constant(k, k, nan);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b)
            if (s.pair_count(a, b) > 0.0) s.mean(a, b) = s.event_count(a, b) / s.pair_count(a, b);

    // Second pass about the mean; structural zeros contribute mean^2 each.
    Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index r = 0; r < counts.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(counts, r); it; ++it) {
            if (it.row() == it.col() || it.value() == 0.0) continue;
            const Label a = c.labels[static_cast<std::size_t>(it.row())];
            const Label b = c.labels[static_cast<std::size_t>(it.col())];
            const double dev = it.value() - s.mean(a, b);
            ss(a, b) += dev * dev;
            nonzero(a, b) += 1.0;
        }
    s.variance = Eigen::MatrixXd::Constant(k, k, nan);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) {
            const double np = s.pair_count(a, b);
            if (np < 2.0) continue;
            const double zeros = np - nonzero(a, b);
            s.variance(a, b) = (ss(a, b) + zeros * s.mean(a, b) * s.mean(a, b)) / (np - 1.0);
        }
    return s;
}

inline BlockPairStats block_pair_stats(const CountMatrix& counts, const CommunityAssignment& c) {
    if (counts.mode != Mode::directed) throw DomainError("block_pair_stats: requires the directed count matrix");
    return block_pair_stats(counts.values, c);
}

/// Conditions raised while estimating one block pair.
struct BlockFlags {
    bool degenerate{false};         // n_ab < 2
    bool poisson_fallback{false};   // zero variance or degenerate: m = 0, mu = mean / T
    bool ratio_clamped{false};      // raw moment ratio fell outside [0, 1 - 1e-6]
    bool beta_unidentified{false};  // ratio is zero, likelihood flat in beta
    bool no_events{false};          // block pair saw no events

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        if (degenerate) out.emplace_back("degenerate");
        if (poisson_fallback) out.emplace_back("poisson_fallback");
        if (ratio_clamped) out.emplace_back("ratio_clamped");
        if (beta_unidentified) out.emplace_back("beta_unidentified");
        if (no_events) out.emplace_back("no_events");
        return out;
    }
    bool any() const { return degenerate || poisson_fallback || ratio_clamped || beta_unidentified || no_events; }
};

struct MomentEstimates {
    Eigen::MatrixXd ratio;  // m_hat = alpha / beta
    Eigen::MatrixXd mu;
    std::vector<BlockFlags> flags;  // row-major k x k
};

inline constexpr double kMaxRatio = 1.0 - 1e-6;

/// m = 1 - sqrt(mean / var), mu = sqrt(mean^3 / var) / T, per block pair.
inline MomentEstimates moment_estimates(const BlockPairStats& s, double horizon) {
    if (!(horizon > 0.0)) throw DomainError("moment_estimates: horizon must be positive");
    const auto k = static_cast<Eigen::Index>(s.k);
    MomentEstimates e;
    e.ratio = Eigen::MatrixXd::Zero(k, k);
    e.mu = Eigen::MatrixXd::Zero(k, k);
    e.flags.assign(s.k * s.k, {});
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) {
            BlockFlags& f = e.flags[static_cast<std::size_t>(a * k + b)];
            const double mean = s.mean(a, b);
            const double var = s.variance(a, b);
            f.degenerate = s.pair_count(a, b) < 2.0;
            f.no_events = !(s.event_count(a, b) > 0.0);
            if (f.degenerate || !(var > 0.0)) {
                f.poisson_fallback = true;
                e.ratio(a, b) = 0.0;
                e.mu(a, b) = std::isfinite(mean) ? mean / horizon : 0.0;
                continue;
            }
            const double raw = 1.0 - std::sqrt(mean / var);
            e.ratio(a, b) = std::clamp(raw, 0.0, kMaxRatio);
            f.ratio_clamped = e.ratio(a, b) != raw;
            e.mu(a, b) = std::sqrt(mean * mean * mean / var) / horizon;
        }
    return e;
}

struct BetaSearch {
    double lower{1e-6};
    double upper{1e4};
    double tolerance{1e-6};
};

struct BetaFit {
    double beta{std::numeric_limits<double>::quiet_NaN()};
    double log_likelihood{std::numeric_limits<double>::quiet_NaN()};
    bool unidentified{false};
    bool no_events{false};
};

/// Maximizes the profiled likelihood in beta for one block pair. `paths` holds
/// the event times of the pairs that had events; `num_pairs` counts all node
/// pairs in the block pair (the rest contribute -mu T each).
template <class Range>
BetaFit fit_beta(const Range& paths, std::size_t num_pairs, double ratio, double mu, double horizon,
                 const BetaSearch& search = {}) {
    BetaFit out;
    std::size_t events = 0;
    std::size_t nonempty = 0;
    for (const auto& p : paths) {
        const std::size_t len = std::span<const double>(p).size();
        events += len;
        nonempty += len > 0 ? 1 : 0;
    }
    if (events == 0) {
        out.no_events = true;
        out.unidentified = true;
        return out;
    }
    if (!(ratio >= 0.0 && ratio < 1.0)) throw DomainError("fit_beta: ratio must lie in [0, 1)");
    if (!(mu > 0.0)) throw DomainError("fit_beta: mu must be positive");
    const double idle = -mu * horizon * static_cast<double>(num_pairs > nonempty ? num_pairs - nonempty : 0);
    auto objective = [&](double beta) {
        double total = idle;
        for (const auto& p : paths) {
            std::span<const double> t(p);
            if (!t.empty()) total += detail::loglik_terms(mu, ratio, beta, t, horizon);
        }
        return total;
    };
    if (ratio == 0.0) {
        out.beta = 0.5 * (search.lower + search.upper);
        out.log_likelihood = objective(out.beta);
        out.unidentified = true;
        return out;
    }
    const auto best = golden_section_maximize(objective, search.lower, search.upper, search.tolerance);
    out.beta = best.argmax;
    out.log_likelihood = best.value;
    return out;
}

/// Fraction of nodes in each block.
inline std::vector<double> estimate_pi(const CommunityAssignment& c) {
    c.validate();
    std::vector<double> pi(c.k, 0.0);
    if (c.labels.empty()) return pi;
    for (Label l : c.labels) pi[l] += 1.0;
    for (double& p : pi) p /= static_cast<double>(c.labels.size());
    return pi;
}

struct BlockParamEstimates {
    std::size_t k{1};
    std::vector<double> pi;
    Eigen::MatrixXd mu;
    Eigen::MatrixXd ratio;
    Eigen::MatrixXd alpha;
    Eigen::MatrixXd beta;  // NaN where the block pair had no events
    std::vector<BlockFlags> flags;

    const BlockFlags& flag(Label a, Label b) const { return flags[a * k + b]; }

    /// Parameters for likelihood evaluation. Block pairs without a usable beta
    /// have alpha = 0, so any positive beta gives the same value.
    HawkesParams block_params(Label a, Label b) const {
        const double bt = beta(a, b);
        const double al = alpha(a, b);
        if (!(al > 0.0) || !std::isfinite(bt)) return {mu(a, b), 0.0, 1.0};
        return {mu(a, b), al, bt};
    }
};

/// Event-time lists grouped by block pair (row-major a * k + b).
inline std::vector<std::vector<std::span<const double>>> group_by_block_pair(const PairEvents& pairs,
                                                                            const CommunityAssignment& c) {
    std::vector<std::vector<std::span<const double>>> groups(c.k * c.k);
    for (std::size_t p = 0; p < pairs.num_pairs(); ++p) {
        const auto& pr = pairs.pair(p);
        groups[c.labels[pr.sender] * c.k + c.labels[pr.receiver]].push_back(pairs.times(p));
    }
    return groups;
}

/// Everything after community detection: moments, beta line search per block
/// pair (block pairs run in parallel), and pi.
inline BlockParamEstimates estimate_parameters(const PairEvents& pairs, const CommunityAssignment& c,
                                               const BetaSearch& search = {}) {
    c.validate();
    if (c.num_nodes() != pairs.num_nodes()) throw DomainError("estimate_parameters: assignment size differs");
    const double horizon = pairs.horizon();
    const auto counts = build_matrices(pairs, Mode::directed).counts;
    const BlockPairStats stats = block_pair_stats(counts, c);
    const MomentEstimates mom = moment_estimates(stats, horizon);
    const auto groups = group_by_block_pair(pairs, c);

    const auto k = static_cast<Eigen::Index>(c.k);
    BlockParamEstimates est;
    est.k = c.k;
    est.pi = estimate_pi(c);
    est.mu = mom.mu;
    est.ratio = mom.ratio;
    est.alpha = Eigen::MatrixXd::Zero(k, k);
    est.beta = Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
    est.flags = mom.flags;

    std::vector<BetaFit> fits(c.k * c.k);
    parallel_for(fits.size(), [&](std::size_t idx) {
        const auto a = static_cast<Eigen::Index>(idx / c.k);
        const auto b = static_cast<Eigen::Index>(idx % c.k);
        if (!(mom.mu(a, b) > 0.0)) {
            fits[idx].no_events = fits[idx].unidentified = true;
            return;
        }
        fits[idx] = fit_beta(groups[idx], static_cast<std::size_t>(stats.pair_count(a, b)), mom.ratio(a, b),
                             mom.mu(a, b), horizon, search);
    });
    for (std::size_t idx = 0; idx < fits.size(); ++idx) {
        const auto a = static_cast<Eigen::Index>(idx / c.k);
        const auto b = static_cast<Eigen::Index>(idx % c.k);
        est.beta(a, b) = fits[idx].beta;
        est.alpha(a, b) = fits[idx].no_events ? 0.0 : fits[idx].beta * mom.ratio(a, b);
        est.flags[idx].beta_unidentified = fits[idx].unidentified;
        est.flags[idx].no_events = est.flags[idx].no_events || fits[idx].no_events;
    }
    return est;
}

enum class MatrixKind { weighted, binary };

struct FitOptions {
    MatrixKind matrix{MatrixKind::weighted};
    Mode mode{Mode::directed};
    SpectralOptions spectral{};
    BetaSearch beta_search{};
};

struct ChipFit {
    CommunityAssignment assignment;
    BlockParamEstimates params;
};

/// Community detection on the chosen adjacency matrix.
inline CommunityAssignment detect_communities(const PairEvents& pairs, std::size_t k, const FitOptions& opt = {}) {
    const auto mats = build_matrices(pairs, opt.mode);
    const SparseMatrix& m = opt.matrix == MatrixKind::weighted ? mats.counts.values : mats.binary.values;
    return spectral_cluster(m, k, opt.mode, opt.spectral);
}

/// Full estimation: spectral clustering on the count (or binary) matrix, then
/// per-block-pair estimation.
inline ChipFit fit_chip(const PairEvents& pairs, std::size_t k, const FitOptions& opt = {}) {
    ChipFit fit;
    fit.assignment = detect_communities(pairs, k, opt);
    fit.params = estimate_parameters(pairs, fit.assignment, opt.beta_search);
    return fit;
}

inline ChipFit fit_chip(const EventLog& log, std::size_t k, const FitOptions& opt = {}) {
    return fit_chip(PairEvents(log), k, opt);
}

/// Two-sided standard normal quantile z_{1 - tail}.
inline double normal_quantile_upper(double tail) {
    if (!(tail > 0.0 && tail < 1.0)) throw DomainError("normal_quantile_upper: tail must lie in (0, 1)");
    return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), tail));
}

struct Interval {
    double center{0.0};
    double half_width{std::numeric_limits<double>::quiet_NaN()};
    bool defined{true};

    double lower() const { return center - half_width; }
    double upper() const { return center + half_width; }
    bool covers(double x) const { return defined && lower() <= x && x <= upper(); }
};

/// Bonferroni-corrected simultaneous intervals for all k^2 ratios:
/// m_ab +- z_{1 - theta / (2 k^2)} sqrt(1 / (4 n_ab mean_ab)).
inline std::vector<Interval> m_confidence_intervals(const BlockPairStats& s, const Eigen::MatrixXd& ratio, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw DomainError("m_confidence_intervals: theta must lie in (0, 1)");
    const double kk = static_cast<double>(s.k);
    const double z = normal_quantile_upper(theta / (2.0 * kk * kk));
    std::vector<Interval> out;
    out.reserve(s.k * s.k);
    for (std::size_t a = 0; a < s.k; ++a)
        for (std::size_t b = 0; b < s.k; ++b) {
            const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
            Interval ci{ratio(ia, ib)};
            const double denom = 4.0 * s.pair_count(ia, ib) * s.mean(ia, ib);
            if (denom > 0.0)
                ci.half_width = z * std::sqrt(1.0 / denom);
            else
                ci.defined = false;
            out.push_back(ci);
        }
    return out;
}

struct MuDifference {
    Label a, b;  // minuend block pair (a, b)
    Label c, d;  // subtrahend block pair (c, d)
    Interval interval;
};

/// Intervals for mu_ab - mu_cd with the given normal quantile:
/// (1/T) sqrt(9/4 (mean_ab / n_ab + mean_cd / n_cd)).
inline Interval mu_difference_interval(const BlockPairStats& s, const Eigen::MatrixXd& mu, double horizon, Label a,
                                       Label b, Label c, Label d, double z) {
    Interval ci{mu(a, b) - mu(c, d)};
    const double n1 = s.pair_count(a, b), n2 = s.pair_count(c, d);
    const double m1 = s.mean(a, b), m2 = s.mean(c, d);
    if (n1 > 0.0 && n2 > 0.0 && std::isfinite(m1) && std::isfinite(m2))
        ci.half_width = z / horizon * std::sqrt(2.25 * (m1 / n1 + m2 / n2));
    else
        ci.defined = false;
    return ci;
}

/// The 2k(k-1) diagonal-versus-off-diagonal differences mu_aa - mu_ab and
/// mu_aa - mu_ba (b != a), Bonferroni-corrected with z_{1 - theta / (4 k (k-1))}.
inline std::vector<MuDifference> mu_pairwise_difference_intervals(const BlockPairStats& s, const Eigen::MatrixXd& mu,
                                                                  double horizon, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw DomainError("mu_pairwise_difference_intervals: theta must lie in (0, 1)");
    if (!(horizon > 0.0)) throw DomainError("mu_pairwise_difference_intervals: horizon must be positive");
    std::vector<MuDifference> out;
    if (s.k < 2) return out;
    const double kk = static_cast<double>(s.k);
    const double z = normal_quantile_upper(theta / (4.0 * (kk - 1.0) * kk));
    for (Label a = 0; a < s.k; ++a)
        for (Label b = 0; b < s.k; ++b) {
            if (a == b) continue;
            out.push_back({a, a, a, b, mu_difference_interval(s, mu, horizon, a, a, a, b, z)});
            out.push_back({a, a, b, a, mu_difference_interval(s, mu, horizon, a, a, b, a, z)});
        }
    return out;
}

}  // namespace chip
