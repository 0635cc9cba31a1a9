#pragma once

#include <chip/community.hpp>
#include <chip/errors.hpp>

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

namespace chip {

namespace detail {

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

// Contingency counts between two labelings; labels are compacted first so the
// table never exceeds the number of distinct values.
inline std::vector<std::vector<double>> contingency(std::span<const Label> a, std::span<const Label> b) {
    auto compact = [](std::span<const Label> x) {
        std::vector<Label> values(x.begin(), x.end());
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        std::vector<std::size_t> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            out[i] = static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), x[i]) - values.begin());
        return std::pair{out, values.size()};
    };
    auto [ca, ka] = compact(a);
    auto [cb, kb] = compact(b);
    std::vector<std::vector<double>> table(ka, std::vector<double>(kb, 0.0));
    for (std::size_t i = 0; i < ca.size(); ++i) table[ca[i]][cb[i]] += 1.0;
    return table;
}

}  // namespace detail

/// Adjusted Rand index between two labelings of the same nodes. Returns 1 when
/// the index is undefined because both labelings are trivial in the same way
/// (one cluster each, or all singletons).
inline double adjusted_rand(std::span<const Label> a, std::span<const Label> b) {
    if (a.size() != b.size()) throw DomainError("adjusted_rand: labelings differ in length");
    const double n = static_cast<double>(a.size());
    if (a.size() < 2) return 1.0;
    const auto table = detail::contingency(a, b);
    double sum_cells = 0.0;
    std::vector<double> col_sums(table.empty() ? 0 : table.front().size(), 0.0);
    double sum_rows = 0.0;
    for (const auto& row : table) {
        double r = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            sum_cells += detail::choose2(row[j]);
            r += row[j];
            col_sums[j] += row[j];
        }
        sum_rows += detail::choose2(r);
    }
    double sum_cols = 0.0;
    for (double c : col_sums) sum_cols += detail::choose2(c);
    const double expected = sum_rows * sum_cols / detail::choose2(n);
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (sum_cells - expected) / (max_index - expected);
}

inline double adjusted_rand(const CommunityAssignment& a, const CommunityAssignment& b) {
    return adjusted_rand(a.labels, b.labels);
}

/// Label map estimate -> truth that maximizes agreement. Exhaustive for k <= 8,
/// greedy on the largest contingency cells above that.
inline std::vector<Label> best_label_map(const CommunityAssignment& truth, const CommunityAssignment& estimate) {
    if (truth.num_nodes() != estimate.num_nodes()) throw DomainError("best_label_map: assignments differ in length");
    const std::size_t k = std::max(truth.k, estimate.k);
    std::vector<std::vector<double>> agree(k, std::vector<double>(k, 0.0));  // [estimate][truth]
    for (std::size_t i = 0; i < truth.num_nodes(); ++i) agree[estimate.labels[i]][truth.labels[i]] += 1.0;

    std::vector<Label> perm(k);
    std::iota(perm.begin(), perm.end(), Label{0});
    if (k <= 8) {
        std::vector<Label> best = perm;
        double best_score = -1.0;
        do {
            double score = 0.0;
            for (std::size_t e = 0; e < k; ++e) score += agree[e][perm[e]];
            if (score > best_score) {
                best_score = score;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    std::vector<bool> used_e(k, false), used_t(k, false);
    for (std::size_t step = 0; step < k; ++step) {
        double top = -1.0;
        std::size_t be = 0, bt = 0;
        for (std::size_t e = 0; e < k; ++e)
            for (std::size_t t = 0; t < k; ++t)
                if (!used_e[e] && !used_t[t] && agree[e][t] > top) {
                    top = agree[e][t];
                    be = e;
                    bt = t;
                }
        used_e[be] = used_t[bt] = true;
        perm[be] = static_cast<Label>(bt);
    }
    return perm;
}

/// Fraction of nodes whose label disagrees with the truth under the best
/// relabeling.
inline double misclustering_rate(const CommunityAssignment& truth, const CommunityAssignment& estimate) {
    const auto map = best_label_map(truth, estimate);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.num_nodes(); ++i)
        if (map[estimate.labels[i]] != truth.labels[i]) ++wrong;
    return truth.num_nodes() ? static_cast<double>(wrong) / static_cast<double>(truth.num_nodes()) : 0.0;
}

}  // namespace chip
