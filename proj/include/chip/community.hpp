#pragma once

#include <chip/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <vector>

namespace chip {

using Label = std::uint32_t;

/// Block label per node, 0-based in memory (1-based in exported files).
struct CommunityAssignment {
    std::vector<Label> labels;
    std::size_t k{1};

    std::size_t num_nodes() const noexcept { return labels.size(); }

    void validate() const {
        if (k == 0) throw DomainError("assignment must have at least one block");
        for (Label l : labels)
            if (l >= k) throw DomainError("assignment label out of range");
    }

    std::vector<std::size_t> block_sizes() const {
        std::vector<std::size_t> sizes(k, 0);
        for (Label l : labels) ++sizes[l];
        return sizes;
    }

    /// n x k membership matrix with a single 1 per row.
    Eigen::MatrixXd membership() const {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(k));
        for (std::size_t i = 0; i < labels.size(); ++i) c(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
        return c;
    }

    /// Index of the most populous block; ties go to the lowest index.
    Label largest_block() const {
        auto sizes = block_sizes();
        return static_cast<Label>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    }

    friend bool operator==(const CommunityAssignment&, const CommunityAssignment&) = default;
};

/// Exactly balanced assignment: node i goes to block i mod k.
inline CommunityAssignment round_robin_assignment(std::size_t n, std::size_t k) {
    if (k == 0) throw DomainError("round_robin_assignment: k must be positive");
    CommunityAssignment c{std::vector<Label>(n), k};
    for (std::size_t i = 0; i < n; ++i) c.labels[i] = static_cast<Label>(i % k);
    return c;
}

}  // namespace chip
