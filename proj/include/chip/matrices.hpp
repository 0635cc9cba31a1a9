#pragma once

#include <chip/event_log.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <vector>

namespace chip {

enum class Mode { directed, undirected };

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Event-count matrix N (zero diagonal), stored sparse.
struct CountMatrix {
    SparseMatrix values;
    Mode mode{Mode::directed};

    std::size_t num_nodes() const noexcept { return static_cast<std::size_t>(values.rows()); }
    double total() const { return values.sum(); }
    double operator()(std::size_t i, std::size_t j) const {
        return values.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
};

/// A_ij = 1{N_ij > 0}.
struct BinaryAdjacency {
    SparseMatrix values;

    std::size_t num_nodes() const noexcept { return static_cast<std::size_t>(values.rows()); }
    double operator()(std::size_t i, std::size_t j) const {
        return values.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
};

struct AdjacencyMatrices {
    CountMatrix counts;
    BinaryAdjacency binary;
};

namespace detail {

inline AdjacencyMatrices finish_matrices(std::size_t n, std::vector<Eigen::Triplet<double>>& triplets, Mode mode) {
    const auto nn = static_cast<Eigen::Index>(n);
    SparseMatrix counts(nn, nn);
    counts.setFromTriplets(triplets.begin(), triplets.end());  // duplicates are summed
    if (mode == Mode::undirected) {
        SparseMatrix transposed = counts.transpose();
        counts = counts + transposed;
    }
    counts.makeCompressed();
    SparseMatrix binary = counts;
    for (Eigen::Index r = 0; r < binary.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(binary, r); it; ++it) it.valueRef() = it.value() > 0.0 ? 1.0 : 0.0;
    binary.prune(0.0);
    return {CountMatrix{std::move(counts), mode}, BinaryAdjacency{std::move(binary)}};
}

}  // namespace detail

/// Directed: N_ij counts events i -> j. Undirected: N + N^T, with A taken from
/// the symmetrized counts.
inline AdjacencyMatrices build_matrices(const EventLog& log, Mode mode = Mode::directed) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(log.events.size());
    for (const auto& e : log.events)
        triplets.emplace_back(static_cast<Eigen::Index>(e.sender), static_cast<Eigen::Index>(e.receiver), 1.0);
    return detail::finish_matrices(log.num_nodes, triplets, mode);
}

inline AdjacencyMatrices build_matrices(const PairEvents& pairs, Mode mode = Mode::directed) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(pairs.num_pairs());
    for (std::size_t p = 0; p < pairs.num_pairs(); ++p)
        triplets.emplace_back(static_cast<Eigen::Index>(pairs.pair(p).sender),
                              static_cast<Eigen::Index>(pairs.pair(p).receiver),
                              static_cast<double>(pairs.times(p).size()));
    return detail::finish_matrices(pairs.num_nodes(), triplets, mode);
}

}  // namespace chip
