#pragma once

// Spectral community detection on count or binary adjacency matrices.

#include <chip/community.hpp>
#include <chip/kmeans.hpp>
#include <chip/linalg.hpp>
#include <chip/matrices.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <vector>

namespace chip {

struct SpectralOptions {
    std::uint64_t seed{0};
    KMeansOptions kmeans{};
    SvdOptions svd{};
};

namespace detail {

inline CommunityAssignment cluster_rows(const Eigen::MatrixXd& rows, std::size_t k, const SpectralOptions& opt) {
    auto result = kmeans(rows, k, opt.seed, opt.kmeans);
    return CommunityAssignment{std::move(result.labels), k};
}

inline void check_k(std::size_t n, std::size_t k) {
    if (k < 1) throw DomainError("spectral clustering: k must be at least 1");
    if (k > n) throw DomainError("spectral clustering: k exceeds the number of nodes");
}

}  // namespace detail

/// Directed spectral clustering: top-k left and right singular vectors are
/// concatenated into an n x 2k embedding, each row scaled to unit length
/// (all-zero rows stay zero), then clustered with k-means.
inline CommunityAssignment spectral_cluster_directed(const SparseMatrix& m, std::size_t k, const SpectralOptions& opt = {}) {
    const auto n = static_cast<std::size_t>(m.rows());
    detail::check_k(n, k);
    if (m.rows() != m.cols()) throw DomainError("spectral clustering: matrix must be square");
    const auto kk = static_cast<Eigen::Index>(k);
    const TruncatedSvd svd = truncated_svd(m, kk, opt.svd);
    Eigen::MatrixXd z(m.rows(), 2 * kk);
    z << svd.left, svd.right;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double norm = z.row(i).norm();
        if (norm > 0.0) z.row(i) /= norm;
    }
    return detail::cluster_rows(z, k, opt);
}

inline CommunityAssignment spectral_cluster_directed(const CountMatrix& m, std::size_t k, const SpectralOptions& opt = {}) {
    return spectral_cluster_directed(m.values, k, opt);
}

inline CommunityAssignment spectral_cluster_directed(const BinaryAdjacency& m, std::size_t k,
                                                     const SpectralOptions& opt = {}) {
    return spectral_cluster_directed(m.values, k, opt);
}

/// Eigenvectors of a symmetric matrix for its k largest-magnitude eigenvalues,
/// ordered by decreasing magnitude.
inline Eigen::MatrixXd leading_eigenvectors(const SparseMatrix& m, std::size_t k, const SvdOptions& svd_opt = {}) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (m.rows() > svd_opt.dense_limit) {
        // For symmetric M the left singular vectors are eigenvectors and the
        // singular values are the eigenvalue magnitudes.
        return truncated_svd(m, kk, svd_opt).left;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(m)};
    if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigendecomposition failed");
    const Eigen::VectorXd& values = eig.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return std::abs(values(a)) > std::abs(values(b)); });
    Eigen::MatrixXd out(m.rows(), kk);
    for (Eigen::Index c = 0; c < kk; ++c) out.col(c) = eig.eigenvectors().col(order[static_cast<std::size_t>(c)]);
    return out;
}

inline bool is_symmetric(const SparseMatrix& m, double tol = 0.0) {
    if (m.rows() != m.cols()) return false;
    SparseMatrix diff = m - SparseMatrix(m.transpose());
    for (Eigen::Index r = 0; r < diff.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(diff, r); it; ++it)
            if (std::abs(it.value()) > tol) return false;
    return true;
}

/// Undirected spectral clustering: k-means on the rows of the eigenvector
/// matrix (no row normalization).
inline CommunityAssignment spectral_cluster_undirected(const SparseMatrix& m, std::size_t k,
                                                       const SpectralOptions& opt = {}) {
    const auto n = static_cast<std::size_t>(m.rows());
    detail::check_k(n, k);
    if (!is_symmetric(m)) throw DomainError("spectral_cluster_undirected: matrix is not symmetric");
    return detail::cluster_rows(leading_eigenvectors(m, k, opt.svd), k, opt);
}

inline CommunityAssignment spectral_cluster_undirected(const CountMatrix& m, std::size_t k,
                                                       const SpectralOptions& opt = {}) {
    return spectral_cluster_undirected(m.values, k, opt);
}

inline CommunityAssignment spectral_cluster_undirected(const BinaryAdjacency& m, std::size_t k,
                                                       const SpectralOptions& opt = {}) {
    return spectral_cluster_undirected(m.values, k, opt);
}

inline CommunityAssignment spectral_cluster(const SparseMatrix& m, std::size_t k, Mode mode,
                                            const SpectralOptions& opt = {}) {
    return mode == Mode::directed ? spectral_cluster_directed(m, k, opt) : spectral_cluster_undirected(m, k, opt);
}

struct EigengapResult {
    std::size_t k{1};
    std::vector<double> singular_values;  // top k_max, descending
};

/// Picks k in [1, k_max - 1] at the largest drop sigma_k - sigma_{k+1};
/// earliest k on ties.
inline EigengapResult eigengap_select_k(std::span<const double> singular_values) {
    if (singular_values.size() < 2) throw DomainError("eigengap_select_k: need at least two singular values");
    EigengapResult out;
    out.singular_values.assign(singular_values.begin(), singular_values.end());
    double best_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < singular_values.size(); ++i) {
        const double gap = singular_values[i] - singular_values[i + 1];
        if (gap > best_gap) {
            best_gap = gap;
            out.k = i + 1;
        }
    }
    return out;
}

inline EigengapResult eigengap_select_k(const SparseMatrix& m, std::size_t k_max, const SvdOptions& opt = {}) {
    if (k_max < 2) throw DomainError("eigengap_select_k: k_max must be at least 2");
    if (k_max > static_cast<std::size_t>(m.rows())) throw DomainError("eigengap_select_k: k_max exceeds n");
    const TruncatedSvd svd = truncated_svd(m, static_cast<Eigen::Index>(k_max), opt);
    std::vector<double> values(svd.values.data(), svd.values.data() + svd.values.size());
    return eigengap_select_k(values);
}

}  // namespace chip
