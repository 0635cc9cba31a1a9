#pragma once

// Leading singular triplets of a (possibly large, sparse) matrix.

#include <chip/errors.hpp>
#include <chip/random.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <string>

namespace chip {

struct TruncatedSvd {
    Eigen::VectorXd values;  // descending
    Eigen::MatrixXd left;    // n x k
    Eigen::MatrixXd right;   // n x k
};

struct SvdOptions {
    /// Matrices with at most this many rows use a dense factorization.
    Eigen::Index dense_limit{2000};
    /// Residual tolerance relative to the largest singular value.
    double tolerance{1e-8};
    int max_iterations{1000};
    Eigen::Index oversample{10};
    std::uint64_t seed{0x5eed};
};

namespace detail {

inline TruncatedSvd dense_svd(const Eigen::MatrixXd& m, Eigen::Index k) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericalError("dense SVD failed to converge");
    return {svd.singularValues().head(k), svd.matrixU().leftCols(k), svd.matrixV().leftCols(k)};
}

inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& x) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    return qr.householderQ() * Eigen::MatrixXd::Identity(x.rows(), x.cols());
}

// Block subspace iteration on M M^T with Rayleigh-Ritz extraction. Converged
// when every kept triplet satisfies ||M v - s u|| and ||M^T u - s v|| below
// tolerance * s_1.
template <class Matrix>
TruncatedSvd subspace_svd(const Matrix& m, Eigen::Index k, const SvdOptions& opt) {
    const Eigen::Index rows = m.rows();
    const Eigen::Index cols = m.cols();
    const Eigen::Index block = std::min<Eigen::Index>(std::min(rows, cols), k + opt.oversample);

    Rng rng(opt.seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd v(cols, block);
    for (Eigen::Index j = 0; j < block; ++j)
        for (Eigen::Index i = 0; i < cols; ++i) v(i, j) = gauss(rng);
    v = orthonormalize(v);

    double worst = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        Eigen::MatrixXd u = orthonormalize(m * v);
        v = orthonormalize(Eigen::MatrixXd(m.transpose() * u));

        // Rayleigh-Ritz on the projected block B = U^T M V.
        Eigen::MatrixXd mv = m * v;
        Eigen::MatrixXd b = u.transpose() * mv;
        Eigen::JacobiSVD<Eigen::MatrixXd> small(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::MatrixXd uk = u * small.matrixU().leftCols(k);
        Eigen::MatrixXd vk = v * small.matrixV().leftCols(k);
        Eigen::VectorXd s = small.singularValues().head(k);

        const double scale = std::max(s(0), std::numeric_limits<double>::min());
        Eigen::MatrixXd r1 = m * vk - uk * s.asDiagonal();
        Eigen::MatrixXd r2 = Eigen::MatrixXd(m.transpose() * uk) - vk * s.asDiagonal();
        worst = 0.0;
        for (Eigen::Index j = 0; j < k; ++j)
            worst = std::max(worst, std::hypot(r1.col(j).norm(), r2.col(j).norm()) / scale);
        if (worst <= opt.tolerance || s(0) == 0.0) return {s, uk, vk};
        v = v * small.matrixV();
    }
    throw NumericalError("truncated SVD did not converge: worst relative residual " + std::to_string(worst) +
                         " after " + std::to_string(opt.max_iterations) + " iterations");
}

}  // namespace detail

/// Top-k singular triplets. Dense factorization up to opt.dense_limit rows,
/// subspace iteration above that.
inline TruncatedSvd truncated_svd(const Eigen::SparseMatrix<double, Eigen::RowMajor>& m, Eigen::Index k,
                                  const SvdOptions& opt = {}) {
    if (k < 1 || k > std::min(m.rows(), m.cols())) throw DomainError("truncated_svd: k out of range");
    if (m.rows() <= opt.dense_limit) return detail::dense_svd(Eigen::MatrixXd(m), k);
    return detail::subspace_svd(m, k, opt);
}

inline TruncatedSvd truncated_svd(const Eigen::MatrixXd& m, Eigen::Index k, const SvdOptions& opt = {}) {
    if (k < 1 || k > std::min(m.rows(), m.cols())) throw DomainError("truncated_svd: k out of range");
    if (m.rows() <= opt.dense_limit) return detail::dense_svd(m, k);
    return detail::subspace_svd(m, k, opt);
}

}  // namespace chip
