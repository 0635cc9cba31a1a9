#pragma once

// Lloyd's algorithm from k-means++ seeds, best of several restarts.

#include <chip/errors.hpp>
#include <chip/parallel.hpp>
#include <chip/random.hpp>

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace chip {

struct KMeansOptions {
    int restarts{10};
    int max_iterations{300};
    /// Stop when the inertia improves by less than this fraction.
    double relative_tolerance{1e-6};
};

struct KMeansResult {
    std::vector<std::uint32_t> labels;
    Eigen::MatrixXd centroids;  // d x k, one column per cluster
    double inertia{0.0};
    int iterations{0};
};

namespace detail {

// Points are stored one per column (d x n).
inline KMeansResult lloyd_once(const Eigen::MatrixXd& pts, std::size_t k, const KMeansOptions& opt, Rng& rng) {
    const Eigen::Index n = pts.cols();
    const Eigen::Index d = pts.rows();
    const auto kk = static_cast<Eigen::Index>(k);

    // k-means++ seeding
    Eigen::MatrixXd centers(d, kk);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.col(0) = pts.col(pick(rng));
    Eigen::VectorXd dist2(n);
    for (Eigen::Index i = 0; i < n; ++i) dist2(i) = (pts.col(i) - centers.col(0)).squaredNorm();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index c = 1; c < kk; ++c) {
        const double total = dist2.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            double target = unif(rng) * total;
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= dist2(i);
                if (target < 0.0 && dist2(i) > 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centers.col(c) = pts.col(chosen);
        for (Eigen::Index i = 0; i < n; ++i) dist2(i) = std::min(dist2(i), (pts.col(i) - centers.col(c)).squaredNorm());
    }

    KMeansResult res;
    res.labels.assign(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd best(n);
    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= opt.max_iterations; ++iter) {
        res.iterations = iter;
        bool changed = false;
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index arg = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < kk; ++c) {
                const double d2 = (pts.col(i) - centers.col(c)).squaredNorm();
                if (d2 < bd) {
                    bd = d2;
                    arg = c;
                }
            }
            best(i) = bd;
            inertia += bd;
            if (res.labels[static_cast<std::size_t>(i)] != static_cast<std::uint32_t>(arg) || iter == 1) changed = true;
            res.labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(arg);
        }
        res.inertia = inertia;

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(d, kk);
        std::vector<Eigen::Index> counts(k, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.col(res.labels[static_cast<std::size_t>(i)]) += pts.col(i);
            ++counts[res.labels[static_cast<std::size_t>(i)]];
        }
        for (Eigen::Index c = 0; c < kk; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            } else {
                // Empty cluster: move its centroid to the point farthest from
                // its current centroid.
                Eigen::Index far = 0;
                best.maxCoeff(&far);
                centers.col(c) = pts.col(far);
                best(far) = 0.0;
            }
        }

        const bool small_gain = prev_inertia - inertia <= opt.relative_tolerance * inertia;
        if (!changed || (iter > 1 && small_gain)) break;
        prev_inertia = inertia;
    }
    res.centroids = std::move(centers);
    return res;
}

}  // namespace detail

/// Clusters the rows of `points` (n x d). Restart r draws from a stream derived
/// from (seed, r); the lowest-inertia restart wins, earliest on ties.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                           const KMeansOptions& opt = {}) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k == 0) throw DomainError("kmeans: k must be positive");
    if (n == 0) throw DomainError("kmeans: no points");
    if (k > n) throw DomainError("kmeans: k exceeds the number of points");
    if (opt.restarts < 1 || opt.max_iterations < 1) throw DomainError("kmeans: restarts and iterations must be positive");

    const Eigen::MatrixXd pts = points.transpose();
    std::vector<KMeansResult> runs(static_cast<std::size_t>(opt.restarts));
    parallel_for(runs.size(), [&](std::size_t r) {
        Rng rng = make_rng(seed, {r});
        runs[r] = detail::lloyd_once(pts, k, opt, rng);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].inertia < runs[best].inertia) best = r;
    return std::move(runs[best]);
}

}  // namespace chip
