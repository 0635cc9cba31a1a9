#pragma once

// Closed-form quantities from the asymptotic analysis, evaluated numerically.
// Misclustering bounds are rates without their unspecified absolute constants.

#include <chip/errors.hpp>
#include <chip/generator.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace chip {

struct CountMoments {
    double mean{0.0};      // nu
    double variance{0.0};  // sigma^2
};

/// Long-run mean and variance of a stationary Hawkes count on [0, T]:
/// nu = mu T / (1 - m), sigma^2 = mu T / (1 - m)^3 with m = alpha / beta.
inline CountMoments asymptotic_moments(double mu, double alpha, double beta, double horizon) {
    if (!(beta > 0.0) || !(alpha >= 0.0)) throw DomainError("asymptotic_moments: need beta > 0 and alpha >= 0");
    if (!(alpha < beta)) throw DomainError("asymptotic_moments: nonstationary parameters (alpha >= beta)");
    const double one_minus = 1.0 - alpha / beta;
    return {mu * horizon / one_minus, mu * horizon / (one_minus * one_minus * one_minus)};
}

/// Inputs of the two-parameter model: within-block (1) and between-block (2)
/// baseline rates and branching ratios.
struct SimplifiedTheoryInputs {
    double n{0.0};
    double k{1.0};
    double horizon{1.0};
    double mu1{0.0}, mu2{0.0};
    double m1{0.0}, m2{0.0};

    static SimplifiedTheoryInputs from_spec(const SimplifiedSpec& s) {
        return {static_cast<double>(s.n), static_cast<double>(s.k), s.horizon, s.mu1, s.mu2,
                s.alpha1 / s.beta1, s.alpha2 / s.beta2};
    }

    // Per-unit-time moments.
    double nu1() const { return mu1 / (1.0 - m1); }
    double nu2() const { return mu2 / (1.0 - m2); }
    double sigma2_1() const { return mu1 / std::pow(1.0 - m1, 3); }
    double sigma2_2() const { return mu2 / std::pow(1.0 - m2, 3); }
    bool valid_ordering() const { return nu1() > nu2(); }
};

struct BoundValue {
    double value{0.0};
    bool infinite{false};  // denominator vanished
    bool flagged{false};   // inputs outside the bound's assumptions
};

struct BinaryBound {
    BoundValue exact;
    BoundValue taylor;
    bool taylor_selected{false};
    const BoundValue& selected() const { return taylor_selected ? taylor : exact; }
};

inline constexpr double kTaylorThreshold = 0.05;

/// Binary-adjacency bound (k^2/n)(1 - e^{-mu1 T}) / (e^{-mu2 T} - e^{-mu1 T})^2
/// and its small-mu T form (k^2/(nT)) mu1 / (mu1 - mu2)^2. The small form is
/// selected when mu1 T <= 0.05.
inline BinaryBound binary_bound(const SimplifiedTheoryInputs& in) {
    BinaryBound out;
    const double t = in.horizon;
    const double k2n = in.k * in.k / in.n;
    const bool ordered = in.mu1 > in.mu2 && in.mu2 > 0.0;
    const double gap = std::exp(-in.mu2 * t) - std::exp(-in.mu1 * t);
    if (gap == 0.0) {
        out.exact = {std::numeric_limits<double>::infinity(), true, true};
    } else {
        out.exact = {k2n * (1.0 - std::exp(-in.mu1 * t)) / (gap * gap), false, !ordered};
    }
    const double diff = in.mu1 - in.mu2;
    if (diff == 0.0) {
        out.taylor = {std::numeric_limits<double>::infinity(), true, true};
    } else {
        out.taylor = {k2n / t * in.mu1 / (diff * diff), false, !ordered};
    }
    out.taylor_selected = in.mu1 * t <= kTaylorThreshold;
    return out;
}

/// Weighted-adjacency bound (k^2/(nT)) sigma1^2 / (nu1 - nu2)^2 with
/// per-unit-time moments. Flagged when nu1 <= nu2.
inline BoundValue weighted_bound(const SimplifiedTheoryInputs& in) {
    const double diff = in.nu1() - in.nu2();
    if (diff == 0.0) return {std::numeric_limits<double>::infinity(), true, true};
    return {in.k * in.k / (in.n * in.horizon) * in.sigma2_1() / (diff * diff), false, !(diff > 0.0)};
}

/// Weighted bound in the form used to compare against the binary one, with
/// both blocks' variances in the numerator:
/// (k^2/(nT)) (sigma1^2 + sigma2^2) / (nu1 - nu2)^2.
inline BoundValue weighted_bound_comparison(const SimplifiedTheoryInputs& in) {
    const double diff = in.nu1() - in.nu2();
    if (diff == 0.0) return {std::numeric_limits<double>::infinity(), true, true};
    return {in.k * in.k / (in.n * in.horizon) * (in.sigma2_1() + in.sigma2_2()) / (diff * diff), false,
            !(diff > 0.0)};
}

struct NoiseConstants {
    double s{0.0};
    double s1{0.0};
};

/// s = sqrt(T) max_a sqrt(sum_b |b| mu_ab / (1 - m_ab)^3),
/// s1 = sqrt(T) max_ab sqrt(mu_ab / (1 - m_ab)^3).
inline NoiseConstants noise_constants(const ChipModelSpec& spec, std::span<const double> block_sizes) {
    spec.validate();
    if (block_sizes.size() != spec.k) throw DomainError("noise_constants: need one size per block");
    if (!spec.nonstationary_pairs().empty()) throw DomainError("noise_constants: parameters must be stationary");
    NoiseConstants out;
    const auto k = static_cast<Eigen::Index>(spec.k);
    double row_max = 0.0, cell_max = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) {
        double row = 0.0;
        for (Eigen::Index b = 0; b < k; ++b) {
            const double v = spec.mu(a, b) / std::pow(1.0 - spec.alpha(a, b) / spec.beta(a, b), 3);
            row += block_sizes[static_cast<std::size_t>(b)] * v;
            cell_max = std::max(cell_max, v);
        }
        row_max = std::max(row_max, row);
    }
    out.s = std::sqrt(spec.horizon) * std::sqrt(row_max);
    out.s1 = std::sqrt(spec.horizon) * std::sqrt(cell_max);
    return out;
}

/// Equal blocks of size n / k.
inline NoiseConstants noise_constants(const SimplifiedTheoryInputs& in) {
    const double block = in.n / in.k;
    const double s = std::sqrt(in.horizon) * std::sqrt(block * in.sigma2_1() + (in.k - 1.0) * block * in.sigma2_2());
    const double s1 = std::sqrt(in.horizon) * std::sqrt(std::max(in.sigma2_1(), in.sigma2_2()));
    return {s, s1};
}

enum class PopulationMatrix { binary, weighted };

/// Smallest-magnitude nonzero eigenvalue of E[A] = (n/k)(e^{-mu2 T} - e^{-mu1 T})
/// or of E[N] = (n/k)(nu1 - nu2) T.
inline double population_eigen(const SimplifiedTheoryInputs& in, PopulationMatrix which) {
    const double block = in.n / in.k;
    if (which == PopulationMatrix::binary)
        return block * (std::exp(-in.mu2 * in.horizon) - std::exp(-in.mu1 * in.horizon));
    return block * (in.nu1() - in.nu2()) * in.horizon;
}

}  // namespace chip
