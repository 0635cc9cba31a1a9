#pragma once

// Univariate Hawkes process with exponential kernel
//   lambda(t) = mu + alpha * sum_{t_i < t} exp(-beta (t - t_i)).

#include <chip/errors.hpp>
#include <chip/random.hpp>

#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace chip {

/// exp(x) with arguments below -700 mapped to exactly 0.
inline double clamped_exp(double x) noexcept { return x < -700.0 ? 0.0 : std::exp(x); }

struct HawkesParams {
    double mu{1.0};
    double alpha{0.0};
    double beta{1.0};

    /// Branching ratio alpha / beta.
    double ratio() const noexcept { return alpha / beta; }
    bool stationary() const noexcept { return alpha < beta; }

    void validate() const {
        if (!(mu > 0.0) || !std::isfinite(mu)) throw DomainError("Hawkes mu must be positive and finite");
        if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("Hawkes beta must be positive and finite");
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("Hawkes alpha must be nonnegative and finite");
    }
};

/// Strictly increasing event times on the closed window [0, horizon].
class EventTimes {
public:
    EventTimes() = default;

    EventTimes(std::vector<double> times, double horizon) : times_(std::move(times)), horizon_(horizon) {
        validate(times_, horizon_);
    }

    static void validate(std::span<const double> times, double horizon) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be positive and finite");
        double prev = -1.0;
        for (double t : times) {
            if (!(t >= 0.0) || t > horizon) throw DomainError("event time outside [0, horizon]");
            if (!(t > prev)) throw DomainError("event times must be strictly increasing");
            prev = t;
        }
    }

    std::span<const double> times() const noexcept { return times_; }
    double horizon() const noexcept { return horizon_; }
    std::size_t size() const noexcept { return times_.size(); }
    bool empty() const noexcept { return times_.empty(); }

private:
    std::vector<double> times_;
    double horizon_{1.0};
};

/// Conditional intensity at t. The excitation sum runs over events strictly
/// earlier than t, so the value at an event time excludes that event's jump.
inline double intensity_at(const HawkesParams& p, const EventTimes& events, double t) {
    if (!(t >= 0.0) || t > events.horizon()) throw DomainError("intensity_at: t outside [0, horizon]");
    double excitation = 0.0;
    for (double ti : events.times()) {
        if (!(ti < t)) break;
        excitation += clamped_exp(-p.beta * (t - ti));
    }
    return p.mu + p.alpha * excitation;
}

/// Ogata thinning on [0, horizon]. The intensity only decays between events,
/// so its value at the current candidate bounds it until the next acceptance.
/// Parameters with alpha >= beta are simulated as given (explosive paths can
/// be very long).
inline std::vector<double> simulate_times(const HawkesParams& p, double horizon, Rng& rng) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("simulate: horizon must be positive");
    p.validate();

    std::vector<double> times;
    std::exponential_distribution<double> wait(1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    double t = 0.0;
    double excitation = 0.0;  // alpha * sum_i exp(-beta (t - t_i)) evaluated at t
    for (;;) {
        const double bound = p.mu + excitation;
        const double dt = wait(rng) / bound;
        t += dt;
        if (t > horizon) break;
        excitation *= clamped_exp(-p.beta * dt);
        if (unif(rng) * bound <= p.mu + excitation) {
            times.push_back(t);
            excitation += p.alpha;
        }
    }
    return times;
}

inline EventTimes simulate(const HawkesParams& p, double horizon, Rng& rng) {
    return EventTimes(simulate_times(p, horizon, rng), horizon);
}

namespace detail {

// Terms of the log-likelihood with alpha written as beta * ratio. Shared by the
// plain and the profiled evaluations so both follow one recursion:
//   w(1) = 0, w(q) = exp(-beta (t_q - t_{q-1})) (1 + w(q-1)).
inline double loglik_terms(double mu, double ratio, double beta, std::span<const double> times, double horizon) {
    double ll = -mu * horizon;
    const double alpha = beta * ratio;
    double w = 0.0;
    double prev = 0.0;
    bool first = true;
    for (double t : times) {
        if (!first) w = clamped_exp(-beta * (t - prev)) * (1.0 + w);
        first = false;
        prev = t;
        const double rate = mu + alpha * w;
        if (!(rate > 0.0)) throw NumericalError("Hawkes log-likelihood: non-positive intensity at an event");
        ll += ratio * (clamped_exp(-beta * (horizon - t)) - 1.0) + std::log(rate);
    }
    return ll;
}

}  // namespace detail

/// Exact log-likelihood of a path on [0, horizon], O(l) in the event count.
/// Events exactly at the horizon are included.
inline double log_likelihood(const HawkesParams& p, std::span<const double> times, double horizon) {
    if (!(horizon > 0.0)) throw DomainError("log_likelihood: horizon must be positive");
    if (!(p.beta > 0.0)) throw DomainError("log_likelihood: beta must be positive");
    if (!(p.mu >= 0.0) || !(p.alpha >= 0.0)) throw DomainError("log_likelihood: mu and alpha must be nonnegative");
    return detail::loglik_terms(p.mu, p.alpha / p.beta, p.beta, times, horizon);
}

inline double log_likelihood(const HawkesParams& p, const EventTimes& events) {
    return log_likelihood(p, events.times(), events.horizon());
}

namespace detail {

inline void check_profile_args(double beta, double ratio, double mu, double horizon) {
    if (!(beta > 0.0)) throw DomainError("profiled_log_likelihood: beta must be positive");
    if (!(ratio >= 0.0) || !(ratio < 1.0)) throw DomainError("profiled_log_likelihood: ratio must lie in [0, 1)");
    if (!(mu > 0.0)) throw DomainError("profiled_log_likelihood: mu must be positive");
    if (!(horizon > 0.0)) throw DomainError("profiled_log_likelihood: horizon must be positive");
}

}  // namespace detail

/// Log-likelihood as a function of beta alone with alpha = beta * ratio, summed
/// over independent paths that share (mu, ratio, beta) and the horizon. Each
/// element of `paths` must be convertible to std::span<const double>.
template <class Range>
double profiled_log_likelihood(double beta, double ratio, double mu, const Range& paths, double horizon) {
    detail::check_profile_args(beta, ratio, mu, horizon);
    double total = 0.0;
    for (const auto& path : paths) total += detail::loglik_terms(mu, ratio, beta, std::span<const double>(path), horizon);
    return total;
}

inline double profiled_log_likelihood(double beta, double ratio, double mu, std::span<const EventTimes> paths) {
    if (paths.empty()) return 0.0;
    const double horizon = paths.front().horizon();
    detail::check_profile_args(beta, ratio, mu, horizon);
    double total = 0.0;
    for (const auto& path : paths) {
        if (path.horizon() != horizon) throw DomainError("profiled_log_likelihood: paths must share a horizon");
        total += detail::loglik_terms(mu, ratio, beta, path.times(), horizon);
    }
    return total;
}

}  // namespace chip
