#pragma once

#include <chip/errors.hpp>

#include <cmath>

namespace chip {

struct LineSearchResult {
    double argmax{0.0};
    double value{0.0};
    int evaluations{0};
};

/// Maximizes a unimodal f on [lo, hi] by golden-section search, stopping when
/// the bracket is narrower than `tolerance`. The bracket endpoints themselves
/// are never evaluated, so f may be undefined there.
template <class F>
LineSearchResult golden_section_maximize(F&& f, double lo, double hi, double tolerance) {
    if (!(lo < hi)) throw DomainError("golden_section_maximize: empty interval");
    if (!(tolerance > 0.0)) throw DomainError("golden_section_maximize: tolerance must be positive");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;

    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    int evals = 2;
    while (b - a > tolerance) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        ++evals;
    }
    return fc >= fd ? LineSearchResult{c, fc, evals} : LineSearchResult{d, fd, evals};
}

}  // namespace chip
