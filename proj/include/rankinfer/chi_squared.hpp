#pragma once

#include <cmath>
#include <limits>

#include "rankinfer/errors.hpp"

namespace rankinfer {

namespace detail {

// Lower regularized incomplete gamma by power series; valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 1000; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma by Lentz continued fraction; x >= a + 1.
inline double gamma_q_continued_fraction(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

inline double gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    return x < a + 1.0 ? detail::gamma_p_series(a, x)
                       : 1.0 - detail::gamma_q_continued_fraction(a, x);
}

inline double gamma_q(double a, double x) {
    if (x <= 0.0) return 1.0;
    return x < a + 1.0 ? 1.0 - detail::gamma_p_series(a, x)
                       : detail::gamma_q_continued_fraction(a, x);
}

inline double chi2_cdf(double x, int df) {
    if (df < 1) throw InvalidArgument("chi2_cdf: df must be >= 1");
    return gamma_p(0.5 * df, 0.5 * x);
}

inline double chi2_sf(double x, int df) {
    if (df < 1) throw InvalidArgument("chi2_sf: df must be >= 1");
    return gamma_q(0.5 * df, 0.5 * x);
}

// Quantile by bracketed bisection; the cdf is monotone and evaluated to
// ~1e-15, so 200 halvings pin the quantile to full double precision.
inline double chi2_quantile(int df, double p) {
    if (df < 1) throw InvalidArgument("chi2_quantile: df must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("chi2_quantile: p must lie in (0,1)");
    double lo = 0.0;
    double hi = df + 10.0 * std::sqrt(2.0 * df) + 10.0;
    while (chi2_cdf(hi, df) < p) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw NumericalError("chi2_quantile: bracket failed");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf(mid, df) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace rankinfer
