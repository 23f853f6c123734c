#pragma once

// Small goodness-of-fit helpers: one-sample Kolmogorov-Smirnov statistic and
// the Kolmogorov limiting distribution.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "stable_stein/errors.hpp"

namespace stable_stein::stats {

/// sup_x |F_n(x) - F(x)| for the sample xs against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf&& cdf) {
    if (xs.empty()) throw EmptySample("KS statistic of an empty sample");
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double F = cdf(xs[i]);
        d = std::max({d, (i + 1) / n - F, F - i / n});
    }
    return d;
}

/// P(K <= x) for the Kolmogorov distribution.
inline double kolmogorov_cdf(double x) {
    if (x <= 0.0) return 0.0;
    if (x < 1.0) {
        // theta-function form, accurate for small x
        const double c = std::numbers::pi * std::numbers::pi / (8.0 * x * x);
        double s = 0.0;
        for (int k = 1; k <= 50; ++k) s += std::exp(-(2 * k - 1) * (2 * k - 1) * c);
        return std::sqrt(2.0 * std::numbers::pi) / x * s;
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double t = std::exp(-2.0 * k * k * x * x);
        s += (k % 2 ? 1.0 : -1.0) * t;
        if (t < 1e-18) break;
    }
    return 1.0 - 2.0 * s;
}

inline double kolmogorov_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("Kolmogorov quantile level must lie in (0, 1)");
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (kolmogorov_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Level-p critical value of the n-sample KS statistic (Stephens' finite-n correction).
inline double ks_critical_value(std::size_t n, double p) {
    const double rn = std::sqrt(static_cast<double>(n));
    return kolmogorov_quantile(p) / (rn + 0.12 + 0.11 / rn);
}

}  // namespace stable_stein::stats
