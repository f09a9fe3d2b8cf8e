// Small numeric helpers with deterministic evaluation order.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace mtll {

/// Pairwise (cascade) sum; the result depends only on the input order.
inline double pairwise_sum(std::span<const double> v) {
    constexpr std::size_t kBlock = 32;
    if (v.size() <= kBlock) {
        double s = 0.0;
        for (double x : v) {
            s += x;
        }
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double max_finite(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) {
        m = std::max(m, x);
    }
    return m;
}

/// Trapezoid rule on a uniform grid.
inline double trapezoid(std::span<const double> f, double dx) {
    if (f.size() < 2) {
        return 0.0;
    }
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
        s += f[i];
    }
    return s * dx;
}

} // namespace mtll
