// Summary statistics used by the experiment reports.
#pragma once

#include <cmath>
#include <limits>
#include <span>

#include <boost/math/distributions/students_t.hpp>

#include "errors.hpp"

namespace mtll {

struct SampleSummary {
    double mean = 0.0;
    double std_dev = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

inline SampleSummary summarize(std::span<const double> v) {
    SampleSummary s;
    s.count = v.size();
    if (v.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double x : v) {
        sum += x;
    }
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) {
            ss += (x - s.mean) * (x - s.mean);
        }
        s.std_dev = std::sqrt(ss / static_cast<double>(v.size() - 1));
        s.std_error = s.std_dev / std::sqrt(static_cast<double>(v.size()));
    }
    return s;
}

/// One-sided paired t-test of H1: mean(a - b) > 0.
struct PairedTest {
    double mean_difference = 0.0;
    double std_error = 0.0;
    double t_statistic = 0.0;
    double p_value = 1.0;
};

inline PairedTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size() && a.size() >= 2, ErrorKind::InvalidArgument,
            "paired test needs two equal samples of size >= 2");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
    }
    const SampleSummary s = summarize(d);
    PairedTest out;
    out.mean_difference = s.mean;
    out.std_error = s.std_error;
    if (s.std_error == 0.0) {
        out.t_statistic = s.mean > 0.0 ? std::numeric_limits<double>::infinity()
                                       : (s.mean < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
        out.p_value = s.mean > 0.0 ? 0.0 : (s.mean < 0.0 ? 1.0 : 0.5);
        return out;
    }
    out.t_statistic = s.mean / s.std_error;
    const boost::math::students_t dist(static_cast<double>(a.size() - 1));
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.t_statistic));
    return out;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, ErrorKind::InvalidArgument,
            "linear fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    require(sxx > 0.0, ErrorKind::InvalidArgument, "linear fit needs distinct x values");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

} // namespace mtll
