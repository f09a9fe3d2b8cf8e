// Diffusion / observation models:
//   dx = m(x,t) dt + eps*sigma dw,    dy = h(x,t) dt + eps*rho dnu
#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>

#include "errors.hpp"

namespace mtll {

using ScalarFn = std::function<double(double x, double t)>;

/**
 * @brief Scalar diffusion observed through a noisy channel.
 *
 * The noise scales are kept apart from eps so that noise-energy costs can
 * be formed without the common 1/eps^2 factor.
 */
struct DiffusionModel {
    ScalarFn drift;       ///< m(x, t)
    ScalarFn meas;        ///< h(x, t)
    ScalarFn meas_deriv;  ///< dh/dx; may be empty, trackers require it
    ScalarFn drift_deriv; ///< dm/dx; may be empty (finite differences used)
    double sigma = 1.0;
    double rho = 1.0;
    double eps = 1.0;
    /// Drift and measurement do not depend on t.
    bool autonomous = true;
    /// Period of the model in x, when m and h are both periodic.
    std::optional<double> period;

    double m(double x, double t = 0.0) const { return drift(x, t); }
    double h(double x, double t = 0.0) const { return meas(x, t); }

    double h_prime(double x, double t = 0.0) const {
        require(static_cast<bool>(meas_deriv), ErrorKind::InvalidParameter,
                "model has no measurement derivative");
        return meas_deriv(x, t);
    }

    /// dm/dx, by centered difference when no derivative was supplied.
    double m_prime(double x, double t = 0.0) const {
        if (drift_deriv) {
            return drift_deriv(x, t);
        }
        constexpr double step = 1e-5;
        return (drift(x + step, t) - drift(x - step, t)) / (2.0 * step);
    }

    double state_noise() const { return eps * sigma; }
    double obs_noise() const { return eps * rho; }
};

/// Lock domain L = (lo, hi); attaining either end is loss of lock.
struct LockDomain {
    double lo = -std::numbers::pi;
    double hi = std::numbers::pi;

    bool contains(double e) const { return e > lo && e < hi; }
    double width() const { return hi - lo; }
};

inline void validate(const LockDomain &domain) {
    require(domain.lo < domain.hi, ErrorKind::InvalidParameter,
            "lock domain requires lo < hi");
    require(domain.contains(0.0), ErrorKind::InvalidParameter,
            "lock domain must contain the initial error 0");
}

/// Checks noise scales and samples m, h on an interval enclosing `domain`.
inline void validate(const DiffusionModel &model, const LockDomain &domain,
                     int samples = 257) {
    require(model.sigma > 0.0 && model.rho > 0.0 && model.eps > 0.0,
            ErrorKind::InvalidParameter, "sigma, rho and eps must be positive");
    require(static_cast<bool>(model.drift) && static_cast<bool>(model.meas),
            ErrorKind::InvalidParameter, "model needs drift and measurement");
    validate(domain);
    const double pad = 0.5 * domain.width();
    const double a = domain.lo - pad;
    const double b = domain.hi + pad;
    for (int i = 0; i < samples; ++i) {
        const double x = a + (b - a) * i / (samples - 1);
        require(std::isfinite(model.m(x)) && std::isfinite(model.h(x)),
                ErrorKind::InvalidParameter,
                "drift or measurement not finite at x = " + std::to_string(x));
    }
}

struct PhaseModel {
    DiffusionModel model;
    LockDomain domain;
};

/// Brownian phase (optionally with constant drift) observed through sin x.
inline PhaseModel make_phase_model(double eps, double sigma, double rho,
                                   double drift = 0.0) {
    require(eps > 0.0 && sigma > 0.0 && rho > 0.0,
            ErrorKind::InvalidParameter,
            "phase model requires positive eps, sigma, rho");
    require(std::isfinite(drift), ErrorKind::InvalidParameter,
            "phase drift must be finite");
    DiffusionModel model;
    model.drift = [drift](double, double) { return drift; };
    model.drift_deriv = [](double, double) { return 0.0; };
    model.meas = [](double x, double) { return std::sin(x); };
    model.meas_deriv = [](double x, double) { return std::cos(x); };
    model.sigma = sigma;
    model.rho = rho;
    model.eps = eps;
    model.period = 2.0 * std::numbers::pi;
    return {std::move(model), LockDomain{-std::numbers::pi, std::numbers::pi}};
}

/// m(x) = a x, h(x) = c x.
inline DiffusionModel make_linear_model(double a, double c, double eps,
                                        double sigma, double rho) {
    require(eps > 0.0 && sigma > 0.0 && rho > 0.0,
            ErrorKind::InvalidParameter,
            "linear model requires positive eps, sigma, rho");
    require(std::isfinite(a) && std::isfinite(c), ErrorKind::InvalidParameter,
            "linear model coefficients must be finite");
    DiffusionModel model;
    model.drift = [a](double x, double) { return a * x; };
    model.drift_deriv = [a](double, double) { return a; };
    model.meas = [c](double x, double) { return c * x; };
    model.meas_deriv = [c](double, double) { return c; };
    model.sigma = sigma;
    model.rho = rho;
    model.eps = eps;
    return model;
}

} // namespace mtll
