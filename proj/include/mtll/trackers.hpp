// Classical baselines: continuous-discrete extended Kalman filter and a
// first-order phase-locked loop.
#pragma once

#include <cmath>

#include "errors.hpp"
#include "model.hpp"

namespace mtll {

struct TrackerState {
    double xhat = 0.0;
    double P = 0.0;    ///< error variance (EKF)
    double gain = 0.0; ///< loop gain K (PLL)
};

/**
 * @brief One Euler step of the EKF.
 *
 *   nu = dy - dt h(xhat),  g = P h'(xhat) / (eps rho)^2
 *   xhat += dt m(xhat) + g nu
 *   P += dt [2 m'(xhat) P + (eps sigma)^2 - P^2 h'(xhat)^2 / (eps rho)^2], P >= 0
 */
inline TrackerState ekf_step(const TrackerState &state, const DiffusionModel &model,
                             double dy, double dt, double t = 0.0) {
    require(dt > 0.0, ErrorKind::InvalidParameter, "ekf_step: dt must be positive");
    const double r2 = model.obs_noise() * model.obs_noise();
    const double q = model.state_noise() * model.state_noise();
    const double x = state.xhat;
    const double hp = model.h_prime(x, t);
    const double g = state.P * hp / r2;
    const double innovation = dy - dt * model.h(x, t);

    TrackerState next = state;
    next.xhat = x + dt * model.m(x, t) + g * innovation;
    const double P = state.P + dt * (2.0 * model.m_prime(x, t) * state.P + q -
                                     state.P * state.P * hp * hp / r2);
    if (!std::isfinite(P) || !std::isfinite(next.xhat)) {
        fail(ErrorKind::Divergence, "EKF variance or estimate is not finite");
    }
    next.P = P > 0.0 ? P : 0.0;
    return next;
}

/// Stationary root of dP/dt = 2aP + (eps sigma)^2 - P^2 c^2/(eps rho)^2.
inline double stationary_riccati(double a, double c, const DiffusionModel &model) {
    const double r2 = model.obs_noise() * model.obs_noise();
    const double q = model.state_noise() * model.state_noise();
    if (c == 0.0) {
        require(a < 0.0, ErrorKind::InvalidParameter,
                "no stationary variance for an unobserved unstable state");
        return q / (-2.0 * a);
    }
    return r2 * (a + std::sqrt(a * a + c * c * q / r2)) / (c * c);
}

/**
 * @brief First-order loop: xhat += dt m(xhat) + K h'(xhat) (dy - dt h(xhat)).
 *
 * The phase detector is weighted by h'(xhat), which for h = sin x keeps the
 * loop stable on both slopes of the measurement; with h'(xhat) = 1 this is
 * the plain constant-gain loop. When `model` has no measurement derivative
 * the weight is 1.
 */
inline TrackerState pll_step(const TrackerState &state, const DiffusionModel &model,
                             double dy, double dt, double t = 0.0) {
    require(dt > 0.0, ErrorKind::InvalidParameter, "pll_step: dt must be positive");
    const double x = state.xhat;
    const double weight = model.meas_deriv ? model.meas_deriv(x, t) : 1.0;
    TrackerState next = state;
    next.xhat = x + dt * model.m(x, t) + state.gain * weight * (dy - dt * model.h(x, t));
    return next;
}

/// sigma / rho: the stationary EKF gain of the phase model where cos xhat = 1.
inline double default_pll_gain(const DiffusionModel &model) {
    return model.sigma / model.rho;
}

} // namespace mtll
