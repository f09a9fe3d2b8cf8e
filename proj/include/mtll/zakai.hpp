// Finite-difference Zakai solver with absorbing ends on the lock domain.
//
// Each step multiplies the field by the particle weight factor
//   exp{(H dy - H^2 dt / 2) / (eps rho)^2}
// at the current nodes and then advances the Fokker-Planck part
//   phi_t = -(M phi)_e + (eps sigma)^2 / 2 phi_ee
// with a conservative upwind scheme. A companion field on an enlarged domain
// carries the unabsorbed normalization; the ratio of the two masses is the
// conditional survival probability.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "numeric.hpp"
#include "particle.hpp"
#include "sde_sim.hpp"

namespace mtll {

/// Grid function on nodes e_i = lo + i*de, i = 0..G; the end nodes stay 0.
/// Stored values are scaled by exp(log_scale).
struct ZakaiField {
    double lo = 0.0;
    double de = 0.0;
    std::vector<double> phi;
    double log_scale = 0.0;
    double t = 0.0;
    std::size_t step_index = 0;

    std::size_t intervals() const { return phi.size() - 1; }
    double node(std::size_t i) const { return lo + static_cast<double>(i) * de; }
    double hi() const { return node(intervals()); }

    /// log of the trapezoid mass (boundary nodes are zero).
    double log_mass() const {
        const double s = pairwise_sum(std::span<const double>(phi));
        return s > 0.0 ? std::log(s * de) + log_scale
                       : -std::numeric_limits<double>::infinity();
    }
    double mass() const { return std::exp(log_mass()); }

    void rescale() {
        const double top = max_finite(phi);
        if (top > 0.0 && std::isfinite(top)) {
            for (double &v : phi) {
                v /= top;
            }
            log_scale += std::log(top);
        }
    }
};

inline std::size_t nearest_node(double lo, double de, double e) {
    return static_cast<std::size_t>(std::llround((e - lo) / de));
}

/// Field from G+1 node values; normalized to unit trapezoid mass.
inline ZakaiField init_field(double lo, double hi, std::size_t G,
                             std::span<const double> values) {
    require(G >= 8, ErrorKind::InvalidInitialization, "Zakai grid needs G >= 8");
    require(lo < hi, ErrorKind::InvalidInitialization, "Zakai grid needs lo < hi");
    require(values.size() == G + 1, ErrorKind::InvalidInitialization,
            "initial values must cover the G+1 nodes");
    require(values.front() == 0.0 && values.back() == 0.0,
            ErrorKind::InvalidInitialization, "initial density must vanish on the boundary");
    for (double v : values) {
        require(v >= 0.0 && std::isfinite(v), ErrorKind::InvalidInitialization,
                "initial density must be finite and nonnegative");
    }
    ZakaiField field;
    field.lo = lo;
    field.de = (hi - lo) / static_cast<double>(G);
    field.phi.assign(values.begin(), values.end());
    const double s = pairwise_sum(std::span<const double>(field.phi)) * field.de;
    require(s > 0.0, ErrorKind::InvalidInitialization, "initial density has zero mass");
    for (double &v : field.phi) {
        v /= s;
    }
    return field;
}

inline ZakaiField init_field(const LockDomain &domain, std::size_t G,
                             const std::function<double(double)> &density) {
    require(G >= 8, ErrorKind::InvalidInitialization, "Zakai grid needs G >= 8");
    std::vector<double> values(G + 1, 0.0);
    const double de = domain.width() / static_cast<double>(G);
    for (std::size_t i = 1; i < G; ++i) {
        values[i] = density(domain.lo + static_cast<double>(i) * de);
    }
    return init_field(domain.lo, domain.hi, G, values);
}

/// Point mass at e0, mollified onto the nearest interior node.
inline ZakaiField init_delta(double lo, double hi, std::size_t G, double e0 = 0.0) {
    require(G >= 8, ErrorKind::InvalidInitialization, "Zakai grid needs G >= 8");
    const double de = (hi - lo) / static_cast<double>(G);
    const std::size_t k = nearest_node(lo, de, e0);
    require(k >= 1 && k < G, ErrorKind::InvalidInitialization,
            "initial point must be interior");
    std::vector<double> values(G + 1, 0.0);
    values[k] = 1.0;
    return init_field(lo, hi, G, values);
}

inline ZakaiField init_delta(const LockDomain &domain, std::size_t G, double e0 = 0.0) {
    return init_delta(domain.lo, domain.hi, G, e0);
}

/// Largest |M| over the interfaces for one step.
inline double max_abs_drift(const ZakaiField &field, const DiffusionModel &model,
                            double xhat, double dxhat, double dt) {
    double top = 0.0;
    for (std::size_t i = 0; i < field.intervals(); ++i) {
        const double e = field.node(i) + 0.5 * field.de;
        top = std::max(top, std::abs(model.m(xhat + e, field.t) - dxhat / dt));
    }
    return top;
}

/// Substeps keeping (eps sigma)^2 dt/de^2 <= 1/2 and |M| dt/de <= 1/2.
inline std::size_t required_substeps(const ZakaiField &field,
                                     const DiffusionModel &model, double xhat,
                                     double dxhat, double dt) {
    const double diff = 2.0 * model.state_noise() * model.state_noise() * dt /
                        (field.de * field.de);
    const double adv = 2.0 * max_abs_drift(field, model, xhat, dxhat, dt) * dt / field.de;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::max(diff, adv))));
}

/**
 * @brief One observation step: weight factor, then `substeps` explicit
 * Fokker-Planck substeps over dt.
 *
 * Throws a configuration error when a substep violates the positivity bound.
 */
inline void step_field(ZakaiField &field, const DiffusionModel &model, double xhat,
                       double dxhat, double dy, double dt, std::size_t substeps = 1) {
    require(dt > 0.0, ErrorKind::InvalidParameter, "step_field: dt must be positive");
    require(substeps >= 1, ErrorKind::InvalidParameter, "step_field: substeps >= 1");
    const std::size_t G = field.intervals();
    const double de = field.de;
    const double noise2 = model.state_noise() * model.state_noise();
    const double sub_dt = dt / static_cast<double>(substeps);

    const double diff_number = noise2 * sub_dt / (de * de);
    const double top_drift = max_abs_drift(field, model, xhat, dxhat, dt);
    if (diff_number > 0.5 || top_drift * sub_dt / de > 0.5) {
        const std::size_t need = required_substeps(field, model, xhat, dxhat, dt);
        const double de_needed = std::sqrt(2.0 * noise2 * sub_dt);
        fail(ErrorKind::Configuration,
             "Zakai step unstable: need dt/substep <= " +
                 std::to_string(dt / static_cast<double>(need)) + " (" +
                 std::to_string(need) + " substeps) or de >= " +
                 std::to_string(de_needed));
    }

    // Measurement factor at the pre-step nodes.
    std::vector<double> log_factor(G + 1, 0.0);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < G; ++i) {
        const double H = model.h(xhat + field.node(i), field.t);
        log_factor[i] = log_lik_increment(H, dy, dt, model.eps, model.rho);
        top = std::max(top, log_factor[i]);
    }
    for (std::size_t i = 1; i < G; ++i) {
        field.phi[i] *= std::exp(log_factor[i] - top);
    }
    field.log_scale += top;

    // Upwind drift at interfaces i + 1/2, i = 0..G-1.
    std::vector<double> drift(G);
    for (std::size_t i = 0; i < G; ++i) {
        drift[i] = model.m(xhat + field.node(i) + 0.5 * de, field.t) - dxhat / dt;
    }
    const double diffusion = 0.5 * noise2;
    std::vector<double> flux(G);
    for (std::size_t s = 0; s < substeps; ++s) {
        for (std::size_t i = 0; i < G; ++i) {
            const double up = drift[i] > 0.0 ? drift[i] * field.phi[i]
                                             : drift[i] * field.phi[i + 1];
            flux[i] = up - diffusion * (field.phi[i + 1] - field.phi[i]) / de;
        }
        for (std::size_t i = 1; i < G; ++i) {
            field.phi[i] -= sub_dt / de * (flux[i] - flux[i - 1]);
        }
        field.phi.front() = 0.0;
        field.phi.back() = 0.0;
    }
    field.t += dt;
    ++field.step_index;
    field.rescale();
}

/// int phi_abs / int phi_free, the conditional survival probability.
inline double survival_ratio(const ZakaiField &absorbed, const ZakaiField &free) {
    const double la = absorbed.log_mass();
    const double lf = free.log_mass();
    require(std::isfinite(lf), ErrorKind::DegenerateEnsemble,
            "free-space Zakai field has no mass");
    if (!std::isfinite(la)) {
        return 0.0;
    }
    return std::exp(la - lf);
}

/// Free-space companion domain: the lock domain padded by whole cells
/// covering 6 eps sigma sqrt(T).
struct FreeDomain {
    double lo;
    double hi;
    std::size_t G;
};

inline FreeDomain free_domain(const LockDomain &domain, std::size_t G,
                              const DiffusionModel &model, double horizon) {
    const double de = domain.width() / static_cast<double>(G);
    const double pad = 6.0 * model.state_noise() * std::sqrt(horizon);
    const auto extra = static_cast<std::size_t>(std::ceil(pad / de));
    return {domain.lo - static_cast<double>(extra) * de,
            domain.hi + static_cast<double>(extra) * de, G + 2 * extra};
}

struct ZakaiSurvival {
    TimeGrid grid;
    std::vector<double> survival;
    std::vector<double> mass_abs;  ///< relative to the initial mass
    std::vector<double> mass_free; ///< relative to the initial mass
};

/// Survival curve Pr{tau > t_i | y} for a fixed observation record and estimate.
inline ZakaiSurvival zakai_survival(const DiffusionModel &model,
                                   const LockDomain &domain,
                                   std::span<const double> dy_obs,
                                   std::span<const double> xhat_path,
                                   const TimeGrid &grid, std::size_t G,
                                   double e0 = 0.0) {
    validate(grid);
    require(dy_obs.size() == grid.n_steps, ErrorKind::InvalidArgument,
            "dy_obs must have N entries");
    require(xhat_path.size() == grid.n_steps + 1, ErrorKind::InvalidArgument,
            "xhat_path must have N+1 entries");
    ZakaiField absorbed = init_delta(domain, G, e0);
    const FreeDomain fd = free_domain(domain, G, model, grid.horizon());
    ZakaiField free = init_delta(fd.lo, fd.hi, fd.G, e0);

    ZakaiSurvival out;
    out.grid = grid;
    auto record = [&] {
        out.survival.push_back(survival_ratio(absorbed, free));
        out.mass_abs.push_back(absorbed.mass());
        out.mass_free.push_back(free.mass());
    };
    record();
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double dxhat = xhat_path[i + 1] - xhat_path[i];
        // The free field has the widest drift range; both use its count.
        const std::size_t sub = std::max(
            required_substeps(free, model, xhat_path[i], dxhat, grid.dt),
            required_substeps(absorbed, model, xhat_path[i], dxhat, grid.dt));
        step_field(absorbed, model, xhat_path[i], dxhat, dy_obs[i], grid.dt, sub);
        step_field(free, model, xhat_path[i], dxhat, dy_obs[i], grid.dt, sub);
        record();
    }
    return out;
}

/// E[tau ^ T | y] by trapezoid integration of the Zakai survival curve.
inline double mtll_oracle(const DiffusionModel &model, const LockDomain &domain,
                          std::span<const double> dy_obs,
                          std::span<const double> xhat_path, const TimeGrid &grid,
                          std::size_t G) {
    const ZakaiSurvival s = zakai_survival(model, domain, dy_obs, xhat_path, grid, G);
    return trapezoid(s.survival, grid.dt);
}

/// CSV with columns t, survival_ratio, mass_abs, mass_free.
inline void write_zakai_csv(std::ostream &out, const ZakaiSurvival &s) {
    out.precision(17);
    out << "t,survival_ratio,mass_abs,mass_free\n";
    for (std::size_t i = 0; i < s.survival.size(); ++i) {
        out << s.grid.t(i) << ',' << s.survival[i] << ',' << s.mass_abs[i] << ','
            << s.mass_free[i] << '\n';
    }
}

} // namespace mtll
