// Weighted particle ensembles for the conditional mean time to lose lock.
//
// Particles follow the prior error dynamics with their own keyed noise and
// carry the log-likelihood
//   l_j(i) = sum_{k=1..i} [H(e_j(t_{k-1})) dy_k - H^2 dt / 2] / (eps rho)^2
// No resampling: the estimators are plain self-normalized importance
// sampling over prior paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "errors.hpp"
#include "lock.hpp"
#include "model.hpp"
#include "numeric.hpp"
#include "rng.hpp"
#include "sde_sim.hpp"

namespace mtll {

inline double log_lik_increment(double H, double dy, double dt, double eps,
                                double rho) {
    return (H * dy - 0.5 * H * H * dt) / (eps * eps * rho * rho);
}

enum class WeightMode {
    Frozen, ///< absorbed particles keep l_j(tau_j)
    Full,   ///< absorbed particles keep accumulating along their prior path
};

struct EnsembleOptions {
    double e0 = 0.0;
    /// Store every particle's error path and (unfrozen) log-weight path.
    bool keep_paths = false;
};

struct ParticleEnsemble {
    TimeGrid grid;
    std::vector<ExitInfo> exits;
    /// l_j at the stopped index tau_j ^ T.
    std::vector<double> log_weight;
    /// Curves on the time grid, N+1 entries each (empty for hand-built ensembles).
    std::vector<double> survival_frozen;
    std::vector<double> survival_full;
    std::vector<double> n_eff;
    /// Only with keep_paths. log_weight_path keeps accumulating past exit;
    /// use frozen_log_weight() for the frozen convention.
    std::vector<std::vector<double>> error_paths;
    std::vector<std::vector<double>> log_weight_paths;

    std::size_t size() const { return exits.size(); }

    std::size_t stop_index(std::size_t j) const {
        return stopped_index(exits[j], grid);
    }

    double frozen_log_weight(std::size_t j, std::size_t i) const {
        require(!log_weight_paths.empty(), ErrorKind::InvalidArgument,
                "ensemble was built without paths");
        return log_weight_paths[j][std::min(i, stop_index(j))];
    }
};

/// (sum w)^2 / sum w^2 for log-weights, max-subtracted.
inline double effective_sample_size(std::span<const double> log_w) {
    const double top = max_finite(log_w);
    std::vector<double> w(log_w.size());
    std::vector<double> w2(log_w.size());
    for (std::size_t j = 0; j < log_w.size(); ++j) {
        w[j] = std::exp(log_w[j] - top);
        w2[j] = w[j] * w[j];
    }
    const double s = pairwise_sum(w);
    return s * s / pairwise_sum(w2);
}

/**
 * @brief Propagates n prior particles against one observed increment record.
 *
 * @param dy_obs observed increments, N entries
 * @param xhat_path estimate xhat(t_0..t_N) defining the error coordinate
 */
inline ParticleEnsemble propagate_ensemble(const DiffusionModel &model,
                                           const LockDomain &domain,
                                           const TimeGrid &grid, std::size_t n,
                                           std::span<const double> dy_obs,
                                           std::span<const double> xhat_path,
                                           std::uint64_t seed,
                                           const EnsembleOptions &options = {}) {
    validate(grid);
    require(n >= 1, ErrorKind::InvalidParameter, "ensemble needs n >= 1");
    require(dy_obs.size() == grid.n_steps, ErrorKind::InvalidArgument,
            "dy_obs must have N entries");
    require(xhat_path.size() == grid.n_steps + 1, ErrorKind::InvalidArgument,
            "xhat_path must have N+1 entries");

    const std::size_t steps = grid.n_steps;
    const double dt = grid.dt;
    const double sq = std::sqrt(dt);
    const KeyedNormal noise(seed);

    ParticleEnsemble ens;
    ens.grid = grid;
    ens.exits.assign(n, censored(grid));
    ens.log_weight.assign(n, 0.0);
    ens.survival_frozen.reserve(steps + 1);
    ens.survival_full.reserve(steps + 1);
    ens.n_eff.reserve(steps + 1);
    if (options.keep_paths) {
        ens.error_paths.assign(n, std::vector<double>(steps + 1));
        ens.log_weight_paths.assign(n, std::vector<double>(steps + 1));
    }

    std::vector<double> e(n, options.e0);
    std::vector<double> ell(n, 0.0);
    std::vector<char> alive(n, 1);
    std::vector<double> num(n);
    std::vector<double> den(n);
    std::vector<double> sq_w(n);

    auto record = [&](std::size_t i) {
        // Frozen convention: ell is frozen in log_weight once absorbed.
        const double top_frozen = max_finite(ens.log_weight);
        const double top_full = max_finite(ell);
        for (std::size_t j = 0; j < n; ++j) {
            const double wf = std::exp(ens.log_weight[j] - top_frozen);
            den[j] = wf;
            num[j] = alive[j] ? wf : 0.0;
        }
        const double frozen = pairwise_sum(num) / pairwise_sum(den);
        for (std::size_t j = 0; j < n; ++j) {
            const double w = std::exp(ell[j] - top_full);
            den[j] = w;
            num[j] = alive[j] ? w : 0.0;
            sq_w[j] = w * w;
        }
        const double total = pairwise_sum(den);
        ens.survival_frozen.push_back(frozen);
        ens.survival_full.push_back(pairwise_sum(num) / total);
        ens.n_eff.push_back(total * total / pairwise_sum(sq_w));
        if (options.keep_paths) {
            for (std::size_t j = 0; j < n; ++j) {
                ens.error_paths[j][i] = e[j];
                ens.log_weight_paths[j][i] = ell[j];
            }
        }
    };

    for (std::size_t j = 0; j < n; ++j) {
        if (!domain.contains(e[j])) {
            alive[j] = 0;
            ens.exits[j] = exited_at(0, grid);
        }
    }
    record(0);

    for (std::size_t i = 0; i < steps; ++i) {
        const double t = grid.t(i);
        const double xhat = xhat_path[i];
        const double dxhat = xhat_path[i + 1] - xhat_path[i];
        const double dy = dy_obs[i];
        for (std::size_t j = 0; j < n; ++j) {
            const double x = xhat + e[j];
            const double m = model.m(x, t);
            const double h = model.h(x, t);
            if (!std::isfinite(m) || !std::isfinite(h)) {
                throw NumericalOverflow(i, "particle " + std::to_string(j) +
                                               ": non-finite drift or measurement");
            }
            ell[j] += log_lik_increment(h, dy, dt, model.eps, model.rho);
            e[j] = e[j] + dt * m - dxhat +
                   model.state_noise() * sq * noise(j, i, Channel::ParticleState);
            if (alive[j]) {
                ens.log_weight[j] = ell[j];
                if (!domain.contains(e[j])) {
                    alive[j] = 0;
                    ens.exits[j] = exited_at(i + 1, grid);
                }
            }
        }
        record(i + 1);
    }
    return ens;
}

struct ConditionalMtll {
    double mean = 0.0;
    /// Delta-method standard error of the self-normalized estimator.
    double std_error = 0.0;
    double n_eff = 0.0;
};

/**
 * @brief Weighted mean of tau_j ^ T with weights exp(l_j(tau_j ^ T)).
 *
 * Weights are grouped by stopped index (in particle order) and the groups
 * summed in increasing index order, so the result is reproducible
 * bit-for-bit.
 */
inline ConditionalMtll conditional_mtll_stats(const ParticleEnsemble &ens) {
    const std::size_t n = ens.size();
    require(n >= 1 && ens.log_weight.size() == n, ErrorKind::InvalidArgument,
            "conditional_mtll: empty or inconsistent ensemble");
    const double top = max_finite(ens.log_weight);
    require(std::isfinite(top), ErrorKind::DegenerateEnsemble,
            "conditional_mtll: no finite log-weight");
    std::vector<double> group(ens.grid.n_steps + 1, 0.0);
    std::vector<double> w(n);
    for (std::size_t j = 0; j < n; ++j) {
        w[j] = std::exp(ens.log_weight[j] - top);
        group[ens.stop_index(j)] += w[j];
    }
    double numer = 0.0;
    double denom = 0.0;
    for (std::size_t i = 0; i < group.size(); ++i) {
        numer += ens.grid.t(i) * group[i];
        denom += group[i];
    }
    if (!(denom > 0.0)) {
        fail(ErrorKind::DegenerateEnsemble, "conditional_mtll: all weights vanished");
    }
    ConditionalMtll out;
    out.mean = numer / denom;
    std::vector<double> var_terms(n);
    std::vector<double> sq_terms(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double wn = w[j] / denom;
        const double d = ens.grid.t(ens.stop_index(j)) - out.mean;
        var_terms[j] = wn * wn * d * d;
        sq_terms[j] = wn * wn;
    }
    out.std_error = std::sqrt(pairwise_sum(var_terms));
    out.n_eff = 1.0 / pairwise_sum(sq_terms);
    return out;
}

inline double conditional_mtll(const ParticleEnsemble &ens) {
    return conditional_mtll_stats(ens).mean;
}

/// Same estimator with a horizon T below the ensemble's (needs stored paths).
inline double conditional_mtll(const ParticleEnsemble &ens, double horizon) {
    if (horizon >= ens.grid.horizon()) {
        return conditional_mtll(ens);
    }
    require(horizon > 0.0, ErrorKind::InvalidArgument, "horizon must be positive");
    const auto cut = static_cast<std::size_t>(std::floor(horizon / ens.grid.dt));
    ParticleEnsemble shortened;
    shortened.grid = TimeGrid{ens.grid.dt, std::max<std::size_t>(cut, 1)};
    for (std::size_t j = 0; j < ens.size(); ++j) {
        const std::size_t stop = std::min(ens.stop_index(j), shortened.grid.n_steps);
        shortened.exits.push_back(ens.exits[j].exited && ens.exits[j].tau_index <= stop
                                      ? exited_at(stop, shortened.grid)
                                      : censored(shortened.grid));
        shortened.log_weight.push_back(ens.frozen_log_weight(j, stop));
    }
    return conditional_mtll(shortened);
}

inline const std::vector<double> &survival_curve(const ParticleEnsemble &ens,
                                                 WeightMode mode) {
    require(!ens.survival_full.empty(), ErrorKind::InvalidArgument,
            "ensemble has no survival curves");
    return mode == WeightMode::Frozen ? ens.survival_frozen : ens.survival_full;
}

/// Trapezoid integral of S over [0, T].
inline double mtll_from_survival(std::span<const double> survival,
                                 const TimeGrid &grid) {
    require(survival.size() == grid.n_steps + 1, ErrorKind::InvalidArgument,
            "survival curve must have N+1 entries");
    require(std::abs(survival.front() - 1.0) < 1e-12, ErrorKind::InvalidArgument,
            "survival curve must start at 1");
    return trapezoid(survival, grid.dt);
}

/// CSV with columns t, S_frozen, S_full, n_eff.
inline void write_survival_csv(std::ostream &out, const ParticleEnsemble &ens) {
    out.precision(17);
    out << "t,S_frozen,S_full,n_eff\n";
    for (std::size_t i = 0; i < ens.survival_full.size(); ++i) {
        out << ens.grid.t(i) << ',' << ens.survival_frozen[i] << ','
            << ens.survival_full[i] << ',' << ens.n_eff[i] << '\n';
    }
}

} // namespace mtll
