// Minimum-noise-energy (MNE) filtering by dynamic programming on a state
// lattice.
//
// V_k(i) is the least noise energy
//   sum_k (x_k - x_{k-1} - dt m(x_{k-1}))^2/(sigma^2 dt)
//       + (dy_k - dt h(x_{k-1}))^2/(rho^2 dt)
// over lattice paths ending in cell i at step k. The causal estimate is the
// endpoint of the current minimizer; backtracing from step N gives the
// noncausal minimizing path. The common 1/eps^2 factor is left out since it
// does not move any argmin.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "sde_sim.hpp"

namespace mtll {

namespace detail {

inline double transition_cost_terms(double displacement, double m_prev,
                                    double h_prev, double dy, double dt,
                                    double sigma, double rho) {
    const double ds = displacement - dt * m_prev;
    const double dv = dy - dt * h_prev;
    return ds * ds / (sigma * sigma * dt) + dv * dv / (rho * rho * dt);
}

} // namespace detail

/// Noise energy of one Euler transition; m and h are taken at x_prev.
inline double transition_cost(double x_prev, double x_next, double dy, double dt,
                              const DiffusionModel &model, double t = 0.0) {
    return detail::transition_cost_terms(x_next - x_prev, model.m(x_prev, t),
                                         model.h(x_prev, t), dy, dt, model.sigma,
                                         model.rho);
}

enum class LatticeInit {
    Delta,          ///< zero cost at the cell nearest x0, +inf elsewhere
    QuadraticPrior, ///< (x - x0)^2 / prior_scale^2
};

struct LatticeConfig {
    std::size_t cells = 257;
    double lo = -2.0 * std::numbers::pi;
    double hi = 2.0 * std::numbers::pi;
    /// Cells cover [lo, hi) and wrap around; otherwise G nodes span [lo, hi].
    bool periodic = false;
    /// Transition band half-width W in cells; 0 picks it automatically.
    std::size_t half_width = 0;
    /// Observation increments aggregated per DP step; 0 picks it automatically.
    std::size_t stride = 0;
    LatticeInit init = LatticeInit::Delta;
    double prior_scale = 1.0;
    /// Keep every backpointer row (needed by smooth_path).
    bool keep_backpointers = false;
    /// Experimental: emit the backtraced state this many DP steps back
    /// instead of the argmin endpoint.
    std::size_t fixed_lag = 0;
};

/**
 * @brief Default lattice around a known initial state.
 *
 * Periodic models get one period centered on x0 (256 cells); other models
 * get 257 nodes over [x0 - 2 pi, x0 + 2 pi].
 */
inline LatticeConfig default_lattice(const DiffusionModel &model, double x0) {
    LatticeConfig cfg;
    if (model.period) {
        cfg.periodic = true;
        cfg.cells = 256;
        cfg.lo = x0 - 0.5 * *model.period;
        cfg.hi = x0 + 0.5 * *model.period;
    } else {
        cfg.lo = x0 - 2.0 * std::numbers::pi;
        cfg.hi = x0 + 2.0 * std::numbers::pi;
    }
    return cfg;
}

/// Wraps d into [-period/2, period/2).
inline double wrap_centered(double d, double period) {
    return d - period * std::floor(d / period + 0.5);
}

/// Cost-to-come table with backpointers on a fixed state lattice.
class EnergyLattice {
public:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    EnergyLattice(const LatticeConfig &cfg, std::size_t half_width)
        : periodic_(cfg.periodic), keep_all_(cfg.keep_backpointers),
          lag_(cfg.fixed_lag) {
        require(cfg.cells >= 1, ErrorKind::InvalidParameter, "lattice needs G >= 1");
        require(cfg.lo < cfg.hi || cfg.cells == 1, ErrorKind::InvalidParameter,
                "lattice needs lo < hi");
        const std::size_t G = cfg.cells;
        if (periodic_) {
            spacing_ = (cfg.hi - cfg.lo) / static_cast<double>(G);
            period_ = cfg.hi - cfg.lo;
        } else {
            spacing_ = G > 1 ? (cfg.hi - cfg.lo) / static_cast<double>(G - 1) : 0.0;
        }
        x_.resize(G);
        for (std::size_t i = 0; i < G; ++i) {
            x_[i] = cfg.lo + static_cast<double>(i) * spacing_;
        }
        const std::size_t max_w = periodic_ ? (G - 1) / 2 : (G > 0 ? G - 1 : 0);
        half_width_ = std::min(half_width, max_w);
        cost_.assign(G, kInf);
        next_.assign(G, kInf);
        m_.resize(G);
        obs_.resize(G);
    }

    std::size_t size() const { return x_.size(); }
    double spacing() const { return spacing_; }
    bool periodic() const { return periodic_; }
    double period() const { return period_; }
    std::size_t half_width() const { return half_width_; }
    std::size_t steps() const { return steps_; }
    std::span<const double> states() const { return x_; }
    double state(std::size_t i) const { return x_[i]; }

    /// Cost-to-come V_k(i) at the current step.
    double cost(std::size_t i) const { return offset_ + cost_[i]; }
    std::span<const double> relative_costs() const { return cost_; }
    double offset() const { return offset_; }

    /// Backpointer row for step k (1-based) when all rows are kept.
    std::span<const std::int32_t> backpointers(std::size_t k) const {
        require(keep_all_ && k >= 1 && k <= back_.size(), ErrorKind::InvalidArgument,
                "backpointers not available for this step");
        return back_[k - 1];
    }
    bool keeps_backpointers() const { return keep_all_; }
    std::size_t fixed_lag() const { return lag_; }

    std::size_t nearest_cell(double x) const {
        if (x_.size() == 1) {
            return 0;
        }
        double u = (x - x_.front()) / spacing_;
        if (periodic_) {
            const double G = static_cast<double>(x_.size());
            u = u - G * std::floor(u / G);
            auto k = static_cast<std::size_t>(std::llround(u));
            return k == x_.size() ? 0 : k;
        }
        const double clamped = std::clamp(u, 0.0, static_cast<double>(x_.size() - 1));
        return static_cast<std::size_t>(std::llround(clamped));
    }

    /// Signed displacement from cell j to cell i.
    double displacement(std::size_t j, std::size_t i) const {
        if (!periodic_) {
            return x_[i] - x_[j];
        }
        return static_cast<double>(band_offset(j, i)) * spacing_;
    }

    void init_delta(double x0) {
        std::fill(cost_.begin(), cost_.end(), kInf);
        cost_[nearest_cell(x0)] = 0.0;
        reset_history();
    }

    void init_quadratic(double x0, double scale) {
        require(scale > 0.0, ErrorKind::InvalidParameter, "prior scale must be positive");
        for (std::size_t i = 0; i < x_.size(); ++i) {
            const double d = periodic_ ? wrap_centered(x_[i] - x0, period_) : x_[i] - x0;
            cost_[i] = d * d / (scale * scale);
        }
        reset_history();
    }

    /**
     * @brief Advances one step: V_k(i) = min_{|i-j|<=W} V_{k-1}(j) + cost(j->i).
     *
     * Drift and measurement are evaluated at the predecessor, at time t of the
     * step's left endpoint. Ties go to the smallest predecessor index.
     */
    void step(double dy, double dt, const DiffusionModel &model, double t) {
        require(dt > 0.0, ErrorKind::InvalidParameter, "viterbi_step: dt must be positive");
        const std::size_t G = x_.size();
        const auto W = static_cast<std::ptrdiff_t>(half_width_);
        const double s2 = model.sigma * model.sigma * dt;
        const double r2 = model.rho * model.rho * dt;
        for (std::size_t j = 0; j < G; ++j) {
            m_[j] = model.m(x_[j], t);
            const double dv = dy - dt * model.h(x_[j], t);
            obs_[j] = dv * dv / r2;
        }
        std::vector<std::int32_t> row(G, -1);
        const auto sG = static_cast<std::ptrdiff_t>(G);
        for (std::ptrdiff_t i = 0; i < sG; ++i) {
            double best = kInf;
            std::int32_t arg = -1;
            if (periodic_) {
                for (std::ptrdiff_t d = -W; d <= W; ++d) {
                    std::ptrdiff_t j = (i - d) % sG;
                    if (j < 0) {
                        j += sG;
                    }
                    relax(best, arg, j, static_cast<double>(d) * spacing_, s2, dt);
                }
            } else {
                const std::ptrdiff_t j_lo = std::max<std::ptrdiff_t>(0, i - W);
                const std::ptrdiff_t j_hi = std::min<std::ptrdiff_t>(sG - 1, i + W);
                for (std::ptrdiff_t j = j_lo; j <= j_hi; ++j) {
                    relax(best, arg, j, x_[i] - x_[j], s2, dt);
                }
            }
            next_[i] = best;
            row[i] = arg;
        }
        cost_.swap(next_);
        ++steps_;
        if (keep_all_) {
            back_.push_back(row);
        } else if (lag_ > 0) {
            back_.push_back(std::move(row));
            if (back_.size() > lag_) {
                back_.pop_front();
            }
        }
        renormalize();
    }

    /// Cell of the smallest cost-to-come (smallest index on ties).
    std::size_t argmin() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < cost_.size(); ++i) {
            if (cost_[i] < cost_[best]) {
                best = i;
            }
        }
        if (!std::isfinite(cost_[best])) {
            fail(ErrorKind::NoFeasiblePath, "every lattice cell is unreachable");
        }
        return best;
    }

    /// Backtraces `lag` steps from cell i using the retained rows.
    std::size_t backtrace(std::size_t cell, std::size_t lag) const {
        const std::size_t depth = std::min(lag, back_.size());
        for (std::size_t r = 0; r < depth; ++r) {
            cell = static_cast<std::size_t>(back_[back_.size() - 1 - r][cell]);
        }
        return cell;
    }

private:
    std::ptrdiff_t wrapped_offset(std::ptrdiff_t j, std::ptrdiff_t i) const {
        const auto G = static_cast<std::ptrdiff_t>(x_.size());
        std::ptrdiff_t d = (i - j) % G;
        if (d < 0) {
            d += G;
        }
        if (2 * d >= G) {
            d -= G;
        }
        return d;
    }

    std::ptrdiff_t band_offset(std::size_t j, std::size_t i) const {
        return wrapped_offset(static_cast<std::ptrdiff_t>(j), static_cast<std::ptrdiff_t>(i));
    }

    void relax(double &best, std::int32_t &arg, std::ptrdiff_t j, double disp,
               double s2, double dt) const {
        const double prev = cost_[static_cast<std::size_t>(j)];
        if (prev == kInf) {
            return;
        }
        const double ds = disp - dt * m_[static_cast<std::size_t>(j)];
        const double c = ds * ds / s2 + obs_[static_cast<std::size_t>(j)];
        const double v = prev + c;
        if (v < best || (v == best && static_cast<std::int32_t>(j) < arg)) {
            best = v;
            arg = static_cast<std::int32_t>(j);
        }
    }

    void renormalize() {
        constexpr double kThreshold = 1e6;
        double low = kInf;
        for (double v : cost_) {
            low = std::min(low, v);
        }
        if (std::isfinite(low) && low > kThreshold) {
            for (double &v : cost_) {
                v -= low;
            }
            offset_ += low;
        }
    }

    void reset_history() {
        back_.clear();
        steps_ = 0;
        offset_ = 0.0;
    }

    bool periodic_;
    bool keep_all_;
    std::size_t lag_;
    double spacing_ = 0.0;
    double period_ = 0.0;
    std::size_t half_width_ = 0;
    std::vector<double> x_;
    std::vector<double> cost_;
    std::vector<double> next_;
    std::vector<double> m_;
    std::vector<double> obs_;
    std::deque<std::vector<std::int32_t>> back_;
    double offset_ = 0.0;
    std::size_t steps_ = 0;
};

inline void viterbi_step(EnergyLattice &lattice, double dy, double dt,
                         const DiffusionModel &model, double t) {
    lattice.step(dy, dt, model, t);
}

/// Endpoint of the current minimum-noise-energy path.
inline double causal_estimate(const EnergyLattice &lattice) {
    return lattice.state(lattice.argmin());
}

/// Cell indices of the minimizing path, steps 0..k (needs all backpointers).
inline std::vector<std::size_t> smooth_cells(const EnergyLattice &lattice) {
    require(lattice.keeps_backpointers(), ErrorKind::InvalidArgument,
            "smooth_path needs keep_backpointers");
    const std::size_t k = lattice.steps();
    std::vector<std::size_t> cells(k + 1);
    std::size_t cell = lattice.argmin();
    cells[k] = cell;
    for (std::size_t s = k; s >= 1; --s) {
        cell = static_cast<std::size_t>(lattice.backpointers(s)[cell]);
        cells[s - 1] = cell;
    }
    return cells;
}

/// Minimizing path x~(t_0..t_k); periodic lattices are unwrapped continuously.
inline std::vector<double> smooth_path(const EnergyLattice &lattice) {
    const auto cells = smooth_cells(lattice);
    std::vector<double> path(cells.size());
    path[0] = lattice.state(cells[0]);
    for (std::size_t s = 1; s < cells.size(); ++s) {
        path[s] = path[s - 1] + lattice.displacement(cells[s - 1], cells[s]);
    }
    return path;
}

/// Band W with W * dx >= max|m| dt + 6 eps sigma sqrt(dt), at least 1.
inline std::size_t auto_half_width(const DiffusionModel &model, std::span<const double> cells,
                                   double spacing, double dt) {
    double top = 0.0;
    for (double x : cells) {
        top = std::max(top, std::abs(model.m(x, 0.0)));
    }
    const double reach = top * dt + 6.0 * model.state_noise() * std::sqrt(dt);
    if (spacing <= 0.0) {
        return 0;
    }
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(reach / spacing - 1e-12)));
}

/// Smallest stride whose typical state step eps sigma sqrt(s dt) spans a cell.
inline std::size_t auto_stride(const DiffusionModel &model, double spacing, double dt) {
    const double r = spacing / model.state_noise();
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(r * r / dt - 1e-9)));
}

/**
 * @brief Streaming causal MNE filter.
 *
 * update() consumes one observation increment. Every `stride` increments the
 * aggregated increment drives one DP step and the estimate moves to the new
 * argmin endpoint; in between the estimate is held. On periodic lattices the
 * estimate is lifted to the representative nearest the previous estimate.
 */
class MneFilter {
public:
    MneFilter(const DiffusionModel &model, const TimeGrid &grid, double x0,
              const LatticeConfig &cfg)
        : model_(&model), dt_(grid.dt), lattice_(cfg, 0) {
        validate(grid);
        const double spacing = lattice_.spacing();
        stride_ = cfg.stride > 0 ? cfg.stride : auto_stride(model, spacing, dt_);
        const std::size_t W =
            cfg.half_width > 0
                ? cfg.half_width
                : auto_half_width(model, lattice_.states(), spacing, block_dt());
        lattice_ = EnergyLattice(cfg, W);
        if (cfg.init == LatticeInit::Delta) {
            lattice_.init_delta(x0);
        } else {
            lattice_.init_quadratic(x0, cfg.prior_scale);
        }
        const double start = causal_estimate(lattice_);
        estimate_ = lattice_.periodic()
                        ? x0 + wrap_centered(start - x0, lattice_.period())
                        : start;
    }

    double estimate() const { return estimate_; }
    std::size_t stride() const { return stride_; }
    double block_dt() const { return dt_ * static_cast<double>(stride_); }
    const EnergyLattice &lattice() const { return lattice_; }

    void update(double dy) {
        pending_ += dy;
        if (++count_ < stride_) {
            return;
        }
        const double t = static_cast<double>(lattice_.steps()) * block_dt();
        lattice_.step(pending_, block_dt(), *model_, t);
        pending_ = 0.0;
        count_ = 0;
        std::size_t cell = lattice_.argmin();
        if (lattice_.fixed_lag() > 0) {
            cell = lattice_.backtrace(cell, lattice_.fixed_lag());
        }
        const double x = lattice_.state(cell);
        estimate_ = lattice_.periodic()
                        ? estimate_ + wrap_centered(x - estimate_, lattice_.period())
                        : x;
    }

private:
    const DiffusionModel *model_;
    double dt_;
    EnergyLattice lattice_;
    std::size_t stride_ = 1;
    double pending_ = 0.0;
    std::size_t count_ = 0;
    double estimate_ = 0.0;
};

/// Causal estimates xhat(t_0..t_N) of the MNE filter over a recorded run.
inline std::vector<double> run_mne_filter(const DiffusionModel &model,
                                          const TimeGrid &grid,
                                          std::span<const double> dy_obs,
                                          const LatticeConfig &cfg, double x0) {
    require(dy_obs.size() == grid.n_steps, ErrorKind::InvalidArgument,
            "dy_obs must have N entries");
    MneFilter filter(model, grid, x0, cfg);
    std::vector<double> out;
    out.reserve(grid.n_steps + 1);
    out.push_back(filter.estimate());
    for (double dy : dy_obs) {
        filter.update(dy);
        out.push_back(filter.estimate());
    }
    return out;
}

/// Appends rows k, x_i, V for the lattice's current step.
inline void append_lattice_csv(std::ostream &out, const EnergyLattice &lattice) {
    out.precision(17);
    for (std::size_t i = 0; i < lattice.size(); ++i) {
        out << lattice.steps() << ',' << lattice.state(i) << ',' << lattice.cost(i) << '\n';
    }
}

} // namespace mtll
