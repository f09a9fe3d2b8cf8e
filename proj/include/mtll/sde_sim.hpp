// Euler-Maruyama simulation of state, observation and error trajectories.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace mtll {

/// Uniform grid t_i = i * dt, i = 0..n_steps.
struct TimeGrid {
    double dt = 1e-3;
    std::size_t n_steps = 1;

    double t(std::size_t i) const { return static_cast<double>(i) * dt; }
    double horizon() const { return t(n_steps); }

    /// Grid with the largest n such that n * dt <= T (rounded to nearest).
    static TimeGrid with_horizon(double dt, double horizon) {
        require(dt > 0.0 && horizon > 0.0, ErrorKind::InvalidParameter,
                "grid needs dt > 0 and T > 0");
        const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
        return TimeGrid{dt, n == 0 ? 1 : n};
    }
};

inline void validate(const TimeGrid &grid) {
    require(grid.dt > 0.0 && std::isfinite(grid.dt), ErrorKind::InvalidParameter,
            "time step must be positive");
    require(grid.n_steps >= 1, ErrorKind::InvalidParameter,
            "grid needs at least one step");
}

/// x holds N+1 states, dy holds the N observation increments.
struct SamplePath {
    TimeGrid grid;
    std::vector<double> x;
    std::vector<double> dy;
};

/**
 * @brief One step at a time generator for a (state, observation) pair.
 *
 * Draws noise for step i from key (seed, stream, i, channel). Used by the
 * batch simulators and by the streaming experiment runner, so both produce
 * identical trajectories.
 */
class PairStepper {
public:
    PairStepper(const DiffusionModel &model, const TimeGrid &grid, double x0,
                std::uint64_t seed, std::uint64_t stream = 0, bool noisy = true)
        : model_(&model), grid_(grid), noise_(seed), stream_(stream),
          noisy_(noisy), x_(x0) {}

    std::size_t index() const { return i_; }
    double x() const { return x_; }

    /// Advances from t_i to t_{i+1}; returns dy(i).
    double step() {
        const double t = grid_.t(i_);
        const double dt = grid_.dt;
        const double sq = std::sqrt(dt);
        const double m = model_->m(x_, t);
        const double h = model_->h(x_, t);
        if (!std::isfinite(m) || !std::isfinite(h)) {
            throw NumericalOverflow(i_, "non-finite drift or measurement");
        }
        double dw = 0.0;
        double dnu = 0.0;
        if (noisy_) {
            dw = sq * noise_(stream_, i_, Channel::State);
            dnu = sq * noise_(stream_, i_, Channel::Observation);
        }
        const double dy = dt * h + model_->obs_noise() * dnu;
        x_ = x_ + dt * m + model_->state_noise() * dw;
        if (!std::isfinite(x_) || !std::isfinite(dy)) {
            throw NumericalOverflow(i_, "state or observation overflow");
        }
        ++i_;
        return dy;
    }

private:
    const DiffusionModel *model_;
    TimeGrid grid_;
    KeyedNormal noise_;
    std::uint64_t stream_;
    bool noisy_;
    double x_;
    std::size_t i_ = 0;
};

namespace detail {

inline SamplePath run_pair(const DiffusionModel &model, const TimeGrid &grid,
                           double x0, std::uint64_t seed, std::uint64_t stream,
                           bool noisy) {
    validate(grid);
    require(std::isfinite(x0), ErrorKind::InvalidParameter,
            "initial state must be finite");
    SamplePath path{grid, {}, {}};
    path.x.reserve(grid.n_steps + 1);
    path.dy.reserve(grid.n_steps);
    PairStepper stepper(model, grid, x0, seed, stream, noisy);
    path.x.push_back(x0);
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        path.dy.push_back(stepper.step());
        path.x.push_back(stepper.x());
    }
    return path;
}

} // namespace detail

inline SamplePath simulate_pair(const DiffusionModel &model, const TimeGrid &grid,
                                double x0, std::uint64_t seed,
                                std::uint64_t stream = 0) {
    return detail::run_pair(model, grid, x0, seed, stream, true);
}

/// Deterministic Euler integration (dw = dnu = 0).
inline SamplePath zero_noise_pair(const DiffusionModel &model,
                                  const TimeGrid &grid, double x0) {
    return detail::run_pair(model, grid, x0, 0, 0, false);
}

/**
 * @brief Observation increments revealed one at a time.
 *
 * An estimator may only read increments that have already been revealed;
 * reading ahead throws a causality-violation error.
 */
class ObservationTape {
public:
    explicit ObservationTape(std::size_t capacity) { dy_.reserve(capacity); }

    std::size_t revealed() const { return dy_.size(); }

    double at(std::size_t k) const {
        if (k >= dy_.size()) {
            fail(ErrorKind::CausalityViolation,
                 "estimator read increment " + std::to_string(k) + " but only " +
                     std::to_string(dy_.size()) + " are revealed");
        }
        return dy_[k];
    }

    void reveal(double dy) { dy_.push_back(dy); }
    const std::vector<double> &increments() const { return dy_; }

private:
    std::vector<double> dy_;
};

/**
 * @brief Simulates the error coordinate e = x - xhat directly.
 *
 * `xhat_fn(i, tape)` must return xhat(t_i); when it is called the tape holds
 * dy(0..i-1). The returned path stores e in `x`.
 *
 *   e(i+1) = e(i) + dt*m(xhat_i + e_i) - (xhat_{i+1} - xhat_i) + eps*sigma*dw_i
 *   dy(i)  = dt*h(xhat_i + e_i) + eps*rho*dnu_i
 */
template <typename XhatFn>
SamplePath simulate_error_pair(const DiffusionModel &model, const TimeGrid &grid,
                               double e0, XhatFn &&xhat_fn, std::uint64_t seed,
                               std::uint64_t stream = 0, bool noisy = true) {
    validate(grid);
    SamplePath path{grid, {}, {}};
    path.x.reserve(grid.n_steps + 1);
    path.dy.reserve(grid.n_steps);
    ObservationTape tape(grid.n_steps);
    const KeyedNormal noise(seed);
    const double sq = std::sqrt(grid.dt);
    double e = e0;
    double xhat = xhat_fn(std::size_t{0}, static_cast<const ObservationTape &>(tape));
    path.x.push_back(e);
    for (std::size_t i = 0; i < grid.n_steps; ++i) {
        const double t = grid.t(i);
        const double x = xhat + e;
        const double m = model.m(x, t);
        const double h = model.h(x, t);
        if (!std::isfinite(m) || !std::isfinite(h)) {
            throw NumericalOverflow(i, "non-finite drift or measurement");
        }
        const double dw = noisy ? sq * noise(stream, i, Channel::State) : 0.0;
        const double dnu = noisy ? sq * noise(stream, i, Channel::Observation) : 0.0;
        const double dy = grid.dt * h + model.obs_noise() * dnu;
        tape.reveal(dy);
        const double xhat_next =
            xhat_fn(i + 1, static_cast<const ObservationTape &>(tape));
        e = e + grid.dt * m - (xhat_next - xhat) + model.state_noise() * dw;
        if (!std::isfinite(e)) {
            throw NumericalOverflow(i, "error coordinate overflow");
        }
        xhat = xhat_next;
        path.dy.push_back(dy);
        path.x.push_back(e);
    }
    return path;
}

/// CSV with columns t, x, dy; the final row has an empty dy field.
inline void write_path_csv(std::ostream &out, const SamplePath &path) {
    out.precision(17);
    out << "t,x,dy\n";
    for (std::size_t i = 0; i < path.x.size(); ++i) {
        out << path.grid.t(i) << ',' << path.x[i] << ',';
        if (i < path.dy.size()) {
            out << path.dy[i];
        }
        out << '\n';
    }
}


/**
 * @brief Reads a path CSV with a header naming at least columns t and dy.
 *
 * Column x is optional (left empty in the result when absent). The grid step
 * is taken from the first two t values; rows with an empty dy are allowed
 * only at the end.
 */
inline SamplePath read_path_csv(std::istream &in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Io, "empty path CSV");
    auto split = [](const std::string &row) {
        std::vector<std::string> cells;
        std::stringstream ss(row);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (!row.empty() && row.back() == ',') {
            cells.emplace_back();
        }
        return cells;
    };
    const auto header = split(line);
    int col_t = -1;
    int col_x = -1;
    int col_dy = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string &h = header[c];
        if (h == "t") col_t = static_cast<int>(c);
        if (h == "x") col_x = static_cast<int>(c);
        if (h == "dy") col_dy = static_cast<int>(c);
    }
    require(col_t >= 0 && col_dy >= 0, ErrorKind::Io, "path CSV needs columns t and dy");
    std::vector<double> t;
    SamplePath path;
    bool ended = false;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) {
            continue;
        }
        const auto cells = split(line);
        auto cell = [&](int c) -> const std::string & {
            static const std::string empty;
            return c >= 0 && static_cast<std::size_t>(c) < cells.size() ? cells[c] : empty;
        };
        try {
            t.push_back(std::stod(cell(col_t)));
            if (col_x >= 0) {
                path.x.push_back(std::stod(cell(col_x)));
            }
            if (cell(col_dy).empty()) {
                ended = true;
            } else {
                require(!ended, ErrorKind::Io, "dy missing before the last row");
                path.dy.push_back(std::stod(cell(col_dy)));
            }
        } catch (const std::invalid_argument &) {
            fail(ErrorKind::Io, "bad number in path CSV row " + std::to_string(row_no));
        }
    }
    require(t.size() >= 2 && !path.dy.empty(), ErrorKind::Io, "path CSV has too few rows");
    path.grid = TimeGrid{t[1] - t[0], path.dy.size()};
    validate(path.grid);
    return path;
}

} // namespace mtll
