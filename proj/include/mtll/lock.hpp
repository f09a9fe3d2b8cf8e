// Error paths and first exit from the lock domain.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "sde_sim.hpp"

namespace mtll {

/// First exit of an error path. When not exited, tau is the horizon T.
struct ExitInfo {
    bool exited = false;
    std::size_t tau_index = 0; ///< meaningful only when exited
    double tau = 0.0;
};

inline std::vector<double> error_path(std::span<const double> x,
                                      std::span<const double> xhat) {
    require(x.size() == xhat.size(), ErrorKind::InvalidArgument,
            "error_path: length mismatch");
    std::vector<double> e(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = x[i] - xhat[i];
    }
    return e;
}

inline ExitInfo censored(const TimeGrid &grid) {
    return ExitInfo{false, 0, grid.horizon()};
}

inline ExitInfo exited_at(std::size_t i, const TimeGrid &grid) {
    return ExitInfo{true, i, grid.t(i)};
}

/// Exit is checked at grid points only; e == lo or e == hi counts as exit.
inline ExitInfo first_exit(std::span<const double> e, const LockDomain &domain,
                           const TimeGrid &grid) {
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (!domain.contains(e[i])) {
            return exited_at(i, grid);
        }
    }
    return censored(grid);
}

/// tau ^ T expressed as a grid index.
inline std::size_t stopped_index(const ExitInfo &info, const TimeGrid &grid) {
    return info.exited ? info.tau_index : grid.n_steps;
}

} // namespace mtll
