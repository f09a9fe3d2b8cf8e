// Causal filters behind one streaming interface.
#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "mne.hpp"
#include "model.hpp"
#include "sde_sim.hpp"
#include "trackers.hpp"

namespace mtll {

/// estimate() is xhat(t_i) after i calls to update().
class CausalFilter {
public:
    virtual ~CausalFilter() = default;
    virtual double estimate() const = 0;
    virtual void update(double dy) = 0;
};

class EkfFilter final : public CausalFilter {
public:
    EkfFilter(const DiffusionModel &model, const TimeGrid &grid, double x0, double P0 = 0.0)
        : model_(&model), grid_(grid), state_{x0, P0, 0.0} {}

    double estimate() const override { return state_.xhat; }
    double variance() const { return state_.P; }

    void update(double dy) override {
        state_ = ekf_step(state_, *model_, dy, grid_.dt, grid_.t(i_));
        ++i_;
    }

private:
    const DiffusionModel *model_;
    TimeGrid grid_;
    TrackerState state_;
    std::size_t i_ = 0;
};

class PllFilter final : public CausalFilter {
public:
    PllFilter(const DiffusionModel &model, const TimeGrid &grid, double x0, double gain)
        : model_(&model), grid_(grid), state_{x0, 0.0, gain} {}

    double estimate() const override { return state_.xhat; }

    void update(double dy) override {
        state_ = pll_step(state_, *model_, dy, grid_.dt, grid_.t(i_));
        ++i_;
    }

private:
    const DiffusionModel *model_;
    TimeGrid grid_;
    TrackerState state_;
    std::size_t i_ = 0;
};

class MneCausalFilter final : public CausalFilter {
public:
    MneCausalFilter(const DiffusionModel &model, const TimeGrid &grid, double x0,
                    const LatticeConfig &cfg)
        : filter_(model, grid, x0, cfg) {}

    double estimate() const override { return filter_.estimate(); }
    void update(double dy) override { filter_.update(dy); }
    const MneFilter &inner() const { return filter_; }

private:
    MneFilter filter_;
};

/// xhat held at its initial value.
class FrozenFilter final : public CausalFilter {
public:
    explicit FrozenFilter(double x0) : x0_(x0) {}
    double estimate() const override { return x0_; }
    void update(double) override {}

private:
    double x0_;
};

/// Adapts a CausalFilter to the xhat_fn contract of simulate_error_pair.
class TapeDriver {
public:
    explicit TapeDriver(CausalFilter &filter) : filter_(&filter) {}

    double operator()(std::size_t i, const ObservationTape &tape) {
        while (consumed_ < i) {
            filter_->update(tape.at(consumed_));
            ++consumed_;
        }
        return filter_->estimate();
    }

private:
    CausalFilter *filter_;
    std::size_t consumed_ = 0;
};

} // namespace mtll
