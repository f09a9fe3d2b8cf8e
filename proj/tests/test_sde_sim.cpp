// Euler-Maruyama simulation and the keyed noise source.
#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>
#include <mtll/filters.hpp>
#include <mtll/sde_sim.hpp>

using namespace mtll;

TEST(KeyedNormal, PhiloxKnownAnswer) {
    // Random123 known-answer vectors for philox4x32-10.
    auto out = detail::philox4x32_10({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
    out = detail::philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out[0], 0xd16cfe09u);
    EXPECT_EQ(out[1], 0x94fdccebu);
    EXPECT_EQ(out[2], 0x5001e420u);
    EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(KeyedNormal, IncrementVariance) {
    const KeyedNormal noise(42);
    constexpr double dt = 1e-3;
    constexpr int n = 100000;
    double s = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dw = std::sqrt(dt) * noise(7, static_cast<std::uint64_t>(i), Channel::State);
        s += dw;
        s2 += dw * dw;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    EXPECT_NEAR(var / dt, 1.0, 0.02);
    EXPECT_NEAR(mean / std::sqrt(dt / n), 0.0, 4.0);
}

TEST(KeyedNormal, ChannelsAndStreamsDiffer) {
    const KeyedNormal noise(1);
    EXPECT_NE(noise(0, 0, Channel::State), noise(0, 0, Channel::Observation));
    EXPECT_NE(noise(0, 0, Channel::State), noise(1, 0, Channel::State));
    EXPECT_NE(noise(0, 0, Channel::State), KeyedNormal(2)(0, 0, Channel::State));
    EXPECT_NE(noise(0, 0, Channel::State), noise(std::uint64_t{1} << 32, 0, Channel::State));
}

TEST(ZeroNoisePair, BrownianStaysPut) {
    const auto model = make_linear_model(0.0, 1.0, 1.0, 1.0, 1.0);
    const auto path = zero_noise_pair(model, TimeGrid{0.1, 20}, 1.25);
    for (double x : path.x) {
        EXPECT_EQ(x, 1.25);
    }
}

TEST(ZeroNoisePair, OneEulerStep) {
    const auto model = make_linear_model(-1.0, 1.0, 1.0, 1.0, 1.0);
    const auto path = zero_noise_pair(model, TimeGrid{0.1, 3}, 1.0);
    EXPECT_DOUBLE_EQ(path.x[1], 0.9);
}

TEST(ZeroNoisePair, PhaseModelFromOriginObservesNothing) {
    const auto pm = make_phase_model(0.3, 1.0, 1.0);
    const auto path = zero_noise_pair(pm.model, TimeGrid{0.01, 50}, 0.0);
    for (double dy : path.dy) {
        EXPECT_EQ(dy, 0.0);
    }
}

TEST(ZeroNoisePair, FirstIncrement) {
    const auto model = make_linear_model(0.0, 1.0, 1.0, 1.0, 1.0);
    const auto path = zero_noise_pair(model, TimeGrid{0.5, 4}, 2.0);
    EXPECT_DOUBLE_EQ(path.dy[0], 1.0);
}

TEST(SimulatePair, ShapesAndDeterminism) {
    const auto pm = make_phase_model(0.3, 1.0, 1.0);
    const TimeGrid grid{1e-3, 500};
    const auto a = simulate_pair(pm.model, grid, 0.0, 99);
    const auto b = simulate_pair(pm.model, grid, 0.0, 99);
    ASSERT_EQ(a.x.size(), grid.n_steps + 1);
    ASSERT_EQ(a.dy.size(), grid.n_steps);
    EXPECT_EQ(a.dy, b.dy);
    EXPECT_EQ(a.x, b.x);
    const auto c = simulate_pair(pm.model, grid, 0.0, 100);
    EXPECT_NE(a.dy, c.dy);
}

TEST(SimulatePair, OverflowNamesStep) {
    auto model = make_linear_model(0.0, 1.0, 1.0, 1.0, 1.0);
    model.drift = [](double x, double) { return x > 3.0 ? HUGE_VAL : 1.0; };
    try {
        zero_noise_pair(model, TimeGrid{1.0, 10}, 0.0);
        FAIL();
    } catch (const NumericalOverflow &e) {
        EXPECT_EQ(e.kind(), ErrorKind::NumericalOverflow);
        EXPECT_EQ(e.step(), 4u);
    }
}

TEST(SimulatePair, OrnsteinUhlenbeckMean) {
    // E x(1) = x0 (1 - dt)^N for the Euler chain; e^-1 x0 in the limit.
    const auto model = make_linear_model(-1.0, 1.0, 1.0, 1.0, 1.0);
    const TimeGrid grid{0.01, 100};
    constexpr double x0 = 1.0;
    constexpr int paths = 100000;
    double s = 0.0;
    double s2 = 0.0;
    for (int r = 0; r < paths; ++r) {
        PairStepper st(model, grid, x0, 5, static_cast<std::uint64_t>(r));
        for (std::size_t i = 0; i < grid.n_steps; ++i) {
            st.step();
        }
        s += st.x();
        s2 += st.x() * st.x();
    }
    const double mean = s / paths;
    const double se = std::sqrt((s2 / paths - mean * mean) / paths);
    EXPECT_LT(std::abs(mean - x0 * std::exp(-1.0)), 3.0 * se);
}

TEST(SimulatePair, WeakErrorShrinksWithStep) {
    const auto model = make_linear_model(-1.0, 1.0, 1.0, 1.0, 1.0);
    constexpr double x0 = 4.0;
    constexpr int paths = 100000;
    double previous = HUGE_VAL;
    for (double dt : {0.1, 0.05, 0.025}) {
        const TimeGrid grid = TimeGrid::with_horizon(dt, 1.0);
        double s = 0.0;
        double s2 = 0.0;
        for (int r = 0; r < paths; ++r) {
            PairStepper st(model, grid, x0, 11, static_cast<std::uint64_t>(r));
            for (std::size_t i = 0; i < grid.n_steps; ++i) {
                st.step();
            }
            s += st.x();
            s2 += st.x() * st.x();
        }
        const double mean = s / paths;
        const double se = std::sqrt((s2 / paths - mean * mean) / paths);
        const double err = std::abs(mean - x0 * std::exp(-1.0));
        EXPECT_LT(err, previous + 2.0 * se) << "dt = " << dt;
        previous = err;
    }
}

TEST(SimulateErrorPair, ZeroEstimateMatchesStatePath) {
    const auto pm = make_phase_model(0.4, 1.0, 1.0);
    const TimeGrid grid{1e-2, 300};
    const auto direct = simulate_pair(pm.model, grid, 0.0, 3);
    const auto err = simulate_error_pair(
        pm.model, grid, 0.0, [](std::size_t, const ObservationTape &) { return 0.0; }, 3);
    EXPECT_EQ(direct.x, err.x);
    EXPECT_EQ(direct.dy, err.dy);
}

TEST(SimulateErrorPair, OracleEstimateHasZeroError) {
    const auto pm = make_phase_model(0.4, 1.0, 1.0);
    const TimeGrid grid{1e-2, 300};
    const auto truth = simulate_pair(pm.model, grid, 0.0, 8);
    const auto err = simulate_error_pair(
        pm.model, grid, 0.0,
        [&](std::size_t i, const ObservationTape &) { return truth.x[i]; }, 8);
    for (double e : err.x) {
        EXPECT_NEAR(e, 0.0, 1e-12);
    }
}

TEST(SimulateErrorPair, NoiselessConstantError) {
    const auto pm = make_phase_model(0.4, 1.0, 1.0);
    const TimeGrid grid{0.1, 10};
    const auto err = simulate_error_pair(
        pm.model, grid, 1.0, [](std::size_t, const ObservationTape &) { return 0.0; }, 0, 0,
        false);
    for (double e : err.x) {
        EXPECT_EQ(e, 1.0);
    }
    for (double dy : err.dy) {
        EXPECT_DOUBLE_EQ(dy, 0.1 * std::sin(1.0));
    }
}

TEST(SimulateErrorPair, ReadingAheadIsACausalityViolation) {
    const auto pm = make_phase_model(0.4, 1.0, 1.0);
    try {
        simulate_error_pair(
            pm.model, TimeGrid{0.1, 5}, 0.0,
            [](std::size_t i, const ObservationTape &tape) { return tape.at(i); }, 1);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::CausalityViolation);
    }
}

TEST(SimulateErrorPair, FilterDriverIsCausal) {
    const auto pm = make_phase_model(0.4, 1.0, 1.0);
    const TimeGrid grid{1e-2, 200};
    PllFilter pll(pm.model, grid, 0.0, 1.0);
    TapeDriver driver(pll);
    EXPECT_NO_THROW(simulate_error_pair(pm.model, grid, 0.0, driver, 4));
}

TEST(PathCsv, RoundTripKeepsIncrements) {
    const auto pm = make_phase_model(0.4, 1.0, 1.0);
    const auto path = simulate_pair(pm.model, TimeGrid{0.01, 25}, 0.0, 12);
    std::stringstream ss;
    write_path_csv(ss, path);
    const auto back = read_path_csv(ss);
    EXPECT_EQ(back.dy, path.dy);
    EXPECT_EQ(back.x, path.x);
    EXPECT_EQ(back.grid.n_steps, path.grid.n_steps);
    EXPECT_NEAR(back.grid.dt, 0.01, 1e-15);
}
