// Error paths and first exit.
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>
#include <mtll/lock.hpp>

using namespace mtll;

constexpr double kPi = std::numbers::pi;

TEST(ErrorPath, Subtraction) {
    const std::vector<double> x{1.0, 2.0};
    EXPECT_EQ(error_path(x, x), (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(error_path(x, std::vector<double>{0.0, 0.0}), x);
    const auto e = error_path(std::vector<double>{0.0, kPi}, std::vector<double>{0.0, -kPi});
    EXPECT_DOUBLE_EQ(e[1], 2.0 * kPi);
}

TEST(ErrorPath, LengthMismatch) {
    try {
        error_path(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(FirstExit, Examples) {
    const LockDomain L{};
    const TimeGrid grid{1.0, 3};
    const auto info = first_exit(std::vector<double>{0.0, 0.5, 3.2, 0.1}, L, grid);
    EXPECT_TRUE(info.exited);
    EXPECT_EQ(info.tau_index, 2u);
    EXPECT_DOUBLE_EQ(info.tau, 2.0);

    const auto still = first_exit(std::vector<double>(4, 0.0), L, grid);
    EXPECT_FALSE(still.exited);
    EXPECT_DOUBLE_EQ(still.tau, 3.0);

    const auto at_boundary = first_exit(std::vector<double>{kPi, 0.0, 0.0, 0.0}, L, grid);
    EXPECT_TRUE(at_boundary.exited);
    EXPECT_EQ(at_boundary.tau_index, 0u);
}

TEST(FirstExit, LowerBoundaryCountsAsExit) {
    const auto info = first_exit(std::vector<double>{0.0, -kPi}, LockDomain{}, TimeGrid{0.5, 1});
    EXPECT_TRUE(info.exited);
    EXPECT_DOUBLE_EQ(info.tau, 0.5);
}

TEST(FirstExit, ExtendingCensoredPathNeverShortensTau) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> e{0.0};
        for (int i = 0; i < 40; ++i) {
            e.push_back(e.back() + nd(rng));
        }
        const TimeGrid short_grid{0.1, 20};
        const auto first = first_exit(std::span(e).first(21), LockDomain{}, short_grid);
        if (first.exited) {
            continue;
        }
        const auto longer = first_exit(e, LockDomain{}, TimeGrid{0.1, 40});
        EXPECT_GE(longer.tau, first.tau - 1e-12);
    }
}

TEST(FirstExit, TranslationCovariance) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 0.4);
    std::uniform_real_distribution<double> shift(-5.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> e{0.0};
        for (int i = 0; i < 60; ++i) {
            e.push_back(e.back() + nd(rng));
        }
        // A dyadic shift keeps e + c exact.
        const double c = std::ldexp(std::round(std::ldexp(shift(rng), 10)), -10);
        std::vector<double> moved(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) {
            moved[i] = e[i] + c;
        }
        const LockDomain L{-2.0, 2.0};
        const LockDomain Lc{-2.0 + c, 2.0 + c};
        const TimeGrid grid{0.1, 60};
        const auto a = first_exit(e, L, grid);
        const auto b = first_exit(moved, Lc, grid);
        EXPECT_EQ(a.exited, b.exited);
        EXPECT_EQ(a.tau_index, b.tau_index);
    }
}
