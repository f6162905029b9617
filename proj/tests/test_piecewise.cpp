#include <gtest/gtest.h>

#include <random>
#include <stdexcept>

#include "oracles/hull_oracle.hpp"
#include "superhedge/piecewise.hpp"

using superhedge::Knot;
using superhedge::PiecewiseAffine;

namespace {

PiecewiseAffine ramp(double k) {
    // pos(x - k)
    return PiecewiseAffine({0.0, 0.0, 0.0, 0.0}, {{k, 0.0, 0.0, 0.0}}, 1.0);
}

}  // namespace

TEST(Piecewise, EvaluatesSegmentsAndTail) {
    const std::pair<double, double> pts[] = {{0.0, 1.0}, {2.0, 3.0}, {4.0, 3.0}};
    const auto f = PiecewiseAffine::interpolate(pts, 0.5);
    EXPECT_DOUBLE_EQ(f(0.0), 1.0);
    EXPECT_DOUBLE_EQ(f(1.0), 2.0);
    EXPECT_DOUBLE_EQ(f(3.0), 3.0);
    EXPECT_DOUBLE_EQ(f(6.0), 4.0);
    EXPECT_DOUBLE_EQ(f.segment_slope(0), 1.0);
    EXPECT_DOUBLE_EQ(f.segment_slope(2), 0.5);
    EXPECT_THROW(f(-1.0), std::domain_error);
}

TEST(Piecewise, JumpLimitsAndSemicontinuity) {
    const PiecewiseAffine f({0.0, 0.0, 0.0, 0.0}, {{2.0, 0.0, 1.0, 1.0}}, 0.0);
    EXPECT_DOUBLE_EQ(f.left_limit(2.0), 0.0);
    EXPECT_DOUBLE_EQ(f(2.0), 1.0);
    EXPECT_DOUBLE_EQ(f.right_limit(2.0), 1.0);
    EXPECT_FALSE(f.is_continuous());
    ASSERT_EQ(f.lsc_failures().size(), 1u);
    EXPECT_DOUBLE_EQ(f.lsc_failures()[0], 2.0);
}

TEST(Piecewise, RejectsUnsortedKnots) {
    EXPECT_THROW(PiecewiseAffine({0, 0, 0, 0}, {{2, 0, 0, 0}, {1, 0, 0, 0}}, 0.0), std::invalid_argument);
}

TEST(Piecewise, ButterflyFromArithmetic) {
    const auto two = PiecewiseAffine::constant(2.0);
    const auto fly = ramp(90) - two * ramp(100) + ramp(110);
    EXPECT_DOUBLE_EQ(fly(100.0), 10.0);
    EXPECT_DOUBLE_EQ(fly(95.0), 5.0);
    EXPECT_DOUBLE_EQ(fly(120.0), 0.0);
    EXPECT_DOUBLE_EQ(fly.tail_slope(), 0.0);
    EXPECT_DOUBLE_EQ(fly.infimum(), 0.0);
    EXPECT_DOUBLE_EQ(fly.supremum(), 10.0);
}

TEST(Piecewise, ProductNeedsConstantFactor) {
    const auto x = PiecewiseAffine::identity();
    EXPECT_THROW(x * x, std::domain_error);
    const auto step = superhedge::indicator(x, 2.0, true);
    const auto gated = x * step;
    EXPECT_DOUBLE_EQ(gated(1.0), 0.0);
    EXPECT_DOUBLE_EQ(gated(2.0), 0.0);
    EXPECT_DOUBLE_EQ(gated(3.0), 3.0);
}

TEST(Piecewise, MaxMinInsertCrossings) {
    const auto x = PiecewiseAffine::identity();
    const auto c = PiecewiseAffine::constant(50.0);
    const auto lo = superhedge::pointwise_min(x, c);
    const auto hi = superhedge::pointwise_max(x, c);
    EXPECT_DOUBLE_EQ(lo(30.0), 30.0);
    EXPECT_DOUBLE_EQ(lo(70.0), 50.0);
    EXPECT_DOUBLE_EQ(hi(30.0), 50.0);
    EXPECT_DOUBLE_EQ(hi(70.0), 70.0);
    EXPECT_DOUBLE_EQ(lo.tail_slope(), 0.0);
    EXPECT_DOUBLE_EQ(hi.tail_slope(), 1.0);
}

TEST(Piecewise, IndicatorStrictness) {
    const auto x = PiecewiseAffine::identity();
    const auto gt = superhedge::indicator(x, 2.0, true);
    const auto ge = superhedge::indicator(x, 2.0, false);
    EXPECT_DOUBLE_EQ(gt(2.0), 0.0);
    EXPECT_DOUBLE_EQ(ge(2.0), 1.0);
    EXPECT_DOUBLE_EQ(gt(2.5), 1.0);
    EXPECT_DOUBLE_EQ(ge(1.5), 0.0);
}

TEST(Piecewise, SimplifiedDropsCollinearKnots) {
    const std::pair<double, double> pts[] = {{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}};
    const auto f = PiecewiseAffine::interpolate(pts, 1.0).simplified();
    EXPECT_TRUE(f.knots().empty());
    EXPECT_DOUBLE_EQ(f(5.0), 5.0);
}

TEST(Piecewise, LipschitzBound) {
    EXPECT_DOUBLE_EQ(ramp(3).lipschitz_bound(), 1.0);
    const PiecewiseAffine jump({0, 0, 0, 0}, {{2, 0, 1, 1}}, 0.0);
    EXPECT_TRUE(std::isinf(jump.lipschitz_bound()));
}

TEST(PiecewiseProperty, ArithmeticMatchesPointwise) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 60.0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = oracle::random_piecewise(rng, 10);
        const auto b = oracle::random_piecewise(rng, 10);
        const auto sum = a + b;
        const auto diff = a - b;
        const auto mx = superhedge::pointwise_max(a, b);
        const auto mn = superhedge::pointwise_min(a, b);
        for (int i = 0; i < 50; ++i) {
            const double x = u(rng);
            const double scale = 1.0 + std::abs(a(x)) + std::abs(b(x));
            EXPECT_NEAR(sum(x), a(x) + b(x), 1e-12 * scale);
            EXPECT_NEAR(diff(x), a(x) - b(x), 1e-12 * scale);
            EXPECT_NEAR(mx(x), std::max(a(x), b(x)), 1e-12 * scale);
            EXPECT_NEAR(mn(x), std::min(a(x), b(x)), 1e-12 * scale);
        }
    }
}
