#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "oracles/hull_oracle.hpp"
#include "superhedge/envelope.hpp"
#include "superhedge/payoff.hpp"

using namespace superhedge;
using envelope::concave_envelope;

namespace {

const char* kButterfly = "pos(x-90)-2*pos(x-100)+pos(x-110)";
constexpr double kInf = std::numeric_limits<double>::infinity();

void expect_matches_oracle(const payoff::PayoffAst& g, const std::vector<double>& xs) {
    const auto env = concave_envelope(g);
    const oracle::HullOracle hull(g.piecewise());
    for (double x : xs) EXPECT_NEAR(env(x), hull(x), 1e-12 * hull.scale()) << g.text() << " at " << x;
}

std::vector<double> grid(double hi, int n) {
    std::vector<double> xs;
    for (int i = 0; i <= n; ++i) xs.push_back(hi * i / n);
    return xs;
}

void expect_concave(const envelope::ConcaveEnvelope& env) {
    const auto slopes = env.slopes();
    for (std::size_t i = 0; i < slopes.size(); ++i) {
        EXPECT_GE(slopes[i], 0.0);
        if (i > 0) EXPECT_LE(slopes[i], slopes[i - 1] + 1e-12);
    }
    EXPECT_GE(env.tail_slope(), 0.0);
    if (!slopes.empty()) EXPECT_LE(env.tail_slope(), slopes.back() + 1e-12);
}

}  // namespace

TEST(Envelope, CallIsIdentity) {
    const auto g = payoff::parse_payoff("pos(x-100)");
    const auto env = concave_envelope(g);
    ASSERT_EQ(env.knots().size(), 1u);
    EXPECT_DOUBLE_EQ(env.knots()[0].x, 0.0);
    EXPECT_DOUBLE_EQ(env.knots()[0].value, 0.0);
    EXPECT_DOUBLE_EQ(env.tail_slope(), 1.0);
    expect_matches_oracle(g, grid(1e4, 2000));
}

TEST(Envelope, DigitalIsCappedRamp) {
    const auto g = payoff::parse_payoff("ind_gt(x,2)");
    const auto env = concave_envelope(g);
    ASSERT_EQ(env.knots().size(), 2u);
    EXPECT_DOUBLE_EQ(env.knots()[1].x, 2.0);
    EXPECT_DOUBLE_EQ(env.knots()[1].value, 1.0);
    EXPECT_DOUBLE_EQ(env.tail_slope(), 0.0);
    expect_matches_oracle(g, grid(10, 1000));
    EXPECT_DOUBLE_EQ(env.right_derivative(1.0), 0.5);
}

TEST(Envelope, ButterflyChordThenFlat) {
    const auto g = payoff::parse_payoff(kButterfly);
    const auto env = concave_envelope(g);
    ASSERT_EQ(env.knots().size(), 2u);
    EXPECT_DOUBLE_EQ(env.knots()[1].x, 100.0);
    EXPECT_DOUBLE_EQ(env.knots()[1].value, 10.0);
    EXPECT_DOUBLE_EQ(env.slopes()[0], 0.1);
    EXPECT_DOUBLE_EQ(env.tail_slope(), 0.0);
    EXPECT_DOUBLE_EQ(env.right_derivative(100.0), 0.0);
    EXPECT_DOUBLE_EQ(env.left_derivative(100.0), 0.1);
    expect_matches_oracle(g, grid(300, 3000));
}

TEST(Envelope, ConcavePayoffIsItsOwnEnvelope) {
    const auto g = payoff::parse_payoff("min(x,50)");
    const auto env = concave_envelope(g);
    for (double x : grid(200, 400)) EXPECT_DOUBLE_EQ(env(x), g(x));
}

TEST(Envelope, OriginUsesUpperLimit) {
    // Jump up right after 0: the envelope starts at the right limit.
    const PiecewiseAffine g({0.0, 0.0, 0.0, 3.0}, {{1.0, 3.0, 3.0, 3.0}}, 0.0);
    const auto env = concave_envelope(g);
    EXPECT_DOUBLE_EQ(env(0.0), 3.0);
}

TEST(Envelope, InfiniteTailIsSentinel) {
    const PiecewiseAffine g({0.0, 0.0, 0.0, 0.0}, {}, kInf);
    const auto env = concave_envelope(g);
    EXPECT_TRUE(env.is_infinite());
    std::ostringstream os;
    envelope::write_envelope_csv(os, env);
    EXPECT_EQ(os.str(), "x,value,slope_right\ninf,inf,inf\n");
    const auto hedge = envelope::buy_and_hold_price(env, 1.0);
    EXPECT_FALSE(hedge.finite());
    EXPECT_TRUE(std::isnan(hedge.delta));
}

TEST(Envelope, CsvLayout) {
    std::ostringstream os;
    envelope::write_envelope_csv(os, concave_envelope(payoff::parse_payoff(kButterfly)));
    EXPECT_EQ(os.str(), "x,value,slope_right\n0,0,0.1\n100,10,0\ninf,10,0\n");
}

TEST(Price, SpecExamples) {
    struct Case {
        const char* payoff;
        double s0, price, delta;
    };
    // Expected values come from the brute-force oracle in the first loop below.
    const Case cases[] = {{"pos(x-100)", 100, 100, 1},   {"pos(100-x)", 80, 100, 0}, {"5", 42, 5, 0},
                          {"min(x,50)", 30, 30, 1},      {kButterfly, 100, 10, 0},   {"ind_gt(x,2)", 1, 0.5, 0.5}};
    for (const auto& c : cases) {
        const auto g = payoff::parse_payoff(c.payoff);
        const oracle::HullOracle hull(g.piecewise());
        EXPECT_NEAR(hull(c.s0), c.price, 1e-12 * c.price) << c.payoff;
        EXPECT_NEAR(hull.right_slope(c.s0, 1e-4), c.delta, 1e-9) << c.payoff;
        const auto hedge = envelope::buy_and_hold_price(g, c.s0);
        EXPECT_DOUBLE_EQ(hedge.price, c.price) << c.payoff;
        EXPECT_DOUBLE_EQ(hedge.delta, c.delta) << c.payoff;
        EXPECT_DOUBLE_EQ(hedge.s0, c.s0);
    }
    EXPECT_THROW(envelope::buy_and_hold_price(payoff::parse_payoff("5"), 0.0), std::invalid_argument);
}

TEST(Domination, ButterflyMarginZeroAtStrike) {
    const auto g = payoff::parse_payoff(kButterfly);
    const auto hedge = envelope::buy_and_hold_price(g, 100);
    const auto xs = grid(500, 500);
    const auto m = envelope::hedge_dominates(g, hedge, xs);
    EXPECT_TRUE(m.dominates);
    EXPECT_DOUBLE_EQ(m.min_margin, 0.0);
    EXPECT_DOUBLE_EQ(m.argmin, 100.0);
}

TEST(Domination, CallMarginApproachesZeroAtOrigin) {
    const auto g = payoff::parse_payoff("pos(x-100)");
    const auto hedge = envelope::buy_and_hold_price(g, 100);
    const std::vector<double> xs{0.0, 50.0, 100.0, 1e6};
    const auto m = envelope::hedge_dominates(g, hedge, xs);
    EXPECT_TRUE(m.dominates);
    EXPECT_DOUBLE_EQ(m.min_margin, 0.0);
    EXPECT_DOUBLE_EQ(m.argmin, 0.0);
}

TEST(Domination, WrongDeltaIsReportedNotThrown) {
    const auto g = payoff::parse_payoff("pos(x-100)");
    auto hedge = envelope::buy_and_hold_price(g, 100);
    hedge.delta = 0.0;
    const std::vector<double> xs{1e6};
    const auto m = envelope::hedge_dominates(g, hedge, xs);
    EXPECT_FALSE(m.dominates);
    EXPECT_FALSE(m.tail_ok);
    EXPECT_LT(m.min_margin, 0.0);
}

TEST(Regularize, DigitalN1) {
    const auto r = envelope::lipschitz_regularize(payoff::parse_payoff("ind_gt(x,2)"), 1);
    for (double x : grid(10, 1000)) {
        const double expected = x <= 2.0 ? 0.0 : std::min(x - 2.0, 1.0);
        EXPECT_NEAR(r.function(x), expected, 1e-12) << x;
    }
}

TEST(Regularize, ConstantIsCapped) {
    const auto r = envelope::lipschitz_regularize(payoff::parse_payoff("5"), 3);
    EXPECT_DOUBLE_EQ(r.function(0.0), 3.0);
    EXPECT_DOUBLE_EQ(r.function(100.0), 3.0);
}

TEST(Regularize, BoundedLipschitzIsFixed) {
    const auto g = payoff::parse_payoff("min(pos(x-1), 4)");
    const auto r = envelope::lipschitz_regularize(g, 4);
    for (double x : grid(20, 400)) EXPECT_NEAR(r.function(x), g(x), 1e-12);
}

TEST(Contact, Butterfly) {
    const auto g = payoff::parse_payoff(kButterfly);
    const auto c = envelope::contact_set(g, concave_envelope(g));
    ASSERT_EQ(c.size(), 2u);
    EXPECT_DOUBLE_EQ(c[0].lo, 0.0);
    EXPECT_DOUBLE_EQ(c[0].hi, 0.0);
    EXPECT_DOUBLE_EQ(c[1].lo, 100.0);
    EXPECT_DOUBLE_EQ(c[1].hi, 100.0);
}

TEST(Contact, DigitalHasOpenJumpEnd) {
    const auto g = payoff::parse_payoff("ind_gt(x,2)");
    const auto c = envelope::contact_set(g, concave_envelope(g));
    ASSERT_EQ(c.size(), 2u);
    EXPECT_DOUBLE_EQ(c[1].lo, 2.0);
    EXPECT_TRUE(c[1].lo_open);
    EXPECT_TRUE(c[1].jump());
    EXPECT_TRUE(std::isinf(c[1].hi));
    EXPECT_FALSE(c[1].contains(2.0));
    EXPECT_TRUE(c[1].contains(2.5));
}

TEST(Contact, ConcaveIsEverything) {
    const auto g = payoff::parse_payoff("min(x,50)");
    const auto c = envelope::contact_set(g, concave_envelope(g));
    ASSERT_EQ(c.size(), 1u);
    EXPECT_DOUBLE_EQ(c[0].lo, 0.0);
    EXPECT_TRUE(std::isinf(c[0].hi));
}

TEST(Table, MatchesDsl) {
    const std::vector<envelope::Sample> s{{0, 0}, {90, 0}, {100, 10}, {110, 0}, {200, 0}};
    const auto t = envelope::envelope_from_table(s, 0.0);
    const auto d = concave_envelope(payoff::parse_payoff(kButterfly));
    for (double x : grid(300, 300)) EXPECT_DOUBLE_EQ(t(x), d(x));
}

TEST(Table, SingleSample) {
    const std::vector<envelope::Sample> s{{5, 2}};
    const auto t = envelope::envelope_from_table(s, 0.0);
    EXPECT_DOUBLE_EQ(t(0.0), 0.0);
    EXPECT_DOUBLE_EQ(t(2.5), 1.0);
    EXPECT_DOUBLE_EQ(t(50.0), 2.0);
}

TEST(Table, RejectsBadInput) {
    const std::vector<envelope::Sample> unsorted{{2, 1}, {1, 1}};
    const std::vector<envelope::Sample> negative{{1, -1}};
    EXPECT_THROW(envelope::envelope_from_table(unsorted, 0.0), std::invalid_argument);
    EXPECT_THROW(envelope::envelope_from_table(negative, 0.0), std::invalid_argument);
    const std::vector<envelope::Sample> ok{{1, 1}};
    EXPECT_TRUE(envelope::envelope_from_table(ok, kInf).is_infinite());
}

TEST(Table, RandomCloudMatchesOracle) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<envelope::Sample> s;
    std::vector<oracle::Point> pts;
    double x = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double v = 100.0 * u(rng);
        s.push_back({x, v});
        pts.push_back({x, v});
        x += 0.01 + u(rng);
    }
    const double tail = 0.25;
    const auto env = envelope::envelope_from_table(s, tail);
    const oracle::HullOracle hull(pts, tail);
    for (int i = 0; i < 300; ++i) {
        const double q = 1.1 * x * u(rng);
        EXPECT_NEAR(env(q), hull(q), 1e-12 * hull.scale()) << q;
    }
    double top = 0.0;
    for (const auto& p : s) top = std::max(top, p.value);
    EXPECT_DOUBLE_EQ(envelope::table_contact_tolerance(s), 1e-9 * (1.0 + top));
}

TEST(EnvelopeProperty, RandomFunctionsAgainstOracle) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 150; ++trial) {
        const auto g = oracle::random_piecewise(rng, 20);
        const auto env = concave_envelope(g);
        const oracle::HullOracle hull(g);
        expect_concave(env);
        const double hi = g.last().x * 1.3 + 1.0;
        for (int i = 0; i < 60; ++i) {
            const double x = hi * u(rng);
            EXPECT_NEAR(env(x), hull(x), 1e-12 * hull.scale());
            EXPECT_GE(env(x), g(x) - 1e-12 * hull.scale());
        }
        // Interior hull vertices touch the payoff's closure.
        for (std::size_t k = 1; k < env.knots().size(); ++k) {
            const auto lim = g.limits(env.knots()[k].x);
            EXPECT_NEAR(env.knots()[k].value, std::max({lim.left, lim.at, lim.right}), 1e-12 * hull.scale());
        }
    }
}

TEST(EnvelopeProperty, ScalingAndCashShift) {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = oracle::random_piecewise(rng, 12);
        const double c = 0.5 + 3.0 * u(rng);
        const auto scaled = concave_envelope(PiecewiseAffine::constant(c) * g);
        const auto shifted = concave_envelope(g + PiecewiseAffine::constant(c));
        const auto base = concave_envelope(g);
        const double s0 = 0.1 + g.last().x * u(rng);
        const double scale = 1.0 + base(s0) * c;
        EXPECT_NEAR(scaled(s0), c * base(s0), 1e-12 * scale);
        EXPECT_NEAR(shifted(s0), base(s0) + c, 1e-12 * scale);
        const auto h0 = envelope::buy_and_hold_price(base, s0);
        const auto h1 = envelope::buy_and_hold_price(shifted, s0);
        EXPECT_NEAR(h1.delta, h0.delta, 1e-12 * (1.0 + std::abs(h0.delta)));
    }
}

TEST(EnvelopeProperty, SupergradientValidity) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        const auto g = oracle::random_piecewise(rng, 10);
        const auto env = concave_envelope(g);
        const double s0 = 0.1 + g.last().x * u(rng);
        const auto h = envelope::buy_and_hold_price(env, s0);
        const double tol = 1e-12 * oracle::HullOracle(g).scale();
        for (const auto& k : env.knots()) EXPECT_GE(h.value_at(k.x), env(k.x) - tol);
        EXPECT_GE(h.delta, env.tail_slope());
        EXPECT_LE(h.delta, h.left_delta);
    }
}

TEST(EnvelopeProperty, RegularizationIsMonotone) {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int ns[] = {1, 2, 3, 5, 8, 13, 40};
    for (int trial = 0; trial < 40; ++trial) {
        const auto g = oracle::random_piecewise(rng, 10);
        const double hi = g.last().x * 1.2 + 1.0;
        const double s0 = 0.1 + g.last().x * u(rng);
        const double target = concave_envelope(g)(s0);
        double prev_price = 0.0;
        std::vector<PiecewiseAffine> chain;
        for (int n : ns) {
            const auto gn = envelope::lipschitz_regularize(g, n).function;
            EXPECT_LE(gn.supremum(), n + 1e-12);
            const double price = concave_envelope(gn)(s0);
            EXPECT_GE(price, prev_price - 1e-12);
            EXPECT_LE(price, target + 1e-12 * (1.0 + target));
            prev_price = price;
            chain.push_back(gn);
        }
        for (int j = 0; j <= 200; ++j) {
            const double x = hi * j / 200.0;
            for (std::size_t i = 0; i < chain.size(); ++i) {
                EXPECT_LE(chain[i](x), g(x) + 1e-12);
                if (i > 0) EXPECT_LE(chain[i - 1](x), chain[i](x) + 1e-12);
            }
        }
    }
}
