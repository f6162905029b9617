#include <gtest/gtest.h>

#include <random>
#include <string>

#include "superhedge/payoff.hpp"

using namespace superhedge::payoff;

namespace {

const std::string kButterfly = "pos(x-90)-2*pos(x-100)+pos(x-110)";

PayoffError parse_error(const std::string& text) {
    try {
        parse_payoff(text);
    } catch (const PayoffError& e) {
        return e;
    }
    ADD_FAILURE() << "expected a PayoffError for " << text;
    return PayoffError(PayoffError::Kind::Syntax, 0, "none");
}

}  // namespace

TEST(Parse, CallTree) {
    const auto ast = parse_payoff("pos(x-100)");
    const Node& root = ast.root();
    ASSERT_EQ(root.kind, NodeKind::Pos);
    ASSERT_EQ(root.lhs->kind, NodeKind::Sub);
    EXPECT_EQ(root.lhs->lhs->kind, NodeKind::Var);
    EXPECT_EQ(root.lhs->rhs->kind, NodeKind::Const);
    EXPECT_EQ(root.lhs->rhs->value, 100.0);
}

TEST(Parse, WhitespaceAndNumbers) {
    const auto ast = parse_payoff("  max( 1.5e1 , x )  + 0.25 ");
    EXPECT_DOUBLE_EQ(ast(10.0), 15.25);
    EXPECT_DOUBLE_EQ(ast(20.0), 20.25);
}

TEST(Parse, PrecedenceAndAssociativity) {
    EXPECT_DOUBLE_EQ(parse_payoff("10-2-3")(0.0), 5.0);
    EXPECT_DOUBLE_EQ(parse_payoff("1+2*3")(0.0), 7.0);
    EXPECT_DOUBLE_EQ(parse_payoff("(1+2)*3")(0.0), 9.0);
}

TEST(Parse, NonAffineProductRejected) {
    const auto e = parse_error("x*x");
    EXPECT_EQ(e.kind(), PayoffError::Kind::NonAffineProduct);
    EXPECT_EQ(e.offset(), 2u);
}

TEST(Parse, IndicatorTimesSpotAllowed) {
    const auto ast = parse_payoff("x*ind_gt(x,2)");
    EXPECT_DOUBLE_EQ(ast(2.0), 0.0);
    EXPECT_DOUBLE_EQ(ast(3.0), 3.0);
}

TEST(Parse, SyntaxErrorsReportOneBasedOffsets) {
    auto e = parse_error("pos(x-1");
    EXPECT_EQ(e.kind(), PayoffError::Kind::Syntax);
    EXPECT_EQ(e.offset(), 8u);
    e = parse_error("x + ? ");
    EXPECT_EQ(e.kind(), PayoffError::Kind::Syntax);
    EXPECT_EQ(e.offset(), 5u);
    e = parse_error("ind_gt(x, x)");
    EXPECT_EQ(e.kind(), PayoffError::Kind::Syntax);
    EXPECT_EQ(parse_error("").kind(), PayoffError::Kind::Syntax);
    EXPECT_EQ(parse_error("y").kind(), PayoffError::Kind::Syntax);
}

TEST(Parse, NegativePayoffOffersShift) {
    const auto e = parse_error("x-5");
    EXPECT_EQ(e.kind(), PayoffError::Kind::Negative);
    EXPECT_DOUBLE_EQ(e.suggested_shift(), 5.0);
    const auto shifted = parse_payoff_shifted("x-5");
    EXPECT_DOUBLE_EQ(shifted.shift, 5.0);
    EXPECT_DOUBLE_EQ(shifted.payoff(0.0), 0.0);
    EXPECT_DOUBLE_EQ(shifted.payoff(7.0), 7.0);
}

TEST(Parse, UnboundedBelowHasNoShift) {
    const auto e = parse_error("10-x");
    EXPECT_EQ(e.kind(), PayoffError::Kind::Negative);
    EXPECT_DOUBLE_EQ(e.suggested_shift(), 0.0);
    EXPECT_THROW(parse_payoff_shifted("10-x"), PayoffError);
}

TEST(Eval, SpecValues) {
    EXPECT_DOUBLE_EQ(parse_payoff(kButterfly)(100.0), 10.0);
    EXPECT_DOUBLE_EQ(parse_payoff("ind_gt(x,2)")(2.0), 0.0);
    EXPECT_DOUBLE_EQ(parse_payoff("ind_gt(x,2)")(2.5), 1.0);
    EXPECT_DOUBLE_EQ(parse_payoff("ind_ge(x,2)")(2.0), 1.0);
    EXPECT_DOUBLE_EQ(parse_payoff("min(x,50)")(30.0), 30.0);
}

TEST(ToPiecewise, Call) {
    const auto f = to_piecewise(parse_payoff("pos(x-100)"));
    ASSERT_EQ(f.knots().size(), 1u);
    EXPECT_DOUBLE_EQ(f.knots()[0].x, 100.0);
    EXPECT_DOUBLE_EQ(f.knots()[0].left, 0.0);
    EXPECT_DOUBLE_EQ(f.knots()[0].right, 0.0);
    EXPECT_DOUBLE_EQ(f.tail_slope(), 1.0);
    EXPECT_DOUBLE_EQ(f(0.0), 0.0);
}

TEST(ToPiecewise, ButterflyKnotsAndTail) {
    const auto f = to_piecewise(parse_payoff(kButterfly));
    ASSERT_EQ(f.knots().size(), 3u);
    EXPECT_DOUBLE_EQ(f.knots()[0].x, 90.0);
    EXPECT_DOUBLE_EQ(f.knots()[1].x, 100.0);
    EXPECT_DOUBLE_EQ(f.knots()[2].x, 110.0);
    EXPECT_DOUBLE_EQ(f.tail_slope(), 0.0);
}

TEST(ToPiecewise, SlopesAdd) { EXPECT_DOUBLE_EQ(to_piecewise(parse_payoff("2*x + pos(x-1)")).tail_slope(), 3.0); }

TEST(Lsc, IndGeNormalizedWithWarning) {
    const auto ast = parse_payoff("ind_ge(x,2)");
    EXPECT_FALSE(ast.warnings().empty());
    const auto norm = lsc_normalize(ast);
    EXPECT_FALSE(norm.warnings.empty());
    EXPECT_EQ(norm.payoff.root().kind, NodeKind::IndGt);
    EXPECT_DOUBLE_EQ(norm.payoff(2.0), 0.0);
    EXPECT_DOUBLE_EQ(norm.payoff(2.0 + 1e-9), 1.0);
}

TEST(Lsc, IdentityCases) {
    for (const char* text : {"ind_gt(x,2)", "pos(x-1)"}) {
        const auto ast = parse_payoff(text);
        const auto norm = lsc_normalize(ast);
        EXPECT_TRUE(norm.warnings.empty()) << text;
        EXPECT_EQ(to_string(norm.payoff.root()), to_string(ast.root())) << text;
    }
}

namespace {

// Random well-formed payoff text; products always carry a constant or indicator factor.
std::string random_expr(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 8);
    std::uniform_int_distribution<int> level(0, 40);
    auto num = [&] { return std::to_string(level(rng)); };
    switch (pick(rng)) {
        case 0: return "x";
        case 1: return num();
        case 2: return "(" + random_expr(rng, depth - 1) + "+" + random_expr(rng, depth - 1) + ")";
        case 3: return "max(" + random_expr(rng, depth - 1) + "," + random_expr(rng, depth - 1) + ")";
        case 4: return "min(" + random_expr(rng, depth - 1) + "," + random_expr(rng, depth - 1) + ")";
        case 5: return "pos(" + random_expr(rng, depth - 1) + "-" + num() + ")";
        case 6: return num() + "*" + random_expr(rng, depth - 1);
        case 7: return "ind_gt(" + random_expr(rng, depth - 1) + "," + num() + ")*" + random_expr(rng, depth - 1);
        default: return "pos(" + num() + "-" + random_expr(rng, depth - 1) + ")";
    }
}

}  // namespace

TEST(PayoffProperty, RoundTripAndAffineClosure) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 80.0);
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::string text = random_expr(rng, 4);
        const auto ast = parse_payoff(text);
        const auto& pw = ast.piecewise();
        for (int i = 0; i < 200; ++i) {
            const double x = u(rng);
            const double tree = eval_node(ast.root(), x);
            EXPECT_NEAR(pw(x), tree, 1e-12 * (1.0 + std::abs(tree))) << text << " at " << x;
        }
        // Second differences vanish inside each segment.
        const auto nodes = pw.nodes();
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const double a = nodes[k].x;
            const double b = k + 1 < nodes.size() ? nodes[k + 1].x : a + 10.0;
            const double h = (b - a) / 4.0;
            const double d2 = eval_node(ast.root(), a + h) - 2.0 * eval_node(ast.root(), a + 2 * h) +
                              eval_node(ast.root(), a + 3 * h);
            EXPECT_NEAR(d2, 0.0, 1e-9 * (1.0 + std::abs(eval_node(ast.root(), a + 2 * h))))
                << text;
            ++checked;
        }
    }
    EXPECT_GT(checked, 300);
}

TEST(PayoffProperty, LscNormalizeChangesOnlyLevels) {
    const auto ast = parse_payoff("ind_ge(x,2)+3*ind_ge(pos(x-1),4)");
    const auto norm = lsc_normalize(ast).payoff;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng);
        if (x == 2.0 || x == 5.0) continue;
        EXPECT_EQ(ast(x), norm(x));
    }
    EXPECT_NE(ast(2.0), norm(2.0));
    EXPECT_NE(ast(5.0), norm(5.0));
}
