#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "superhedge/payoff.hpp"
#include "superhedge/piecewise.hpp"

namespace superhedge::envelope {

struct EnvelopeKnot {
    double x = 0.0;
    double value = 0.0;
};

/// Least concave majorant of a nonnegative payoff on [0, inf).
///
/// Knots start at x = 0; `slopes()[i]` is the slope between knot i and i+1,
/// and the function continues past the last knot with `tail_slope()`.
/// An infinite envelope (superlinear payoff) has no knots and evaluates to +inf.
class ConcaveEnvelope {
public:
    ConcaveEnvelope(std::vector<EnvelopeKnot> knots, double tail_slope);
    static ConcaveEnvelope infinite();

    bool is_infinite() const { return infinite_; }
    std::span<const EnvelopeKnot> knots() const { return knots_; }
    std::span<const double> slopes() const { return slopes_; }
    double tail_slope() const { return tail_slope_; }

    double operator()(double x) const;
    double right_derivative(double s) const;
    /// Slope of the segment ending at s; at s = 0 this is the right derivative.
    double left_derivative(double s) const;

    /// The envelope as a continuous piecewise-affine function.
    PiecewiseAffine to_piecewise() const;

private:
    ConcaveEnvelope() = default;

    std::vector<EnvelopeKnot> knots_;
    std::vector<double> slopes_;
    double tail_slope_ = 0.0;
    bool infinite_ = false;
};

/// Upper hull of the payoff's knot values (both one-sided limits at jumps)
/// closed by a ray of the payoff's tail slope.
ConcaveEnvelope concave_envelope(const PiecewiseAffine& g);
ConcaveEnvelope concave_envelope(const payoff::PayoffAst& g);

struct Sample {
    double x = 0.0;
    double value = 0.0;
};

/// Envelope of a tabulated payoff. Samples must be sorted by x with x >= 0
/// and value >= 0. Where no sample sits at x = 0 the payoff is taken as 0
/// there (the smallest value nonnegativity allows). The result is the
/// envelope of the linear interpolant of the samples, so it approximates the
/// true envelope from below when the payoff between samples is larger.
/// A declared tail slope of +inf yields an infinite envelope.
ConcaveEnvelope envelope_from_table(std::span<const Sample> samples, double declared_tail_slope);

double right_derivative(const ConcaveEnvelope& env, double s);
double left_derivative(const ConcaveEnvelope& env, double s);

/// Buy-and-hold super-replication: capital `price`, hold `delta` shares.
struct HedgePair {
    double price = 0.0;
    double delta = 0.0;
    double left_delta = 0.0;
    double s0 = 0.0;

    bool finite() const { return price < std::numeric_limits<double>::infinity(); }
    /// Terminal value of the hedge portfolio.
    double value_at(double x) const { return price + delta * (x - s0); }
};

/// Price ĝ(s0) and hedge ratio equal to the right derivative of ĝ at s0.
/// An infinite envelope gives price +inf and NaN deltas.
HedgePair buy_and_hold_price(const payoff::PayoffAst& g, double s0);
HedgePair buy_and_hold_price(const ConcaveEnvelope& env, double s0);

struct MarginReport {
    double min_margin = 0.0;
    double argmin = 0.0;
    bool tail_ok = true;
    bool dominates = true;
};

/// Checks price + delta (x - s0) >= g(x) over grid, the payoff's knots (both
/// one-sided limits) and x = 0, and delta against the payoff's tail slope.
MarginReport hedge_dominates(const payoff::PayoffAst& g, const HedgePair& hedge,
                             std::span<const double> grid, double tolerance = 1e-9);

/// g_n(x) = min(inf_y {g(y) + n |x - y|}, n), built exactly on the
/// piecewise-affine representation.
struct RegularizedPayoff {
    int n = 1;
    PiecewiseAffine function;
};

RegularizedPayoff lipschitz_regularize(const PiecewiseAffine& g, int n);
RegularizedPayoff lipschitz_regularize(const payoff::PayoffAst& g, int n);

/// Maximal interval of the contact set {ĝ - g <= tol}. Bounds are the
/// closure; an open end marks a payoff jump at that bound where the contact
/// point itself is excluded.
struct ContactInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_open = false;
    bool hi_open = false;

    bool jump() const { return lo_open || hi_open; }
    bool contains(double x) const;
};

std::vector<ContactInterval> contact_set(const PiecewiseAffine& g, const ConcaveEnvelope& env, double tol = 0.0);
std::vector<ContactInterval> contact_set(const payoff::PayoffAst& g, const ConcaveEnvelope& env, double tol = 0.0);

/// Default contact tolerance for tabulated payoffs: 1e-9 (1 + max sample).
double table_contact_tolerance(std::span<const Sample> samples);

/// CSV with columns x,value,slope_right; a final "inf" row carries the tail slope.
void write_envelope_csv(std::ostream& os, const ConcaveEnvelope& env);

}  // namespace superhedge::envelope
