#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace superhedge {

/// Breakpoint of a piecewise-affine function on [0, inf).
///
/// `left` and `right` are the one-sided limits, `at` is the value taken at
/// `x` itself. At the origin `left == at` by convention.
struct Knot {
    double x = 0.0;
    double left = 0.0;
    double at = 0.0;
    double right = 0.0;

    bool continuous() const { return left == at && at == right; }
    double lower() const;
    double upper() const;
};

/// Exact canonical form of a payoff on [0, inf): affine between knots, a ray
/// of slope `tail_slope` after the last knot. Jumps live only at knots.
///
/// The node list always starts with the origin (x = 0). `knots()` excludes it.
/// A tail slope of +inf is accepted as the sentinel for superlinear growth.
class PiecewiseAffine {
public:
    PiecewiseAffine();
    PiecewiseAffine(Knot origin, std::vector<Knot> knots, double tail_slope);

    static PiecewiseAffine constant(double c);
    static PiecewiseAffine identity();
    /// Continuous interpolant through `(x, value)` points; an x = 0 point is
    /// required first.
    static PiecewiseAffine interpolate(std::span<const std::pair<double, double>> points,
                                       double tail_slope);

    const Knot& origin() const { return nodes_.front(); }
    std::span<const Knot> knots() const { return std::span(nodes_).subspan(1); }
    std::span<const Knot> nodes() const { return nodes_; }
    double tail_slope() const { return tail_slope_; }
    const Knot& last() const { return nodes_.back(); }

    double operator()(double x) const;
    double left_limit(double x) const;
    double right_limit(double x) const;
    Knot limits(double x) const;

    /// Slope on the open segment starting at node `i` (tail for the last node).
    double segment_slope(std::size_t i) const;

    bool is_piecewise_constant() const;
    bool is_continuous() const;
    /// Infimum over [0, inf); -inf when the tail slope is negative.
    double infimum() const;
    /// Supremum over [0, inf); +inf when the tail slope is positive.
    double supremum() const;
    /// Largest absolute slope; +inf if the function jumps.
    double lipschitz_bound() const;
    /// Knots where the value at the point exceeds a one-sided limit.
    std::vector<double> lsc_failures() const;

    /// Drops continuous knots whose neighbouring slopes agree.
    PiecewiseAffine simplified() const;

private:
    std::size_t segment_index(double x) const;

    std::vector<Knot> nodes_;
    double tail_slope_ = 0.0;
};

PiecewiseAffine operator+(const PiecewiseAffine& a, const PiecewiseAffine& b);
PiecewiseAffine operator-(const PiecewiseAffine& a, const PiecewiseAffine& b);
/// Requires one operand to be piecewise constant; throws std::domain_error otherwise.
PiecewiseAffine operator*(const PiecewiseAffine& a, const PiecewiseAffine& b);
PiecewiseAffine pointwise_max(const PiecewiseAffine& a, const PiecewiseAffine& b);
PiecewiseAffine pointwise_min(const PiecewiseAffine& a, const PiecewiseAffine& b);
/// 1{e(x) > level} (strict) or 1{e(x) >= level}.
PiecewiseAffine indicator(const PiecewiseAffine& e, double level, bool strict);

}  // namespace superhedge
