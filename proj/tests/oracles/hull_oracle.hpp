#pragma once

// Brute-force concave envelope: the value at x is the largest chord through
// two graph points bracketing x, or a tail ray leaving a graph point to the
// left of x. Graph points are every node with each of its one-sided values.
// Quadratic in the number of points and free of any hull bookkeeping.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "superhedge/piecewise.hpp"

namespace oracle {

struct Point {
    double x;
    double y;
};

inline std::vector<Point> graph_points(const superhedge::PiecewiseAffine& g) {
    std::vector<Point> pts;
    for (const auto& k : g.nodes()) {
        pts.push_back({k.x, k.at});
        pts.push_back({k.x, k.right});
        if (k.x > 0.0) pts.push_back({k.x, k.left});
    }
    return pts;
}

class HullOracle {
public:
    HullOracle(std::vector<Point> pts, double tail) : pts_(std::move(pts)), tail_(tail) {}
    explicit HullOracle(const superhedge::PiecewiseAffine& g) : HullOracle(graph_points(g), g.tail_slope()) {}

    double operator()(double x) const {
        if (std::isinf(tail_)) return std::numeric_limits<double>::infinity();
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& a : pts_) {
            if (a.x > x) continue;
            best = std::max(best, a.y + tail_ * (x - a.x));
            if (a.x == x) best = std::max(best, a.y);
            for (const auto& b : pts_) {
                if (b.x < x || b.x <= a.x) continue;
                best = std::max(best, a.y + (b.y - a.y) * ((x - a.x) / (b.x - a.x)));
            }
        }
        return best;
    }

    /// One-sided difference quotient; exact for h inside the first segment.
    double right_slope(double x, double h) const { return ((*this)(x + h) - (*this)(x)) / h; }

    double scale() const {
        double s = 1.0;
        for (const auto& p : pts_) s = std::max(s, std::abs(p.y));
        return s;
    }

private:
    std::vector<Point> pts_;
    double tail_;
};

/// Random nonnegative piecewise-affine function with up to `max_knots` knots,
/// random jumps and a random nonnegative tail slope.
inline superhedge::PiecewiseAffine random_piecewise(std::mt19937_64& rng, int max_knots) {
    std::uniform_int_distribution<int> count(1, max_knots);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = count(rng);
    std::vector<double> xs;
    double x = 0.0;
    for (int i = 0; i < n; ++i) {
        x += 0.05 + 5.0 * unit(rng);
        xs.push_back(x);
    }
    auto value = [&] { return unit(rng) < 0.15 ? 0.0 : 10.0 * unit(rng); };
    const double v0 = value();
    superhedge::Knot origin{0.0, v0, v0, unit(rng) < 0.2 ? value() : v0};
    std::vector<superhedge::Knot> knots;
    for (double kx : xs) {
        const double left = value();
        if (unit(rng) < 0.3) {
            knots.push_back({kx, left, value(), value()});
        } else {
            knots.push_back({kx, left, left, left});
        }
    }
    const double tail = unit(rng) < 0.3 ? 0.0 : 3.0 * unit(rng);
    return superhedge::PiecewiseAffine(origin, std::move(knots), tail);
}

}  // namespace oracle
