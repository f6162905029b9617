#include "superhedge/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace superhedge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> merged_abscissae(const PiecewiseAffine& a, const PiecewiseAffine& b) {
    std::vector<double> xs;
    xs.reserve(a.nodes().size() + b.nodes().size());
    for (const auto& k : a.nodes()) xs.push_back(k.x);
    for (const auto& k : b.nodes()) xs.push_back(k.x);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

template <typename Op>
std::vector<Knot> combine_nodes(const PiecewiseAffine& a, const PiecewiseAffine& b,
                                const std::vector<double>& xs, Op op) {
    std::vector<Knot> out;
    out.reserve(xs.size());
    for (double x : xs) {
        const Knot ka = a.limits(x);
        const Knot kb = b.limits(x);
        out.push_back({x, op(ka.left, kb.left), op(ka.at, kb.at), op(ka.right, kb.right)});
    }
    out.front().left = out.front().at;
    return out;
}

PiecewiseAffine from_nodes(std::vector<Knot> nodes, double tail) {
    Knot origin = nodes.front();
    nodes.erase(nodes.begin());
    return PiecewiseAffine(origin, std::move(nodes), tail);
}

// Abscissa where an affine difference moves from da (at xa) to db (at xb)
// through zero; NaN unless the sign change is strict and lands inside.
double interior_root(double xa, double da, double xb, double db) {
    if (!((da > 0.0 && db < 0.0) || (da < 0.0 && db > 0.0))) return std::nan("");
    const double x = xa + (xb - xa) * (da / (da - db));
    return (x > xa && x < xb) ? x : std::nan("");
}

double tail_root(double xl, double d, double slope) {
    if (!((d > 0.0 && slope < 0.0) || (d < 0.0 && slope > 0.0))) return std::nan("");
    const double x = xl - d / slope;
    return (x > xl && std::isfinite(x)) ? x : std::nan("");
}

// Crossings of (a - b) inside each open segment of the merged grid and on the tail.
std::vector<double> crossings(const PiecewiseAffine& a, const PiecewiseAffine& b,
                              const std::vector<double>& xs) {
    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double da = a.right_limit(xs[i]) - b.right_limit(xs[i]);
        const double db = a.left_limit(xs[i + 1]) - b.left_limit(xs[i + 1]);
        const double r = interior_root(xs[i], da, xs[i + 1], db);
        if (!std::isnan(r)) roots.push_back(r);
    }
    const double xl = xs.back();
    const double r = tail_root(xl, a.right_limit(xl) - b.right_limit(xl),
                               a.tail_slope() - b.tail_slope());
    if (!std::isnan(r)) roots.push_back(r);
    return roots;
}

PiecewiseAffine extremum(const PiecewiseAffine& a, const PiecewiseAffine& b, bool take_max) {
    std::vector<double> xs = merged_abscissae(a, b);
    const std::vector<double> roots = crossings(a, b, xs);
    const bool tail_crossed =
        !roots.empty() && roots.back() > xs.back();
    const double d_last = a.right_limit(xs.back()) - b.right_limit(xs.back());

    xs.insert(xs.end(), roots.begin(), roots.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    auto pick = [take_max](double u, double v) { return take_max ? std::max(u, v) : std::min(u, v); };
    std::vector<Knot> nodes = combine_nodes(a, b, xs, pick);

    const double ta = a.tail_slope();
    const double tb = b.tail_slope();
    double tail;
    if (tail_crossed || d_last == 0.0) {
        tail = pick(ta, tb);
    } else if ((d_last > 0.0) == take_max) {
        tail = ta;
    } else {
        tail = tb;
    }
    return from_nodes(std::move(nodes), tail);
}

}  // namespace

double Knot::lower() const { return std::min({left, at, right}); }
double Knot::upper() const { return std::max({left, at, right}); }

PiecewiseAffine::PiecewiseAffine() : nodes_{Knot{}}, tail_slope_(0.0) {}

PiecewiseAffine::PiecewiseAffine(Knot origin, std::vector<Knot> knots, double tail_slope)
    : tail_slope_(tail_slope) {
    if (origin.x != 0.0) throw std::invalid_argument("piecewise-affine origin must sit at x = 0");
    if (std::isnan(tail_slope) || tail_slope == -kInf)
        throw std::invalid_argument("piecewise-affine tail slope must be a number or +inf");
    origin.left = origin.at;
    nodes_.reserve(knots.size() + 1);
    nodes_.push_back(origin);
    for (const auto& k : knots) {
        if (!(k.x > nodes_.back().x) || !std::isfinite(k.x))
            throw std::invalid_argument("piecewise-affine knots must be finite and strictly increasing");
        nodes_.push_back(k);
    }
    for (const auto& k : nodes_) {
        if (!std::isfinite(k.left) || !std::isfinite(k.at) || !std::isfinite(k.right))
            throw std::invalid_argument("piecewise-affine knot values must be finite");
    }
}

PiecewiseAffine PiecewiseAffine::constant(double c) { return PiecewiseAffine({0.0, c, c, c}, {}, 0.0); }

PiecewiseAffine PiecewiseAffine::identity() { return PiecewiseAffine({0.0, 0.0, 0.0, 0.0}, {}, 1.0); }

PiecewiseAffine PiecewiseAffine::interpolate(std::span<const std::pair<double, double>> points,
                                             double tail_slope) {
    if (points.empty() || points.front().first != 0.0)
        throw std::invalid_argument("interpolation needs a first point at x = 0");
    const double v0 = points.front().second;
    std::vector<Knot> knots;
    knots.reserve(points.size() - 1);
    for (const auto& [x, v] : points.subspan(1)) knots.push_back({x, v, v, v});
    return PiecewiseAffine({0.0, v0, v0, v0}, std::move(knots), tail_slope);
}

std::size_t PiecewiseAffine::segment_index(double x) const {
    if (!(x >= 0.0)) throw std::domain_error("payoff argument must be >= 0, got " + std::to_string(x));
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x,
                               [](double v, const Knot& k) { return v < k.x; });
    return static_cast<std::size_t>(std::distance(nodes_.begin(), it)) - 1;
}

double PiecewiseAffine::segment_slope(std::size_t i) const {
    if (i + 1 >= nodes_.size()) return tail_slope_;
    return (nodes_[i + 1].left - nodes_[i].right) / (nodes_[i + 1].x - nodes_[i].x);
}

Knot PiecewiseAffine::limits(double x) const {
    const std::size_t i = segment_index(x);
    const Knot& k = nodes_[i];
    if (k.x == x) return k;
    double v;
    if (i + 1 == nodes_.size()) {
        v = tail_slope_ == kInf ? kInf : k.right + tail_slope_ * (x - k.x);
    } else {
        const Knot& n = nodes_[i + 1];
        v = k.right + (n.left - k.right) * ((x - k.x) / (n.x - k.x));
    }
    return {x, v, v, v};
}

double PiecewiseAffine::operator()(double x) const { return limits(x).at; }
double PiecewiseAffine::left_limit(double x) const { return limits(x).left; }
double PiecewiseAffine::right_limit(double x) const { return limits(x).right; }

bool PiecewiseAffine::is_piecewise_constant() const {
    if (tail_slope_ != 0.0) return false;
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
        if (nodes_[i].right != nodes_[i + 1].left) return false;
    }
    return true;
}

bool PiecewiseAffine::is_continuous() const {
    if (nodes_.front().at != nodes_.front().right) return false;
    return std::all_of(nodes_.begin() + 1, nodes_.end(), [](const Knot& k) { return k.continuous(); });
}

double PiecewiseAffine::infimum() const {
    if (tail_slope_ < 0.0) return -kInf;
    double m = kInf;
    for (const auto& k : nodes_) m = std::min(m, k.lower());
    return m;
}

double PiecewiseAffine::supremum() const {
    if (tail_slope_ > 0.0) return kInf;
    double m = -kInf;
    for (const auto& k : nodes_) m = std::max(m, k.upper());
    return m;
}

double PiecewiseAffine::lipschitz_bound() const {
    if (!is_continuous()) return kInf;
    double l = std::abs(tail_slope_);
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) l = std::max(l, std::abs(segment_slope(i)));
    return l;
}

std::vector<double> PiecewiseAffine::lsc_failures() const {
    std::vector<double> xs;
    for (const auto& k : nodes_) {
        const double below = k.x == 0.0 ? k.right : std::min(k.left, k.right);
        if (k.at > below) xs.push_back(k.x);
    }
    return xs;
}

PiecewiseAffine PiecewiseAffine::simplified() const {
    std::vector<Knot> kept{nodes_.front()};
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        const Knot& k = nodes_[i];
        if (k.continuous()) {
            const Knot& prev = kept.back();
            const double before = (k.left - prev.right) / (k.x - prev.x);
            const double after = i + 1 < nodes_.size()
                                     ? (nodes_[i + 1].left - k.right) / (nodes_[i + 1].x - k.x)
                                     : tail_slope_;
            const double scale = std::max({1.0, std::abs(before), std::abs(after)});
            if (std::abs(before - after) <= 1e-12 * scale) continue;
        }
        kept.push_back(k);
    }
    return from_nodes(std::move(kept), tail_slope_);
}

PiecewiseAffine operator+(const PiecewiseAffine& a, const PiecewiseAffine& b) {
    auto xs = merged_abscissae(a, b);
    return from_nodes(combine_nodes(a, b, xs, std::plus<>{}), a.tail_slope() + b.tail_slope());
}

PiecewiseAffine operator-(const PiecewiseAffine& a, const PiecewiseAffine& b) {
    auto xs = merged_abscissae(a, b);
    return from_nodes(combine_nodes(a, b, xs, std::minus<>{}), a.tail_slope() - b.tail_slope());
}

PiecewiseAffine operator*(const PiecewiseAffine& a, const PiecewiseAffine& b) {
    const bool a_flat = a.is_piecewise_constant();
    const bool b_flat = b.is_piecewise_constant();
    if (!a_flat && !b_flat) throw std::domain_error("product of two non-constant affine pieces");
    auto xs = merged_abscissae(a, b);
    const double xl = xs.back();
    double tail = 0.0;
    if (a_flat && b.tail_slope() != 0.0) tail = a.right_limit(xl) * b.tail_slope();
    if (b_flat && a.tail_slope() != 0.0) tail = b.right_limit(xl) * a.tail_slope();
    return from_nodes(combine_nodes(a, b, xs, std::multiplies<>{}), tail);
}

PiecewiseAffine pointwise_max(const PiecewiseAffine& a, const PiecewiseAffine& b) {
    return extremum(a, b, true);
}

PiecewiseAffine pointwise_min(const PiecewiseAffine& a, const PiecewiseAffine& b) {
    return extremum(a, b, false);
}

PiecewiseAffine indicator(const PiecewiseAffine& e, double level, bool strict) {
    auto test = [strict](double diff) { return (strict ? diff > 0.0 : diff >= 0.0) ? 1.0 : 0.0; };

    struct Node {
        double x;
        double d_left, d_at, d_right;
    };
    std::vector<Node> pts;
    const auto nodes = e.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Knot& k = nodes[i];
        pts.push_back({k.x, k.left - level, k.at - level, k.right - level});
        if (i + 1 < nodes.size()) {
            const Knot& n = nodes[i + 1];
            const double r = interior_root(k.x, k.right - level, n.x, n.left - level);
            // At a crossing of a continuous segment the difference is zero by definition.
            if (!std::isnan(r)) pts.push_back({r, 0.0, 0.0, 0.0});
        }
    }
    const Knot& last = nodes.back();
    const double slope = e.tail_slope();
    const double r = tail_root(last.x, last.right - level, slope);
    if (!std::isnan(r)) pts.push_back({r, 0.0, 0.0, 0.0});

    // Value on each open segment: the sign of the affine difference there, read off the
    // endpoint sum so a zero endpoint does not decide it.
    std::vector<double> open_values;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double sum = pts[i].d_right + pts[i + 1].d_left;
        open_values.push_back(test(sum));
    }
    const Node& tail_node = pts.back();
    double tail_value;
    if (tail_node.d_right != 0.0 && std::isnan(r)) {
        tail_value = test(tail_node.d_right);
    } else if (slope != 0.0) {
        tail_value = slope > 0.0 ? 1.0 : 0.0;
    } else {
        tail_value = test(0.0);
    }
    open_values.push_back(tail_value);

    std::vector<Knot> out;
    out.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double left = i == 0 ? test(pts[0].d_at) : open_values[i - 1];
        out.push_back({pts[i].x, left, test(pts[i].d_at), open_values[i]});
    }
    return from_nodes(std::move(out), 0.0);
}

}  // namespace superhedge
