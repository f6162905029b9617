#include "superhedge/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "superhedge/format.hpp"

namespace superhedge::envelope {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Upper hull of points sorted by x, closed on the right by a ray of slope `tail`.
std::vector<EnvelopeKnot> upper_hull_with_ray(const std::vector<EnvelopeKnot>& pts, double tail) {
    std::vector<EnvelopeKnot> hull;
    hull.reserve(pts.size());
    for (const auto& p : pts) {
        while (hull.size() >= 2) {
            const auto& o = hull[hull.size() - 2];
            const auto& a = hull.back();
            // Drop a when it lies on or below the chord o -> p.
            if ((a.value - o.value) * (p.x - o.x) <= (p.value - o.value) * (a.x - o.x)) {
                hull.pop_back();
            } else {
                break;
            }
        }
        hull.push_back(p);
    }
    // The last vertex must see a segment steeper than the tail ray.
    while (hull.size() >= 2) {
        const auto& o = hull[hull.size() - 2];
        const auto& a = hull.back();
        if (a.value - o.value <= tail * (a.x - o.x)) {
            hull.pop_back();
        } else {
            break;
        }
    }
    return hull;
}

std::size_t knot_index(std::span<const EnvelopeKnot> knots, double x) {
    auto it = std::upper_bound(knots.begin(), knots.end(), x,
                               [](double v, const EnvelopeKnot& k) { return v < k.x; });
    return static_cast<std::size_t>(std::distance(knots.begin(), it)) - 1;
}

PiecewiseAffine v_shape(double at_x, double value, double n) {
    if (at_x == 0.0) return PiecewiseAffine({0.0, value, value, value}, {}, n);
    return PiecewiseAffine({0.0, value + n * at_x, value + n * at_x, value + n * at_x},
                           {{at_x, value, value, value}}, n);
}

// inf over y in [a, b] of (affine g on [a, b]) + n |x - y|.
PiecewiseAffine segment_piece(double a, double va, double b, double vb, double n) {
    const double s = (vb - va) / (b - a);
    if (s > n) return v_shape(a, va, n);
    if (s < -n) return v_shape(b, vb, n);
    std::vector<Knot> knots;
    Knot origin{0.0, va, va, va};
    if (a > 0.0) {
        const double v0 = va + n * a;
        origin = {0.0, v0, v0, v0};
        knots.push_back({a, va, va, va});
    }
    knots.push_back({b, vb, vb, vb});
    return PiecewiseAffine(origin, std::move(knots), n);
}

// inf over y >= a of (va + t (y - a)) + n |x - y|, for 0 <= t.
PiecewiseAffine tail_piece(double a, double va, double t, double n) {
    if (t > n) return v_shape(a, va, n);
    if (a == 0.0) return PiecewiseAffine({0.0, va, va, va}, {}, t);
    const double v0 = va + n * a;
    return PiecewiseAffine({0.0, v0, v0, v0}, {{a, va, va, va}}, t);
}

}  // namespace

ConcaveEnvelope::ConcaveEnvelope(std::vector<EnvelopeKnot> knots, double tail_slope)
    : knots_(std::move(knots)), tail_slope_(tail_slope) {
    if (knots_.empty() || knots_.front().x != 0.0)
        throw std::invalid_argument("envelope knots must start at x = 0");
    if (!std::isfinite(tail_slope_)) throw std::invalid_argument("finite envelope needs a finite tail slope");
    slopes_.reserve(knots_.size() - 1);
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
        if (!(knots_[i + 1].x > knots_[i].x)) throw std::invalid_argument("envelope knots must increase");
        slopes_.push_back((knots_[i + 1].value - knots_[i].value) / (knots_[i + 1].x - knots_[i].x));
    }
}

ConcaveEnvelope ConcaveEnvelope::infinite() {
    ConcaveEnvelope env;
    env.infinite_ = true;
    env.tail_slope_ = kInf;
    return env;
}

double ConcaveEnvelope::operator()(double x) const {
    if (!(x >= 0.0)) throw std::domain_error("envelope argument must be >= 0");
    if (infinite_) return kInf;
    const std::size_t i = knot_index(knots_, x);
    const auto& k = knots_[i];
    if (k.x == x) return k.value;
    if (i + 1 == knots_.size()) return k.value + tail_slope_ * (x - k.x);
    const auto& n = knots_[i + 1];
    return k.value + (n.value - k.value) * ((x - k.x) / (n.x - k.x));
}

double ConcaveEnvelope::right_derivative(double s) const {
    if (!(s >= 0.0)) throw std::domain_error("derivative point must be >= 0");
    if (infinite_) return std::nan("");
    const std::size_t i = knot_index(knots_, s);
    return i + 1 == knots_.size() ? tail_slope_ : slopes_[i];
}

double ConcaveEnvelope::left_derivative(double s) const {
    if (!(s >= 0.0)) throw std::domain_error("derivative point must be >= 0");
    if (infinite_) return std::nan("");
    if (s == 0.0) return right_derivative(0.0);
    if (s > knots_.back().x) return tail_slope_;
    auto it = std::lower_bound(knots_.begin(), knots_.end(), s,
                               [](const EnvelopeKnot& k, double v) { return k.x < v; });
    const auto j = static_cast<std::size_t>(std::distance(knots_.begin(), it));
    return slopes_[j - 1];
}

PiecewiseAffine ConcaveEnvelope::to_piecewise() const {
    if (infinite_) throw std::logic_error("infinite envelope has no piecewise-affine form");
    std::vector<std::pair<double, double>> pts;
    pts.reserve(knots_.size());
    for (const auto& k : knots_) pts.emplace_back(k.x, k.value);
    return PiecewiseAffine::interpolate(pts, tail_slope_);
}

ConcaveEnvelope concave_envelope(const PiecewiseAffine& g) {
    if (g.tail_slope() == kInf) return ConcaveEnvelope::infinite();
    if (g.infimum() < 0.0) throw std::invalid_argument("concave envelope needs a nonnegative payoff");
    std::vector<EnvelopeKnot> pts;
    pts.reserve(g.nodes().size());
    const Knot& o = g.origin();
    pts.push_back({0.0, std::max(o.at, o.right)});
    for (const auto& k : g.knots()) pts.push_back({k.x, k.upper()});
    return ConcaveEnvelope(upper_hull_with_ray(pts, g.tail_slope()), g.tail_slope());
}

ConcaveEnvelope concave_envelope(const payoff::PayoffAst& g) { return concave_envelope(g.piecewise()); }

ConcaveEnvelope envelope_from_table(std::span<const Sample> samples, double declared_tail_slope) {
    if (samples.empty()) throw std::invalid_argument("payoff table is empty");
    if (std::isnan(declared_tail_slope) || declared_tail_slope < 0.0)
        throw std::invalid_argument("declared tail slope must be >= 0");
    std::vector<std::pair<double, double>> pts;
    pts.reserve(samples.size() + 1);
    double prev = 0.0;
    for (const auto& s : samples) {
        if (!std::isfinite(s.x) || s.x < 0.0) throw std::invalid_argument("table abscissae must be finite and >= 0");
        if (!std::isfinite(s.value) || s.value < 0.0) throw std::invalid_argument("table values must be finite and >= 0");
        if (s.x < prev) throw std::invalid_argument("table must be sorted by x");
        prev = s.x;
        if (!pts.empty() && pts.back().first == s.x) {
            pts.back().second = std::max(pts.back().second, s.value);
        } else {
            pts.emplace_back(s.x, s.value);
        }
    }
    if (declared_tail_slope == kInf) return ConcaveEnvelope::infinite();
    if (pts.front().first != 0.0) pts.insert(pts.begin(), {0.0, 0.0});
    return concave_envelope(PiecewiseAffine::interpolate(pts, declared_tail_slope));
}

double right_derivative(const ConcaveEnvelope& env, double s) { return env.right_derivative(s); }
double left_derivative(const ConcaveEnvelope& env, double s) { return env.left_derivative(s); }

HedgePair buy_and_hold_price(const ConcaveEnvelope& env, double s0) {
    if (!(s0 > 0.0) || !std::isfinite(s0)) throw std::invalid_argument("initial spot must be > 0");
    if (env.is_infinite()) return {kInf, std::nan(""), std::nan(""), s0};
    return {env(s0), env.right_derivative(s0), env.left_derivative(s0), s0};
}

HedgePair buy_and_hold_price(const payoff::PayoffAst& g, double s0) {
    return buy_and_hold_price(concave_envelope(g), s0);
}

MarginReport hedge_dominates(const payoff::PayoffAst& g, const HedgePair& hedge, std::span<const double> grid,
                             double tolerance) {
    if (grid.empty()) throw std::invalid_argument("domination grid is empty");
    MarginReport r;
    r.min_margin = kInf;
    auto visit = [&](double x, double gx) {
        const double m = hedge.value_at(x) - gx;
        if (m < r.min_margin) {
            r.min_margin = m;
            r.argmin = x;
        }
    };
    visit(0.0, g(0.0));
    for (double x : grid) visit(x, g(x));
    for (const auto& k : g.piecewise().nodes()) {
        visit(k.x, k.left);
        visit(k.x, k.at);
        visit(k.x, k.right);
    }
    const double t = g.piecewise().tail_slope();
    r.tail_ok = hedge.delta >= t - 1e-12 * std::max(1.0, std::abs(t));
    r.dominates = r.tail_ok && r.min_margin >= -tolerance * std::max(1.0, std::abs(hedge.price));
    return r;
}

RegularizedPayoff lipschitz_regularize(const PiecewiseAffine& g, int n) {
    if (n < 1) throw std::invalid_argument("regularization index must be >= 1");
    if (g.infimum() < 0.0) throw std::invalid_argument("regularization needs a nonnegative payoff");
    const double nn = n;
    const auto nodes = g.nodes();

    PiecewiseAffine h = v_shape(0.0, nodes.front().at, nn);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Knot& k = nodes[i];
        if (i > 0) h = pointwise_min(h, v_shape(k.x, k.at, nn));
        if (i + 1 < nodes.size()) {
            h = pointwise_min(h, segment_piece(k.x, k.right, nodes[i + 1].x, nodes[i + 1].left, nn));
        } else {
            h = pointwise_min(h, tail_piece(k.x, k.right, g.tail_slope(), nn));
        }
    }
    h = pointwise_min(h, PiecewiseAffine::constant(nn));
    return {n, h.simplified()};
}

RegularizedPayoff lipschitz_regularize(const payoff::PayoffAst& g, int n) {
    return lipschitz_regularize(g.piecewise(), n);
}

bool ContactInterval::contains(double x) const {
    if (x < lo || x > hi) return false;
    if (x == lo && lo_open) return false;
    if (x == hi && hi_open) return false;
    return true;
}

std::vector<ContactInterval> contact_set(const PiecewiseAffine& g, const ConcaveEnvelope& env, double tol) {
    if (!(tol >= 0.0)) throw std::invalid_argument("contact tolerance must be >= 0");
    if (env.is_infinite()) return {};
    const PiecewiseAffine d = env.to_piecewise() - g;
    std::vector<ContactInterval> out;
    auto add = [&out](double lo, double hi, bool lo_open, bool hi_open) {
        if (!out.empty()) {
            auto& p = out.back();
            if (p.hi == lo && !(p.hi_open && lo_open)) {
                p.hi = hi;
                p.hi_open = hi_open;
                return;
            }
        }
        out.push_back({lo, hi, lo_open, hi_open});
    };

    const auto nodes = d.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double a = nodes[i].x;
        const double da = nodes[i].right;
        if (nodes[i].at <= tol) add(a, a, false, false);
        if (i + 1 < nodes.size()) {
            const double b = nodes[i + 1].x;
            const double db = nodes[i + 1].left;
            if (da <= tol && db <= tol) {
                add(a, b, true, true);
            } else if (da <= tol) {
                const double x = a + (b - a) * ((tol - da) / (db - da));
                if (x > a) add(a, std::min(x, b), true, false);
            } else if (db <= tol) {
                const double x = a + (b - a) * ((da - tol) / (da - db));
                if (x < b) add(std::max(x, a), b, false, true);
            }
        } else {
            const double s = d.tail_slope();
            if (da <= tol) {
                if (s <= 0.0) {
                    add(a, kInf, true, true);
                } else {
                    const double x = a + (tol - da) / s;
                    if (x > a) add(a, x, true, false);
                }
            } else if (s < 0.0) {
                add(a + (da - tol) / (-s), kInf, false, true);
            }
        }
    }
    return out;
}

std::vector<ContactInterval> contact_set(const payoff::PayoffAst& g, const ConcaveEnvelope& env, double tol) {
    return contact_set(g.piecewise(), env, tol);
}

double table_contact_tolerance(std::span<const Sample> samples) {
    double m = 0.0;
    for (const auto& s : samples) m = std::max(m, s.value);
    return 1e-9 * (1.0 + m);
}

void write_envelope_csv(std::ostream& os, const ConcaveEnvelope& env) {
    os << "x,value,slope_right\n";
    if (env.is_infinite()) {
        os << "inf,inf,inf\n";
        return;
    }
    const auto knots = env.knots();
    for (std::size_t i = 0; i < knots.size(); ++i) {
        const double slope = i + 1 < knots.size() ? env.slopes()[i] : env.tail_slope();
        os << format_double(knots[i].x) << ',' << format_double(knots[i].value) << ',' << format_double(slope)
           << '\n';
    }
    const double limit = env.tail_slope() > 0.0 ? kInf : knots.back().value;
    os << "inf," << format_double(limit) << ',' << format_double(env.tail_slope()) << '\n';
}

}  // namespace superhedge::envelope
