#include "superhedge/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "superhedge/envelope.hpp"

namespace superhedge::stopping {

StoppingResult bellman_envelope(const payoff::PayoffAst& g, double s0, const BellmanOptions& opt) {
    if (!(s0 > 0.0)) throw std::invalid_argument("stopping: s0 must be > 0");
    if (opt.half_width < 1) throw std::invalid_argument("stopping: half width must be >= 1");
    if (!(opt.log_step > 0.0)) throw std::invalid_argument("stopping: log step must be > 0");
    if (!(opt.tolerance > 0.0)) throw std::invalid_argument("stopping: tolerance must be > 0");

    const auto env = envelope::concave_envelope(g);
    const double tail = g.piecewise().tail_slope();
    const std::size_t n = 2 * static_cast<std::size_t>(opt.half_width) + 1;
    const double u = std::exp(opt.log_step);
    const double d = 1.0 / u;
    const double p = (1.0 - d) / (u - d);
    const double q = 1.0 - p;

    StoppingResult r;
    r.grid.resize(n);
    std::vector<double> payoff(n);
    std::vector<double> cap(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double step = static_cast<double>(static_cast<long>(j) - opt.half_width);
        r.grid[j] = s0 * std::exp(opt.log_step * step);
        payoff[j] = g(r.grid[j]);
        cap[j] = env(r.grid[j]) + 1e-12 * std::max(1.0, std::abs(env(r.grid[j])));
    }
    const double top_gap = r.grid[n - 1] * (u - 1.0);

    std::vector<double>& v = r.values;
    v = payoff;
    r.residual = std::numeric_limits<double>::infinity();
    while (r.iterations < opt.max_iterations) {
        double change = 0.0;
        bool above_cap = false;
        for (std::size_t j = 1; j < n; ++j) {
            const double up = j + 1 < n ? v[j + 1] : v[j] + tail * top_gap;
            const double next = std::max(payoff[j], p * up + q * v[j - 1]);
            const double delta = next - v[j];
            if (delta < 0.0) ++r.monotonicity_violations;
            change = std::max(change, std::abs(delta));
            above_cap |= next > cap[j];
            v[j] = next;
        }
        ++r.iterations;
        if (above_cap) ++r.envelope_violations;
        r.residual = change;
        if (change < opt.tolerance) {
            r.converged = true;
            break;
        }
    }
    r.value = v[static_cast<std::size_t>(opt.half_width)];
    r.exercise.resize(n);
    for (std::size_t j = 0; j < n; ++j) r.exercise[j] = v[j] == payoff[j];
    return r;
}

double finite_horizon_value(const payoff::PayoffAst& g, double s0, int n_steps, double horizon, double sigma) {
    if (!(s0 > 0.0)) throw std::invalid_argument("stopping: s0 must be > 0");
    if (!(horizon >= 0.0)) throw std::invalid_argument("stopping: horizon must be >= 0");
    if (horizon == 0.0) return g(s0);
    if (n_steps < 1) throw std::invalid_argument("stopping: n_steps must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("stopping: sigma must be > 0");

    const double h = sigma * std::sqrt(horizon / n_steps);
    const double u = std::exp(h);
    const double d = 1.0 / u;
    const double p = (1.0 - d) / (u - d);
    const double q = 1.0 - p;
    const auto n = static_cast<std::size_t>(n_steps);

    // Lattice level k in [-n, n] lives at offset k + n.
    std::vector<double> payoff(2 * n + 1);
    for (std::size_t k = 0; k <= 2 * n; ++k) {
        payoff[k] = g(s0 * std::exp(h * (static_cast<double>(k) - static_cast<double>(n))));
    }
    // Node i at step m sits on level 2i - m.
    std::vector<double> v(n + 1);
    for (std::size_t i = 0; i <= n; ++i) v[i] = payoff[2 * i];
    for (std::size_t m = n; m-- > 0;) {
        for (std::size_t i = 0; i <= m; ++i) {
            v[i] = std::max(payoff[2 * i + (n - m)], p * v[i + 1] + q * v[i]);
        }
    }
    return v[0];
}

}  // namespace superhedge::stopping
