#pragma once

#include <cstddef>
#include <vector>

#include "superhedge/payoff.hpp"

namespace superhedge::stopping {

struct BellmanOptions {
    int half_width = 600;        // J: nodes s0 u^j for j in [-J, J]
    double log_step = 0.01;      // ln u
    double tolerance = 1e-10;    // sup-norm change that ends the iteration
    long max_iterations = 20'000'000;
};

/// Perpetual optimal stopping of the driftless binomial walk on the log grid.
struct StoppingResult {
    double value = 0.0;                 // at s0
    long iterations = 0;
    double residual = 0.0;              // sup-norm change of the last sweep
    bool converged = false;
    std::vector<double> grid;           // spot nodes, ascending
    std::vector<double> values;         // value per node
    std::vector<bool> exercise;         // value == payoff
    std::size_t monotonicity_violations = 0;
    std::size_t envelope_violations = 0;  // sweeps that rose above the concave envelope
};

/// Iterates V <- max(g, p V(up) + (1 - p) V(down)) in place until the
/// sup-norm change drops below the tolerance. Above the grid V continues
/// linearly with the payoff's tail slope; the bottom node stays at g(x_min).
/// Every sweep is checked to be nondecreasing and to stay below the concave
/// envelope sampled on the grid.
StoppingResult bellman_envelope(const payoff::PayoffAst& g, double s0, const BellmanOptions& options = {});

/// Finite-horizon value: backward induction on an n-step martingale binomial
/// tree with per-step log move sigma sqrt(T / n).
double finite_horizon_value(const payoff::PayoffAst& g, double s0, int n_steps, double horizon, double sigma);

}  // namespace superhedge::stopping
