#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "superhedge/envelope.hpp"
#include "superhedge/models.hpp"
#include "superhedge/payoff.hpp"

namespace superhedge::duality {

/// Summary of one Monte Carlo verification experiment.
struct DualityReport {
    std::string experiment;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::size_t n_paths = 0;
    std::size_t violations = 0;
    std::vector<std::pair<std::string, double>> diagnostics;
    bool passed = true;

    double diagnostic(const std::string& key) const;
};

/// Mean and standard error (sample std / sqrt(n)) with pairwise summation in
/// index order.
struct SampleStats {
    double mean = 0.0;
    double stderr_ = 0.0;
};
SampleStats sample_stats(std::span<const double> values);
double pairwise_sum(std::span<const double> values);

struct UpperBoundOptions {
    double domination_tolerance = 1e-9;  // scaled by max(1, price)
    double stderr_multiple = 3.0;
    unsigned threads = 0;
};

/// Simulates the model, checks mean g(S_T) <= price + k stderr, and counts
/// paths where price + delta (S_T - s0) < g(S_T). `spec.s0` must equal
/// `hedge.s0`.
DualityReport mc_upper_bound_check(const models::ModelSpec& spec, const payoff::PayoffAst& g,
                                   const envelope::HedgePair& hedge, std::size_t n_paths, std::uint64_t seed,
                                   const UpperBoundOptions& options = {});

/// Bounded adapted volatility control. Starts at nu0, runs sigma_max while
/// the controlled spot is in the continuation region and sigma_min once it
/// is in the contact set. Level changes are linear ramps that take
/// max(ramp_time, one grid step).
struct VolControl {
    double sigma_min = 0.01;
    double sigma_max = 4.0;
    double nu0 = 0.2;
    double ramp_time = 0.0;
    /// Width of the contact band {ĝ - g <= tol}; negative selects
    /// 1e-2 (1 + ĝ(s0)).
    double contact_tol = -1.0;
    /// Stay at sigma_min after the first entry into the contact band.
    bool latch = true;

    void validate() const;
};

/// Estimates E[g(S^{alpha, s0}_T)] for the feedback control driven by W only.
DualityReport attainment_experiment(const payoff::PayoffAst& g, double s0, const VolControl& control, double horizon,
                                    int n_steps, std::size_t n_paths, std::uint64_t seed, unsigned threads = 0);

/// State visible to a volatility target at grid step `step`.
struct AlphaContext {
    std::size_t step = 0;
    double t = 0.0;
    double w = 0.0;    // Brownian level W_t of the spot driver
    double nu = 0.0;   // realized volatility of the (tilted) model
    double nu0 = 0.0;
};
using AlphaTarget = std::function<double(const AlphaContext&)>;

AlphaTarget constant_target(double value);
AlphaTarget realized_vol_target();

struct ProbeOptions {
    double epsilon = 0.1;
    double gain = 0.0;
    double u_max = 50.0;
    unsigned threads = 0;
};

/// Tilts the Scott log-vol drift by beta u_t with u_t = clamp(gain (ln alpha_t - Y_t), +-u_max),
/// leaving W untouched, and estimates the probability that sup_t |alpha_t - nu_t| > epsilon.
/// Diagnostics carry the relative-entropy estimate 1/2 E[int u^2 dt].
DualityReport incompleteness_probe(const models::ModelSpec& scott, const AlphaTarget& target,
                                   const ProbeOptions& options, std::size_t n_paths, std::uint64_t seed);

/// Proof diagnostics for one path pair (alpha, nu) driven by the same dW.
struct PathProximity {
    std::size_t tau_index = 0;  // first grid index with |alpha - nu| >= delta, else n
    double tau = 0.0;
    double quadratic = 0.0;     // 1/2 int_0^tau |alpha^2 - nu^2| dt
    double stochastic = 0.0;    // |int_0^tau (alpha - nu) dW|
    double log_gap = 0.0;       // |ln S_tau - ln S^{alpha}_tau|
};

PathProximity proximity_path(std::span<const double> alpha, std::span<const double> nu, std::span<const double> dW,
                             double delta, double horizon);

struct ProximityStats {
    double delta = 0.0;
    double epsilon = 0.0;
    double alpha_sup = 0.0;
    double quadratic_bound = 0.0;  // 1/2 T delta (2 ||alpha|| + delta)
    double isometry_bound = 0.0;   // delta^2 T
    double chebyshev_bound = 0.0;  // quadratic_bound / sqrt(delta) + delta^2 T / delta
    std::vector<PathProximity> paths;
    std::size_t quadratic_violations = 0;
    std::size_t log_gap_violations = 0;
    double stochastic_sq_mean = 0.0;
    double stochastic_sq_stderr = 0.0;
    double chebyshev_frequency = 0.0;  // P(quadratic + stochastic >= 2 sqrt(delta))
    double tau_before_horizon = 0.0;   // P(tau < T)
    double u_eps_frequency = 0.0;      // P(tau < T or log_gap > epsilon)
};

/// Runs proximity_path over a batch; alpha(path) gives the control path
/// (n_steps + 1 grid values) for each simulated path.
ProximityStats proximity_diagnostic(const models::PathBatch& batch,
                                    const std::function<std::vector<double>(std::size_t)>& alpha, double delta,
                                    double epsilon);

/// CSV rows experiment,estimate,stderr,n_paths,violations,diag_key,diag_value;
/// one row per diagnostic (a single row with empty key when there are none).
void write_report_csv_header(std::ostream& os);
void write_report_csv(std::ostream& os, const DualityReport& report);

}  // namespace superhedge::duality
