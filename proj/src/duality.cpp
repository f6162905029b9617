#include "superhedge/duality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "superhedge/format.hpp"
#include "superhedge/parallel.hpp"

namespace superhedge::duality {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string tag(const std::string& prefix, double v) { return prefix + format_double(v); }

}  // namespace

double DualityReport::diagnostic(const std::string& key) const {
    for (const auto& [k, v] : diagnostics)
        if (k == key) return v;
    return std::nan("");
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 16) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

SampleStats sample_stats(std::span<const double> values) {
    if (values.empty()) return {};
    const double n = static_cast<double>(values.size());
    SampleStats s;
    s.mean = pairwise_sum(values) / n;
    if (values.size() < 2) return s;
    std::vector<double> sq(values.size());
    std::transform(values.begin(), values.end(), sq.begin(), [&](double v) { return (v - s.mean) * (v - s.mean); });
    const double var = pairwise_sum(sq) / (n - 1.0);
    s.stderr_ = std::sqrt(var / n);
    return s;
}

DualityReport mc_upper_bound_check(const models::ModelSpec& spec, const payoff::PayoffAst& g,
                                   const envelope::HedgePair& hedge, std::size_t n_paths, std::uint64_t seed,
                                   const UpperBoundOptions& opt) {
    if (n_paths < 1) throw std::invalid_argument("upper bound check needs n_paths >= 1");
    if (!hedge.finite()) throw std::invalid_argument("upper bound check needs a finite hedge");
    if (spec.s0 != hedge.s0) throw std::invalid_argument("model s0 and hedge s0 differ");

    const models::PathSimulator sim(spec, seed);
    std::vector<double> payoffs(n_paths);
    std::vector<double> margins(n_paths);
    std::vector<std::size_t> clamps(n_paths);
    parallel_for(n_paths, opt.threads, [&](std::size_t begin, std::size_t end) {
        models::PathScratch s;
        for (std::size_t p = begin; p < end; ++p) {
            sim.generate(p, s);
            const double st = s.spot.back();
            payoffs[p] = g(st);
            margins[p] = hedge.value_at(st) - payoffs[p];
            clamps[p] = s.clamps;
        }
    });

    const SampleStats stats = sample_stats(payoffs);
    const double tol = opt.domination_tolerance * std::max(1.0, std::abs(hedge.price));
    DualityReport r;
    r.experiment = "upper/" + spec.name();
    r.estimate = stats.mean;
    r.stderr_ = stats.stderr_;
    r.n_paths = n_paths;
    r.violations = static_cast<std::size_t>(std::count_if(margins.begin(), margins.end(), [tol](double m) { return m < -tol; }));
    double clamp_total = 0.0;
    for (std::size_t c : clamps) clamp_total += static_cast<double>(c);
    const double slack = stats.stderr_ > 0.0 ? (hedge.price - stats.mean) / stats.stderr_
                                             : (hedge.price >= stats.mean ? kInf : -kInf);
    r.diagnostics = {{"price", hedge.price},
                     {"delta", hedge.delta},
                     {"min_margin", *std::min_element(margins.begin(), margins.end())},
                     {"slack_in_stderr", slack},
                     {"clamp_count", clamp_total}};
    r.passed = r.violations == 0 && stats.mean <= hedge.price + opt.stderr_multiple * stats.stderr_;
    return r;
}

void VolControl::validate() const {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !std::isfinite(sigma_max))
        throw std::invalid_argument("vol control needs 0 < sigma_min < sigma_max < inf");
    if (!(nu0 >= sigma_min && nu0 <= sigma_max))
        throw std::invalid_argument("vol control needs sigma_min <= nu0 <= sigma_max");
    if (!(ramp_time >= 0.0)) throw std::invalid_argument("vol control ramp time must be >= 0");
}

DualityReport attainment_experiment(const payoff::PayoffAst& g, double s0, const VolControl& control, double horizon,
                                    int n_steps, std::size_t n_paths, std::uint64_t seed, unsigned threads) {
    control.validate();
    if (!(s0 > 0.0)) throw std::invalid_argument("attainment: s0 must be > 0");
    if (!(horizon > 0.0) || n_steps < 1 || n_paths < 1)
        throw std::invalid_argument("attainment: horizon, n_steps and n_paths must be positive");
    const auto env = envelope::concave_envelope(g);
    if (env.is_infinite()) throw std::invalid_argument("attainment: envelope is infinite");
    const double target_value = env(s0);
    const double tol = control.contact_tol >= 0.0 ? control.contact_tol : 1e-2 * (1.0 + target_value);
    const auto contact = envelope::contact_set(g, env, tol);

    const auto n = static_cast<std::size_t>(n_steps);
    const double dt = horizon / n_steps;
    const double sqdt = std::sqrt(dt);
    const double max_move =
        control.ramp_time <= dt ? kInf : (control.sigma_max - control.sigma_min) * dt / control.ramp_time;
    auto in_contact = [&contact](double x) {
        return std::any_of(contact.begin(), contact.end(), [x](const auto& c) { return c.contains(x); });
    };

    std::vector<double> payoffs(n_paths);
    std::vector<double> latched_flags(n_paths);
    std::vector<double> mean_alpha(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            models::NormalStream normals(seed, p, models::kSpotStream);
            double alpha = control.nu0;
            double log_growth = 0.0;
            double spot = s0;
            bool latched = false;
            double alpha_sum = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const bool inside = in_contact(spot);
                latched = latched || inside;
                const bool calm = control.latch ? latched : inside;
                if (k > 0) {
                    const double target = calm ? control.sigma_min : control.sigma_max;
                    alpha += std::clamp(target - alpha, -max_move, max_move);
                }
                if (control.latch && latched && alpha == control.sigma_min) {
                    // Volatility is constant from here on; draw the remaining increment at once.
                    const double rest = static_cast<double>(n - k);
                    alpha_sum += alpha * rest;
                    log_growth += alpha * std::sqrt(rest * dt) * normals() - 0.5 * alpha * alpha * rest * dt;
                    spot = s0 * std::exp(log_growth);
                    break;
                }
                alpha_sum += alpha;
                const double dw = sqdt * normals();
                log_growth += alpha * dw - 0.5 * alpha * alpha * dt;
                spot = s0 * std::exp(log_growth);
            }
            payoffs[p] = g(spot);
            latched_flags[p] = latched ? 1.0 : 0.0;
            mean_alpha[p] = alpha_sum / static_cast<double>(n);
        }
    });

    const SampleStats stats = sample_stats(payoffs);
    DualityReport r;
    r.experiment = tag("attainment/sigma_max=", control.sigma_max);
    r.estimate = stats.mean;
    r.stderr_ = stats.stderr_;
    r.n_paths = n_paths;
    r.violations = stats.mean > target_value + 3.0 * stats.stderr_ ? 1 : 0;
    r.diagnostics = {{"envelope", target_value},
                     {"sigma_min", control.sigma_min},
                     {"sigma_max", control.sigma_max},
                     {"contact_tol", tol},
                     {"latched_fraction", sample_stats(latched_flags).mean},
                     {"mean_alpha", sample_stats(mean_alpha).mean}};
    r.passed = r.violations == 0;
    return r;
}

AlphaTarget constant_target(double value) {
    return [value](const AlphaContext&) { return value; };
}

AlphaTarget realized_vol_target() {
    return [](const AlphaContext& c) { return c.nu; };
}

DualityReport incompleteness_probe(const models::ModelSpec& spec, const AlphaTarget& target,
                                   const ProbeOptions& opt, std::size_t n_paths, std::uint64_t seed) {
    const auto* scott = std::get_if<models::Scott>(&spec.dynamics);
    if (scott == nullptr) throw std::invalid_argument("incompleteness probe needs a Scott model, got " + spec.name());
    spec.validate();
    if (!(opt.epsilon > 0.0)) throw std::invalid_argument("probe epsilon must be > 0");
    if (!(opt.gain >= 0.0) || !(opt.u_max >= 0.0)) throw std::invalid_argument("probe gain and u_max must be >= 0");
    if (n_paths < 1) throw std::invalid_argument("probe needs n_paths >= 1");

    const auto n = static_cast<std::size_t>(spec.n_steps);
    const double dt = spec.dt();
    const double sqdt = std::sqrt(dt);
    const double nu0 = spec.nu0();
    const models::Scott m = *scott;

    std::vector<double> exceed(n_paths);
    std::vector<double> energy(n_paths);
    std::vector<double> sup_dist(n_paths);
    parallel_for(n_paths, opt.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            models::NormalStream spot_normals(seed, p, models::kSpotStream);
            models::NormalStream vol_normals(seed, p, models::kVolStream);
            double y = m.y0;
            double w = 0.0;
            double dist = 0.0;
            double u_sq = 0.0;
            for (std::size_t k = 0;; ++k) {
                const double nu = std::exp(y);
                const double alpha = target({k, spec.horizon * static_cast<double>(k) / static_cast<double>(n), w, nu, nu0});
                if (!(alpha > 0.0) || !std::isfinite(alpha))
                    throw std::domain_error("probe target volatility must be finite and > 0");
                dist = std::max(dist, std::abs(alpha - nu));
                if (k == n) break;
                const double u = std::clamp(opt.gain * (std::log(alpha) - y), -opt.u_max, opt.u_max);
                u_sq += u * u * dt;
                y += (m.kappa * (m.theta - y) + m.beta * u) * dt + m.beta * sqdt * vol_normals();
                w += sqdt * spot_normals();
            }
            exceed[p] = dist > opt.epsilon ? 1.0 : 0.0;
            energy[p] = u_sq;
            sup_dist[p] = dist;
        }
    });

    const SampleStats stats = sample_stats(exceed);
    DualityReport r;
    r.experiment = tag("probe/gain=", opt.gain);
    r.estimate = stats.mean;
    r.stderr_ = stats.stderr_;
    r.n_paths = n_paths;
    r.violations = static_cast<std::size_t>(pairwise_sum(exceed));
    r.diagnostics = {{"epsilon", opt.epsilon},
                     {"gain", opt.gain},
                     {"u_max", opt.u_max},
                     {"entropy", 0.5 * sample_stats(energy).mean},
                     {"mean_sup_distance", sample_stats(sup_dist).mean}};
    r.passed = stats.mean < opt.epsilon;
    return r;
}

PathProximity proximity_path(std::span<const double> alpha, std::span<const double> nu, std::span<const double> dW,
                             double delta, double horizon) {
    const std::size_t n = dW.size();
    if (alpha.size() != n + 1 || nu.size() != n + 1) throw std::invalid_argument("proximity: misaligned grids");
    if (!(delta > 0.0) || !(horizon > 0.0)) throw std::invalid_argument("proximity: delta and horizon must be > 0");
    const double dt = horizon / static_cast<double>(n);

    PathProximity r;
    r.tau_index = n;
    for (std::size_t k = 0; k <= n; ++k) {
        if (std::abs(alpha[k] - nu[k]) >= delta) {
            r.tau_index = k;
            break;
        }
    }
    r.tau = horizon * static_cast<double>(r.tau_index) / static_cast<double>(n);
    double quad = 0.0;
    double stoch = 0.0;
    double gap = 0.0;
    for (std::size_t k = 0; k < r.tau_index; ++k) {
        const double a2 = alpha[k] * alpha[k];
        const double v2 = nu[k] * nu[k];
        quad += std::abs(a2 - v2) * dt;
        stoch += (alpha[k] - nu[k]) * dW[k];
        gap += (nu[k] - alpha[k]) * dW[k] - 0.5 * (v2 - a2) * dt;
    }
    r.quadratic = 0.5 * quad;
    r.stochastic = std::abs(stoch);
    r.log_gap = std::abs(gap);
    return r;
}

ProximityStats proximity_diagnostic(const models::PathBatch& batch,
                                    const std::function<std::vector<double>(std::size_t)>& alpha, double delta,
                                    double epsilon) {
    const double horizon = batch.spec().horizon;
    const auto n = static_cast<std::size_t>(batch.n_steps());
    ProximityStats st;
    st.delta = delta;
    st.epsilon = epsilon;
    st.paths.reserve(batch.n_paths());

    std::vector<std::vector<double>> alphas;
    alphas.reserve(batch.n_paths());
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        alphas.push_back(alpha(p));
        if (alphas.back().size() != n + 1) throw std::invalid_argument("proximity: alpha path has the wrong length");
        for (double a : alphas.back()) st.alpha_sup = std::max(st.alpha_sup, std::abs(a));
    }
    st.quadratic_bound = 0.5 * horizon * delta * (2.0 * st.alpha_sup + delta);
    st.isometry_bound = delta * delta * horizon;
    st.chebyshev_bound = st.quadratic_bound / std::sqrt(delta) + st.isometry_bound / delta;

    std::vector<double> stoch_sq;
    stoch_sq.reserve(batch.n_paths());
    std::size_t cheb = 0, early = 0, u_eps = 0;
    const double threshold = 2.0 * std::sqrt(delta);
    std::vector<double> controlled(n + 1);
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        PathProximity r = proximity_path(alphas[p], batch.nu(p), batch.dW(p), delta, horizon);
        // Measure the gap on the simulated spot itself rather than on the increments.
        models::stochastic_exponential(std::span<const double>(alphas[p]).first(n), batch.spec().s0, batch.dW(p), horizon / static_cast<double>(n),
                                       controlled);
        r.log_gap = std::abs(std::log(batch.spot(p)[r.tau_index]) - std::log(controlled[r.tau_index]));
        if (r.quadratic > st.quadratic_bound * (1.0 + 1e-12)) ++st.quadratic_violations;
        if (r.log_gap > (r.quadratic + r.stochastic) * (1.0 + 1e-9) + 1e-12) ++st.log_gap_violations;
        if (r.quadratic + r.stochastic >= threshold) ++cheb;
        if (r.tau_index < n) ++early;
        if (r.tau_index < n || r.log_gap > epsilon) ++u_eps;
        stoch_sq.push_back(r.stochastic * r.stochastic);
        st.paths.push_back(r);
    }
    const SampleStats s = sample_stats(stoch_sq);
    const double np = static_cast<double>(batch.n_paths());
    st.stochastic_sq_mean = s.mean;
    st.stochastic_sq_stderr = s.stderr_;
    st.chebyshev_frequency = static_cast<double>(cheb) / np;
    st.tau_before_horizon = static_cast<double>(early) / np;
    st.u_eps_frequency = static_cast<double>(u_eps) / np;
    return st;
}

void write_report_csv_header(std::ostream& os) {
    os << "experiment,estimate,stderr,n_paths,violations,diag_key,diag_value\n";
}

void write_report_csv(std::ostream& os, const DualityReport& r) {
    const std::string head = r.experiment + ',' + format_double(r.estimate) + ',' + format_double(r.stderr_) + ',' +
                             std::to_string(r.n_paths) + ',' + std::to_string(r.violations) + ',';
    if (r.diagnostics.empty()) {
        os << head << ",\n";
        return;
    }
    for (const auto& [k, v] : r.diagnostics) os << head << k << ',' << format_double(v) << '\n';
}

}  // namespace superhedge::duality
