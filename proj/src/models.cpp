#include "superhedge/models.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "superhedge/format.hpp"
#include "superhedge/parallel.hpp"

namespace superhedge::models {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

bool finite_all(std::initializer_list<double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

std::string model_name(const Dynamics& d) {
    return std::visit(overloaded{[](const Gbm&) { return std::string("gbm"); },
                                 [](const Heston&) { return std::string("heston"); },
                                 [](const HullWhite&) { return std::string("hullwhite"); },
                                 [](const Scott&) { return std::string("scott"); },
                                 [](const RoughFou&) { return std::string("roughfou"); }},
                      d);
}

std::string ModelSpec::name() const { return model_name(dynamics); }

double ModelSpec::nu0() const {
    return std::visit(overloaded{[](const Gbm& m) { return m.sigma; },
                                 [](const Heston& m) { return std::sqrt(m.v0); },
                                 [](const HullWhite& m) { return std::sqrt(m.v0); },
                                 [](const Scott& m) { return std::exp(m.y0); },
                                 [](const RoughFou& m) { return std::exp(m.y0); }},
                      dynamics);
}

void ModelSpec::validate() const {
    require(std::isfinite(s0) && s0 > 0.0, "s0 must be > 0");
    require(std::isfinite(horizon) && horizon > 0.0, "horizon must be > 0");
    require(n_steps >= 1, "n_steps must be >= 1");
    std::visit(overloaded{
                   [](const Gbm& m) { require(std::isfinite(m.sigma) && m.sigma > 0.0, "gbm: sigma must be > 0"); },
                   [](const Heston& m) {
                       require(finite_all({m.v0, m.kappa, m.theta, m.xi, m.rho}), "heston: parameters must be finite");
                       require(m.v0 > 0.0, "heston: v0 must be > 0");
                       require(m.kappa >= 0.0 && m.theta >= 0.0 && m.xi >= 0.0,
                               "heston: kappa, theta and xi must be >= 0");
                       require(m.rho == 0.0, "heston: spot-vol correlation rho must be 0 (independent vol driver)");
                   },
                   [](const HullWhite& m) {
                       require(finite_all({m.v0, m.mu, m.sigma}), "hullwhite: parameters must be finite");
                       require(m.v0 > 0.0, "hullwhite: v0 must be > 0");
                       require(m.sigma >= 0.0, "hullwhite: sigma must be >= 0");
                   },
                   [](const Scott& m) {
                       require(finite_all({m.y0, m.kappa, m.theta, m.beta}), "scott: parameters must be finite");
                       require(m.kappa >= 0.0 && m.beta >= 0.0, "scott: kappa and beta must be >= 0");
                   },
                   [this](const RoughFou& m) {
                       require(finite_all({m.y0, m.lambda, m.theta, m.beta, m.hurst}),
                               "roughfou: parameters must be finite");
                       require(m.lambda >= 0.0 && m.beta >= 0.0, "roughfou: lambda and beta must be >= 0");
                       require(m.hurst > 0.0 && m.hurst < 1.0, "roughfou: hurst must lie in (0, 1)");
                       require(n_steps <= FbmIncrements::kMaxSteps, "roughfou: n_steps must be <= 4096");
                   }},
               dynamics);
    require(nu0() > 0.0 && std::isfinite(nu0()), "initial volatility must be > 0");
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t path, std::uint64_t stream) {
    return splitmix64(splitmix64(splitmix64(seed) ^ path) ^ (stream * 0xd1b54a32d192ed03ULL));
}

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t path, std::uint64_t stream)
    : engine_(substream_seed(seed, path, stream)) {}

FbmIncrements::FbmIncrements(double hurst, int n_steps, double horizon)
    : hurst_(hurst), n_steps_(n_steps), dt_(horizon / n_steps) {
    require(hurst > 0.0 && hurst < 1.0, "fbm: hurst must lie in (0, 1)");
    require(n_steps >= 1 && n_steps <= kMaxSteps, "fbm: n_steps must lie in [1, 4096]");
    require(std::isfinite(horizon) && horizon > 0.0, "fbm: horizon must be > 0");
    Eigen::MatrixXd cov(n_steps, n_steps);
    for (int i = 0; i < n_steps; ++i)
        for (int j = 0; j < n_steps; ++j) cov(i, j) = covariance(i, j);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw std::runtime_error("fbm: increment covariance is not positive definite");
    factor_ = llt.matrixL();
}

double FbmIncrements::covariance(int i, int j) const {
    const double k = std::abs(i - j);
    const double h2 = 2.0 * hurst_;
    return 0.5 * std::pow(dt_, h2) * (std::pow(k + 1.0, h2) + std::pow(std::abs(k - 1.0), h2) - 2.0 * std::pow(k, h2));
}

void FbmIncrements::sample(NormalStream& normals, std::span<double> out) const {
    if (out.size() != static_cast<std::size_t>(n_steps_)) throw std::invalid_argument("fbm: output size mismatch");
    Eigen::VectorXd z(n_steps_);
    for (int i = 0; i < n_steps_; ++i) z[i] = normals();
    Eigen::Map<Eigen::VectorXd> dst(out.data(), n_steps_);
    dst.noalias() = factor_.triangularView<Eigen::Lower>() * z;
}

std::vector<double> fbm_increments(double hurst, int n_steps, double horizon, std::uint64_t seed) {
    FbmIncrements gen(hurst, n_steps, horizon);
    NormalStream normals(seed, 0, kVolStream);
    std::vector<double> out(static_cast<std::size_t>(n_steps));
    gen.sample(normals, out);
    return out;
}

void stochastic_exponential(std::span<const double> alpha, double x, std::span<const double> dW, double dt,
                            std::span<double> out) {
    if (alpha.size() != dW.size()) throw std::invalid_argument("stochastic exponential: alpha and dW lengths differ");
    if (out.size() != dW.size() + 1) throw std::invalid_argument("stochastic exponential: output length mismatch");
    if (!(x > 0.0)) throw std::invalid_argument("stochastic exponential: start value must be > 0");
    double log_growth = 0.0;
    out[0] = x;
    for (std::size_t k = 0; k < dW.size(); ++k) {
        log_growth += alpha[k] * dW[k] - 0.5 * alpha[k] * alpha[k] * dt;
        out[k + 1] = x * std::exp(log_growth);
    }
}

std::vector<double> stochastic_exponential(std::span<const double> alpha, double x, std::span<const double> dW,
                                           double dt) {
    std::vector<double> out(dW.size() + 1);
    stochastic_exponential(alpha, x, dW, dt, out);
    return out;
}

PathSimulator::PathSimulator(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
    spec_.validate();
    if (const auto* m = std::get_if<RoughFou>(&spec_.dynamics)) {
        fbm_.emplace(m->hurst, spec_.n_steps, spec_.horizon);
    }
}

void PathSimulator::generate(std::size_t path, PathScratch& s) const {
    const auto n = static_cast<std::size_t>(spec_.n_steps);
    const double dt = spec_.dt();
    const double sqdt = std::sqrt(dt);
    s.spot.resize(n + 1);
    s.nu.resize(n + 1);
    s.dW.resize(n);
    s.dW_vol.resize(n);
    s.clamps = 0;

    NormalStream spot_normals(seed_, path, kSpotStream);
    NormalStream vol_normals(seed_, path, kVolStream);
    for (std::size_t k = 0; k < n; ++k) s.dW[k] = sqdt * spot_normals();

    std::visit(overloaded{
                   [&](const Gbm& m) {
                       std::fill(s.nu.begin(), s.nu.end(), m.sigma);
                       std::fill(s.dW_vol.begin(), s.dW_vol.end(), 0.0);
                   },
                   [&](const Heston& m) {
                       double v = m.v0;
                       s.nu[0] = std::sqrt(v);
                       for (std::size_t k = 0; k < n; ++k) {
                           s.dW_vol[k] = sqdt * vol_normals();
                           const double vp = std::max(v, 0.0);
                           v = v + m.kappa * (m.theta - vp) * dt + m.xi * std::sqrt(vp) * s.dW_vol[k];
                           if (v > 0.0) {
                               s.nu[k + 1] = std::sqrt(v);
                           } else {
                               s.nu[k + 1] = kVolFloor;
                               ++s.clamps;
                           }
                       }
                   },
                   [&](const HullWhite& m) {
                       double v = m.v0;
                       s.nu[0] = std::sqrt(v);
                       const double drift = (m.mu - 0.5 * m.sigma * m.sigma) * dt;
                       for (std::size_t k = 0; k < n; ++k) {
                           s.dW_vol[k] = sqdt * vol_normals();
                           v *= std::exp(drift + m.sigma * s.dW_vol[k]);
                           s.nu[k + 1] = std::sqrt(v);
                       }
                   },
                   [&](const Scott& m) {
                       const double decay = std::exp(-m.kappa * dt);
                       const double sd = m.kappa > 0.0 ? m.beta * std::sqrt((1.0 - decay * decay) / (2.0 * m.kappa))
                                                       : m.beta * sqdt;
                       double y = m.y0;
                       s.nu[0] = std::exp(y);
                       for (std::size_t k = 0; k < n; ++k) {
                           const double z = vol_normals();
                           s.dW_vol[k] = sqdt * z;
                           y = m.theta + (y - m.theta) * decay + sd * z;
                           s.nu[k + 1] = std::exp(y);
                       }
                   },
                   [&](const RoughFou& m) {
                       fbm_->sample(vol_normals, s.dW_vol);
                       double y = m.y0;
                       s.nu[0] = std::exp(y);
                       for (std::size_t k = 0; k < n; ++k) {
                           y = y + m.lambda * (m.theta - y) * dt + m.beta * s.dW_vol[k];
                           s.nu[k + 1] = std::exp(y);
                       }
                   }},
               spec_.dynamics);

    stochastic_exponential(std::span<const double>(s.nu).first(n), spec_.s0, s.dW, dt, s.spot);
}

PathBatch::PathBatch(ModelSpec spec, std::size_t n_paths, std::uint64_t seed)
    : spec_(std::move(spec)), n_paths_(n_paths), seed_(seed) {
    const auto n = static_cast<std::size_t>(spec_.n_steps);
    times_.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) times_[k] = spec_.horizon * static_cast<double>(k) / static_cast<double>(n);
    spot_.resize(n_paths * (n + 1));
    nu_.resize(n_paths * (n + 1));
    dW_.resize(n_paths * n);
    dW_vol_.resize(n_paths * n);
}

std::span<const double> PathBatch::spot(std::size_t p) const {
    const std::size_t w = times_.size();
    return std::span(spot_).subspan(p * w, w);
}

std::span<const double> PathBatch::nu(std::size_t p) const {
    const std::size_t w = times_.size();
    return std::span(nu_).subspan(p * w, w);
}

std::span<const double> PathBatch::dW(std::size_t p) const {
    const std::size_t w = times_.size() - 1;
    return std::span(dW_).subspan(p * w, w);
}

std::span<const double> PathBatch::dW_vol(std::size_t p) const {
    const std::size_t w = times_.size() - 1;
    return std::span(dW_vol_).subspan(p * w, w);
}

PathBatch simulate(const ModelSpec& spec, std::size_t n_paths, std::uint64_t seed, unsigned threads,
                   std::size_t max_path_cells) {
    spec.validate();
    require(n_paths >= 1, "n_paths must be >= 1");
    const auto n = static_cast<std::size_t>(spec.n_steps);
    if (n_paths > max_path_cells / n) {
        throw std::length_error("path batch of " + std::to_string(n_paths) + " x " + std::to_string(n) +
                                " cells exceeds the ceiling of " + std::to_string(max_path_cells));
    }
    PathSimulator sim(spec, seed);
    PathBatch batch(spec, n_paths, seed);
    std::vector<std::size_t> clamps(n_paths, 0);
    parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
        PathScratch s;
        for (std::size_t p = begin; p < end; ++p) {
            sim.generate(p, s);
            std::copy(s.spot.begin(), s.spot.end(), batch.spot_.begin() + static_cast<std::ptrdiff_t>(p * (n + 1)));
            std::copy(s.nu.begin(), s.nu.end(), batch.nu_.begin() + static_cast<std::ptrdiff_t>(p * (n + 1)));
            std::copy(s.dW.begin(), s.dW.end(), batch.dW_.begin() + static_cast<std::ptrdiff_t>(p * n));
            std::copy(s.dW_vol.begin(), s.dW_vol.end(), batch.dW_vol_.begin() + static_cast<std::ptrdiff_t>(p * n));
            clamps[p] = s.clamps;
        }
    });
    for (std::size_t c : clamps) batch.clamps_ += c;
    return batch;
}

void write_paths_csv(std::ostream& os, const PathBatch& batch) {
    const ModelSpec& spec = batch.spec();
    os << "# model=" << spec.name() << " seed=" << batch.seed() << " n_paths=" << batch.n_paths()
       << " n_steps=" << spec.n_steps << " horizon=" << format_double(spec.horizon)
       << " s0=" << format_double(spec.s0) << '\n';
    os << "path_id,t,S,nu\n";
    const auto times = batch.times();
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        const auto s = batch.spot(p);
        const auto v = batch.nu(p);
        for (std::size_t k = 0; k < times.size(); ++k) {
            os << p << ',' << format_double(times[k]) << ',' << format_double(s[k]) << ',' << format_double(v[k])
               << '\n';
        }
    }
}

}  // namespace superhedge::models
