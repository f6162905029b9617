#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace superhedge::models {

/// Constant volatility; complete market baseline.
struct Gbm {
    double sigma = 0.2;
};

/// dv = kappa (theta - v) dt + xi sqrt(v) dŴ, nu = sqrt(v). Spot-vol
/// correlation must stay 0.
struct Heston {
    double v0 = 0.04;
    double kappa = 1.5;
    double theta = 0.04;
    double xi = 0.5;
    double rho = 0.0;
};

/// Lognormal variance: dV = mu V dt + sigma V dŴ, nu = sqrt(V).
struct HullWhite {
    double v0 = 0.04;
    double mu = 0.0;
    double sigma = 0.5;
};

/// Ornstein-Uhlenbeck log-volatility: dY = kappa (theta - Y) dt + beta dŴ, nu = e^Y.
struct Scott {
    double y0 = -1.6094379124341003;  // ln 0.2
    double kappa = 1.0;
    double theta = -1.6094379124341003;
    double beta = 0.3;
};

/// Fractional OU log-volatility driven by fBM with Hurst index `hurst`.
struct RoughFou {
    double y0 = -1.6094379124341003;
    double lambda = 0.3;
    double theta = -1.6094379124341003;
    double beta = 0.3;
    double hurst = 0.1;
};

using Dynamics = std::variant<Gbm, Heston, HullWhite, Scott, RoughFou>;

struct ModelSpec {
    Dynamics dynamics = Gbm{};
    double s0 = 100.0;
    double horizon = 1.0;
    int n_steps = 50;

    double dt() const { return horizon / n_steps; }
    /// Initial volatility implied by the dynamics.
    double nu0() const;
    std::string name() const;
    /// Throws std::invalid_argument on any out-of-range parameter.
    void validate() const;
};

std::string model_name(const Dynamics& d);

/// Seed of the `stream`-th generator of path `path` under `seed`.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t path, std::uint64_t stream);

enum Stream : std::uint64_t { kSpotStream = 0, kVolStream = 1 };

/// Gaussian generator for one (seed, path, stream) substream.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path, std::uint64_t stream);
    double operator()() { return dist_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_;
};

/// Exact-covariance fBM increments on a uniform grid, from the Cholesky
/// factor of the increment covariance.
class FbmIncrements {
public:
    static constexpr int kMaxSteps = 4096;

    FbmIncrements(double hurst, int n_steps, double horizon);

    int n_steps() const { return n_steps_; }
    double hurst() const { return hurst_; }
    /// Fills `out` (size n_steps) with one correlated increment sequence.
    void sample(NormalStream& normals, std::span<double> out) const;
    /// Covariance of increments i and j.
    double covariance(int i, int j) const;

private:
    double hurst_;
    int n_steps_;
    double dt_;
    Eigen::MatrixXd factor_;
};

std::vector<double> fbm_increments(double hurst, int n_steps, double horizon, std::uint64_t seed);

/// x exp(sum alpha_k dW_k - 1/2 sum alpha_k^2 dt), one entry per grid point.
std::vector<double> stochastic_exponential(std::span<const double> alpha, double x, std::span<const double> dW,
                                           double dt);
void stochastic_exponential(std::span<const double> alpha, double x, std::span<const double> dW, double dt,
                            std::span<double> out);

/// Working buffers for one simulated path.
struct PathScratch {
    std::vector<double> spot;
    std::vector<double> nu;
    std::vector<double> dW;
    std::vector<double> dW_vol;
    std::size_t clamps = 0;
};

/// Generates individual paths of a model. Paths depend only on (spec, seed,
/// path index), so any scheduling of `generate` calls gives the same output.
class PathSimulator {
public:
    PathSimulator(ModelSpec spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    void generate(std::size_t path, PathScratch& scratch) const;

private:
    ModelSpec spec_;
    std::uint64_t seed_;
    std::optional<FbmIncrements> fbm_;
};

/// Joint paths of spot and volatility plus their driving increments.
/// `dW_vol` holds the volatility driver: Brownian increments, or fBM
/// increments for the rough model.
class PathBatch {
public:
    PathBatch(ModelSpec spec, std::size_t n_paths, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    std::size_t n_paths() const { return n_paths_; }
    int n_steps() const { return spec_.n_steps; }
    std::uint64_t seed() const { return seed_; }
    std::span<const double> times() const { return times_; }
    std::size_t clamp_count() const { return clamps_; }

    std::span<const double> spot(std::size_t path) const;
    std::span<const double> nu(std::size_t path) const;
    std::span<const double> dW(std::size_t path) const;
    std::span<const double> dW_vol(std::size_t path) const;

private:
    friend PathBatch simulate(const ModelSpec&, std::size_t, std::uint64_t, unsigned, std::size_t);

    ModelSpec spec_;
    std::size_t n_paths_;
    std::uint64_t seed_;
    std::vector<double> times_;
    std::vector<double> spot_;
    std::vector<double> nu_;
    std::vector<double> dW_;
    std::vector<double> dW_vol_;
    std::size_t clamps_ = 0;
};

/// Default ceiling on n_paths * n_steps for a materialized batch.
inline constexpr std::size_t kDefaultMaxPathCells = 20'000'000;

PathBatch simulate(const ModelSpec& spec, std::size_t n_paths, std::uint64_t seed, unsigned threads = 0,
                   std::size_t max_path_cells = kDefaultMaxPathCells);

/// Floor applied to the Heston volatility when the discretized variance hits 0.
inline constexpr double kVolFloor = 1e-12;

/// CSV dump: a "# ..." comment line echoing model and seed, then path_id,t,S,nu.
void write_paths_csv(std::ostream& os, const PathBatch& batch);

}  // namespace superhedge::models
