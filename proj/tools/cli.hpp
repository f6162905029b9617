#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "superhedge/models.hpp"

namespace superhedge::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInfinitePrice = 2, kInvariantFailure = 3 };

struct ToleranceConfig {
    double domination = 1e-9;
    double stderr_multiple = 3.0;
    double monotone_stderr = 4.0;
};

struct AttainmentConfig {
    std::vector<double> sigma_max{2.0, 4.0, 8.0};
    double sigma_min = 0.01;
    double nu0 = 0.2;
    double ramp_time = 0.0;
    double contact_tol = -1.0;
    bool latch = true;
    int n_steps = 2000;
    std::size_t n_paths = 100000;
    double horizon = 1.0;
};

struct ProbeConfig {
    std::vector<double> gains{0.0, 5.0, 20.0, 50.0};
    double epsilon = 0.1;
    double u_max = 50.0;
    int n_steps = 200;
    std::size_t n_paths = 10000;
    double delta = 0.05;
    std::size_t proximity_paths = 1000;
};

struct StoppingConfig {
    int half_width = 600;
    double log_step = 0.01;
    double tolerance = 1e-10;
    long max_iterations = 20'000'000;
    std::vector<double> horizons{1.0, 4.0, 16.0, 64.0};
    double sigma = 1.0;
    int steps_per_unit = 100;
    double agreement = 0.1;
};

/// Everything a run depends on. `out` and `threads` do not affect results.
struct RunConfig {
    std::string payoff;
    double s0 = 100.0;
    std::vector<std::string> models{"gbm"};
    std::size_t n_paths = 10000;
    int n_steps = 50;
    double horizon = 1.0;
    std::uint64_t seed = 1;
    bool allow_shift = false;
    std::optional<double> delta_override;

    models::Gbm gbm;
    models::Heston heston;
    models::HullWhite hullwhite;
    models::Scott scott;
    models::RoughFou roughfou;

    ToleranceConfig tolerance;
    AttainmentConfig attainment;
    ProbeConfig probe;
    StoppingConfig stopping;

    std::string out;
    unsigned threads = 0;

    models::ModelSpec model_spec(const std::string& name) const;
    /// Throws std::invalid_argument on the first bad field.
    void validate() const;
};

/// Applies "name[:key=value,...]" to the config and returns the model name;
/// "all" selects all five models.
std::vector<std::string> apply_model_flag(RunConfig& config, std::string_view text);

/// Applies an INI file; throws std::invalid_argument on unknown keys or bad values.
void apply_ini_file(RunConfig& config, const std::string& path);
void apply_ini_text(RunConfig& config, const std::string& text);

/// Effective configuration as INI text, without `out` and `threads`.
std::string to_ini(const RunConfig& config);

/// Entry point behind the `superhedge` executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace superhedge::cli
