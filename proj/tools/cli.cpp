#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "superhedge/duality.hpp"
#include "superhedge/envelope.hpp"
#include "superhedge/format.hpp"
#include "superhedge/payoff.hpp"
#include "superhedge/stopping.hpp"

namespace superhedge::cli {

namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kAllModels{"gbm", "heston", "hullwhite", "scott", "roughfou"};

template <class M>
using Fields = std::vector<std::pair<std::string, double M::*>>;

const Fields<models::Gbm> kGbmFields{{"sigma", &models::Gbm::sigma}};
const Fields<models::Heston> kHestonFields{{"v0", &models::Heston::v0},
                                           {"kappa", &models::Heston::kappa},
                                           {"theta", &models::Heston::theta},
                                           {"xi", &models::Heston::xi},
                                           {"rho", &models::Heston::rho}};
const Fields<models::HullWhite> kHullWhiteFields{
    {"v0", &models::HullWhite::v0}, {"mu", &models::HullWhite::mu}, {"sigma", &models::HullWhite::sigma}};
const Fields<models::Scott> kScottFields{{"y0", &models::Scott::y0},
                                         {"kappa", &models::Scott::kappa},
                                         {"theta", &models::Scott::theta},
                                         {"beta", &models::Scott::beta}};
const Fields<models::RoughFou> kRoughFouFields{{"y0", &models::RoughFou::y0},
                                               {"lambda", &models::RoughFou::lambda},
                                               {"theta", &models::RoughFou::theta},
                                               {"beta", &models::RoughFou::beta},
                                               {"hurst", &models::RoughFou::hurst}};

// Calls f(model_struct, fields) for the named model.
template <class C, class F>
void with_model(C& config, const std::string& name, F&& f) {
    if (name == "gbm") f(config.gbm, kGbmFields);
    else if (name == "heston") f(config.heston, kHestonFields);
    else if (name == "hullwhite") f(config.hullwhite, kHullWhiteFields);
    else if (name == "scott") f(config.scott, kScottFields);
    else if (name == "roughfou") f(config.roughfou, kRoughFouFields);
    else throw std::invalid_argument("unknown model '" + name + "' (gbm, heston, hullwhite, scott, roughfou, all)");
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw std::invalid_argument(what + ": '" + text + "' is not a number");
    return v;
}

template <class T>
T parse_integer(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    T v{};
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw std::invalid_argument(what + ": '" + text + "' is not a valid integer");
    return v;
}

bool parse_bool(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw std::invalid_argument(what + ": '" + text + "' is not a boolean");
}

std::string join_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v[i]);
    return s;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

void apply_items(RunConfig& c, const std::vector<CLI::ConfigItem>& items) {
    for (const auto& it : items) {
        if (it.name == "++" || it.name == "--") continue;
        const std::string section = it.parents.empty() ? "run" : CLI::detail::join(it.parents, ".");
        const std::string& key = it.name;
        const std::string where = "[" + section + "] " + key;
        auto one = [&]() -> const std::string& {
            if (it.inputs.size() != 1) throw std::invalid_argument(where + ": expected a single value");
            return it.inputs.front();
        };
        auto num = [&] { return parse_double(one(), where); };
        auto count = [&] { return parse_integer<std::size_t>(one(), where); };
        auto steps = [&] { return parse_integer<int>(one(), where); };
        auto list = [&] {
            std::vector<double> v;
            for (const auto& s : it.inputs) v.push_back(parse_double(s, where));
            return v;
        };
        auto unknown = [&] { throw std::invalid_argument("unknown config key " + where); };

        if (section == "run") {
            if (key == "payoff") c.payoff = CLI::detail::join(it.inputs, ",");
            else if (key == "s0") c.s0 = num();
            else if (key == "models") {
                c.models.clear();
                for (const auto& m : it.inputs) {
                    if (m == "all") c.models.insert(c.models.end(), kAllModels.begin(), kAllModels.end());
                    else c.models.push_back(m);
                }
            } else if (key == "paths") c.n_paths = count();
            else if (key == "steps") c.n_steps = steps();
            else if (key == "horizon") c.horizon = num();
            else if (key == "seed") c.seed = parse_integer<std::uint64_t>(one(), where);
            else if (key == "allow_shift") c.allow_shift = parse_bool(one(), where);
            else if (key == "delta_override") c.delta_override = num();
            else unknown();
        } else if (section == "tolerance") {
            if (key == "domination") c.tolerance.domination = num();
            else if (key == "stderr_multiple") c.tolerance.stderr_multiple = num();
            else if (key == "monotone_stderr") c.tolerance.monotone_stderr = num();
            else unknown();
        } else if (section == "attainment") {
            auto& a = c.attainment;
            if (key == "sigma_max") a.sigma_max = list();
            else if (key == "sigma_min") a.sigma_min = num();
            else if (key == "nu0") a.nu0 = num();
            else if (key == "ramp_time") a.ramp_time = num();
            else if (key == "contact_tol") a.contact_tol = num();
            else if (key == "latch") a.latch = parse_bool(one(), where);
            else if (key == "steps") a.n_steps = steps();
            else if (key == "paths") a.n_paths = count();
            else if (key == "horizon") a.horizon = num();
            else unknown();
        } else if (section == "probe") {
            auto& p = c.probe;
            if (key == "gains") p.gains = list();
            else if (key == "epsilon") p.epsilon = num();
            else if (key == "u_max") p.u_max = num();
            else if (key == "steps") p.n_steps = steps();
            else if (key == "paths") p.n_paths = count();
            else if (key == "delta") p.delta = num();
            else if (key == "proximity_paths") p.proximity_paths = count();
            else unknown();
        } else if (section == "stopping") {
            auto& s = c.stopping;
            if (key == "half_width") s.half_width = steps();
            else if (key == "log_step") s.log_step = num();
            else if (key == "tolerance") s.tolerance = num();
            else if (key == "max_iterations") s.max_iterations = parse_integer<long>(one(), where);
            else if (key == "horizons") s.horizons = list();
            else if (key == "sigma") s.sigma = num();
            else if (key == "steps_per_unit") s.steps_per_unit = steps();
            else if (key == "agreement") s.agreement = num();
            else unknown();
        } else {
            bool found = false;
            with_model(c, section, [&](auto& model, const auto& fields) {
                for (const auto& [name, member] : fields) {
                    if (name == key) {
                        model.*member = num();
                        found = true;
                    }
                }
            });
            if (!found) unknown();
        }
    }
}

// ---------------------------------------------------------------------------

struct LoadedPayoff {
    payoff::PayoffAst ast;
    double shift = 0.0;
};

LoadedPayoff load_payoff(const RunConfig& c, std::ostream& err) {
    require(!c.payoff.empty(), "no payoff given (use --payoff or [run] payoff)");
    LoadedPayoff p = [&]() -> LoadedPayoff {
        if (!c.allow_shift) return {payoff::parse_payoff(c.payoff), 0.0};
        auto shifted = payoff::parse_payoff_shifted(c.payoff);
        return {std::move(shifted.payoff), shifted.shift};
    }();
    if (p.shift != 0.0) err << "note: payoff shifted by " << format_double(p.shift) << " to make it nonnegative\n";
    for (const auto& w : p.ast.warnings()) err << "warning: " << w << '\n';
    return p;
}

std::vector<envelope::Sample> read_table(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open table file '" + path + "'");
    std::vector<envelope::Sample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto comma = t.find(',');
        require(comma != std::string::npos, path + ":" + std::to_string(line_no) + ": expected 'x,value'");
        const std::string xs = trim(std::string_view(t).substr(0, comma));
        if (samples.empty() && line_no == 1 && !xs.empty() && (std::isalpha(static_cast<unsigned char>(xs.front())) != 0))
            continue;  // header
        const std::string where = path + ":" + std::to_string(line_no);
        samples.push_back({parse_double(xs, where), parse_double(t.substr(comma + 1), where)});
    }
    return samples;
}

void ensure_dir(const std::string& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, "cannot create output directory '" + dir + "': " + ec.message());
}

void write_file(const std::string& dir, const std::string& name, const std::string& contents) {
    ensure_dir(dir);
    const fs::path path = fs::path(dir) / name;
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "cannot write '" + path.string() + "'");
    os << contents;
}

// ---------------------------------------------------------------------------

struct Check {
    std::string name;
    bool hard = true;
    bool passed = true;
    std::string detail;
};

class Verifier {
public:
    Verifier(const RunConfig& c, std::ostream& out, std::ostream& err) : c_(c), out_(out), err_(err) {}

    int run(const std::string& experiment) {
        const bool all = experiment == "all";
        const bool needs_payoff = experiment != "probe";
        if (needs_payoff) {
            payoff_.emplace(load_payoff(c_, err_));
            env_ = envelope::concave_envelope(payoff_->ast);
            if (env_.is_infinite()) {
                err_ << "error: the concave envelope is +inf (payoff grows faster than linearly); nothing to verify\n";
                return kInfinitePrice;
            }
        }
        if (all || experiment == "domination" || experiment == "upper")
            hedge_checks(all || experiment == "domination", all || experiment == "upper");
        if (all || experiment == "attainment") attainment();
        if (all || experiment == "probe") probe();
        if (all || experiment == "stopping") stopping();

        std::ostringstream csv;
        duality::write_report_csv_header(csv);
        for (const auto& r : reports_) duality::write_report_csv(csv, r);
        const std::string dir = c_.out.empty() ? std::string("out") : c_.out;
        write_file(dir, "verify_report.csv", csv.str());
        write_file(dir, "config.ini", to_ini(c_));

        bool hard_ok = true;
        for (const auto& ch : checks_) {
            out_ << (ch.passed ? "PASS " : "FAIL ") << (ch.hard ? "[hard] " : "[stat] ") << ch.name << ": " << ch.detail
                 << '\n';
            hard_ok = hard_ok && (ch.passed || !ch.hard);
        }
        out_ << "report: " << (fs::path(dir) / "verify_report.csv").string() << '\n';
        out_ << (hard_ok ? "all hard invariants hold\n" : "hard invariant failure\n");
        return hard_ok ? kOk : kInvariantFailure;
    }

private:
    void check(std::string name, bool hard, bool passed, std::string detail) {
        checks_.push_back({std::move(name), hard, passed, std::move(detail)});
    }

    void hedge_checks(bool domination, bool upper) {
        envelope::HedgePair hedge = envelope::buy_and_hold_price(env_, c_.s0);
        if (c_.delta_override) hedge.delta = *c_.delta_override;
        std::vector<double> grid;
        for (int k = -1000; k <= 1000; ++k) grid.push_back(c_.s0 * std::exp(0.01 * k));
        const auto margin = envelope::hedge_dominates(payoff_->ast, hedge, grid, c_.tolerance.domination);
        const duality::UpperBoundOptions opt{c_.tolerance.domination, c_.tolerance.stderr_multiple, c_.threads};
        for (const auto& name : c_.models) {
            const models::ModelSpec spec = c_.model_spec(name);
            duality::DualityReport r = duality::mc_upper_bound_check(spec, payoff_->ast, hedge, c_.n_paths, c_.seed, opt);
            if (domination) {
                duality::DualityReport d = r;
                d.experiment = "domination/" + name;
                d.estimate = r.diagnostic("min_margin");
                d.stderr_ = 0.0;
                d.diagnostics = {{"price", hedge.price},
                                 {"delta", hedge.delta},
                                 {"exact_min_margin", margin.min_margin},
                                 {"tail_ok", margin.tail_ok ? 1.0 : 0.0}};
                d.passed = r.violations == 0 && margin.dominates;
                check(d.experiment, true, d.passed,
                      "pathwise violations=" + std::to_string(r.violations) +
                          " exact min margin=" + format_double(margin.min_margin) +
                          (margin.tail_ok ? "" : " (hedge delta below payoff tail slope)"));
                reports_.push_back(std::move(d));
            }
            if (upper) {
                const bool ok = r.estimate <= hedge.price + c_.tolerance.stderr_multiple * r.stderr_;
                r.passed = ok;
                check(r.experiment, true, ok,
                      "mean=" + format_double(r.estimate) + " stderr=" + format_double(r.stderr_) +
                          " bound=" + format_double(hedge.price));
                reports_.push_back(std::move(r));
            }
        }
    }

    void attainment() {
        const auto& a = c_.attainment;
        const double target = env_(c_.s0);
        const duality::DualityReport* prev = nullptr;
        std::size_t first = reports_.size();
        for (double sigma_max : a.sigma_max) {
            duality::VolControl vc;
            vc.sigma_min = a.sigma_min;
            vc.sigma_max = sigma_max;
            vc.nu0 = a.nu0;
            vc.ramp_time = a.ramp_time;
            vc.contact_tol = a.contact_tol;
            vc.latch = a.latch;
            auto r = duality::attainment_experiment(payoff_->ast, c_.s0, vc, a.horizon, a.n_steps, a.n_paths, c_.seed,
                                                    c_.threads);
            r.diagnostics.emplace_back("ratio", target > 0.0 ? r.estimate / target : 1.0);
            const bool below = r.estimate <= target + c_.tolerance.stderr_multiple * r.stderr_;
            check(r.experiment + " upper", true, below,
                  "estimate=" + format_double(r.estimate) + " stderr=" + format_double(r.stderr_) +
                      " envelope=" + format_double(target));
            reports_.push_back(std::move(r));
        }
        for (std::size_t i = first; i < reports_.size(); ++i) {
            const auto& r = reports_[i];
            if (prev != nullptr) {
                const double slack = c_.tolerance.monotone_stderr * std::hypot(r.stderr_, prev->stderr_);
                check(r.experiment + " monotone", false, r.estimate >= prev->estimate - slack,
                      format_double(prev->estimate) + " -> " + format_double(r.estimate));
            }
            prev = &r;
        }
    }

    void probe() {
        const auto& p = c_.probe;
        models::ModelSpec spec = c_.model_spec("scott");
        spec.n_steps = p.n_steps;
        const double nu0 = spec.nu0();
        duality::ProbeOptions opt;
        opt.epsilon = p.epsilon;
        opt.u_max = p.u_max;
        opt.threads = c_.threads;

        std::string feasible;
        for (double gain : p.gains) {
            opt.gain = gain;
            auto r = duality::incompleteness_probe(spec, duality::constant_target(nu0), opt, p.n_paths, c_.seed);
            if (feasible.empty() && r.estimate < p.epsilon && std::isfinite(r.diagnostic("entropy")))
                feasible = "gain=" + format_double(gain) + " frequency=" + format_double(r.estimate) +
                           " entropy=" + format_double(r.diagnostic("entropy"));
            reports_.push_back(std::move(r));
        }
        check("probe/feasible", false, !feasible.empty(), feasible.empty() ? "no gain reached the target" : feasible);

        opt.gain = 0.0;
        auto realized = duality::incompleteness_probe(spec, duality::realized_vol_target(), opt, p.n_paths, c_.seed);
        realized.experiment = "probe/realized";
        check("probe/realized", true, realized.estimate == 0.0, "frequency=" + format_double(realized.estimate));
        reports_.push_back(std::move(realized));

        const models::PathBatch batch = models::simulate(spec, p.proximity_paths, c_.seed, c_.threads);
        const auto stats = duality::proximity_diagnostic(
            batch, [&](std::size_t) { return std::vector<double>(static_cast<std::size_t>(spec.n_steps) + 1, nu0); },
            p.delta, p.epsilon);
        duality::DualityReport r;
        r.experiment = "proximity/delta=" + format_double(p.delta);
        r.estimate = stats.stochastic_sq_mean;
        r.stderr_ = stats.stochastic_sq_stderr;
        r.n_paths = stats.paths.size();
        r.violations = stats.quadratic_violations + stats.log_gap_violations;
        double max_quadratic = 0.0;
        for (const auto& path : stats.paths) max_quadratic = std::max(max_quadratic, path.quadratic);
        r.diagnostics = {{"alpha_sup", stats.alpha_sup},
                         {"quadratic_bound", stats.quadratic_bound},
                         {"max_quadratic", max_quadratic},
                         {"isometry_bound", stats.isometry_bound},
                         {"chebyshev_bound", stats.chebyshev_bound},
                         {"chebyshev_frequency", stats.chebyshev_frequency},
                         {"tau_before_horizon", stats.tau_before_horizon},
                         {"u_eps_frequency", stats.u_eps_frequency}};
        const bool iso = stats.stochastic_sq_mean <= stats.isometry_bound + 4.0 * stats.stochastic_sq_stderr;
        r.passed = r.violations == 0 && iso;
        check(r.experiment + " quadratic", true, stats.quadratic_violations == 0,
              "max=" + format_double(max_quadratic) + " bound=" + format_double(stats.quadratic_bound));
        check(r.experiment + " log-gap", true, stats.log_gap_violations == 0,
              "violations=" + std::to_string(stats.log_gap_violations));
        check(r.experiment + " isometry", false, iso,
              "mean=" + format_double(stats.stochastic_sq_mean) + " bound=" + format_double(stats.isometry_bound));
        reports_.push_back(std::move(r));
    }

    void stopping() {
        const auto& s = c_.stopping;
        const double target = env_(c_.s0);
        stopping::BellmanOptions bo{s.half_width, s.log_step, s.tolerance, s.max_iterations};
        const auto res = stopping::bellman_envelope(payoff_->ast, c_.s0, bo);
        duality::DualityReport r;
        r.experiment = "stopping/bellman";
        r.estimate = res.value;
        r.violations = res.monotonicity_violations + res.envelope_violations;
        r.diagnostics = {{"envelope", target},
                         {"abs_error", std::abs(res.value - target)},
                         {"iterations", static_cast<double>(res.iterations)},
                         {"residual", res.residual},
                         {"converged", res.converged ? 1.0 : 0.0}};
        r.passed = res.converged && r.violations == 0;
        check("stopping/bellman iteration", true, r.passed,
              "converged=" + std::string(res.converged ? "yes" : "no") +
                  " monotonicity_violations=" + std::to_string(res.monotonicity_violations) +
                  " envelope_violations=" + std::to_string(res.envelope_violations));
        check("stopping/bellman agreement", false, std::abs(res.value - target) <= s.agreement,
              "value=" + format_double(res.value) + " envelope=" + format_double(target));
        reports_.push_back(std::move(r));

        // The finite-horizon trees share one lattice; compare against the perpetual value on it.
        const double lattice_step = s.sigma / std::sqrt(static_cast<double>(s.steps_per_unit));
        bo.log_step = lattice_step;
        const double lattice_value = stopping::bellman_envelope(payoff_->ast, c_.s0, bo).value;
        duality::DualityReport f;
        f.experiment = "stopping/finite_horizon";
        f.diagnostics.emplace_back("lattice_bellman", lattice_value);
        bool monotone = true, capped = true;
        double prev = -std::numeric_limits<double>::infinity();
        for (double T : s.horizons) {
            const int n = std::max(1, static_cast<int>(std::lround(T * s.steps_per_unit)));
            const double v = stopping::finite_horizon_value(payoff_->ast, c_.s0, n, T, s.sigma);
            f.diagnostics.emplace_back("T=" + format_double(T), v);
            monotone = monotone && v >= prev;
            capped = capped && v <= lattice_value + 1e-9 * std::max(1.0, std::abs(lattice_value));
            prev = v;
            f.estimate = v;
        }
        f.violations = (monotone ? 0 : 1) + (capped ? 0 : 1);
        f.passed = f.violations == 0;
        check("stopping/finite_horizon", true, f.passed,
              std::string(monotone ? "nondecreasing in T" : "NOT nondecreasing in T") +
                  (capped ? ", below perpetual value " : ", ABOVE perpetual value ") + format_double(lattice_value));
        reports_.push_back(std::move(f));
    }

    const RunConfig& c_;
    std::ostream& out_;
    std::ostream& err_;
    std::optional<LoadedPayoff> payoff_;
    envelope::ConcaveEnvelope env_ = envelope::ConcaveEnvelope::infinite();
    std::vector<duality::DualityReport> reports_;
    std::vector<Check> checks_;
};

}  // namespace

// ---------------------------------------------------------------------------

models::ModelSpec RunConfig::model_spec(const std::string& name) const {
    models::ModelSpec spec;
    spec.s0 = s0;
    spec.horizon = horizon;
    spec.n_steps = n_steps;
    with_model(*this, name, [&](const auto& model, const auto&) { spec.dynamics = model; });
    return spec;
}

void RunConfig::validate() const {
    require(s0 > 0.0 && std::isfinite(s0), "s0 must be finite and > 0");
    require(n_paths >= 1, "paths must be >= 1");
    require(n_steps >= 1, "steps must be >= 1");
    require(horizon > 0.0 && std::isfinite(horizon), "horizon must be finite and > 0");
    require(!models.empty(), "no model selected");
    for (const auto& m : models) model_spec(m).validate();
    if (delta_override) require(std::isfinite(*delta_override), "delta override must be finite");

    require(tolerance.domination >= 0.0, "[tolerance] domination must be >= 0");
    require(tolerance.stderr_multiple >= 0.0, "[tolerance] stderr_multiple must be >= 0");
    require(tolerance.monotone_stderr >= 0.0, "[tolerance] monotone_stderr must be >= 0");

    require(!attainment.sigma_max.empty(), "[attainment] sigma_max needs at least one value");
    for (double sm : attainment.sigma_max) {
        duality::VolControl vc;
        vc.sigma_min = attainment.sigma_min;
        vc.sigma_max = sm;
        vc.nu0 = attainment.nu0;
        vc.ramp_time = attainment.ramp_time;
        vc.validate();
    }
    require(attainment.n_steps >= 1 && attainment.n_paths >= 1, "[attainment] steps and paths must be >= 1");
    require(attainment.horizon > 0.0, "[attainment] horizon must be > 0");

    require(!probe.gains.empty(), "[probe] gains needs at least one value");
    for (double g : probe.gains) require(g >= 0.0 && std::isfinite(g), "[probe] gains must be finite and >= 0");
    require(probe.epsilon > 0.0, "[probe] epsilon must be > 0");
    require(probe.u_max >= 0.0, "[probe] u_max must be >= 0");
    require(probe.n_steps >= 1 && probe.n_paths >= 1 && probe.proximity_paths >= 1,
            "[probe] steps, paths and proximity_paths must be >= 1");
    require(probe.delta > 0.0, "[probe] delta must be > 0");
    models::ModelSpec scott_spec = model_spec("scott");
    scott_spec.n_steps = probe.n_steps;
    scott_spec.validate();

    require(stopping.half_width >= 1, "[stopping] half_width must be >= 1");
    require(stopping.log_step > 0.0, "[stopping] log_step must be > 0");
    require(stopping.tolerance > 0.0, "[stopping] tolerance must be > 0");
    require(stopping.max_iterations >= 1, "[stopping] max_iterations must be >= 1");
    require(stopping.sigma > 0.0, "[stopping] sigma must be > 0");
    require(stopping.steps_per_unit >= 1, "[stopping] steps_per_unit must be >= 1");
    require(stopping.agreement >= 0.0, "[stopping] agreement must be >= 0");
    for (double T : stopping.horizons) {
        const double n = T * stopping.steps_per_unit;
        require(T >= 0.0 && std::abs(n - std::round(n)) < 1e-9,
                "[stopping] horizons must be >= 0 and multiples of 1/steps_per_unit");
    }
}

std::vector<std::string> apply_model_flag(RunConfig& config, std::string_view text) {
    const auto colon = text.find(':');
    const std::string name = trim(text.substr(0, colon));
    if (name == "all") {
        require(colon == std::string_view::npos, "model 'all' takes no parameters");
        return kAllModels;
    }
    std::vector<std::pair<std::string, double>> params;
    if (colon != std::string_view::npos) {
        std::string_view rest = text.substr(colon + 1);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string item = trim(rest.substr(0, comma));
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
            const auto eq = item.find('=');
            require(eq != std::string::npos, "model parameter '" + item + "' must look like key=value");
            params.emplace_back(trim(std::string_view(item).substr(0, eq)),
                                parse_double(item.substr(eq + 1), "model " + name));
        }
    }
    with_model(config, name, [&](auto& model, const auto& fields) {
        for (const auto& [key, value] : params) {
            bool found = false;
            for (const auto& [field, member] : fields) {
                if (field == key) {
                    model.*member = value;
                    found = true;
                }
            }
            require(found, "model " + name + " has no parameter '" + key + "'");
        }
    });
    return {name};
}

void apply_ini_file(RunConfig& config, const std::string& path) {
    require(fs::exists(path), "config file '" + path + "' does not exist");
    apply_items(config, CLI::ConfigINI().from_file(path));
}

void apply_ini_text(RunConfig& config, const std::string& text) {
    std::istringstream in(text);
    apply_items(config, CLI::ConfigINI().from_config(in));
}

std::string to_ini(const RunConfig& c) {
    std::ostringstream os;
    auto kv = [&os](const std::string& k, const std::string& v) { os << k << " = " << v << '\n'; };
    auto num = [&kv](const std::string& k, double v) { kv(k, format_double(v)); };

    os << "[run]\n";
    kv("payoff", "\"" + c.payoff + "\"");
    num("s0", c.s0);
    std::string names;
    for (const auto& m : c.models) names += (names.empty() ? "" : " ") + m;
    kv("models", names);
    kv("paths", std::to_string(c.n_paths));
    kv("steps", std::to_string(c.n_steps));
    num("horizon", c.horizon);
    kv("seed", std::to_string(c.seed));
    kv("allow_shift", c.allow_shift ? "true" : "false");
    if (c.delta_override) num("delta_override", *c.delta_override);

    os << "\n[tolerance]\n";
    num("domination", c.tolerance.domination);
    num("stderr_multiple", c.tolerance.stderr_multiple);
    num("monotone_stderr", c.tolerance.monotone_stderr);

    for (const auto& name : kAllModels) {
        os << "\n[" << name << "]\n";
        with_model(c, name, [&](const auto& model, const auto& fields) {
            for (const auto& [key, member] : fields) num(key, model.*member);
        });
    }

    const auto& a = c.attainment;
    os << "\n[attainment]\n";
    kv("sigma_max", join_list(a.sigma_max));
    num("sigma_min", a.sigma_min);
    num("nu0", a.nu0);
    num("ramp_time", a.ramp_time);
    num("contact_tol", a.contact_tol);
    kv("latch", a.latch ? "true" : "false");
    kv("steps", std::to_string(a.n_steps));
    kv("paths", std::to_string(a.n_paths));
    num("horizon", a.horizon);

    const auto& p = c.probe;
    os << "\n[probe]\n";
    kv("gains", join_list(p.gains));
    num("epsilon", p.epsilon);
    num("u_max", p.u_max);
    kv("steps", std::to_string(p.n_steps));
    kv("paths", std::to_string(p.n_paths));
    num("delta", p.delta);
    kv("proximity_paths", std::to_string(p.proximity_paths));

    const auto& s = c.stopping;
    os << "\n[stopping]\n";
    kv("half_width", std::to_string(s.half_width));
    num("log_step", s.log_step);
    num("tolerance", s.tolerance);
    kv("max_iterations", std::to_string(s.max_iterations));
    kv("horizons", join_list(s.horizons));
    num("sigma", s.sigma);
    kv("steps_per_unit", std::to_string(s.steps_per_unit));
    num("agreement", s.agreement);
    return os.str();
}

// ---------------------------------------------------------------------------

namespace {

struct Flags {
    std::string payoff;
    std::string table;
    std::string config;
    std::string out;
    std::string experiment = "all";
    double s0 = 0.0;
    double tail_slope = 0.0;
    double horizon = 0.0;
    double delta_override = 0.0;
    std::vector<std::string> models;
    std::size_t paths = 0;
    int steps = 0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool allow_shift = false;
};

bool given(const CLI::App* sub, const std::string& name) { return sub->get_option_no_throw(name) != nullptr && sub->count(name) > 0; }

RunConfig build_config(const CLI::App* sub, const Flags& f) {
    RunConfig c;
    if (given(sub, "--config")) apply_ini_file(c, f.config);
    if (given(sub, "--payoff")) c.payoff = f.payoff;
    if (given(sub, "--s0")) c.s0 = f.s0;
    if (given(sub, "--model")) {
        c.models.clear();
        for (const auto& m : f.models) {
            const auto names = apply_model_flag(c, m);
            c.models.insert(c.models.end(), names.begin(), names.end());
        }
    }
    if (given(sub, "--paths")) c.n_paths = f.paths;
    if (given(sub, "--steps")) c.n_steps = f.steps;
    if (given(sub, "--horizon")) c.horizon = f.horizon;
    if (given(sub, "--seed")) c.seed = f.seed;
    if (given(sub, "--out")) c.out = f.out;
    if (given(sub, "--threads")) c.threads = f.threads;
    if (given(sub, "--delta-override")) c.delta_override = f.delta_override;
    if (given(sub, "--allow-shift")) c.allow_shift = true;
    c.validate();
    return c;
}

int cmd_price_or_envelope(const RunConfig& c, const Flags& f, bool with_price, std::ostream& out, std::ostream& err) {
    envelope::ConcaveEnvelope env = envelope::ConcaveEnvelope::infinite();
    double shift = 0.0;
    if (!f.table.empty()) {
        require(c.payoff.empty(), "--table and --payoff are mutually exclusive");
        const auto samples = read_table(f.table);
        env = envelope::envelope_from_table(samples, f.tail_slope);
    } else {
        const LoadedPayoff p = load_payoff(c, err);
        env = envelope::concave_envelope(p.ast);
        shift = p.shift;
    }
    std::ostringstream csv;
    envelope::write_envelope_csv(csv, env);
    if (!c.out.empty()) {
        write_file(c.out, "envelope.csv", csv.str());
        write_file(c.out, "config.ini", to_ini(c));
    }
    if (env.is_infinite()) {
        err << "error: the concave envelope is +inf (payoff grows faster than linearly), so no finite "
               "buy-and-hold price exists\n";
        return kInfinitePrice;
    }
    if (with_price) {
        const auto hedge = envelope::buy_and_hold_price(env, c.s0);
        out << "price=" << format_double(hedge.price - shift) << " delta=" << format_double(hedge.delta) << '\n';
        if (shift != 0.0) out << "shift=" << format_double(shift) << '\n';
        out << "envelope knots:\n";
    }
    if (with_price || c.out.empty()) out << csv.str();
    else out << "wrote " << (fs::path(c.out) / "envelope.csv").string() << '\n';
    return kOk;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
    require(c.models.size() == 1, "simulate takes exactly one model");
    const auto batch = models::simulate(c.model_spec(c.models.front()), c.n_paths, c.seed, c.threads);
    if (c.out.empty()) {
        models::write_paths_csv(out, batch);
        return kOk;
    }
    std::ostringstream csv;
    models::write_paths_csv(csv, batch);
    write_file(c.out, "paths.csv", csv.str());
    write_file(c.out, "config.ini", to_ini(c));
    out << "wrote " << (fs::path(c.out) / "paths.csv").string() << '\n';
    return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Buy-and-hold super-replication prices, hedges and Monte Carlo verification", "superhedge"};
    app.require_subcommand(1);
    Flags f;

    auto payoff_opts = [&f](CLI::App* s) {
        s->add_option("--payoff", f.payoff, "payoff expression in x, e.g. \"pos(x-100)\"");
        s->add_option("--table", f.table, "CSV of x,value samples instead of an expression");
        s->add_option("--tail-slope", f.tail_slope, "slope beyond the last table sample (inf allowed)");
        s->add_flag("--allow-shift", f.allow_shift, "add cash to a payoff that dips below zero");
        s->add_option("--config", f.config, "INI config file; flags take precedence")->check(CLI::ExistingFile);
        s->add_option("--out", f.out, "output directory");
    };
    auto run_opts = [&f](CLI::App* s) {
        s->add_option("--s0", f.s0, "initial spot");
        s->add_option("--model", f.models, "model name[:key=value,...] or all; repeatable");
        s->add_option("--paths", f.paths, "Monte Carlo paths");
        s->add_option("--steps", f.steps, "time steps");
        s->add_option("--horizon", f.horizon, "horizon T");
        s->add_option("--seed", f.seed, "base seed");
        s->add_option("--threads", f.threads, "worker threads (0 = hardware); results do not depend on it");
    };

    auto* price = app.add_subcommand("price", "print price and delta of the buy-and-hold hedge");
    payoff_opts(price);
    price->add_option("--s0", f.s0, "initial spot")->required();
    auto* env = app.add_subcommand("envelope", "write the concave envelope as CSV");
    payoff_opts(env);
    auto* sim = app.add_subcommand("simulate", "dump simulated paths as CSV");
    run_opts(sim);
    sim->add_option("--config", f.config, "INI config file; flags take precedence")->check(CLI::ExistingFile);
    sim->add_option("--out", f.out, "output directory");
    auto* verify = app.add_subcommand("verify", "run verification experiments");
    verify->add_option("experiment", f.experiment, "domination|upper|attainment|probe|stopping|all")
        ->check(CLI::IsMember({"domination", "upper", "attainment", "probe", "stopping", "all"}));
    payoff_opts(verify);
    run_opts(verify);
    verify->add_option("--delta-override", f.delta_override, "replace the hedge delta (for sabotage checks)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    try {
        const CLI::App* sub = app.get_subcommands().front();
        const RunConfig c = build_config(sub, f);
        if (sub == price) return cmd_price_or_envelope(c, f, true, out, err);
        if (sub == env) return cmd_price_or_envelope(c, f, false, out, err);
        if (sub == sim) return cmd_simulate(c, out);
        return Verifier(c, out, err).run(f.experiment);
    } catch (const payoff::PayoffError& e) {
        err << "payoff error at position " << e.offset() << ": " << e.what() << '\n';
        if (e.kind() == payoff::PayoffError::Kind::Negative && e.suggested_shift() > 0.0)
            err << "hint: rerun with --allow-shift to add " << format_double(e.suggested_shift()) << " in cash\n";
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::length_error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
}

}  // namespace superhedge::cli
