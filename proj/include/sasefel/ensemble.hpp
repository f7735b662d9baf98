#pragma once

// Monte Carlo ensembles over stochastic drives.
//
// Realization i always draws from RngStream(master_seed, i), results are stored
// per realization and reduced in index order, so every output bit depends only
// on (master_seed, n_realizations) and not on the number of workers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sasefel/dynamics.hpp"
#include "sasefel/envelope.hpp"
#include "sasefel/error.hpp"
#include "sasefel/noise.hpp"
#include "sasefel/pulse.hpp"
#include "sasefel/rng.hpp"

namespace sasefel {

struct EnsembleConfig {
    std::size_t n_realizations = 5000;
    std::uint64_t master_seed = 1;
    std::size_t worker_count = 0;  ///< 0 = one per hardware thread

    void validate() const {
        if (n_realizations < 1) throw ConfigError("n_realizations must be at least 1");
    }
    std::size_t resolved_workers() const {
        if (worker_count > 0) return worker_count;
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

/// Runs fn(i) for i in [0, n) on `workers` threads with a static contiguous
/// partition. If any call throws, the exception of the smallest failing index
/// is rethrown wrapped in RealizationError (or as is, if it already is one).
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    std::atomic<std::size_t> first_failure{std::numeric_limits<std::size_t>::max()};
    std::mutex mu;
    std::exception_ptr error;
    std::size_t error_index = std::numeric_limits<std::size_t>::max();

    auto body = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (i > first_failure.load(std::memory_order_relaxed)) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
                std::size_t cur = first_failure.load();
                while (i < cur && !first_failure.compare_exchange_weak(cur, i)) {
                }
                return;
            }
        }
    };

    if (workers == 1) {
        body(0, n);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            threads.emplace_back(body, n * w / workers, n * (w + 1) / workers);
        for (auto& t : threads) t.join();
    }
    if (!error) return;
    try {
        std::rethrow_exception(error);
    } catch (const RealizationError&) {
        throw;
    } catch (const std::exception& e) {
        throw RealizationError("realization " + std::to_string(error_index) + " failed: " + e.what(), error_index);
    }
}

enum class FieldModel { FourierLimited, Chaotic, PhaseDiffusion };

inline std::string_view to_string(FieldModel m) {
    switch (m) {
    case FieldModel::FourierLimited: return "fourier-limited";
    case FieldModel::Chaotic: return "chaotic";
    case FieldModel::PhaseDiffusion: return "phase-diffusion";
    }
    return "?";
}

inline std::optional<FieldModel> parse_field_model(std::string_view s) {
    if (s == "fourier-limited" || s == "deterministic") return FieldModel::FourierLimited;
    if (s == "chaotic" || s == "stochastic") return FieldModel::Chaotic;
    if (s == "phase-diffusion" || s == "pdm") return FieldModel::PhaseDiffusion;
    return std::nullopt;
}

/// FWHM of the phase-diffusion line that matches a Gaussian spectrum of rms width sigma.
inline double pdm_gamma_for_sigma(double sigma_omega) {
    return 2.0 * std::sqrt(2.0 * std::numbers::ln2) * sigma_omega;
}

/// How to build the drive of one realization. The field on the lower
/// transition (Omega_s) carries the noise; the upper transition field
/// (Omega_d, three levels only) is always Fourier-limited.
struct DriveRecipe {
    SystemSpec system;
    EnvelopeSpec probe = EnvelopeSpec::gaussian(3.0, 16.0, kDefaultFinalTime);  ///< f_s
    std::optional<EnvelopeSpec> pump;                                          ///< f_d
    FieldModel model = FieldModel::FourierLimited;
    PsdSpec psd;               ///< Chaotic
    double pdm_gamma = 0.0;    ///< PhaseDiffusion: FWHM of the Lorentzian line
    std::optional<FrequencyGrid> grid;  ///< overrides the default noise grid

    double t_final() const { return probe.t_final; }
    bool stochastic() const { return model != FieldModel::FourierLimited; }

    /// Duration parameter of f_s: tau for a Gaussian, FWHM/(2 sqrt ln 2) otherwise.
    double probe_tau() const {
        if (probe.kind == EnvelopeKind::Gaussian) return probe.tau;
        return envelope_fwhm(probe) / (2.0 * std::sqrt(std::numbers::ln2));
    }

    FrequencyGrid noise_grid() const {
        if (grid) return *grid;
        if (model == FieldModel::PhaseDiffusion) return phase_diffusion_grid(pdm_gamma, t_final());
        return default_grid(psd, t_final());
    }

    std::optional<double> noise_coherence_time() const {
        if (model == FieldModel::Chaotic) return coherence_time(psd);
        if (model == FieldModel::PhaseDiffusion) return coherence_time(PsdSpec{PsdKind::Lorentzian, 0.5 * pdm_gamma});
        return std::nullopt;
    }

    /// Returns soft warnings; throws ConfigError listing every hard problem.
    std::vector<std::string> validate() const {
        std::vector<std::string> errors;
        auto collect = [&](auto&& check) {
            try {
                check();
            } catch (const ConfigError& e) {
                for (const auto& m : e.messages()) errors.push_back(m);
            }
        };
        std::vector<std::string> warnings;
        collect([&] { system.validate(); });
        collect([&] { warnings = validate_envelope(probe); });
        if (system.levels == 3) {
            if (!pump) errors.push_back("three-level systems need a pump envelope");
            else {
                collect([&] {
                    for (auto& w : validate_envelope(*pump)) warnings.push_back("pump: " + w);
                });
                if (std::abs(pump->t_final - probe.t_final) > 1e-12)
                    errors.push_back("probe and pump envelopes must share t_final");
            }
        }
        if (model == FieldModel::Chaotic) collect([&] { validate_grid(psd, noise_grid()); });
        if (model == FieldModel::PhaseDiffusion && !(pdm_gamma > 0.0))
            errors.push_back("phase-diffusion bandwidth must be positive");
        if (!errors.empty()) throw ConfigError(std::move(errors));
        return warnings;
    }

    /// Largest combined Rabi frequency sqrt(|Omega_s|^2 + |Omega_d|^2) over the
    /// noise knots (or a fine grid for Fourier-limited fields).
    double peak_rabi(const NoiseTrace* noise) const {
        const double tf = t_final();
        const std::size_t count =
            noise ? static_cast<std::size_t>(std::llround(tf / noise->time_step())) + 1 : std::size_t{4097};
        const double dt = tf / static_cast<double>(count - 1);
        const double s2 = system.omega_s0 * system.omega_s0;
        const double d2 = system.levels == 3 ? system.omega_d0 * system.omega_d0 : 0.0;
        double peak = 0.0;
        for (std::size_t k = 0; k < count; ++k) {
            const double t = dt * static_cast<double>(k);
            double w = s2 * envelope_eval(probe, t) * (noise ? std::norm(noise->samples[k]) : 1.0);
            if (d2 > 0.0) w += d2 * envelope_eval(*pump, t);
            peak = std::max(peak, w);
        }
        return std::sqrt(peak);
    }

    /// Step plan for one realization: the step is bounded by the drive's actual
    /// peak and, for noisy fields, divides the noise time step.
    StepPlan step_plan(const NoiseTrace* noise = nullptr) const {
        const double h_max = max_step(system, noise_coherence_time(), peak_rabi(noise));
        if (!noise) return plan_steps(h_max, t_final());
        return plan_steps(h_max, t_final(), noise->time_step());
    }

    /// Noise trace of realization `index`, or nullopt for a Fourier-limited field.
    std::optional<NoiseTrace> sample(const FrequencyGrid& g, RngStream& rng) const {
        switch (model) {
        case FieldModel::FourierLimited: return std::nullopt;
        case FieldModel::Chaotic: return sample_noise(psd, g, rng);
        case FieldModel::PhaseDiffusion: return sample_phase_diffusion(pdm_gamma, g, rng);
        }
        return std::nullopt;
    }

    DriveTraces drive(const NoiseTrace* noise, const StepPlan& plan) const {
        FieldSource s{&probe, system.omega_s0, noise};
        std::optional<FieldSource> d;
        if (system.levels == 3) d = FieldSource{&*pump, system.omega_d0, nullptr};
        return build_drive(system, s, d, plan);
    }
};

struct PointResult {
    double q2_mean = 0.0;
    double q2_stderr = 0.0;
    double q3_mean = 0.0;
    double q3_stderr = 0.0;
    std::size_t n = 0;
};

namespace detail {

inline void mean_stderr(const std::vector<double>& samples, std::size_t n, std::size_t stride, std::size_t offset,
                        double& mean, double& se) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += samples[i * stride + offset];
    mean = s / static_cast<double>(n);
    if (n < 2) {
        se = 0.0;
        return;
    }
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = samples[i * stride + offset] - mean;
        v += d * d;
    }
    se = std::sqrt(v / static_cast<double>(n - 1) / static_cast<double>(n));
}

}  // namespace detail

/// Ensemble averages of Q2 and Q3 for several detuning pairs that share one
/// drive per realization (common random numbers across the lanes).
inline std::vector<PointResult> run_lanes(const DriveRecipe& recipe, std::span<const LaneDetuning> lanes,
                                          const EnsembleConfig& config) {
    config.validate();
    recipe.validate();
    if (lanes.empty()) throw ConfigError("no detuning points to evaluate");
    const double tf = recipe.t_final();
    const std::size_t L = lanes.size();

    auto integrate = [&](const NoiseTrace* noise) {
        const auto drive = recipe.drive(noise, recipe.step_plan(noise));
        if (recipe.system.levels == 2) {
            std::vector<double> ds(L);
            for (std::size_t l = 0; l < L; ++l) ds[l] = lanes[l].delta_s;
            return integrate_two_level_batch(recipe.system, drive, ds, tf);
        }
        return integrate_three_level_batch(recipe.system, drive, lanes, tf);
    };

    std::vector<PointResult> out(L);
    if (!recipe.stochastic()) {
        const auto states = integrate(nullptr);
        for (std::size_t l = 0; l < L; ++l) {
            out[l].q2_mean = states[l].q2;
            out[l].q3_mean = states[l].q3;
            out[l].n = config.n_realizations;
        }
        return out;
    }

    const auto grid = recipe.noise_grid();
    const std::size_t n = config.n_realizations;
    std::vector<double> q2(n * L), q3(n * L);
    parallel_for(n, config.resolved_workers(), [&](std::size_t i) {
        RngStream rng(config.master_seed, i);
        const auto noise = recipe.sample(grid, rng);
        const auto states = integrate(&*noise);
        for (std::size_t l = 0; l < L; ++l) {
            q2[i * L + l] = states[l].q2;
            q3[i * L + l] = states[l].q3;
        }
    });
    for (std::size_t l = 0; l < L; ++l) {
        detail::mean_stderr(q2, n, L, l, out[l].q2_mean, out[l].q2_stderr);
        detail::mean_stderr(q3, n, L, l, out[l].q3_mean, out[l].q3_stderr);
        out[l].n = n;
    }
    return out;
}

inline PointResult run_point(const DriveRecipe& recipe, const EnsembleConfig& config) {
    const LaneDetuning d{recipe.system.delta_s, recipe.system.delta_d};
    return run_lanes(recipe, std::span<const LaneDetuning>(&d, 1), config).front();
}

enum class ScanVariable { DeltaS, DeltaD, Chi, OmegaS0, OmegaD0 };

inline std::string_view to_string(ScanVariable v) {
    switch (v) {
    case ScanVariable::DeltaS: return "delta_s";
    case ScanVariable::DeltaD: return "delta_d";
    case ScanVariable::Chi: return "chi";
    case ScanVariable::OmegaS0: return "omega_s0";
    case ScanVariable::OmegaD0: return "omega_d0";
    }
    return "?";
}

inline std::optional<ScanVariable> parse_scan_variable(std::string_view s) {
    if (s == "delta_s") return ScanVariable::DeltaS;
    if (s == "delta_d") return ScanVariable::DeltaD;
    if (s == "chi") return ScanVariable::Chi;
    if (s == "omega_s0") return ScanVariable::OmegaS0;
    if (s == "omega_d0") return ScanVariable::OmegaD0;
    return std::nullopt;
}

/// Sets the noise bandwidth so that sigma_omega * tau_s = chi (for phase
/// diffusion, the line FWHM of the matching Gaussian spectrum).
inline void set_chi(DriveRecipe& r, double chi) {
    if (!(chi > 0.0)) throw ConfigError("chi must be positive");
    r.psd.sigma_omega = chi / r.probe_tau();
    if (r.model == FieldModel::PhaseDiffusion) r.pdm_gamma = pdm_gamma_for_sigma(r.psd.sigma_omega);
    r.grid.reset();
}

inline DriveRecipe recipe_at(const DriveRecipe& base, ScanVariable var, double x) {
    DriveRecipe r = base;
    switch (var) {
    case ScanVariable::DeltaS: r.system.delta_s = x; break;
    case ScanVariable::DeltaD: r.system.delta_d = x; break;
    case ScanVariable::Chi:
        if (!r.stochastic()) throw ConfigError("a chi scan needs a stochastic field model");
        set_chi(r, x);
        break;
    case ScanVariable::OmegaS0: r.system.omega_s0 = x; break;
    case ScanVariable::OmegaD0: r.system.omega_d0 = x; break;
    }
    return r;
}

struct ScanSpec {
    ScanVariable variable = ScanVariable::DeltaS;
    std::vector<double> grid;
    DriveRecipe base;

    void validate() const {
        if (grid.empty()) throw ConfigError("scan grid is empty");
        const bool up = grid.size() < 2 || grid[1] > grid[0];
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (up ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1]))
                throw ConfigError("scan grid must be strictly monotone");
        for (double x : grid)
            if (!std::isfinite(x)) throw ConfigError("scan grid values must be finite");
    }
};

/// Evenly spaced inclusive grid.
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    if (count < 2) return {lo};
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return g;
}

struct ScanPoint {
    double x = 0.0;
    PointResult result;
    bool ok = true;
    std::string error;
    std::optional<std::size_t> failed_realization;
};

struct ScanResult {
    ScanVariable variable = ScanVariable::DeltaS;
    std::vector<ScanPoint> points;
    std::uint64_t master_seed = 0;
    std::uint64_t config_hash = 0;

    bool complete() const {
        return std::all_of(points.begin(), points.end(), [](const ScanPoint& p) { return p.ok; });
    }
    std::vector<double> x() const {
        std::vector<double> v;
        for (const auto& p : points) v.push_back(p.x);
        return v;
    }
    std::vector<double> q2() const {
        std::vector<double> v;
        for (const auto& p : points) v.push_back(p.result.q2_mean);
        return v;
    }
    std::vector<double> q2_stderr() const {
        std::vector<double> v;
        for (const auto& p : points) v.push_back(p.result.q2_stderr);
        return v;
    }
    std::vector<double> q3() const {
        std::vector<double> v;
        for (const auto& p : points) v.push_back(p.result.q3_mean);
        return v;
    }
    std::vector<double> q3_stderr() const {
        std::vector<double> v;
        for (const auto& p : points) v.push_back(p.result.q3_stderr);
        return v;
    }
};

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Canonical text of everything that determines a scan's output (worker count excluded).
inline std::string describe(const ScanSpec& scan, const EnsembleConfig& config) {
    std::ostringstream o;
    o.precision(17);
    const auto& r = scan.base;
    const auto& s = r.system;
    o << "levels=" << s.levels << " gamma2=" << s.gamma2 << " gamma3=" << s.gamma3 << " omega_s0=" << s.omega_s0
      << " omega_d0=" << s.omega_d0 << " delta_s=" << s.delta_s << " delta_d=" << s.delta_d;
    auto env = [&](const char* name, const EnvelopeSpec& e) {
        o << ' ' << name << '=' << to_string(e.kind) << ',' << e.tau << ',' << e.t0 << ',' << e.t_final;
        for (const auto& c : e.components) o << ',' << c.weight << ':' << c.center << ':' << c.width;
    };
    env("probe", r.probe);
    if (r.pump) env("pump", *r.pump);
    o << " model=" << to_string(r.model) << " psd=" << to_string(r.psd.kind) << ',' << r.psd.sigma_omega
      << " pdm_gamma=" << r.pdm_gamma;
    if (r.grid) o << " grid=" << r.grid->n_points << ',' << r.grid->delta_omega;
    o << " scan=" << to_string(scan.variable);
    for (double x : scan.grid) o << ',' << x;
    o << " n=" << config.n_realizations << " seed=" << config.master_seed;
    return o.str();
}

/// Maps run_point over the grid. Detuning scans integrate all grid points as
/// lanes of one batch per realization; other variables run point by point.
/// Failures are recorded per point and the remaining points still run.
inline ScanResult run_scan(const ScanSpec& scan, const EnsembleConfig& config) {
    scan.validate();
    config.validate();
    ScanResult res;
    res.variable = scan.variable;
    res.master_seed = config.master_seed;
    res.config_hash = fnv1a(describe(scan, config));
    res.points.resize(scan.grid.size());
    for (std::size_t k = 0; k < scan.grid.size(); ++k) res.points[k].x = scan.grid[k];

    auto mark_failed = [](ScanPoint& p, const std::exception& e) {
        p.ok = false;
        p.error = e.what();
        if (auto* re = dynamic_cast<const RealizationError*>(&e)) p.failed_realization = re->realization();
    };

    const bool lane_scan = scan.variable == ScanVariable::DeltaS || scan.variable == ScanVariable::DeltaD;
    if (lane_scan) {
        std::vector<LaneDetuning> lanes(scan.grid.size());
        for (std::size_t k = 0; k < scan.grid.size(); ++k) {
            lanes[k] = {scan.base.system.delta_s, scan.base.system.delta_d};
            (scan.variable == ScanVariable::DeltaS ? lanes[k].delta_s : lanes[k].delta_d) = scan.grid[k];
        }
        try {
            const auto r = run_lanes(scan.base, lanes, config);
            for (std::size_t k = 0; k < r.size(); ++k) res.points[k].result = r[k];
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            for (auto& p : res.points) mark_failed(p, e);
        }
        return res;
    }
    for (auto& p : res.points) {
        const auto recipe = recipe_at(scan.base, scan.variable, p.x);
        try {
            p.result = run_point(recipe, config);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            mark_failed(p, e);
        }
    }
    return res;
}

/// Ensemble of noise traces on a shared grid; trace i uses RngStream(master_seed, i).
inline std::vector<NoiseTrace> generate_noise(const PsdSpec& psd, const FrequencyGrid& grid,
                                              const EnsembleConfig& config) {
    config.validate();
    validate_grid(psd, grid);
    std::vector<NoiseTrace> traces(config.n_realizations);
    parallel_for(traces.size(), config.resolved_workers(), [&](std::size_t i) {
        RngStream rng(config.master_seed, i);
        traces[i] = sample_noise(psd, grid, rng);
    });
    return traces;
}

/// Ensemble of chaotic pulses E = zeta sqrt(I0 f); pulse i uses RngStream(master_seed, i).
inline std::vector<StochasticPulse> generate_pulses(const EnvelopeSpec& env, double peak_intensity,
                                                    const PsdSpec& psd, const EnsembleConfig& config,
                                                    std::optional<FrequencyGrid> grid = std::nullopt) {
    config.validate();
    const auto g = grid ? *grid : default_grid(psd, env.t_final);
    validate_grid(psd, g);
    std::vector<StochasticPulse> pulses(config.n_realizations);
    parallel_for(pulses.size(), config.resolved_workers(), [&](std::size_t i) {
        RngStream rng(config.master_seed, i);
        pulses[i] = make_pulse(env, peak_intensity, sample_noise(psd, g, rng));
    });
    return pulses;
}

}  // namespace sasefel
