#pragma once

// Subcommands of the sasefel tool. Every output table carries a '#' header with
// the tool version, the resolved configuration, the master seed and a hash of
// everything that determines the numbers.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sasefel/analysis.hpp"
#include "sasefel/config.hpp"
#include "sasefel/csv.hpp"
#include "sasefel/ensemble.hpp"
#include "sasefel/presets_data.hpp"
#include "sasefel/pulse.hpp"

namespace sasefel::cli {

inline constexpr std::string_view kVersion = presets_data::kVersion;
inline constexpr const char* kWorkersEnv = "SASE_WORKERS";

// Krypton 3d -> 5p calibration: Gamma_2 = 83 meV, 1/Gamma_2 = hbar/83 meV.
inline constexpr double kKrGammaMeV = 83.0;
inline constexpr double kKrTimeFs = 6.582119569e-13 / 83.0 * 1e3;  // hbar in meV s -> fs

struct Options {
    std::string command;
    std::string config;  ///< path or preset:NAME
    std::string in;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> realizations;
    std::optional<std::size_t> workers;
    std::string units;       ///< "" or "kr-3d5p"
    std::string observable;  ///< analyze: q2 or q3, default from the file
};

inline std::optional<std::string_view> find_preset(std::string_view name) {
    for (const auto& [n, text] : presets_data::kPresets)
        if (n == name) return text;
    return std::nullopt;
}

inline std::string preset_description(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind('#', 0) == 0) return detail::trim(std::string_view(line).substr(1));
        if (!detail::trim(line).empty()) break;
    }
    return {};
}

inline std::string load_config_text(const std::string& spec) {
    if (spec.rfind("preset:", 0) == 0) {
        const auto name = spec.substr(7);
        if (auto t = find_preset(name)) return std::string(*t);
        throw ConfigError("unknown preset '" + name + "' (see 'sasefel presets')");
    }
    std::ifstream f(spec, std::ios::binary);
    if (!f) throw ConfigError("cannot read config " + spec);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

inline RunConfig load_config(const Options& o, std::ostream& err) {
    if (o.config.empty()) throw ConfigError("--config is required");
    auto cfg = parse_config(load_config_text(o.config));
    if (o.seed) cfg.ensemble.master_seed = *o.seed;
    if (o.realizations) {
        if (*o.realizations < 1) throw ConfigError("--realizations must be at least 1");
        cfg.ensemble.n_realizations = *o.realizations;
    }
    if (o.workers) {
        cfg.ensemble.worker_count = *o.workers;
    } else if (const char* env = std::getenv(kWorkersEnv); env && *env) {
        const auto w = detail::parse_uint(env);
        if (!w) throw ConfigError(std::string(kWorkersEnv) + " must be a non-negative integer");
        cfg.ensemble.worker_count = *w;
    }
    for (const auto& w : cfg.warnings) err << "warning: " << w << '\n';
    return cfg;
}

/// "<stem>_s<k><ext>" for k = 1..count, or `path` itself for a single series.
inline std::string series_path(const std::string& path, std::size_t k, std::size_t count,
                               std::string_view suffix = {}) {
    const auto slash = path.find_last_of('/');
    const auto dot = path.find_last_of('.');
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    std::string stem = has_ext ? path.substr(0, dot) : path;
    const std::string ext = has_ext ? path.substr(dot) : ".csv";
    if (count > 1) stem += "_s" + std::to_string(k + 1);
    return stem + std::string(suffix) + ext;
}

inline std::string hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::vector<std::string> provenance(const Options& o, const RunConfig& cfg, const Series& s,
                                           std::uint64_t hash) {
    std::vector<std::string> c{"sasefel " + std::string(kVersion),
                               "command: " + o.command,
                               "source: " + o.config,
                               "seed: " + std::to_string(cfg.ensemble.master_seed),
                               "realizations: " + std::to_string(cfg.ensemble.n_realizations),
                               "config_hash: " + hex(hash)};
    if (!s.label.empty()) c.push_back("series: " + s.label);
    if (o.units == "kr-3d5p")
        c.push_back("units: kr-3d5p, Gamma2 = 83 meV, 1/Gamma2 = " + format_number(kKrTimeFs) + " fs");
    c.push_back("config:");
    std::istringstream in(to_ini(cfg));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) c.push_back("  " + line);
    return c;
}

/// Configuration text echoed in a table written by this tool.
inline std::string config_echo(const CsvTable& t) {
    std::string text;
    bool inside = false;
    for (const auto& c : t.comments) {
        if (c == "config:") {
            inside = true;
            continue;
        }
        if (inside) {
            if (c.rfind("  ", 0) != 0) break;
            text += c.substr(2) + '\n';
        }
    }
    return text;
}

inline bool detuning_like(ScanVariable v) { return v != ScanVariable::Chi; }

inline int run_scan_command(const Options& o, std::ostream& out, std::ostream& err, int levels) {
    const auto cfg = load_config(o, err);
    if (cfg.levels != levels)
        throw ConfigError(o.command + " needs [system].levels = " + std::to_string(levels));
    if (cfg.omega_s0.empty()) throw ConfigError("[system].omega_s0 is required for " + o.command);
    const auto series = expand_series(cfg);
    for (const auto& w : validate_series(series)) err << "warning: " << w << '\n';
    const std::string path = o.out.empty() ? o.command + ".csv" : o.out;

    bool complete = true;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto scan = scan_for(cfg, series[k]);
        const auto res = run_scan(scan, cfg.ensemble);
        CsvTable t;
        t.comments = provenance(o, cfg, series[k], res.config_hash);
        const std::string var(to_string(cfg.variable));
        t.columns = {var, "q2_mean", "q2_stderr"};
        if (levels == 3) {
            t.columns.push_back("q3_mean");
            t.columns.push_back("q3_stderr");
        }
        t.columns.push_back("n");
        const bool units = o.units == "kr-3d5p" && detuning_like(cfg.variable);
        if (units) t.columns.push_back(var + "_mev");
        std::vector<std::string> problems;
        for (const auto& p : res.points) {
            const double nan = std::nan("");
            std::vector<double> row{p.x, p.ok ? p.result.q2_mean : nan, p.ok ? p.result.q2_stderr : nan};
            if (levels == 3) {
                row.push_back(p.ok ? p.result.q3_mean : nan);
                row.push_back(p.ok ? p.result.q3_stderr : nan);
            }
            row.push_back(p.ok ? static_cast<double>(p.result.n) : 0.0);
            if (units) row.push_back(p.x * kKrGammaMeV);
            t.rows.push_back(std::move(row));
            if (!p.ok) {
                std::string msg = var + "=" + format_number(p.x) + ": " + p.error;
                if (p.failed_realization) msg += " (realization " + std::to_string(*p.failed_realization) + ")";
                problems.push_back(msg);
            }
        }
        const auto file = series_path(path, k, series.size());
        write_csv(file, t);
        write_status(file, problems);
        for (const auto& p : problems) err << "error: " << file << ": " << p << '\n';
        complete = complete && problems.empty();
        out << file << '\n';
    }
    return complete ? 0 : 3;
}

inline std::vector<StochasticPulse> pulses_for(const DriveRecipe& r, double intensity, const EnsembleConfig& e) {
    switch (r.model) {
    case FieldModel::Chaotic: return generate_pulses(r.probe, intensity, r.psd, e, r.grid);
    case FieldModel::PhaseDiffusion: {
        std::vector<StochasticPulse> pulses(e.n_realizations);
        parallel_for(pulses.size(), e.resolved_workers(), [&](std::size_t i) {
            RngStream rng(e.master_seed, i);
            pulses[i] = make_pdm_pulse(r.probe, intensity, r.pdm_gamma, rng);
        });
        return pulses;
    }
    case FieldModel::FourierLimited: break;
    }
    const auto grid = default_grid(PsdSpec{PsdKind::Gaussian, 1.0}, r.t_final());
    return std::vector<StochasticPulse>(std::max<std::size_t>(e.n_realizations, 2),
                                        make_pulse(r.probe, intensity, constant_trace(grid)));
}

inline int run_pulse_stats(const Options& o, std::ostream& out, std::ostream& err) {
    const auto cfg = load_config(o, err);
    const auto series = expand_series(cfg);
    for (const auto& s : series) {
        try {
            for (const auto& w : validate_envelope(s.recipe.probe)) err << "warning: " << w << '\n';
            if (s.recipe.model == FieldModel::Chaotic) validate_grid(s.recipe.psd, s.recipe.noise_grid());
        } catch (const ConfigError& e) {
            std::vector<std::string> msgs;
            for (const auto& m : e.messages()) msgs.push_back(s.label.empty() ? m : "series " + s.label + ": " + m);
            throw ConfigError(std::move(msgs));
        }
    }
    const std::string path = o.out.empty() ? o.command + ".csv" : o.out;
    const bool units = o.units == "kr-3d5p";
    const std::vector<double> times = cfg.times.empty() ? std::vector<double>{cfg.t0} : cfg.times;

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& r = series[k].recipe;
        const auto pulses = pulses_for(r, cfg.intensity, cfg.ensemble);
        ScanSpec key{ScanVariable::DeltaS, {0.0}, r};
        const auto header = provenance(o, cfg, series[k], fnv1a(describe(key, cfg.ensemble) + " pulse-stats"));

        std::vector<std::string> problems;
        const auto moments = intensity_moment_ratios(pulses, times, cfg.max_order);
        for (const auto& w : moments.warnings) problems.push_back(w);

        CsvTable m{header, {"time", "order", "ratio", "factorial"}, {}};
        if (units) m.columns.push_back("time_fs");
        for (const auto& row : moments.rows) {
            m.rows.push_back({row.time, static_cast<double>(row.order), row.ratio, numeric::factorial(row.order)});
            if (units) m.rows.back().push_back(row.time * kKrTimeFs);
        }

        const auto profile = mean_intensity_profile(pulses);
        CsvTable p{header, {"time", "mean_intensity", "envelope"}, {}};
        if (units) p.columns.push_back("time_fs");
        for (std::size_t i = 0; i < profile.size(); ++i) {
            const double t = pulses.front().time(i);
            p.rows.push_back({t, profile[i], cfg.intensity * envelope_eval(r.probe, t)});
            if (units) p.rows.back().push_back(t * kKrTimeFs);
        }

        const auto esd = energy_spectral_density(pulses);
        CsvTable s{header, {"omega", "density"}, {}};
        if (units) s.columns.push_back("omega_mev");
        for (std::size_t i = 0; i < esd.omega.size(); ++i) {
            s.rows.push_back({esd.omega[i], esd.density[i]});
            if (units) s.rows.back().push_back(esd.omega[i] * kKrGammaMeV);
        }

        const auto energy = pulse_energy_stats(pulses);
        const double nan = std::nan("");
        const bool chaotic = r.model == FieldModel::Chaotic;
        const double sigma = r.model == FieldModel::FourierLimited ? 0.0 : r.psd.sigma_omega;
        IntensityPdfCheck pdf{nan, nan, nan};
        try {
            pdf = intensity_pdf_check(pulses, times.front());
        } catch (const ConfigError& e) {
            problems.push_back(e.what());
        }
        const double tau = r.probe_tau();
        const auto bw = bandwidth_formula(tau, sigma);
        CsvTable sum{header,
                     {"chi", "sigma_omega", "coherence_time", "mode_count", "energy_mean", "gamma_cdf_deviation",
                      "pdf_max_deviation", "pdf_median_ratio", "esd_fwhm", "bandwidth_predicted", "fourier_limit"},
                     {{bw.chi, sigma, chaotic ? coherence_time(r.psd) : nan, energy.mode_count, energy.mean,
                       energy.gamma_cdf_deviation, pdf.max_deviation, pdf.median_ratio, esd.fwhm, bw.bandwidth,
                       bw.fourier_limit}}};

        const auto file = series_path(path, k, series.size());
        write_csv(file, m);
        write_csv(series_path(path, k, series.size(), "_profile"), p);
        write_csv(series_path(path, k, series.size(), "_esd"), s);
        write_csv(series_path(path, k, series.size(), "_summary"), sum);
        write_status(file, {});
        for (const auto& w : problems) err << "warning: " << w << '\n';
        out << file << '\n';
    }
    return 0;
}

inline int run_analyze(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.in.empty()) throw ConfigError("--in is required");
    const auto table = read_csv(o.in);
    if (table.columns.size() < 2) throw ConfigError(o.in + ": need an abscissa column and an observable");
    std::string obs = o.observable;
    if (obs.empty()) obs = table.find("q2_mean") ? "q2" : "q3";
    if (obs != "q2" && obs != "q3") throw ConfigError("--observable must be q2 or q3");

    Curve c;
    c.x = table.column(table.columns.front());
    c.y = table.column(obs + "_mean");
    if (table.find(obs + "_stderr")) c.stderr_y = table.column(obs + "_stderr");
    if (c.x.size() > 1 && c.x[1] < c.x[0]) {
        std::reverse(c.x.begin(), c.x.end());
        std::reverse(c.y.begin(), c.y.end());
        std::reverse(c.stderr_y.begin(), c.stderr_y.end());
    }
    for (double y : c.y)
        if (!std::isfinite(y)) throw ConfigError(o.in + ": observable has missing values (partial scan?)");

    std::vector<std::string> problems;
    const auto f = extract_doublet(c);
    const double nan = std::nan("");
    std::optional<LorentzianFit> fit;
    if (!f.has_doublet()) {
        try {
            fit = fit_lorentzian(c);
        } catch (const std::exception& e) {
            problems.push_back(std::string("lorentzian fit: ") + e.what());
        }
    }
    auto at = [&](const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : nan; };

    CsvTable t;
    t.comments = {"sasefel " + std::string(kVersion), "command: analyze", "input: " + o.in,
                  "observable: " + obs, "abscissa: " + table.columns.front()};
    for (const auto& line : table.comments) t.comments.push_back("| " + line);
    t.columns = {"n_peaks",        "peak1_position", "peak1_height",     "peak1_fwhm",        "peak2_position",
                 "peak2_height",   "peak2_fwhm",     "separation",       "depth",             "minimum",
                 "lorentz_center", "lorentz_width",  "lorentz_amplitude", "lorentz_residual", "lorentz_apex_residual"};
    t.rows.push_back({static_cast<double>(f.peak_positions.size()), at(f.peak_positions, 0), at(f.peak_heights, 0),
                      at(f.fwhm_per_peak, 0), at(f.peak_positions, 1), at(f.peak_heights, 1), at(f.fwhm_per_peak, 1),
                      f.separation.value_or(nan), f.depth.value_or(nan), f.minimum.value_or(nan),
                      fit ? fit->center : nan, fit ? fit->width : nan, fit ? fit->amplitude : nan,
                      fit ? fit->residual : nan, fit ? fit->apex_residual : nan});
    const std::string path = o.out.empty() ? "features.csv" : o.out;
    write_csv(path, t);
    write_status(path, problems);
    for (const auto& p : problems) err << "warning: " << p << '\n';
    out << path << '\n';
    return 0;
}

inline int run_presets(const Options& o, std::ostream& out) {
    if (!o.config.empty()) {
        const auto name = o.config.rfind("preset:", 0) == 0 ? o.config.substr(7) : o.config;
        const auto text = find_preset(name);
        if (!text) throw ConfigError("unknown preset '" + name + "'");
        out << *text;
        return 0;
    }
    for (const auto& [name, text] : presets_data::kPresets) out << name << '\t' << preset_description(text) << '\n';
    return 0;
}

/// Runs one subcommand; errors are reported on `err` and mapped to exit codes
/// (2 configuration, 3 partial results, 1 anything else).
inline int run_command(const Options& o, std::ostream& out, std::ostream& err) {
    try {
        if (!o.units.empty() && o.units != "kr-3d5p") throw ConfigError("--units: only kr-3d5p is known");
        if (o.command == "single-scan") return run_scan_command(o, out, err, 2);
        if (o.command == "dr-scan") return run_scan_command(o, out, err, 3);
        if (o.command == "pulse-stats") return run_pulse_stats(o, out, err);
        if (o.command == "analyze") return run_analyze(o, out, err);
        if (o.command == "presets") return run_presets(o, out);
        throw ConfigError("unknown command '" + o.command + "'");
    } catch (const ConfigError& e) {
        for (const auto& m : e.messages()) err << "error: " << m << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace sasefel::cli
