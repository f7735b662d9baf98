#pragma once

// Run configuration: an INI-like document with sections [noise], [pulse],
// [system], [ensemble] and [scan]. Values are numbers or names; keys marked as
// series keys may hold a comma-separated list, and the run covers the
// Cartesian product of all lists (outermost first: model, kind, chi, tau_s,
// tau_d, gamma3, omega_s0, omega_d0, delta_s, delta_d).

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sasefel/analysis.hpp"
#include "sasefel/ensemble.hpp"
#include "sasefel/error.hpp"

namespace sasefel {

/// Shortest text that parses back to exactly v.
inline std::string format_number(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string_view to_string(Observable o) { return o == Observable::Q2 ? "q2" : "q3"; }

struct RunConfig {
    // [noise]
    std::vector<FieldModel> model;  ///< empty: chaotic if chi/sigma_omega given, else Fourier-limited
    std::vector<PsdKind> kind{PsdKind::Gaussian};
    std::vector<double> chi;
    std::vector<double> sigma_omega;
    std::optional<std::size_t> grid_points;
    std::optional<double> grid_spacing;

    // [pulse]
    EnvelopeKind shape = EnvelopeKind::Gaussian;
    std::vector<double> tau_s;
    std::optional<double> probe_fwhm;  ///< profile2 only
    double t0 = 16.0;
    double t_final = kDefaultFinalTime;
    EnvelopeKind pump_shape = EnvelopeKind::Gaussian;
    std::vector<double> tau_d;
    std::optional<double> pump_t0;
    double intensity = 1.0;
    std::vector<double> times;  ///< moment sample times; default t0
    int max_order = 5;

    // [system]
    int levels = 2;
    double gamma2 = 1.0;
    std::vector<double> gamma3{1.0};
    std::vector<double> omega_s0;
    std::vector<double> omega_d0;
    std::vector<double> delta_s{0.0};
    std::vector<double> delta_d{0.0};

    // [ensemble]
    EnsembleConfig ensemble;

    // [scan]
    ScanVariable variable = ScanVariable::DeltaS;
    std::vector<double> values;
    double scan_min = -20.0;
    double scan_max = 20.0;
    std::size_t scan_points = 161;
    Observable observable = Observable::Q2;

    std::vector<std::string> warnings;

    std::vector<double> scan_grid() const {
        return values.empty() ? linspace(scan_min, scan_max, scan_points) : values;
    }
    std::vector<FieldModel> models() const {
        if (!model.empty()) return model;
        return {chi.empty() && sigma_omega.empty() ? FieldModel::FourierLimited : FieldModel::Chaotic};
    }
};

/// One point of the Cartesian product of list-valued keys.
struct Series {
    std::string label;  ///< "key=value" for every list-valued key, empty for a single series
    DriveRecipe recipe;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<std::uint64_t> parse_uint(std::string_view s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<FieldModel> parse_model_name(std::string_view s) { return parse_field_model(s); }

inline std::optional<Observable> parse_observable(std::string_view s) {
    if (s == "q2") return Observable::Q2;
    if (s == "q3") return Observable::Q3;
    return std::nullopt;
}

struct KeyContext {
    RunConfig& cfg;
    std::vector<std::string>& errors;
    std::string path;  ///< "[section].key"
    int line;

    void error(const std::string& what) {
        errors.push_back("line " + std::to_string(line) + ": " + path + ": " + what);
    }
};

using KeyHandler = std::function<void(KeyContext&, const std::vector<std::string>&)>;

struct KeyDef {
    std::string_view section;
    std::string_view name;
    bool series;
    KeyHandler apply;
    std::function<std::string(const RunConfig&)> echo;  ///< empty result: key omitted
};

template <class T>
std::string join(const std::vector<T>& v, auto&& fmt) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += fmt(v[i]);
    }
    return s;
}

inline std::string join_numbers(const std::vector<double>& v) { return join(v, format_number); }

inline KeyHandler numbers(std::vector<double> RunConfig::*field, bool positive, bool allow_zero = false) {
    return [=](KeyContext& k, const std::vector<std::string>& vals) {
        std::vector<double> out;
        for (const auto& s : vals) {
            const auto v = parse_double(s);
            if (!v || !std::isfinite(*v)) {
                k.error("'" + s + "' is not a finite number");
                continue;
            }
            if (positive && !(*v > 0.0) && !(allow_zero && *v == 0.0)) {
                k.error(format_number(*v) + (allow_zero ? " must be non-negative" : " must be positive"));
                continue;
            }
            out.push_back(*v);
        }
        k.cfg.*field = std::move(out);
    };
}

inline KeyHandler number(double RunConfig::*field, bool positive) {
    return [=](KeyContext& k, const std::vector<std::string>& vals) {
        const auto v = parse_double(vals.front());
        if (!v || !std::isfinite(*v)) return k.error("'" + vals.front() + "' is not a finite number");
        if (positive && !(*v > 0.0)) return k.error(format_number(*v) + " must be positive");
        k.cfg.*field = *v;
    };
}

inline KeyHandler optional_number(std::optional<double> RunConfig::*field) {
    return [=](KeyContext& k, const std::vector<std::string>& vals) {
        const auto v = parse_double(vals.front());
        if (!v || !(*v > 0.0) || !std::isfinite(*v)) return k.error("'" + vals.front() + "' must be a positive number");
        k.cfg.*field = *v;
    };
}

template <class T>
KeyHandler names(std::vector<T> RunConfig::*field, std::optional<T> (*parse)(std::string_view)) {
    return [=](KeyContext& k, const std::vector<std::string>& vals) {
        std::vector<T> out;
        for (const auto& s : vals) {
            if (auto v = parse(s)) out.push_back(*v);
            else k.error("unknown value '" + s + "'");
        }
        k.cfg.*field = std::move(out);
    };
}

template <class T>
KeyHandler name(T RunConfig::*field, std::optional<T> (*parse)(std::string_view)) {
    return [=](KeyContext& k, const std::vector<std::string>& vals) {
        if (auto v = parse(vals.front())) k.cfg.*field = *v;
        else k.error("unknown value '" + vals.front() + "'");
    };
}

inline KeyHandler count(auto setter, std::uint64_t min) {
    return [=](KeyContext& k, const std::vector<std::string>& vals) {
        const auto v = parse_uint(vals.front());
        if (!v || *v < min) return k.error("'" + vals.front() + "' must be an integer >= " + std::to_string(min));
        setter(k.cfg, *v);
    };
}

inline std::string kind_name(PsdKind k) {
    return k == PsdKind::Lorentzian ? "exponential" : std::string(to_string(k));
}

inline const std::vector<KeyDef>& key_table() {
    using C = RunConfig;
    static const std::vector<KeyDef> keys = {
        {"noise", "model", true, names(&C::model, &parse_model_name),
         [](const C& c) { return join(c.models(), [](FieldModel m) { return std::string(to_string(m)); }); }},
        {"noise", "kind", true, names(&C::kind, &parse_psd_kind),
         [](const C& c) { return join(c.kind, kind_name); }},
        {"noise", "chi", true, numbers(&C::chi, true, true), [](const C& c) { return join_numbers(c.chi); }},
        {"noise", "sigma_omega", true, numbers(&C::sigma_omega, true, true),
         [](const C& c) { return join_numbers(c.sigma_omega); }},
        {"noise", "grid_points", false, count([](C& c, std::uint64_t v) { c.grid_points = v; }, 2),
         [](const C& c) { return c.grid_points ? std::to_string(*c.grid_points) : ""; }},
        {"noise", "grid_spacing", false, optional_number(&C::grid_spacing),
         [](const C& c) { return c.grid_spacing ? format_number(*c.grid_spacing) : ""; }},

        {"pulse", "shape", false, name(&C::shape, &parse_envelope_kind),
         [](const C& c) { return std::string(to_string(c.shape)); }},
        {"pulse", "tau_s", true, numbers(&C::tau_s, true), [](const C& c) { return join_numbers(c.tau_s); }},
        {"pulse", "probe_fwhm", false, optional_number(&C::probe_fwhm),
         [](const C& c) { return c.probe_fwhm ? format_number(*c.probe_fwhm) : ""; }},
        {"pulse", "t0", false, number(&C::t0, true), [](const C& c) { return format_number(c.t0); }},
        {"pulse", "t_final", false, number(&C::t_final, true), [](const C& c) { return format_number(c.t_final); }},
        {"pulse", "pump_shape", false, name(&C::pump_shape, &parse_envelope_kind),
         [](const C& c) { return c.levels == 3 ? std::string(to_string(c.pump_shape)) : ""; }},
        {"pulse", "tau_d", true, numbers(&C::tau_d, true), [](const C& c) { return c.levels == 3 ? join_numbers(c.tau_d) : ""; }},
        {"pulse", "pump_t0", false, optional_number(&C::pump_t0),
         [](const C& c) { return c.levels == 3 && c.pump_t0 ? format_number(*c.pump_t0) : ""; }},
        {"pulse", "intensity", false, number(&C::intensity, true),
         [](const C& c) { return format_number(c.intensity); }},
        {"pulse", "times", false, numbers(&C::times, true, true), [](const C& c) { return join_numbers(c.times); }},
        {"pulse", "max_order", false, count([](C& c, std::uint64_t v) { c.max_order = static_cast<int>(v); }, 1),
         [](const C& c) { return std::to_string(c.max_order); }},

        {"system", "levels", false,
         [](KeyContext& k, const std::vector<std::string>& v) {
             if (v.front() == "2") k.cfg.levels = 2;
             else if (v.front() == "3") k.cfg.levels = 3;
             else k.error("must be 2 or 3");
         },
         [](const C& c) { return std::to_string(c.levels); }},
        {"system", "gamma2", false, number(&C::gamma2, true), [](const C& c) { return format_number(c.gamma2); }},
        {"system", "gamma3", true, numbers(&C::gamma3, true, true), [](const C& c) { return c.levels == 3 ? join_numbers(c.gamma3) : ""; }},
        {"system", "omega_s0", true, numbers(&C::omega_s0, true, true),
         [](const C& c) { return join_numbers(c.omega_s0); }},
        {"system", "omega_d0", true, numbers(&C::omega_d0, true, true),
         [](const C& c) { return c.levels == 3 ? join_numbers(c.omega_d0) : ""; }},
        {"system", "delta_s", true, numbers(&C::delta_s, false), [](const C& c) { return join_numbers(c.delta_s); }},
        {"system", "delta_d", true, numbers(&C::delta_d, false), [](const C& c) { return c.levels == 3 ? join_numbers(c.delta_d) : ""; }},

        {"ensemble", "realizations", false,
         count([](C& c, std::uint64_t v) { c.ensemble.n_realizations = v; }, 1),
         [](const C& c) { return std::to_string(c.ensemble.n_realizations); }},
        {"ensemble", "seed", false, count([](C& c, std::uint64_t v) { c.ensemble.master_seed = v; }, 0),
         [](const C& c) { return std::to_string(c.ensemble.master_seed); }},
        {"ensemble", "workers", false, count([](C& c, std::uint64_t v) { c.ensemble.worker_count = v; }, 0),
         [](const C&) { return std::string(); }},  // never echoed: outputs must not depend on it

        {"scan", "variable", false, name(&C::variable, &parse_scan_variable),
         [](const C& c) { return std::string(to_string(c.variable)); }},
        {"scan", "values", false, numbers(&C::values, false), [](const C& c) { return join_numbers(c.values); }},
        {"scan", "min", false, number(&C::scan_min, false),
         [](const C& c) { return c.values.empty() ? format_number(c.scan_min) : ""; }},
        {"scan", "max", false, number(&C::scan_max, false),
         [](const C& c) { return c.values.empty() ? format_number(c.scan_max) : ""; }},
        {"scan", "points", false, count([](C& c, std::uint64_t v) { c.scan_points = v; }, 1),
         [](const C& c) { return c.values.empty() ? std::to_string(c.scan_points) : ""; }},
        {"scan", "observable", false, name(&C::observable, &parse_observable),
         [](const C& c) { return std::string(to_string(c.observable)); }},
    };
    return keys;
}

inline std::string key_path(std::string_view section, std::string_view key) {
    return "[" + std::string(section) + "]." + std::string(key);
}

}  // namespace detail

/// Canonical text of a configuration with every default spelled out; parses back to the same run.
inline std::string to_ini(const RunConfig& c) {
    std::ostringstream o;
    std::string_view section;
    for (const auto& k : detail::key_table()) {
        const auto value = k.echo(c);
        if (value.empty()) continue;
        if (k.section != section) {
            if (!section.empty()) o << '\n';
            section = k.section;
            o << '[' << section << "]\n";
        }
        o << k.name << " = " << value << '\n';
    }
    return o.str();
}

namespace detail {

/// Cross-field checks that need the whole document. Errors and warnings name key paths.
inline void check_document(RunConfig& c, const std::vector<std::string>& seen, std::vector<std::string>& errors) {
    auto has = [&](std::string_view path) { return std::find(seen.begin(), seen.end(), path) != seen.end(); };
    if (!c.chi.empty() && !c.sigma_omega.empty())
        errors.push_back("[noise].chi and [noise].sigma_omega are mutually exclusive");
    if (c.grid_points.has_value() != c.grid_spacing.has_value())
        errors.push_back("[noise].grid_points and [noise].grid_spacing must be given together");
    if (c.shape == EnvelopeKind::Gaussian && c.tau_s.empty()) errors.push_back("[pulse].tau_s is required");
    if (c.shape != EnvelopeKind::Gaussian && has("[pulse].tau_s"))
        c.warnings.push_back("[pulse].tau_s is ignored for shape " + std::string(to_string(c.shape)));
    if (c.probe_fwhm && c.shape != EnvelopeKind::Profile2)
        errors.push_back("[pulse].probe_fwhm applies to shape profile2 only");
    if (!(c.t0 < c.t_final)) errors.push_back("[pulse].t0 must lie inside (0, t_final)");
    if (c.pump_t0 && !(*c.pump_t0 < c.t_final)) errors.push_back("[pulse].pump_t0 must lie inside (0, t_final)");
    for (double t : c.times)
        if (t > c.t_final) errors.push_back("[pulse].times: " + format_number(t) + " exceeds t_final");
    if (c.values.empty() && c.scan_points >= 2 && !(c.scan_max > c.scan_min))
        errors.push_back("[scan].max must exceed [scan].min");
    if (!c.values.empty() && (has("[scan].min") || has("[scan].max") || has("[scan].points")))
        errors.push_back("[scan].values excludes [scan].min, [scan].max and [scan].points");
    if (!c.values.empty()) {
        try {
            ScanSpec s;
            s.grid = c.values;
            s.validate();
        } catch (const ConfigError& e) {
            errors.push_back("[scan].values: " + std::string(e.what()));
        }
    }

    const bool stochastic_model = std::any_of(c.model.begin(), c.model.end(),
                                              [](FieldModel m) { return m != FieldModel::FourierLimited; });
    if (stochastic_model && c.chi.empty() && c.sigma_omega.empty() && c.variable != ScanVariable::Chi)
        errors.push_back("[noise].chi or [noise].sigma_omega is required for a stochastic model");
    if (c.variable == ScanVariable::Chi) {
        if (!c.chi.empty() || !c.sigma_omega.empty())
            errors.push_back("[noise].chi and [noise].sigma_omega must be unset when [scan].variable = chi");
        if (!c.model.empty() && !stochastic_model)
            errors.push_back("[scan].variable = chi needs a stochastic [noise].model");
        if (c.model.empty()) c.model = {FieldModel::Chaotic};
    }

    if (c.levels == 3) {
        if (c.omega_d0.empty()) errors.push_back("[system].omega_d0 is required for three levels");
        if (c.pump_shape == EnvelopeKind::Gaussian && c.tau_d.empty())
            errors.push_back("[pulse].tau_d is required for three levels");
        if (c.pump_shape == EnvelopeKind::Profile2) errors.push_back("[pulse].pump_shape must be gaussian or flat");
        // The strong field must outlast the weak one for a clean doublet.
        if (!c.tau_s.empty() && !c.tau_d.empty() && !c.omega_s0.empty() && !c.omega_d0.empty() &&
            c.shape == EnvelopeKind::Gaussian && c.pump_shape == EnvelopeKind::Gaussian) {
            const double ws = *std::max_element(c.omega_s0.begin(), c.omega_s0.end());
            const double wd = *std::max_element(c.omega_d0.begin(), c.omega_d0.end());
            const double ts = *std::max_element(c.tau_s.begin(), c.tau_s.end());
            const double td = *std::min_element(c.tau_d.begin(), c.tau_d.end());
            const double ts_min = *std::min_element(c.tau_s.begin(), c.tau_s.end());
            const double td_max = *std::max_element(c.tau_d.begin(), c.tau_d.end());
            if (wd > ws && td <= ts)
                c.warnings.push_back("[pulse].tau_d should exceed [pulse].tau_s: the pump on |2>-|3> must outlast the probe");
            if (ws > wd && ts_min <= td_max)
                c.warnings.push_back("[pulse].tau_s should exceed [pulse].tau_d: the pump on |1>-|2> must outlast the probe");
        }
    } else {
        for (const char* k : {"[pulse].tau_d", "[pulse].pump_shape", "[pulse].pump_t0", "[system].omega_d0", "[system].delta_d"})
            if (has(k)) c.warnings.push_back(std::string(k) + " is ignored for two levels");
        if (c.variable == ScanVariable::DeltaD || c.variable == ScanVariable::OmegaD0)
            errors.push_back("[scan].variable = " + std::string(to_string(c.variable)) + " needs [system].levels = 3");
        if (c.observable == Observable::Q3) errors.push_back("[scan].observable = q3 needs [system].levels = 3");
    }
}

}  // namespace detail

/// Parses and validates a configuration. Throws ConfigError listing every
/// syntax error (with its line) and every semantic error (with its key path).
inline RunConfig parse_config(std::string_view text) {
    RunConfig cfg;
    std::vector<std::string> errors;
    std::vector<std::string> seen;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    const auto& keys = detail::key_table();
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find_first_of("#;");
        const auto line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto at = "line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') {
                errors.push_back(at + "unterminated section header");
                continue;
            }
            section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            static constexpr std::string_view kSections[] = {"noise", "pulse", "system", "ensemble", "scan"};
            if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections))
                errors.push_back(at + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back(at + "expected 'key = value'");
            continue;
        }
        if (section.empty()) {
            errors.push_back(at + "key outside of a section");
            continue;
        }
        const auto key = detail::trim(std::string_view(line).substr(0, eq));
        const auto value = detail::trim(std::string_view(line).substr(eq + 1));
        const auto path = detail::key_path(section, key);
        const auto def = std::find_if(keys.begin(), keys.end(),
                                      [&](const detail::KeyDef& k) { return k.section == section && k.name == key; });
        if (def == keys.end()) {
            errors.push_back(at + "unknown key " + path);
            continue;
        }
        if (std::find(seen.begin(), seen.end(), path) != seen.end()) {
            errors.push_back(at + path + " given twice");
            continue;
        }
        seen.push_back(path);
        auto vals = detail::split_list(value);
        detail::KeyContext ctx{cfg, errors, path, line_no};
        if (std::any_of(vals.begin(), vals.end(), [](const std::string& v) { return v.empty(); })) {
            ctx.error("empty value");
            continue;
        }
        if (vals.size() > 1 && !def->series && path != "[scan].values" && path != "[pulse].times") {
            ctx.error("takes a single value");
            continue;
        }
        def->apply(ctx, vals);
    }
    detail::check_document(cfg, seen, errors);
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

/// Expands list-valued keys into one drive recipe per combination.
inline std::vector<Series> expand_series(const RunConfig& c) {
    struct Axis {
        std::string name;
        std::size_t size;
    };
    const auto models = c.models();
    const auto& noise_values = c.chi.empty() ? c.sigma_omega : c.chi;
    const std::vector<double> none{0.0};
    const auto& noise_axis = noise_values.empty() ? none : noise_values;
    const auto& tau_s = c.tau_s.empty() ? none : c.tau_s;
    const auto& tau_d = c.levels == 3 && !c.tau_d.empty() ? c.tau_d : none;
    const auto& omega_s0 = c.omega_s0.empty() ? none : c.omega_s0;
    const auto& omega_d0 = c.levels == 3 && !c.omega_d0.empty() ? c.omega_d0 : none;
    const auto& delta_d = c.levels == 3 ? c.delta_d : none;
    const auto& gamma3 = c.levels == 3 ? c.gamma3 : none;

    const std::vector<Axis> axes = {
        {"model", models.size()},         {"kind", c.kind.size()},
        {c.chi.empty() ? "sigma_omega" : "chi", noise_axis.size()},
        {"tau_s", tau_s.size()},          {"tau_d", tau_d.size()},
        {"gamma3", gamma3.size()},        {"omega_s0", omega_s0.size()},
        {"omega_d0", omega_d0.size()},    {"delta_s", c.delta_s.size()},
        {"delta_d", delta_d.size()},
    };
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.size;

    std::vector<Series> out;
    std::vector<std::size_t> idx(axes.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
        std::size_t rem = n;
        for (std::size_t a = axes.size(); a-- > 0;) {
            idx[a] = rem % axes[a].size;
            rem /= axes[a].size;
        }
        Series s;
        auto& r = s.recipe;
        r.system.levels = c.levels;
        r.system.gamma2 = c.gamma2;
        r.system.gamma3 = c.levels == 3 ? gamma3[idx[5]] : 0.0;
        r.system.omega_s0 = omega_s0[idx[6]];
        r.system.omega_d0 = c.levels == 3 ? omega_d0[idx[7]] : 0.0;
        r.system.delta_s = c.delta_s[idx[8]];
        r.system.delta_d = c.levels == 3 ? delta_d[idx[9]] : 0.0;

        switch (c.shape) {
        case EnvelopeKind::Gaussian: r.probe = EnvelopeSpec::gaussian(tau_s[idx[3]], c.t0, c.t_final); break;
        case EnvelopeKind::Profile2:
            r.probe = c.probe_fwhm ? profile2_with_fwhm(c.t0, c.t_final, *c.probe_fwhm)
                                   : EnvelopeSpec::profile2(c.t0, c.t_final);
            break;
        case EnvelopeKind::Flat: r.probe = EnvelopeSpec::flat(c.t_final); break;
        }
        if (c.levels == 3) {
            r.pump = c.pump_shape == EnvelopeKind::Flat
                         ? EnvelopeSpec::flat(c.t_final)
                         : EnvelopeSpec::gaussian(tau_d[idx[4]], c.pump_t0.value_or(c.t0), c.t_final);
        }

        r.model = models[idx[0]];
        r.psd.kind = c.kind[idx[1]];
        const double noise_value = noise_axis[idx[2]];
        if (noise_value == 0.0 && !noise_values.empty()) r.model = FieldModel::FourierLimited;
        if (r.model != FieldModel::FourierLimited && !noise_values.empty()) {
            set_chi(r, c.chi.empty() ? noise_value * r.probe_tau() : noise_value);
        } else if (r.model != FieldModel::FourierLimited) {
            set_chi(r, 1.0);  // placeholder for chi scans, replaced per point
        }
        if (c.grid_points) r.grid = FrequencyGrid{*c.grid_points, *c.grid_spacing};

        for (std::size_t a = 0; a < axes.size(); ++a) {
            if (axes[a].size < 2) continue;
            if (!s.label.empty()) s.label += ' ';
            s.label += axes[a].name + '=';
            switch (a) {
            case 0: s.label += to_string(models[idx[0]]); break;
            case 1: s.label += detail::kind_name(c.kind[idx[1]]); break;
            case 2: s.label += format_number(noise_axis[idx[2]]); break;
            case 3: s.label += format_number(tau_s[idx[3]]); break;
            case 4: s.label += format_number(tau_d[idx[4]]); break;
            case 5: s.label += format_number(gamma3[idx[5]]); break;
            case 6: s.label += format_number(omega_s0[idx[6]]); break;
            case 7: s.label += format_number(omega_d0[idx[7]]); break;
            case 8: s.label += format_number(c.delta_s[idx[8]]); break;
            case 9: s.label += format_number(delta_d[idx[9]]); break;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Full validation of every series (envelopes, noise grids); returns warnings.
inline std::vector<std::string> validate_series(const std::vector<Series>& series) {
    std::vector<std::string> errors, warnings;
    for (const auto& s : series) {
        const std::string tag = s.label.empty() ? "" : "series " + s.label + ": ";
        try {
            for (const auto& w : s.recipe.validate())
                if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
        } catch (const ConfigError& e) {
            for (const auto& m : e.messages()) errors.push_back(tag + m);
        }
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return warnings;
}

inline ScanSpec scan_for(const RunConfig& c, const Series& s) {
    return ScanSpec{c.variable, c.scan_grid(), s.recipe};
}

}  // namespace sasefel
