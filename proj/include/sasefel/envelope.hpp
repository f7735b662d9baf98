#pragma once

// Deterministic intensity envelopes f(t) with unit peak.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sasefel/error.hpp"

namespace sasefel {

enum class EnvelopeKind { Gaussian, Profile2, Flat };

inline std::string_view to_string(EnvelopeKind kind) {
    switch (kind) {
    case EnvelopeKind::Gaussian: return "gaussian";
    case EnvelopeKind::Profile2: return "profile2";
    case EnvelopeKind::Flat: return "flat";
    }
    return "?";
}

inline std::optional<EnvelopeKind> parse_envelope_kind(std::string_view s) {
    if (s == "gaussian") return EnvelopeKind::Gaussian;
    if (s == "profile2") return EnvelopeKind::Profile2;
    if (s == "flat") return EnvelopeKind::Flat;
    return std::nullopt;
}

struct GaussianComponent {
    double weight;
    double center;
    double width;
};

struct EnvelopeSpec {
    EnvelopeKind kind = EnvelopeKind::Gaussian;
    double tau = 1.0;       ///< Gaussian duration, exp[-(t-t0)^2/tau^2]
    double t0 = 16.0;       ///< center
    double t_final = 32.0;  ///< end of the simulation window
    std::vector<GaussianComponent> components;  ///< Profile2 only
    double scale = 1.0;     ///< Profile2 only: 1/peak of the raw component sum

    static EnvelopeSpec gaussian(double tau, double t0, double t_final) {
        return EnvelopeSpec{EnvelopeKind::Gaussian, tau, t0, t_final, {}, 1.0};
    }

    /// Normalized superposition of Gaussians. The default components give an
    /// asymmetric multi-hump profile around t0.
    static EnvelopeSpec profile2(double t0, double t_final, std::vector<GaussianComponent> comps = {}) {
        if (comps.empty()) comps = {{1.0, t0 - 2.0, 1.5}, {0.7, t0, 2.0}, {0.5, t0 + 2.5, 1.2}};
        EnvelopeSpec e{EnvelopeKind::Profile2, 0.0, t0, t_final, std::move(comps), 1.0};
        e.normalize();
        return e;
    }

    /// Unit plateau on [0, t_final] with raised-cosine ramps of 5% of the window at each end.
    static EnvelopeSpec flat(double t_final) {
        return EnvelopeSpec{EnvelopeKind::Flat, 0.0, 0.5 * t_final, t_final, {}, 1.0};
    }

    double raw_profile2(double t) const {
        double s = 0.0;
        for (const auto& c : components) {
            const double x = (t - c.center) / c.width;
            s += c.weight * std::exp(-x * x);
        }
        return s;
    }

    /// Sets `scale` so that the Profile2 maximum is 1 (dense scan plus golden-section refinement).
    void normalize() {
        if (kind != EnvelopeKind::Profile2) return;
        const int n = 4000;
        double best_t = 0.0, best = -1.0;
        for (int i = 0; i <= n; ++i) {
            const double t = t_final * i / n;
            const double v = raw_profile2(t);
            if (v > best) {
                best = v;
                best_t = t;
            }
        }
        double a = std::max(0.0, best_t - t_final / n), b = std::min(t_final, best_t + t_final / n);
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int it = 0; it < 80; ++it) {
            const double c = b - g * (b - a), d = a + g * (b - a);
            if (raw_profile2(c) > raw_profile2(d)) b = d;
            else a = c;
        }
        scale = 1.0 / std::max(best, raw_profile2(0.5 * (a + b)));
    }
};

inline double envelope_eval(const EnvelopeSpec& env, double t) {
    switch (env.kind) {
    case EnvelopeKind::Gaussian: {
        const double x = (t - env.t0) / env.tau;
        return std::exp(-x * x);
    }
    case EnvelopeKind::Profile2: return env.scale * env.raw_profile2(t);
    case EnvelopeKind::Flat: {
        const double ramp = 0.05 * env.t_final;
        if (t <= 0.0 || t >= env.t_final) return 0.0;
        if (t < ramp) return 0.5 * (1.0 - std::cos(std::numbers::pi * t / ramp));
        if (t > env.t_final - ramp) return 0.5 * (1.0 - std::cos(std::numbers::pi * (env.t_final - t) / ramp));
        return 1.0;
    }
    }
    return 0.0;
}

/// FWHM of the envelope measured on a fine grid over [0, t_final].
inline double envelope_fwhm(const EnvelopeSpec& env) {
    if (env.kind == EnvelopeKind::Gaussian) return 2.0 * std::sqrt(std::numbers::ln2) * env.tau;
    const int n = 20000;
    const double dt = env.t_final / n;
    double first = -1.0, last = -1.0;
    double prev = envelope_eval(env, 0.0);
    for (int i = 1; i <= n; ++i) {
        const double t = i * dt;
        const double v = envelope_eval(env, t);
        if (prev < 0.5 && v >= 0.5 && first < 0.0) first = t - dt + (0.5 - prev) / (v - prev) * dt;
        if (prev >= 0.5 && v < 0.5) last = t - dt + (prev - 0.5) / (prev - v) * dt;
        prev = v;
    }
    if (first < 0.0 || last < 0.0) return env.t_final;
    return last - first;
}

/// Profile2 stretched about t0 so that its FWHM equals `target`.
inline EnvelopeSpec profile2_with_fwhm(double t0, double t_final, double target) {
    auto e = EnvelopeSpec::profile2(t0, t_final);
    const double a = target / envelope_fwhm(e);
    for (auto& c : e.components) {
        c.center = t0 + a * (c.center - t0);
        c.width *= a;
    }
    e.normalize();
    return e;
}

/// Hard errors throw; soft violations (edges not fully quiet) come back as warnings.
inline std::vector<std::string> validate_envelope(const EnvelopeSpec& env) {
    std::vector<std::string> errors;
    if (!(env.t_final > 0.0)) errors.push_back("t_final must be positive");
    if (env.kind == EnvelopeKind::Gaussian && !(env.tau > 0.0)) errors.push_back("tau must be positive");
    if (env.kind == EnvelopeKind::Profile2) {
        if (env.components.empty()) errors.push_back("profile2 needs at least one component");
        for (const auto& c : env.components)
            if (!(c.width > 0.0) || !(c.weight > 0.0))
                errors.push_back("profile2 components need positive weight and width");
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
    std::vector<std::string> warnings;
    const double f0 = envelope_eval(env, 0.0), f1 = envelope_eval(env, env.t_final);
    if (f0 >= 1e-4 || f1 >= 1e-4)
        warnings.push_back("envelope does not vanish at the window edges (f(0)=" + std::to_string(f0) +
                           ", f(T_f)=" + std::to_string(f1) + ")");
    return warnings;
}

}  // namespace sasefel
