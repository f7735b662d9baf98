#pragma once

// Stationary complex Gaussian colored noise synthesized in the frequency
// domain, plus the closed-form coherence properties of the supported spectra.
//
// Frequencies are measured from the carrier, and all quantities are in units
// of the Auger width (Gamma_2 = 1) unless stated otherwise.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sasefel/error.hpp"
#include "sasefel/fft.hpp"
#include "sasefel/rng.hpp"

namespace sasefel {

enum class PsdKind { Lorentzian, Gaussian, Sech };

inline std::string_view to_string(PsdKind kind) {
    switch (kind) {
    case PsdKind::Lorentzian: return "lorentzian";
    case PsdKind::Gaussian: return "gaussian";
    case PsdKind::Sech: return "sech";
    }
    return "?";
}

inline std::optional<PsdKind> parse_psd_kind(std::string_view s) {
    if (s == "lorentzian" || s == "exponential" || s == "exp") return PsdKind::Lorentzian;
    if (s == "gaussian" || s == "gauss") return PsdKind::Gaussian;
    if (s == "sech") return PsdKind::Sech;
    return std::nullopt;
}

/// Power spectral density of the noise: a unit-area line of the given family.
struct PsdSpec {
    PsdKind kind = PsdKind::Gaussian;
    double sigma_omega = 1.0;

    void validate() const {
        if (!(sigma_omega > 0.0) || !std::isfinite(sigma_omega))
            throw ConfigError("sigma_omega must be positive and finite, got " + std::to_string(sigma_omega));
    }
};

/// Spectral density at offset omega from the carrier.
inline double psd_value(const PsdSpec& spec, double omega) {
    using std::numbers::pi;
    const double s = spec.sigma_omega;
    const double x = omega / s;
    switch (spec.kind) {
    case PsdKind::Lorentzian: return 1.0 / (s * pi * (x * x + 1.0));
    case PsdKind::Gaussian: return std::exp(-0.5 * x * x) / (s * std::sqrt(2.0 * pi));
    case PsdKind::Sech: return 1.0 / (s * std::cosh(pi * x));
    }
    return 0.0;
}

/// Modulus of the degree of first-order coherence at delay v.
inline double theoretical_g1(const PsdSpec& spec, double v) {
    const double x = std::abs(v) * spec.sigma_omega;
    switch (spec.kind) {
    case PsdKind::Lorentzian: return std::exp(-x);
    case PsdKind::Gaussian: return std::exp(-0.5 * x * x);
    case PsdKind::Sech: return 1.0 / std::cosh(0.5 * x);
    }
    return 0.0;
}

/// T_c = integral of |g1(v)|^2 over all delays.
inline double coherence_time(const PsdSpec& spec) {
    switch (spec.kind) {
    case PsdKind::Lorentzian: return 1.0 / spec.sigma_omega;
    case PsdKind::Gaussian: return std::sqrt(std::numbers::pi) / spec.sigma_omega;
    case PsdKind::Sech: return 4.0 / spec.sigma_omega;
    }
    return 0.0;
}

/// FWHM of the spectral density.
inline double noise_bandwidth(const PsdSpec& spec) {
    switch (spec.kind) {
    case PsdKind::Lorentzian: return 2.0 * spec.sigma_omega;
    case PsdKind::Gaussian: return 2.0 * spec.sigma_omega * std::sqrt(2.0 * std::numbers::ln2);
    case PsdKind::Sech: return 2.0 * spec.sigma_omega * std::acosh(2.0) / std::numbers::pi;
    }
    return 0.0;
}

/// Uniform frequency grid of n_points with spacing delta_omega. The conjugate
/// time grid has step 2*pi/span and covers one period 2*pi/delta_omega.
struct FrequencyGrid {
    std::size_t n_points = 0;
    double delta_omega = 0.0;

    double span() const { return static_cast<double>(n_points) * delta_omega; }
    double time_step() const { return 2.0 * std::numbers::pi / span(); }
    double window() const { return 2.0 * std::numbers::pi / delta_omega; }
    double omega(std::size_t k) const {
        return static_cast<double>(fft::signed_index(k, n_points)) * delta_omega;
    }
};

inline void validate_grid(const PsdSpec& spec, const FrequencyGrid& grid) {
    spec.validate();
    std::vector<std::string> errors;
    if (grid.n_points < 2 || grid.n_points % 2 != 0)
        errors.push_back("frequency grid needs a positive even number of points, got " +
                         std::to_string(grid.n_points));
    if (!(grid.delta_omega > 0.0)) errors.push_back("frequency grid step must be positive");
    if (errors.empty()) {
        if (grid.span() < 16.0 * spec.sigma_omega)
            errors.push_back("frequency grid too narrow: span " + std::to_string(grid.span()) +
                             " < 16 sigma_omega");
        if (grid.time_step() > coherence_time(spec) / 20.0 * (1.0 + 1e-12))
            errors.push_back("frequency grid too narrow for the coherence time: dt " +
                             std::to_string(grid.time_step()) + " > T_c/20");
        if (grid.delta_omega > spec.sigma_omega)
            errors.push_back("frequency grid too coarse: step " + std::to_string(grid.delta_omega) +
                             " > sigma_omega");
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
}

/// Grid for a simulation window [0, t_final].
///
/// The period is 4 t_final (doubled further until delta_omega <= sigma_omega/2),
/// so t_final falls on a sample. The span is the next power-of-two multiple of
/// delta_omega covering max(32 sigma_omega, 16 pi / t_final, 40 pi / T_c, min_span);
/// the T_c term keeps the time step at or below T_c/20.
inline FrequencyGrid default_grid(const PsdSpec& spec, double t_final, double min_span = 0.0) {
    spec.validate();
    if (!(t_final > 0.0)) throw ConfigError("t_final must be positive");
    using std::numbers::pi;
    double dw = pi / (2.0 * t_final);
    while (dw > 0.5 * spec.sigma_omega) dw *= 0.5;
    const double need = std::max({32.0 * spec.sigma_omega, 16.0 * pi / t_final,
                                  40.0 * pi / coherence_time(spec), min_span});
    const auto n = fft::next_pow2(static_cast<std::size_t>(std::ceil(need / dw - 1e-9)));
    return FrequencyGrid{std::max<std::size_t>(n, 2), dw};
}

/// One realization of the noise on the time grid t_k = k dt, k = 0..N-1.
struct NoiseTrace {
    FrequencyGrid grid;
    std::vector<std::complex<double>> samples;
    bool unit_modulus = false;  ///< interpolate on the unit circle (phase-only fields)

    double time_step() const { return grid.time_step(); }
    double duration() const { return time_step() * static_cast<double>(samples.size() - 1); }

    /// Linear interpolation between samples; t must lie inside the sampled range.
    std::complex<double> at(double t) const {
        const double dt = time_step();
        double pos = t / dt;
        auto k = static_cast<std::size_t>(std::floor(pos));
        if (k + 1 >= samples.size()) {
            if (k + 1 == samples.size() && pos - static_cast<double>(k) < 1e-9) return samples.back();
            throw ConfigError("time " + std::to_string(t) + " outside the noise window");
        }
        const double frac = pos - static_cast<double>(k);
        if (frac == 0.0) return samples[k];
        const auto z = samples[k] + frac * (samples[k + 1] - samples[k]);
        return unit_modulus && std::abs(z) > 0.0 ? z / std::abs(z) : z;
    }
};

/// Spectral density folded onto one grid span S, sum_m P(omega + m S): the
/// spectrum of the process sampled at dt = 2 pi / S. Sampled this way the
/// noise has the exact g1 at every lag k dt, even for the slow Lorentzian tail.
inline double folded_psd(const PsdSpec& spec, double omega, double span) {
    if (spec.kind == PsdKind::Lorentzian) {
        const double dt = 2.0 * std::numbers::pi / span;
        const double a = spec.sigma_omega * dt;
        return std::sinh(a) / (span * (std::cosh(a) - std::cos(omega * dt)));
    }
    double s = 0.0;
    for (int m = -4; m <= 4; ++m) s += psd_value(spec, omega + m * span);
    return s;
}

/// Discrete spectral weights delta_omega * P(omega_k), with P folded onto the
/// grid span, rescaled to unit sum so that <|zeta|^2> = 1 exactly on the grid.
inline std::vector<double> spectral_weights(const PsdSpec& spec, const FrequencyGrid& grid) {
    std::vector<double> w(grid.n_points);
    double total = 0.0;
    for (std::size_t k = 0; k < grid.n_points; ++k) {
        w[k] = grid.delta_omega * folded_psd(spec, grid.omega(k), grid.span());
        total += w[k];
    }
    for (auto& x : w) x /= total;
    return w;
}

/// Draws xi_k with <|xi_k|^2> = delta_omega P(omega_k), <xi_k^2> = 0, and
/// returns their unnormalized inverse DFT.
inline NoiseTrace sample_noise(const PsdSpec& spec, const FrequencyGrid& grid, RngStream& rng) {
    validate_grid(spec, grid);
    const auto weights = spectral_weights(spec, grid);
    NoiseTrace trace{grid, std::vector<std::complex<double>>(grid.n_points)};
    for (std::size_t k = 0; k < grid.n_points; ++k) {
        const double a = std::sqrt(0.5 * weights[k]);
        const double re = rng.normal();
        const double im = rng.normal();
        trace.samples[k] = {a * re, a * im};
    }
    fft::transform(trace.samples, fft::Direction::Backward);
    return trace;
}

/// Unit-modulus field e^{i phi(t)} whose phase is a Wiener process with
/// diffusion constant gamma, i.e. a Lorentzian line of FWHM gamma.
inline NoiseTrace sample_phase_diffusion(double gamma, const FrequencyGrid& grid, RngStream& rng) {
    if (!(gamma > 0.0)) throw ConfigError("phase-diffusion bandwidth must be positive");
    if (grid.n_points < 2) throw ConfigError("phase-diffusion grid needs at least two points");
    const double kick = std::sqrt(gamma * grid.time_step());
    NoiseTrace trace{grid, std::vector<std::complex<double>>(grid.n_points), true};
    double phi = 2.0 * std::numbers::pi * rng.uniform();
    for (auto& z : trace.samples) {
        z = std::polar(1.0, phi);
        phi += kick * rng.normal();
    }
    return trace;
}

/// Grid for phase-diffusion traces: the one a Lorentzian spectrum of the same FWHM would use.
inline FrequencyGrid phase_diffusion_grid(double gamma, double t_final) {
    return default_grid(PsdSpec{PsdKind::Lorentzian, 0.5 * gamma}, t_final);
}

struct G1Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Estimate of |g1(v)| from an ensemble of traces sharing one grid.
///
/// The lagged product zeta(t) zeta*(t+v) is averaged over realizations and over
/// all t with t+v inside the trace, then normalized by
/// sqrt(<|zeta(t)|^2><|zeta(t+v)|^2>). The error bar is the delta-method
/// standard error from per-trace contributions.
inline G1Estimate empirical_g1_stats(std::span<const NoiseTrace> traces, double v) {
    if (traces.size() < 2) throw InsufficientDataError("empirical_g1 needs at least two traces");
    const auto& grid = traces.front().grid;
    const std::size_t len = traces.front().samples.size();
    for (const auto& tr : traces)
        if (tr.grid.n_points != grid.n_points || tr.grid.delta_omega != grid.delta_omega ||
            tr.samples.size() != len)
            throw ConfigError("empirical_g1: traces do not share one grid");
    const double dt = grid.time_step();
    const double lag_real = std::abs(v) / dt;
    const auto lag = static_cast<std::size_t>(std::llround(lag_real));
    if (std::abs(lag_real - static_cast<double>(lag)) > 1e-6)
        throw ConfigError("empirical_g1: delay must be an integer multiple of the time step");
    if (lag >= len) throw ConfigError("empirical_g1: delay exceeds the trace length");

    const std::size_t count = len - lag;
    const auto n = traces.size();
    std::vector<std::complex<double>> c(n);
    std::vector<double> pa(n), pb(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& z = traces[i].samples;
        double re = 0.0, im = 0.0, sa = 0.0, sb = 0.0;
        for (std::size_t t = 0; t < count; ++t) {
            const double a = z[t].real(), b = z[t].imag();
            const double x = z[t + lag].real(), y = z[t + lag].imag();
            re += a * x + b * y;
            im += b * x - a * y;
            sa += a * a + b * b;
            sb += x * x + y * y;
        }
        const double inv = 1.0 / static_cast<double>(count);
        c[i] = {re * inv, im * inv};
        pa[i] = sa * inv;
        pb[i] = sb * inv;
    }
    std::complex<double> cm{0.0, 0.0};
    double pam = 0.0, pbm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cm += c[i];
        pam += pa[i];
        pbm += pb[i];
    }
    const double dn = static_cast<double>(n);
    cm /= dn;
    pam /= dn;
    pbm /= dn;
    const double norm = std::sqrt(pam * pbm);
    if (lag == 0) return {1.0, 0.0};
    const double g = std::abs(cm) / norm;

    // Linearization: dg = Re(e^{-i theta} dC)/norm - g/2 (dPa/Pa + dPb/Pb).
    const std::complex<double> phase = std::abs(cm) > 0.0 ? std::conj(cm) / std::abs(cm) : 1.0;
    double mean_u = 0.0;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = (phase * c[i]).real() / norm - 0.5 * g * (pa[i] / pam + pb[i] / pbm);
        mean_u += u[i];
    }
    mean_u /= dn;
    double var = 0.0;
    for (double x : u) var += (x - mean_u) * (x - mean_u);
    var /= (dn - 1.0);
    return {g, std::sqrt(var / dn)};
}

inline double empirical_g1(std::span<const NoiseTrace> traces, double v) {
    return empirical_g1_stats(traces, v).value;
}

}  // namespace sasefel
