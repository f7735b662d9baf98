#pragma once

// Chaotic pulses: colored noise under a deterministic envelope, and the
// statistics used to validate them (intensity moments and distribution,
// pulse energy fluctuations, energy spectral density).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "sasefel/envelope.hpp"
#include "sasefel/error.hpp"
#include "sasefel/fft.hpp"
#include "sasefel/noise.hpp"
#include "sasefel/numeric.hpp"
#include "sasefel/rng.hpp"

namespace sasefel {

/// Complex field samples E(t_k) = zeta(t_k) sqrt(I0 f(t_k)), t_k = k dt on [0, t_final].
struct StochasticPulse {
    double time_step = 0.0;
    double peak_intensity = 1.0;
    EnvelopeSpec envelope;
    std::vector<std::complex<double>> amplitude;

    double time(std::size_t k) const { return time_step * static_cast<double>(k); }
    double intensity(std::size_t k) const { return std::norm(amplitude[k]); }

    std::size_t index_of(double t) const {
        const double pos = t / time_step;
        if (pos < -1e-9 || pos > static_cast<double>(amplitude.size() - 1) + 1e-9)
            throw ConfigError("time " + std::to_string(t) + " outside the pulse window");
        return static_cast<std::size_t>(std::llround(std::max(0.0, pos)));
    }
};

/// Deterministic unit trace on a grid; turns make_pulse into a Fourier-limited pulse.
inline NoiseTrace constant_trace(const FrequencyGrid& grid) {
    return NoiseTrace{grid, std::vector<std::complex<double>>(grid.n_points, {1.0, 0.0})};
}

inline StochasticPulse make_pulse(const EnvelopeSpec& env, double peak_intensity, const NoiseTrace& noise) {
    validate_envelope(env);
    if (!(peak_intensity >= 0.0)) throw ConfigError("peak intensity must be non-negative");
    const double dt = noise.time_step();
    const double steps = env.t_final / dt;
    const auto last = static_cast<std::size_t>(std::llround(steps));
    if (std::abs(steps - static_cast<double>(last)) > 1e-6)
        throw ConfigError("noise grid does not place a sample at t_final");
    if (last >= noise.samples.size()) throw ConfigError("noise window shorter than t_final");

    StochasticPulse p{dt, peak_intensity, env, std::vector<std::complex<double>>(last + 1)};
    for (std::size_t k = 0; k <= last; ++k) {
        const double f = envelope_eval(env, dt * static_cast<double>(k));
        p.amplitude[k] = noise.samples[k] * std::sqrt(peak_intensity * f);
    }
    return p;
}

/// Constant-modulus pulse with Wiener phase: Lorentzian line of FWHM gamma, no intensity noise.
inline StochasticPulse make_pdm_pulse(const EnvelopeSpec& env, double peak_intensity, double gamma,
                                      RngStream& rng) {
    const auto grid = phase_diffusion_grid(gamma, env.t_final);
    return make_pulse(env, peak_intensity, sample_phase_diffusion(gamma, grid, rng));
}

namespace detail {

inline void require_common_grid(std::span<const StochasticPulse> pulses, std::size_t min_count) {
    if (pulses.size() < min_count)
        throw InsufficientDataError("need at least " + std::to_string(min_count) + " pulses, got " +
                                    std::to_string(pulses.size()));
    for (const auto& p : pulses)
        if (p.amplitude.size() != pulses.front().amplitude.size() ||
            p.time_step != pulses.front().time_step)
            throw ConfigError("pulses do not share one time grid");
}

}  // namespace detail

/// Ensemble mean intensity <I(t_k)> on the pulse grid.
inline std::vector<double> mean_intensity_profile(std::span<const StochasticPulse> pulses) {
    detail::require_common_grid(pulses, 1);
    std::vector<double> m(pulses.front().amplitude.size(), 0.0);
    for (const auto& p : pulses)
        for (std::size_t k = 0; k < m.size(); ++k) m[k] += p.intensity(k);
    for (auto& x : m) x /= static_cast<double>(pulses.size());
    return m;
}

struct MomentRatio {
    double time;
    int order;
    double ratio;  ///< <I^r>/<I>^r
};

struct MomentRatios {
    std::vector<MomentRatio> rows;
    std::vector<std::string> warnings;
};

/// Empirical <I^r>/<I>^r for r = 1..r_max at each requested time. Times where
/// the mean intensity is below 1e-6 of its peak are skipped with a warning.
inline MomentRatios intensity_moment_ratios(std::span<const StochasticPulse> pulses, std::span<const double> times,
                                            int r_max) {
    detail::require_common_grid(pulses, 2);
    MomentRatios out;
    const auto profile = mean_intensity_profile(pulses);
    const double peak = *std::max_element(profile.begin(), profile.end());
    const double n = static_cast<double>(pulses.size());
    for (double t : times) {
        const auto k = pulses.front().index_of(t);
        std::vector<double> moments(static_cast<std::size_t>(r_max) + 1, 0.0);
        for (const auto& p : pulses) {
            const double i = p.intensity(k);
            double pw = 1.0;
            for (int r = 1; r <= r_max; ++r) {
                pw *= i;
                moments[static_cast<std::size_t>(r)] += pw;
            }
        }
        for (auto& m : moments) m /= n;
        const double mean = moments[1];
        if (!(mean > 1e-6 * peak)) {
            out.warnings.push_back("t=" + std::to_string(t) + ": mean intensity too small, ratio ill-conditioned");
            continue;
        }
        for (int r = 1; r <= r_max; ++r)
            out.rows.push_back({pulses.front().time(k), r,
                                r == 1 ? 1.0 : moments[static_cast<std::size_t>(r)] / std::pow(mean, r)});
    }
    return out;
}

struct IntensityPdfCheck {
    double max_deviation = 0.0;  ///< sup |F_emp(x) - (1 - e^{-x})| with x = I/<I>
    double median_ratio = 0.0;   ///< median of I/<I>
    double mean_intensity = 0.0;
};

/// Compares the distribution of I(t)/<I(t)> with the negative exponential law.
inline IntensityPdfCheck intensity_pdf_check(std::span<const StochasticPulse> pulses, double t) {
    detail::require_common_grid(pulses, 2);
    const auto k = pulses.front().index_of(t);
    std::vector<double> x(pulses.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < pulses.size(); ++i) {
        x[i] = pulses[i].intensity(k);
        mean += x[i];
    }
    mean /= static_cast<double>(x.size());
    if (!(mean > 0.0)) throw ConfigError("mean intensity vanishes at t=" + std::to_string(t));
    for (auto& v : x) v /= mean;
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double dev = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double model = 1.0 - std::exp(-x[i]);
        dev = std::max({dev, std::abs(static_cast<double>(i + 1) / n - model),
                        std::abs(static_cast<double>(i) / n - model)});
    }
    const std::size_t mid = x.size() / 2;
    const double median = x.size() % 2 ? x[mid] : 0.5 * (x[mid - 1] + x[mid]);
    return {dev, median, mean};
}

/// Mode-number value returned when the pulse energies do not fluctuate.
inline constexpr double kDegenerateModeCount = 1e12;

struct EnergyStats {
    std::vector<double> energies;
    double mean = 0.0;
    double mode_count = 0.0;            ///< M = <W>^2 / var(W)
    double gamma_cdf_deviation = 0.0;   ///< sup |F_emp - GammaCDF(M)| of W/<W>; NaN when degenerate
};

inline EnergyStats pulse_energy_stats(std::span<const StochasticPulse> pulses) {
    detail::require_common_grid(pulses, 2);
    EnergyStats s;
    s.energies.reserve(pulses.size());
    std::vector<double> inten(pulses.front().amplitude.size());
    for (const auto& p : pulses) {
        for (std::size_t k = 0; k < inten.size(); ++k) inten[k] = p.intensity(k);
        s.energies.push_back(numeric::trapezoid(inten, p.time_step));
    }
    const double n = static_cast<double>(pulses.size());
    for (double w : s.energies) s.mean += w;
    s.mean /= n;
    double var = 0.0;
    for (double w : s.energies) var += (w - s.mean) * (w - s.mean);
    var /= n;
    if (!(var > 1e-24 * s.mean * s.mean)) {
        s.mode_count = kDegenerateModeCount;
        s.gamma_cdf_deviation = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    s.mode_count = s.mean * s.mean / var;
    std::vector<double> x(s.energies);
    for (auto& v : x) v /= s.mean;
    std::sort(x.begin(), x.end());
    const double m = s.mode_count;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double model = boost::math::gamma_p(m, m * x[i]);
        s.gamma_cdf_deviation = std::max({s.gamma_cdf_deviation, std::abs(static_cast<double>(i + 1) / n - model),
                                          std::abs(static_cast<double>(i) / n - model)});
    }
    return s;
}

struct EnergySpectrum {
    std::vector<double> omega;    ///< ascending, centered on the carrier
    std::vector<double> density;  ///< unit area
    double fwhm = 0.0;
};

/// Ensemble-averaged |FT E(omega)|^2, normalized to unit area. Pulses are
/// zero-padded to `pad_factor` times their length (rounded to a power of two)
/// to refine the frequency step; the FWHM is interpolated linearly.
inline EnergySpectrum energy_spectral_density(std::span<const StochasticPulse> pulses, std::size_t pad_factor = 8) {
    detail::require_common_grid(pulses, 1);
    const std::size_t len = pulses.front().amplitude.size();
    const std::size_t n = fft::next_pow2(len * std::max<std::size_t>(pad_factor, 1));
    const double dt = pulses.front().time_step;
    const double dw = 2.0 * std::numbers::pi / (dt * static_cast<double>(n));

    std::vector<double> acc(n, 0.0);
    std::vector<std::complex<double>> buf(n);
    for (const auto& p : pulses) {
        std::fill(buf.begin(), buf.end(), std::complex<double>{});
        std::copy(p.amplitude.begin(), p.amplitude.end(), buf.begin());
        // E(t) e^{-i omega t} convention: a positive carrier offset maps to positive omega.
        fft::transform(buf, fft::Direction::Forward);
        for (std::size_t k = 0; k < n; ++k) acc[k] += std::norm(buf[k]);
    }
    EnergySpectrum es;
    es.omega.resize(n);
    es.density.resize(n);
    double area = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = (j + n / 2) % n;  // fftshift
        es.omega[j] = static_cast<double>(fft::signed_index(k, n)) * dw;
        es.density[j] = acc[k];
        area += acc[k];
    }
    area *= dw;
    if (area > 0.0)
        for (auto& d : es.density) d /= area;
    es.fwhm = numeric::fwhm(es.omega, es.density);
    return es;
}

struct BandwidthPrediction {
    double chi = 0.0;            ///< sigma_omega * tau_s
    double fourier_limit = 0.0;  ///< 2 sqrt(ln 2) / tau_s
    double bandwidth = 0.0;      ///< fourier_limit * sqrt(1 + 2 chi^2)
};

/// Spectral FWHM of a Gaussian pulse of duration tau_s with Gaussian-correlated noise.
inline BandwidthPrediction bandwidth_formula(double tau_s, double sigma_omega) {
    if (!(tau_s > 0.0) || sigma_omega < 0.0) throw ConfigError("bandwidth_formula: need tau_s > 0, sigma_omega >= 0");
    BandwidthPrediction b;
    b.chi = sigma_omega * tau_s;
    b.fourier_limit = 2.0 * std::sqrt(std::numbers::ln2) / tau_s;
    b.bandwidth = b.fourier_limit * std::sqrt(1.0 + 2.0 * b.chi * b.chi);
    return b;
}

struct PulseStats {
    std::vector<double> mean_profile;
    MomentRatios moment_ratios;
    std::vector<double> energy_samples;
    double mode_count = 0.0;
    EnergySpectrum esd;
};

inline PulseStats pulse_statistics(std::span<const StochasticPulse> pulses, std::span<const double> times,
                                   int r_max = 5) {
    PulseStats s;
    s.mean_profile = mean_intensity_profile(pulses);
    s.moment_ratios = intensity_moment_ratios(pulses, times, r_max);
    auto e = pulse_energy_stats(pulses);
    s.energy_samples = std::move(e.energies);
    s.mode_count = e.mode_count;
    s.esd = energy_spectral_density(pulses);
    return s;
}

}  // namespace sasefel
