#pragma once

// Density-matrix equations for a single (two-level) and double (three-level
// ladder) Auger resonance in the rotating-wave approximation, integrated with
// fixed-step classical RK4 while accumulating the Auger yields
// Q_j = Gamma_j * integral sigma_jj dt.
//
// The drive is sampled on the half-step grid t = j*h/2, j = 0..2n, so all RK4
// stage times are sample points. Many detunings can share one drive: the batch
// integrators advance one "lane" per (delta_s, delta_d) pair in lock step.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sasefel/envelope.hpp"
#include "sasefel/error.hpp"
#include "sasefel/noise.hpp"

namespace sasefel {

inline constexpr double kDefaultFinalTime = 32.0;
inline constexpr double kConservationTolerance = 1e-6;
inline constexpr double kPositivityTolerance = 1e-8;

/// Atomic parameters in units of Gamma_2.
struct SystemSpec {
    int levels = 2;
    double gamma2 = 1.0;
    double gamma3 = 0.0;
    double omega_s0 = 0.0;  ///< peak Rabi frequency, |1> <-> |2>
    double omega_d0 = 0.0;  ///< peak Rabi frequency, |2> <-> |3>
    double delta_s = 0.0;   ///< omega_21 - omega_s
    double delta_d = 0.0;   ///< omega_32 - omega_d

    // Coherence damping Gamma_ij = (Gamma_i + Gamma_j)/2 with Gamma_1 = 0.
    double gamma12() const { return 0.5 * gamma2; }
    double gamma23() const { return 0.5 * (gamma2 + gamma3); }
    double gamma13() const { return 0.5 * gamma3; }

    void validate() const {
        std::vector<std::string> errors;
        if (levels != 2 && levels != 3) errors.push_back("levels must be 2 or 3");
        if (!(gamma2 > 0.0)) errors.push_back("gamma2 must be positive");
        if (!(gamma3 >= 0.0)) errors.push_back("gamma3 must be non-negative");
        if (!(omega_s0 >= 0.0)) errors.push_back("omega_s0 must be non-negative");
        if (!(omega_d0 >= 0.0)) errors.push_back("omega_d0 must be non-negative");
        if (!std::isfinite(delta_s) || !std::isfinite(delta_d)) errors.push_back("detunings must be finite");
        if (!errors.empty()) throw ConfigError(std::move(errors));
    }
};

struct DensityState {
    double sigma11 = 1.0;
    double sigma22 = 0.0;
    double sigma33 = 0.0;
    std::complex<double> sigma12{};
    std::complex<double> sigma23{};
    std::complex<double> sigma13{};
    double q2 = 0.0;
    double q3 = 0.0;

    double conservation_defect() const { return sigma11 + sigma22 + sigma33 + q2 + q3 - 1.0; }
};

/// Rabi frequencies sampled at t = j*step/2, j = 0..2*n_steps.
struct DriveTraces {
    double step = 0.0;
    std::size_t n_steps = 0;
    std::vector<std::complex<double>> omega_s;
    std::vector<std::complex<double>> omega_d;  ///< empty for the two-level system

    double t_final() const { return step * static_cast<double>(n_steps); }
};

struct StepPlan {
    double step = 0.0;
    std::size_t n_steps = 0;
};

/// Largest admissible RK4 step: min(T_c/20, 0.02, 0.05/Omega_max), in units of 1/Gamma_2.
/// Omega_max defaults to the larger peak Rabi frequency; pass the maximum of
/// sqrt(|Omega_s(t)|^2 + |Omega_d(t)|^2) over an actual drive to account for spikes.
inline double max_step(const SystemSpec& sys, std::optional<double> coherence_time = std::nullopt,
                       std::optional<double> peak_rabi = std::nullopt) {
    double h = 0.02 / sys.gamma2;
    if (coherence_time) h = std::min(h, *coherence_time / 20.0);
    const double peak = peak_rabi ? *peak_rabi : std::max(sys.omega_s0, sys.levels == 3 ? sys.omega_d0 : 0.0);
    if (peak > 0.0) h = std::min(h, 0.05 / peak);
    return h;
}

/// Step no larger than h_max that tiles [0, t_final] and, when a noise time
/// step is given, divides it exactly so that steps never straddle a noise sample.
inline StepPlan plan_steps(double h_max, double t_final, std::optional<double> noise_dt = std::nullopt) {
    if (!(h_max > 0.0) || !(t_final > 0.0)) throw ConfigError("plan_steps: need positive step and window");
    if (noise_dt) {
        const auto m = static_cast<std::size_t>(std::ceil(*noise_dt / h_max - 1e-9));
        const double h = *noise_dt / static_cast<double>(m);
        const double steps = t_final / h;
        const auto n = static_cast<std::size_t>(std::llround(steps));
        if (std::abs(steps - static_cast<double>(n)) > 1e-6)
            throw ConfigError("noise grid is not aligned with t_final");
        return {h, n};
    }
    const auto n = static_cast<std::size_t>(std::ceil(t_final / h_max - 1e-9));
    return {t_final / static_cast<double>(n), n};
}

/// One field of the drive: envelope, peak Rabi frequency and an optional noise
/// factor. Without noise the field is Fourier-limited.
struct FieldSource {
    const EnvelopeSpec* envelope = nullptr;
    double peak_rabi = 0.0;
    const NoiseTrace* noise = nullptr;
};

namespace detail {

inline std::vector<std::complex<double>> sample_field(const FieldSource& src, const StepPlan& plan) {
    const std::size_t count = 2 * plan.n_steps + 1;
    std::vector<std::complex<double>> out(count);
    const double half = 0.5 * plan.step;
    if (src.noise && src.noise->duration() < plan.step * static_cast<double>(plan.n_steps) - 1e-9)
        throw ConfigError("noise trace shorter than the integration window");
    for (std::size_t j = 0; j < count; ++j) {
        const double t = half * static_cast<double>(j);
        const double amp = src.peak_rabi * std::sqrt(envelope_eval(*src.envelope, t));
        out[j] = src.noise ? amp * src.noise->at(t) : std::complex<double>(amp, 0.0);
    }
    return out;
}

}  // namespace detail

/// Omega_s(t) = Omega_s0 sqrt(f_s(t)) zeta(t) and, for three levels,
/// Omega_d(t) = Omega_d0 sqrt(f_d(t)) (times zeta_d(t) if a pump noise is given).
inline DriveTraces build_drive(const SystemSpec& sys, const FieldSource& probe, std::optional<FieldSource> pump,
                               const StepPlan& plan) {
    sys.validate();
    if (!probe.envelope) throw ConfigError("build_drive: probe envelope missing");
    if (sys.levels == 3 && (!pump || !pump->envelope)) throw ConfigError("build_drive: three levels need a pump field");
    DriveTraces d;
    d.step = plan.step;
    d.n_steps = plan.n_steps;
    d.omega_s = detail::sample_field(probe, plan);
    if (sys.levels == 3) d.omega_d = detail::sample_field(*pump, plan);
    return d;
}

struct LaneDetuning {
    double delta_s = 0.0;
    double delta_d = 0.0;
};

/// Called after every step with the step index and the lane-major state
/// (component c of lane l at [c * lanes + l]).
using StepObserver = std::function<void(std::size_t step, std::span<const double> state, std::size_t lanes)>;

namespace detail {

// Component layout of the lane-major state buffers.
enum Two : std::size_t { T_P1, T_P2, T_X12, T_Y12, T_Q2, T_COUNT };
enum Three : std::size_t { H_P1, H_P2, H_P3, H_X12, H_Y12, H_X23, H_Y23, H_X13, H_Y13, H_Q2, H_Q3, H_COUNT };

struct TwoLevelRates {
    double g2, g12;
};

inline void rhs_two_level(const double* __restrict y, double* __restrict dy, const double* __restrict ds,
                          std::size_t lanes, double a, double b, TwoLevelRates r) {
    const double* p1 = y + T_P1 * lanes;
    const double* p2 = y + T_P2 * lanes;
    const double* x = y + T_X12 * lanes;
    const double* v = y + T_Y12 * lanes;
    double* dp1 = dy + T_P1 * lanes;
    double* dp2 = dy + T_P2 * lanes;
    double* dx = dy + T_X12 * lanes;
    double* dv = dy + T_Y12 * lanes;
    double* dq = dy + T_Q2 * lanes;
    for (std::size_t l = 0; l < lanes; ++l) {
        // Im[Omega* sigma12] with Omega = a + ib, sigma12 = x + iv.
        const double im = a * v[l] - b * x[l];
        const double inv = p2[l] - p1[l];
        dp1[l] = 2.0 * im;
        dp2[l] = -r.g2 * p2[l] - 2.0 * im;
        // (i Delta - Gamma12) sigma12 + i Omega (sigma22 - sigma11)
        dx[l] = -ds[l] * v[l] - r.g12 * x[l] - b * inv;
        dv[l] = ds[l] * x[l] - r.g12 * v[l] + a * inv;
        dq[l] = r.g2 * p2[l];
    }
}

struct ThreeLevelRates {
    double g2, g3, g12, g23, g13;
};

inline void rhs_three_level(const double* __restrict y, double* __restrict dy, const double* __restrict ds,
                            const double* __restrict dd, std::size_t lanes, double a, double b, double c, double e,
                            ThreeLevelRates r) {
    const double* p1 = y + H_P1 * lanes;
    const double* p2 = y + H_P2 * lanes;
    const double* p3 = y + H_P3 * lanes;
    const double* x12 = y + H_X12 * lanes;
    const double* y12 = y + H_Y12 * lanes;
    const double* x23 = y + H_X23 * lanes;
    const double* y23 = y + H_Y23 * lanes;
    const double* x13 = y + H_X13 * lanes;
    const double* y13 = y + H_Y13 * lanes;
    double* dp1 = dy + H_P1 * lanes;
    double* dp2 = dy + H_P2 * lanes;
    double* dp3 = dy + H_P3 * lanes;
    double* dx12 = dy + H_X12 * lanes;
    double* dy12 = dy + H_Y12 * lanes;
    double* dx23 = dy + H_X23 * lanes;
    double* dy23 = dy + H_Y23 * lanes;
    double* dx13 = dy + H_X13 * lanes;
    double* dy13 = dy + H_Y13 * lanes;
    double* dq2 = dy + H_Q2 * lanes;
    double* dq3 = dy + H_Q3 * lanes;
    // Omega_s = a + ib, Omega_d = c + ie.
    for (std::size_t l = 0; l < lanes; ++l) {
        const double ims = a * y12[l] - b * x12[l];  // Im[Omega_s* sigma12]
        const double imd = c * y23[l] - e * x23[l];  // Im[Omega_d* sigma23]
        dp1[l] = 2.0 * ims;
        dp2[l] = -r.g2 * p2[l] - 2.0 * (ims - imd);
        dp3[l] = -r.g3 * p3[l] - 2.0 * imd;

        // sigma12' = (i ds - G12) sigma12 + i [Omega_s (p2 - p1) - Omega_d* sigma13]
        const double inv21 = p2[l] - p1[l];
        const double u_re = a * inv21 - (c * x13[l] + e * y13[l]);
        const double u_im = b * inv21 - (c * y13[l] - e * x13[l]);
        dx12[l] = -ds[l] * y12[l] - r.g12 * x12[l] - u_im;
        dy12[l] = ds[l] * x12[l] - r.g12 * y12[l] + u_re;

        // sigma23' = (i dd - G23) sigma23 + i [Omega_s* sigma13 + Omega_d (p3 - p2)]
        const double inv32 = p3[l] - p2[l];
        const double w_re = (a * x13[l] + b * y13[l]) + c * inv32;
        const double w_im = (a * y13[l] - b * x13[l]) + e * inv32;
        dx23[l] = -dd[l] * y23[l] - r.g23 * x23[l] - w_im;
        dy23[l] = dd[l] * x23[l] - r.g23 * y23[l] + w_re;

        // sigma13' = (i (ds + dd) - G13) sigma13 + i (Omega_s sigma23 - Omega_d sigma12)
        const double two = ds[l] + dd[l];
        const double z_re = (a * x23[l] - b * y23[l]) - (c * x12[l] - e * y12[l]);
        const double z_im = (a * y23[l] + b * x23[l]) - (c * y12[l] + e * x12[l]);
        dx13[l] = -two * y13[l] - r.g13 * x13[l] - z_im;
        dy13[l] = two * x13[l] - r.g13 * y13[l] + z_re;

        dq2[l] = r.g2 * p2[l];
        dq3[l] = r.g3 * p3[l];
    }
}

inline void axpy_into(double* __restrict out, const double* __restrict y, const double* __restrict k, double h,
                      std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = y[i] + h * k[i];
}

/// Classical RK4 over the half-step drive grid. `rhs(state, deriv, sample_index)`.
template <class Rhs>
void rk4_lanes(std::vector<double>& y, std::size_t n_steps, double h, Rhs&& rhs, const StepObserver& observer,
               std::size_t lanes) {
    const std::size_t n = y.size();
    std::vector<double> k(n), acc(n), tmp(n);
    const double h2 = 0.5 * h, h6 = h / 6.0;
    double* yp = y.data();
    double* kp = k.data();
    double* ap = acc.data();
    double* tp = tmp.data();
    for (std::size_t s = 0; s < n_steps; ++s) {
        const std::size_t j = 2 * s;
        rhs(yp, kp, j);
        for (std::size_t i = 0; i < n; ++i) {
            ap[i] = kp[i];
            tp[i] = yp[i] + h2 * kp[i];
        }
        rhs(tp, kp, j + 1);
        for (std::size_t i = 0; i < n; ++i) {
            ap[i] += 2.0 * kp[i];
            tp[i] = yp[i] + h2 * kp[i];
        }
        rhs(tp, kp, j + 1);
        for (std::size_t i = 0; i < n; ++i) {
            ap[i] += 2.0 * kp[i];
            tp[i] = yp[i] + h * kp[i];
        }
        rhs(tp, kp, j + 2);
        for (std::size_t i = 0; i < n; ++i) yp[i] += h6 * (ap[i] + kp[i]);
        if (observer) observer(s + 1, y, lanes);
    }
}

inline void check_drive(const DriveTraces& drive, int levels, double t_final) {
    if (drive.n_steps == 0 || drive.omega_s.size() != 2 * drive.n_steps + 1)
        throw ConfigError("drive samples do not match the step plan");
    if (levels == 3 && drive.omega_d.size() != drive.omega_s.size())
        throw ConfigError("three-level integration needs a sampled Omega_d");
    if (std::abs(drive.t_final() - t_final) > 1e-9 * std::max(1.0, t_final))
        throw ConfigError("drive ends at t=" + std::to_string(drive.t_final()) + ", requested t_final=" +
                          std::to_string(t_final));
}

inline void check_final(const DensityState& st, double t_final) {
    const double defect = st.conservation_defect();
    if (!std::isfinite(defect) || std::abs(defect) > kConservationTolerance)
        throw IntegrationError("probability not conserved (defect " + std::to_string(defect) +
                                   "); the step is too large for this drive",
                               t_final, defect);
}

}  // namespace detail

/// Final states of the two-level system for several probe detunings sharing one drive.
inline std::vector<DensityState> integrate_two_level_batch(const SystemSpec& sys, const DriveTraces& drive,
                                                           std::span<const double> delta_s, double t_final,
                                                           const StepObserver& observer = {}) {
    using namespace detail;
    sys.validate();
    if (sys.levels != 2) throw ConfigError("integrate_two_level needs levels = 2");
    check_drive(drive, 2, t_final);
    const std::size_t lanes = delta_s.size();
    std::vector<double> y(T_COUNT * lanes, 0.0);
    std::fill_n(y.begin() + T_P1 * lanes, lanes, 1.0);
    const TwoLevelRates rates{sys.gamma2, sys.gamma12()};
    const auto* om = drive.omega_s.data();
    const double* ds = delta_s.data();
    rk4_lanes(
        y, drive.n_steps, drive.step,
        [&](const double* in, double* out, std::size_t j) {
            rhs_two_level(in, out, ds, lanes, om[j].real(), om[j].imag(), rates);
        },
        observer, lanes);
    std::vector<DensityState> out(lanes);
    for (std::size_t l = 0; l < lanes; ++l) {
        auto& st = out[l];
        st.sigma11 = y[T_P1 * lanes + l];
        st.sigma22 = y[T_P2 * lanes + l];
        st.sigma12 = {y[T_X12 * lanes + l], y[T_Y12 * lanes + l]};
        st.q2 = y[T_Q2 * lanes + l];
        check_final(st, t_final);
    }
    return out;
}

inline DensityState integrate_two_level(const SystemSpec& sys, const DriveTraces& drive, double t_final,
                                        const StepObserver& observer = {}) {
    const double ds = sys.delta_s;
    return integrate_two_level_batch(sys, drive, std::span<const double>(&ds, 1), t_final, observer).front();
}

/// Final states of the three-level ladder for several (delta_s, delta_d) pairs sharing one drive.
inline std::vector<DensityState> integrate_three_level_batch(const SystemSpec& sys, const DriveTraces& drive,
                                                             std::span<const LaneDetuning> detunings, double t_final,
                                                             const StepObserver& observer = {}) {
    using namespace detail;
    sys.validate();
    if (sys.levels != 3) throw ConfigError("integrate_three_level needs levels = 3");
    check_drive(drive, 3, t_final);
    const std::size_t lanes = detunings.size();
    std::vector<double> ds(lanes), dd(lanes);
    for (std::size_t l = 0; l < lanes; ++l) {
        ds[l] = detunings[l].delta_s;
        dd[l] = detunings[l].delta_d;
    }
    std::vector<double> y(H_COUNT * lanes, 0.0);
    std::fill_n(y.begin() + H_P1 * lanes, lanes, 1.0);
    const ThreeLevelRates rates{sys.gamma2, sys.gamma3, sys.gamma12(), sys.gamma23(), sys.gamma13()};
    const auto* os = drive.omega_s.data();
    const auto* od = drive.omega_d.data();
    rk4_lanes(
        y, drive.n_steps, drive.step,
        [&](const double* in, double* out, std::size_t j) {
            rhs_three_level(in, out, ds.data(), dd.data(), lanes, os[j].real(), os[j].imag(), od[j].real(),
                            od[j].imag(), rates);
        },
        observer, lanes);
    std::vector<DensityState> out(lanes);
    for (std::size_t l = 0; l < lanes; ++l) {
        auto& st = out[l];
        st.sigma11 = y[H_P1 * lanes + l];
        st.sigma22 = y[H_P2 * lanes + l];
        st.sigma33 = y[H_P3 * lanes + l];
        st.sigma12 = {y[H_X12 * lanes + l], y[H_Y12 * lanes + l]};
        st.sigma23 = {y[H_X23 * lanes + l], y[H_Y23 * lanes + l]};
        st.sigma13 = {y[H_X13 * lanes + l], y[H_Y13 * lanes + l]};
        st.q2 = y[H_Q2 * lanes + l];
        st.q3 = y[H_Q3 * lanes + l];
        check_final(st, t_final);
    }
    return out;
}

inline DensityState integrate_three_level(const SystemSpec& sys, const DriveTraces& drive, double t_final,
                                          const StepObserver& observer = {}) {
    const LaneDetuning d{sys.delta_s, sys.delta_d};
    return integrate_three_level_batch(sys, drive, std::span<const LaneDetuning>(&d, 1), t_final, observer).front();
}

/// Decodes lane l of a lane-major state buffer handed to a StepObserver.
inline DensityState lane_state(std::span<const double> y, std::size_t lanes, std::size_t l, int levels) {
    using namespace detail;
    DensityState st;
    if (levels == 2) {
        st.sigma11 = y[T_P1 * lanes + l];
        st.sigma22 = y[T_P2 * lanes + l];
        st.sigma12 = {y[T_X12 * lanes + l], y[T_Y12 * lanes + l]};
        st.q2 = y[T_Q2 * lanes + l];
    } else {
        st.sigma11 = y[H_P1 * lanes + l];
        st.sigma22 = y[H_P2 * lanes + l];
        st.sigma33 = y[H_P3 * lanes + l];
        st.sigma12 = {y[H_X12 * lanes + l], y[H_Y12 * lanes + l]};
        st.sigma23 = {y[H_X23 * lanes + l], y[H_Y23 * lanes + l]};
        st.sigma13 = {y[H_X13 * lanes + l], y[H_Y13 * lanes + l]};
        st.q2 = y[H_Q2 * lanes + l];
        st.q3 = y[H_Q3 * lanes + l];
    }
    return st;
}

struct DressedStates {
    double omega_plus = 0.0;
    double omega_minus = 0.0;
    double splitting = 0.0;     ///< omega_plus - omega_minus = sqrt(delta^2 + 4 omega^2)
    double mixing_ratio = 1.0;  ///< |<2|->| / |<2|+>|, the relative strength of the two probe channels
};

/// Eigenenergies of a stationary strongly driven transition (Rabi frequency
/// `omega_rabi`, detuning `delta`) in the rotating frame.
inline DressedStates dressed_eigensystem(double omega_rabi, double delta) {
    DressedStates d;
    const double root = std::sqrt(delta * delta + 4.0 * omega_rabi * omega_rabi);
    d.omega_plus = -0.5 * delta + 0.5 * root;
    d.omega_minus = -0.5 * delta - 0.5 * root;
    d.splitting = root;
    // sin^2(theta_pm) = (root +- delta) / (2 root), from tan(theta_pm) = -+ Omega/omega_pm.
    if (root == 0.0) d.mixing_ratio = 1.0;
    else if (root + delta == 0.0) d.mixing_ratio = std::numeric_limits<double>::infinity();
    else d.mixing_ratio = std::sqrt((root - delta) / (root + delta));
    return d;
}

}  // namespace sasefel
