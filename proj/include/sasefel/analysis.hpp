#pragma once

// Observables of yield curves: Lorentzian fits of single lines, and peak
// positions, widths and depth of doublets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sasefel/ensemble.hpp"
#include "sasefel/error.hpp"
#include "sasefel/numeric.hpp"

namespace sasefel {

/// A sampled curve y(x) with optional per-point standard errors.
struct Curve {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> stderr_y;  ///< empty or same length as y

    void validate() const {
        if (x.size() != y.size()) throw ConfigError("curve: x and y lengths differ");
        if (!stderr_y.empty() && stderr_y.size() != y.size()) throw ConfigError("curve: stderr length differs");
        for (std::size_t i = 1; i < x.size(); ++i)
            if (!(x[i] > x[i - 1])) throw ConfigError("curve: abscissae must be strictly increasing");
    }
    double error_at(std::size_t i) const { return stderr_y.empty() ? 0.0 : stderr_y[i]; }
};

enum class Observable { Q2, Q3 };

inline Curve curve_of(const ScanResult& r, Observable obs = Observable::Q2) {
    Curve c{r.x(), obs == Observable::Q2 ? r.q2() : r.q3(), obs == Observable::Q2 ? r.q2_stderr() : r.q3_stderr()};
    if (c.x.size() > 1 && c.x[1] < c.x[0]) {
        std::reverse(c.x.begin(), c.x.end());
        std::reverse(c.y.begin(), c.y.end());
        std::reverse(c.stderr_y.begin(), c.stderr_y.end());
    }
    return c;
}

struct Peak {
    std::size_t index = 0;
    double position = 0.0;    ///< parabolic vertex through the 3 points around the maximum
    double height = 0.0;      ///< sampled value at the maximum
    double prominence = 0.0;
};

struct PeakOptions {
    bool smooth = false;             ///< 3-point moving average before detection
    double noise_factor = 3.0;       ///< prominence threshold in units of the local stderr
    double relative_floor = 1e-3;    ///< prominence threshold relative to the curve maximum
};

namespace detail {

inline std::vector<double> smooth3(std::span<const double> y) {
    std::vector<double> s(y.begin(), y.end());
    for (std::size_t i = 1; i + 1 < y.size(); ++i) s[i] = (y[i - 1] + y[i] + y[i + 1]) / 3.0;
    return s;
}

inline double parabolic_vertex(std::span<const double> x, std::span<const double> y, std::size_t i) {
    if (i == 0 || i + 1 >= y.size()) return x[i];
    const double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
    const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
    const double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if (!(a < 0.0)) return x1;
    return std::clamp(-b / (2.0 * a), x0, x2);
}

/// Height above the higher of the two bases (lowest points before a higher sample or the edge).
inline double prominence(std::span<const double> y, std::size_t i) {
    double left = y[i];
    for (std::size_t j = i; j-- > 0;) {
        if (y[j] > y[i]) break;
        left = std::min(left, y[j]);
    }
    double right = y[i];
    for (std::size_t j = i + 1; j < y.size(); ++j) {
        if (y[j] > y[i]) break;
        right = std::min(right, y[j]);
    }
    return y[i] - std::max(left, right);
}

}  // namespace detail

/// Strict local maxima whose prominence clears max(noise_factor * stderr, relative_floor * max y).
/// Sorted by height (descending), ties broken toward smaller |x|.
inline std::vector<Peak> find_peaks(const Curve& c, const PeakOptions& opt = {}) {
    c.validate();
    std::vector<Peak> peaks;
    if (c.y.size() < 3) return peaks;
    const auto y = opt.smooth ? detail::smooth3(c.y) : c.y;
    const double top = *std::max_element(y.begin(), y.end());
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        if (!(y[i] > y[i - 1] && y[i] > y[i + 1])) continue;
        const double prom = detail::prominence(y, i);
        const double floor = std::max(opt.noise_factor * c.error_at(i), opt.relative_floor * std::abs(top));
        if (prom <= floor) continue;
        peaks.push_back({i, detail::parabolic_vertex(c.x, y, i), y[i], prom});
    }
    std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        if (a.height != b.height) return a.height > b.height;
        return std::abs(a.position) < std::abs(b.position);
    });
    return peaks;
}

struct LorentzianFit {
    double center = 0.0;
    double width = 0.0;      ///< FWHM
    double amplitude = 0.0;
    double residual = 0.0;   ///< RMS deviation over all points / peak height
    double apex_residual = 0.0;  ///< same, restricted to |x - center| <= width/2
    int iterations = 0;
};

inline double lorentzian(double x, double amplitude, double center, double width) {
    const double h = 0.5 * width;
    const double d = x - center;
    return amplitude * h * h / (d * d + h * h);
}

namespace detail {

inline bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b, std::array<double, 3>& x) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (a[piv][col] == 0.0) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int k = col; k < 3; ++k) a[r][k] -= f * a[col][k];
            b[r] -= f * b[col];
        }
    }
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < 3; ++k) s -= a[r][k] * x[k];
        x[r] = s / a[r][r];
    }
    return true;
}

}  // namespace detail

/// Damped least-squares fit of A (w/2)^2 / ((x - c)^2 + (w/2)^2), started from the
/// sampled maximum, its half-maximum width and its height.
inline LorentzianFit fit_lorentzian(const Curve& curve, int max_iterations = 200, double rel_tol = 1e-10) {
    curve.validate();
    if (curve.y.size() < 4) throw InsufficientDataError("fit_lorentzian needs at least 4 points");
    const auto peaks = find_peaks(curve, PeakOptions{false, 3.0, 0.05});
    if (peaks.size() > 1)
        throw ShapeError("curve is not single-peaked (" + std::to_string(peaks.size()) + " maxima)");
    const auto& x = curve.x;
    const auto& y = curve.y;
    const auto imax = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const double peak = y[imax];
    if (!(peak > 0.0)) throw ShapeError("curve has no positive peak");

    std::array<double, 3> p{peak, x[imax], numeric::fwhm(x, y)};  // amplitude, center, width
    if (!std::isfinite(p[2]) || p[2] <= 0.0) p[2] = 0.25 * (x.back() - x.front());

    const std::size_t n = y.size();
    auto cost_of = [&](const std::array<double, 3>& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = lorentzian(x[i], q[0], q[1], q[2]) - y[i];
            s += r * r;
        }
        return s;
    };

    double cost = cost_of(p);
    double lambda = 1e-3;
    int it = 0;
    bool converged = false;
    for (; it < max_iterations; ++it) {
        std::array<std::array<double, 3>, 3> jtj{};
        std::array<double, 3> jtr{};
        for (std::size_t i = 0; i < n; ++i) {
            const double h = 0.5 * p[2];
            const double d = x[i] - p[1];
            const double den = d * d + h * h;
            const double shape = h * h / den;
            const double r = p[0] * shape - y[i];
            const std::array<double, 3> j{shape, p[0] * 2.0 * d * h * h / (den * den),
                                          p[0] * h * d * d / (den * den)};
            for (int a = 0; a < 3; ++a) {
                jtr[a] += j[a] * r;
                for (int b = 0; b < 3; ++b) jtj[a][b] += j[a] * j[b];
            }
        }
        bool accepted = false;
        while (lambda < 1e16) {
            auto m = jtj;
            for (int a = 0; a < 3; ++a) m[a][a] += lambda * std::max(jtj[a][a], 1e-300);
            std::array<double, 3> step{};
            std::array<double, 3> rhs{-jtr[0], -jtr[1], -jtr[2]};
            if (!detail::solve3(m, rhs, step)) {
                lambda *= 10.0;
                continue;
            }
            std::array<double, 3> trial{p[0] + step[0], p[1] + step[1], std::abs(p[2] + step[2])};
            const double trial_cost = cost_of(trial);
            if (trial_cost < cost) {
                const double drop = cost - trial_cost;
                const double move = std::max({std::abs(step[0]) / std::max(std::abs(p[0]), 1e-300),
                                              std::abs(step[1]) / std::max(std::abs(p[2]), 1e-300),
                                              std::abs(step[2]) / std::max(std::abs(p[2]), 1e-300)});
                p = trial;
                cost = trial_cost;
                lambda = std::max(lambda * 0.1, 1e-12);
                accepted = true;
                if (drop <= rel_tol * cost || move <= rel_tol) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) converged = true;  // no descent direction left: at a minimum to rounding
        if (converged) break;
    }
    if (!converged)
        throw FitError("Lorentzian fit did not converge in " + std::to_string(max_iterations) + " iterations",
                       max_iterations, std::sqrt(cost / static_cast<double>(n)) / peak);

    LorentzianFit f{p[1], p[2], p[0], std::sqrt(cost / static_cast<double>(n)) / peak, 0.0, it + 1};
    double apex = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(x[i] - f.center) > 0.5 * f.width) continue;
        const double r = lorentzian(x[i], f.amplitude, f.center, f.width) - y[i];
        apex += r * r;
        ++count;
    }
    f.apex_residual = count ? std::sqrt(apex / static_cast<double>(count)) / peak : 0.0;
    return f;
}

struct CurveFeatures {
    std::vector<double> peak_positions;  ///< ascending in x; two entries for a doublet
    std::vector<double> peak_heights;
    std::vector<double> fwhm_per_peak;
    std::optional<double> separation;    ///< absent when no doublet is resolved
    std::optional<double> depth;         ///< V = (max - min)/max, min taken between the two peaks
    std::optional<double> minimum;       ///< inter-peak minimum

    bool has_doublet() const { return separation.has_value(); }
    double mean_fwhm() const {
        double s = 0.0;
        for (double w : fwhm_per_peak) s += w;
        return fwhm_per_peak.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : s / static_cast<double>(fwhm_per_peak.size());
    }
};

namespace detail {

/// Width of the peak at index i. The outer flank is cut at half the peak
/// height; the inner flank (toward `inner_dir`) at half way between the peak
/// and `floor`. A missing crossing is replaced by the mirror of the other one.
inline double peak_width(const Curve& c, const Peak& p, int inner_dir, double floor) {
    const double h = c.y[p.index];
    const auto outer = numeric::find_crossing(c.x, c.y, p.index, -inner_dir, 0.5 * h);
    const auto inner = numeric::find_crossing(c.x, c.y, p.index, inner_dir, 0.5 * (h + floor));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (outer && inner) return std::abs(*inner - *outer);
    if (outer) return 2.0 * std::abs(p.position - *outer);
    if (inner) return 2.0 * std::abs(*inner - p.position);
    return nan;
}

}  // namespace detail

/// Two dominant peaks of a yield curve with their separation, widths and the depth V.
/// When fewer than two peaks clear the noise floor only the dominant peak is reported.
inline CurveFeatures extract_doublet(const Curve& c, const PeakOptions& opt = {}) {
    c.validate();
    CurveFeatures f;
    const auto peaks = find_peaks(c, opt);
    if (peaks.empty()) {
        if (c.y.empty()) throw InsufficientDataError("extract_doublet: empty curve");
        const auto i = static_cast<std::size_t>(std::max_element(c.y.begin(), c.y.end()) - c.y.begin());
        f.peak_positions = {c.x[i]};
        f.peak_heights = {c.y[i]};
        f.fwhm_per_peak = {numeric::fwhm(c.x, c.y)};
        return f;
    }
    if (peaks.size() == 1) {
        const auto& p = peaks.front();
        f.peak_positions = {p.position};
        f.peak_heights = {p.height};
        f.fwhm_per_peak = {detail::peak_width(c, p, +1, 0.0)};
        return f;
    }
    Peak a = peaks[0], b = peaks[1];
    if (b.index < a.index) std::swap(a, b);
    const auto lo = std::min_element(c.y.begin() + static_cast<long>(a.index), c.y.begin() + static_cast<long>(b.index));
    const double minimum = *lo;
    const double top = *std::max_element(c.y.begin(), c.y.end());
    f.peak_positions = {a.position, b.position};
    f.peak_heights = {a.height, b.height};
    f.fwhm_per_peak = {detail::peak_width(c, a, +1, minimum), detail::peak_width(c, b, -1, minimum)};
    f.separation = b.position - a.position;
    f.minimum = minimum;
    f.depth = top > 0.0 ? std::clamp((top - minimum) / top, 0.0, 1.0) : 0.0;
    return f;
}

struct SplittingPoint {
    double chi = 0.0;
    std::optional<double> normalized_splitting;
    std::optional<double> depth;
};

/// Separation normalized to a reference (Fourier-limited) separation, and depth, per chi.
inline std::vector<SplittingPoint> splitting_vs_chi(std::span<const double> chi,
                                                    std::span<const CurveFeatures> features,
                                                    double reference_separation) {
    if (chi.size() != features.size()) throw ConfigError("splitting_vs_chi: length mismatch");
    if (!(reference_separation > 0.0)) throw ConfigError("splitting_vs_chi: reference separation must be positive");
    if (!features.empty()) {
        const auto first = std::min_element(chi.begin(), chi.end()) - chi.begin();
        if (!features[static_cast<std::size_t>(first)].has_doublet())
            throw ShapeError("no doublet at the smallest chi");
    }
    std::vector<SplittingPoint> out;
    for (std::size_t i = 0; i < chi.size(); ++i) {
        SplittingPoint p{chi[i], std::nullopt, features[i].depth};
        if (features[i].separation) p.normalized_splitting = *features[i].separation / reference_separation;
        out.push_back(p);
    }
    return out;
}

struct FwhmTrend {
    numeric::LineFit fit;
    std::vector<double> chi;        ///< points used (doublet present)
    std::vector<double> mean_fwhm;
};

/// Least-squares line through the mean doublet FWHM versus chi; absent doublets are skipped.
inline FwhmTrend fwhm_vs_chi(std::span<const double> chi, std::span<const CurveFeatures> features) {
    if (chi.size() != features.size()) throw ConfigError("fwhm_vs_chi: length mismatch");
    FwhmTrend t;
    for (std::size_t i = 0; i < chi.size(); ++i) {
        if (!features[i].has_doublet()) continue;
        const double w = features[i].mean_fwhm();
        if (!std::isfinite(w)) continue;
        t.chi.push_back(chi[i]);
        t.mean_fwhm.push_back(w);
    }
    if (t.chi.size() < 4)
        throw InsufficientDataError("fwhm_vs_chi needs at least 4 resolved doublets, got " +
                                    std::to_string(t.chi.size()));
    t.fit = numeric::fit_line(t.chi, t.mean_fwhm);
    return t;
}

}  // namespace sasefel
