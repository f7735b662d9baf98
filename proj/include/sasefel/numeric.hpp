#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>

namespace sasefel::numeric {

inline double trapezoid(std::span<const double> y, double dx) {
    if (y.size() < 2) return 0.0;
    double s = 0.5 * (y.front() + y.back());
    for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
    return s * dx;
}

inline double factorial(int r) {
    double f = 1.0;
    for (int k = 2; k <= r; ++k) f *= k;
    return f;
}

/// Abscissa where y crosses `level` between samples i and j (adjacent), by linear interpolation.
inline double crossing(std::span<const double> x, std::span<const double> y, std::size_t i, std::size_t j,
                       double level) {
    const double dy = y[j] - y[i];
    if (dy == 0.0) return 0.5 * (x[i] + x[j]);
    return x[i] + (level - y[i]) * (x[j] - x[i]) / dy;
}

/// Walk from `start` in direction `step` (+1/-1) until y drops below `level`;
/// returns the interpolated crossing, or nullopt if the edge is reached first.
inline std::optional<double> find_crossing(std::span<const double> x, std::span<const double> y,
                                           std::size_t start, int step, double level) {
    std::size_t i = start;
    while (true) {
        if (step < 0 && i == 0) return std::nullopt;
        if (step > 0 && i + 1 >= y.size()) return std::nullopt;
        const std::size_t j = step > 0 ? i + 1 : i - 1;
        if (y[j] < level) return crossing(x, y, i, j, level);
        i = j;
    }
}

/// Full width at half maximum of a sampled single-peaked curve. NaN if either
/// flank never falls below half maximum.
inline double fwhm(std::span<const double> x, std::span<const double> y) {
    if (y.size() < 3) return std::numeric_limits<double>::quiet_NaN();
    std::size_t peak = 0;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (y[i] > y[peak]) peak = i;
    const double half = 0.5 * y[peak];
    auto left = find_crossing(x, y, peak, -1, half);
    auto right = find_crossing(x, y, peak, +1, half);
    if (!left || !right) return std::numeric_limits<double>::quiet_NaN();
    return *right - *left;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
};

/// Ordinary least squares y = slope*x + intercept.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.slope * x[i] + f.intercept);
        ss_res += r * r;
    }
    f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    f.slope_stderr = x.size() > 2 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
    return f;
}

}  // namespace sasefel::numeric
