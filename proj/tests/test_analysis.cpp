#include "catch_amalgamated.hpp"

#include <cmath>

#include "sasefel/analysis.hpp"

using namespace sasefel;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Curve sampled(double lo, double hi, std::size_t n, auto f) {
    Curve c;
    c.x = linspace(lo, hi, n);
    for (double x : c.x) c.y.push_back(f(x));
    return c;
}

Curve doublet(double a, double b, double ha, double hb, double w) {
    return sampled(-30.0, 30.0, 601, [&](double x) { return lorentzian(x, ha, a, w) + lorentzian(x, hb, b, w); });
}

Curve mirrored(const Curve& c) {
    Curve m;
    for (std::size_t i = c.x.size(); i-- > 0;) {
        m.x.push_back(-c.x[i]);
        m.y.push_back(c.y[i]);
    }
    return m;
}

}  // namespace

TEST_CASE("exact Lorentzian samples are fitted exactly") {
    const auto c = sampled(-20.0, 20.0, 201, [](double x) { return lorentzian(x, 0.3, 1.7, 2.4); });
    const auto f = fit_lorentzian(c);
    CHECK(f.residual < 1e-8);
    CHECK_THAT(f.center, WithinAbs(1.7, 1e-8));
    CHECK_THAT(f.width, WithinRel(2.4, 1e-8));
    CHECK_THAT(f.amplitude, WithinRel(0.3, 1e-8));
    CHECK(f.iterations <= 200);
}

TEST_CASE("Lorentzian fit is scale equivariant") {
    const auto c = sampled(-10.0, 10.0, 81, [](double x) { return std::exp(-x * x / 8.0); });
    auto s = c;
    for (auto& y : s.y) y *= 37.0;
    const auto a = fit_lorentzian(c), b = fit_lorentzian(s);
    CHECK_THAT(b.amplitude, WithinRel(37.0 * a.amplitude, 1e-8));
    CHECK_THAT(b.center, WithinAbs(a.center, 1e-8));
    CHECK_THAT(b.width, WithinRel(a.width, 1e-8));
    CHECK_THAT(b.residual, WithinRel(a.residual, 1e-6));
    CHECK(a.residual > 1e-3);  // a Gaussian is not a Lorentzian
}

TEST_CASE("Lorentzian fit rejects bimodal curves") {
    CHECK_THROWS_AS(fit_lorentzian(doublet(-8.0, 8.0, 1.0, 1.0, 3.0)), ShapeError);
    Curve tiny{{0.0, 1.0, 2.0}, {0.0, 1.0, 0.0}, {}};
    CHECK_THROWS_AS(fit_lorentzian(tiny), InsufficientDataError);
}

TEST_CASE("symmetric doublet features") {
    const double w = 2.0;
    const auto c = doublet(-10.0, 10.0, 1.0, 1.0, w);
    const auto f = extract_doublet(c);
    REQUIRE(f.has_doublet());
    CHECK_THAT(*f.separation, WithinAbs(20.0, 1e-3));
    CHECK_THAT(f.peak_positions[0], WithinAbs(-10.0, 1e-3));
    const double top = *std::max_element(c.y.begin(), c.y.end());
    const double mid = c.y[300];  // x = 0 lies on the grid
    CHECK_THAT(*f.depth, WithinRel((top - mid) / top, 1e-12));
    CHECK_THAT(*f.minimum, WithinAbs(mid, 1e-15));
    // Well separated peaks keep their own width.
    CHECK_THAT(f.fwhm_per_peak[0], WithinRel(w, 0.02));
    CHECK_THAT(f.fwhm_per_peak[1], WithinRel(w, 0.02));
}

TEST_CASE("doublet features mirror with the curve") {
    const auto c = doublet(-7.0, 9.0, 0.6, 1.0, 3.0);
    const auto f = extract_doublet(c);
    const auto g = extract_doublet(mirrored(c));
    REQUIRE(f.has_doublet());
    REQUIRE(g.has_doublet());
    CHECK_THAT(g.peak_positions[0], WithinAbs(-f.peak_positions[1], 1e-12));
    CHECK_THAT(g.peak_positions[1], WithinAbs(-f.peak_positions[0], 1e-12));
    CHECK_THAT(*g.separation, WithinAbs(*f.separation, 1e-12));
    CHECK_THAT(*g.depth, WithinAbs(*f.depth, 1e-15));
    CHECK_THAT(g.fwhm_per_peak[0], WithinAbs(f.fwhm_per_peak[1], 1e-12));
    CHECK_THAT(g.fwhm_per_peak[1], WithinAbs(f.fwhm_per_peak[0], 1e-12));
}

TEST_CASE("depth lies in [0, 1] and reaches 1 only at a zero minimum") {
    for (double w : {1.0, 3.0, 6.0, 9.0}) {
        const auto f = extract_doublet(doublet(-6.0, 6.0, 1.0, 0.8, w));
        if (!f.has_doublet()) continue;
        CHECK(*f.depth >= 0.0);
        CHECK(*f.depth < 1.0);
    }
    Curve gap{linspace(-4.0, 4.0, 9), {0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0}, {}};
    const auto f = extract_doublet(gap);
    REQUIRE(f.has_doublet());
    CHECK(*f.depth == 1.0);
}

TEST_CASE("merged peaks are reported as a single peak") {
    const auto f = extract_doublet(doublet(-1.0, 1.0, 1.0, 1.0, 6.0));
    CHECK_FALSE(f.has_doublet());
    CHECK_FALSE(f.depth.has_value());
    REQUIRE(f.peak_positions.size() == 1);
    CHECK_THAT(f.peak_positions[0], WithinAbs(0.0, 1e-9));
}

TEST_CASE("peaks below the noise floor are ignored") {
    auto c = doublet(-10.0, 10.0, 1.0, 0.02, 2.0);
    c.stderr_y.assign(c.y.size(), 0.01);
    CHECK_FALSE(extract_doublet(c).has_doublet());
    c.stderr_y.assign(c.y.size(), 0.001);
    CHECK(extract_doublet(c).has_doublet());
}

TEST_CASE("equal peaks tie toward the centre") {
    // Three equal maxima; the two nearest to zero win.
    Curve c{linspace(-6.0, 6.0, 13), {0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0}, {}};
    const auto p = find_peaks(c);
    REQUIRE(p.size() == 3);
    CHECK(std::abs(p[0].position) <= std::abs(p[1].position));
    CHECK(std::abs(p[1].position) <= std::abs(p[2].position));
}

TEST_CASE("smoothing suppresses sample-scale ripple") {
    auto c = sampled(-10.0, 10.0, 101, [](double x) { return lorentzian(x, 1.0, 0.0, 4.0); });
    // Zero-mean ripple of period 3: invisible after a 3-point average.
    for (std::size_t i = 0; i < c.y.size(); ++i) c.y[i] += i % 3 == 0 ? 0.02 : -0.01;
    CHECK(find_peaks(c).size() > 2);
    CHECK(find_peaks(c, PeakOptions{true, 3.0, 1e-3}).size() == 1);
}

TEST_CASE("splitting and width trends over chi") {
    const std::vector<double> chi{1.0, 2.0, 4.0, 8.0, 16.0};
    std::vector<CurveFeatures> feats;
    for (double x : chi) feats.push_back(extract_doublet(doublet(-10.0 + 0.05 * x, 10.0 - 0.05 * x, 1.0, 1.0, 1.0 + 0.5 * x)));
    const auto s = splitting_vs_chi(chi, feats, 20.0);
    REQUIRE(s.size() == chi.size());
    CHECK_THAT(*s[0].normalized_splitting, WithinAbs(0.995, 2e-3));
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(*s[i].depth < *s[i - 1].depth);
    const auto t = fwhm_vs_chi(chi, feats);
    CHECK(t.fit.slope > 0.4);
    CHECK(t.fit.r_squared > 0.98);

    std::vector<CurveFeatures> short_list(feats.begin(), feats.begin() + 3);
    CHECK_THROWS_AS(fwhm_vs_chi(std::span(chi).first(3), short_list), InsufficientDataError);

    auto missing = feats;
    missing[0] = extract_doublet(doublet(-1.0, 1.0, 1.0, 1.0, 6.0));
    CHECK_THROWS_AS(splitting_vs_chi(chi, missing, 20.0), ShapeError);
}

TEST_CASE("scan results become curves in ascending order") {
    ScanResult r;
    for (double x : {3.0, 1.0, -1.0}) {
        ScanPoint p;
        p.x = x;
        p.result = PointResult{x * x, 0.1, 0.0, 0.0, 5};
        r.points.push_back(p);
    }
    const auto c = curve_of(r);
    CHECK(c.x == std::vector<double>{-1.0, 1.0, 3.0});
    CHECK(c.y == std::vector<double>{1.0, 1.0, 9.0});
    CHECK(c.stderr_y.size() == 3);
}
