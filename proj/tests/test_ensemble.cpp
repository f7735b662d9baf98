#include "catch_amalgamated.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "sasefel/ensemble.hpp"

using namespace sasefel;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

DriveRecipe two_level(double omega, FieldModel model, double chi, double tau = 3.0) {
    DriveRecipe r;
    r.system.omega_s0 = omega;
    r.probe = EnvelopeSpec::gaussian(tau, 16.0, 32.0);
    r.model = model;
    r.psd = PsdSpec{PsdKind::Gaussian, 1.0};
    if (model != FieldModel::FourierLimited) set_chi(r, chi);
    return r;
}

}  // namespace

TEST_CASE("Fourier-limited ensembles collapse to one realization") {
    const auto r = two_level(1.0, FieldModel::FourierLimited, 0.0);
    const auto one = run_point(r, EnsembleConfig{1, 1, 1});
    const auto many = run_point(r, EnsembleConfig{5000, 1, 1});
    CHECK(one.q2_mean == many.q2_mean);
    CHECK(many.q2_stderr == 0.0);
    CHECK(many.n == 5000);
}

TEST_CASE("results do not depend on the worker count") {
    ScanSpec scan;
    scan.variable = ScanVariable::DeltaS;
    scan.grid = linspace(-6.0, 6.0, 7);
    scan.base = two_level(2.0, FieldModel::Chaotic, 5.0);
    const auto a = run_scan(scan, EnsembleConfig{64, 17, 1});
    const auto b = run_scan(scan, EnsembleConfig{64, 17, 8});
    CHECK(a.q2() == b.q2());
    CHECK(a.q2_stderr() == b.q2_stderr());
    CHECK(a.config_hash == b.config_hash);

    auto pdm = scan;
    pdm.base.model = FieldModel::PhaseDiffusion;
    set_chi(pdm.base, 2.0);
    CHECK(run_scan(pdm, EnsembleConfig{32, 4, 1}).q2() == run_scan(pdm, EnsembleConfig{32, 4, 3}).q2());
}

TEST_CASE("standard error falls as 1/sqrt(N)") {
    const auto r = two_level(2.0, FieldModel::Chaotic, 10.0);
    const auto a = run_point(r, EnsembleConfig{500, 21, 0});
    const auto b = run_point(r, EnsembleConfig{2000, 21, 0});
    const auto c = run_point(r, EnsembleConfig{8000, 21, 0});
    CHECK_THAT(a.q2_stderr / b.q2_stderr, WithinRel(2.0, 0.15));
    CHECK_THAT(b.q2_stderr / c.q2_stderr, WithinRel(2.0, 0.15));
    CHECK_THAT(a.q2_mean, WithinAbs(c.q2_mean, 4.0 * a.q2_stderr));
}

TEST_CASE("reported standard error matches the spread of independent means") {
    const auto r = two_level(2.0, FieldModel::Chaotic, 5.0);
    const std::size_t reps = 100, n = 40;
    std::vector<double> means;
    double se2 = 0.0;
    for (std::size_t k = 0; k < reps; ++k) {
        const auto p = run_point(r, EnsembleConfig{n, 1000 + k, 0});
        means.push_back(p.q2_mean);
        se2 += p.q2_stderr * p.q2_stderr;
    }
    double m = 0.0;
    for (double x : means) m += x;
    m /= reps;
    double var = 0.0;
    for (double x : means) var += (x - m) * (x - m);
    var /= reps - 1;
    // The ratio of variances fluctuates by about sqrt(2/reps) = 14%.
    CHECK_THAT(std::sqrt(var), WithinRel(std::sqrt(se2 / reps), 0.2));
}

TEST_CASE("parallel speedup", "[perf]") {
    if (std::thread::hardware_concurrency() < 8) SKIP("needs at least 8 hardware threads");
    const auto r = two_level(2.0, FieldModel::Chaotic, 5.0);
    auto time = [&](std::size_t w) {
        const auto t0 = std::chrono::steady_clock::now();
        run_point(r, EnsembleConfig{800, 3, w});
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    const double t1 = time(1), t8 = time(8);
    CHECK(t1 / t8 > 0.6 * 8.0);
}

TEST_CASE("a single-point scan equals run_point") {
    ScanSpec scan;
    scan.variable = ScanVariable::Chi;
    scan.grid = {4.0};
    scan.base = two_level(1.0, FieldModel::Chaotic, 1.0);
    const EnsembleConfig cfg{50, 9, 0};
    const auto s = run_scan(scan, cfg);
    const auto p = run_point(recipe_at(scan.base, ScanVariable::Chi, 4.0), cfg);
    REQUIRE(s.points.size() == 1);
    CHECK(s.points[0].result.q2_mean == p.q2_mean);
    CHECK(s.points[0].result.q2_stderr == p.q2_stderr);
}

TEST_CASE("lane scans match point-by-point integration") {
    ScanSpec scan;
    scan.grid = {-3.0, 0.5, 2.0};
    scan.base = two_level(2.0, FieldModel::Chaotic, 3.0);
    const EnsembleConfig cfg{20, 5, 0};
    const auto s = run_scan(scan, cfg);
    for (const auto& p : s.points) {
        const auto q = run_point(recipe_at(scan.base, ScanVariable::DeltaS, p.x), cfg);
        CHECK(p.result.q2_mean == q.q2_mean);
    }
}

TEST_CASE("Fourier-limited detuning scans are symmetric") {
    ScanSpec scan;
    scan.grid = linspace(-8.0, 8.0, 33);
    scan.base = two_level(2.0, FieldModel::FourierLimited, 0.0);
    const auto q = run_scan(scan, EnsembleConfig{1, 1, 1}).q2();
    for (std::size_t i = 0; i < q.size(); ++i) CHECK_THAT(q[i], WithinAbs(q[q.size() - 1 - i], 1e-12));
    CHECK(q[16] == *std::max_element(q.begin(), q.end()));
}

TEST_CASE("descending scan grids give the same points") {
    ScanSpec up;
    up.grid = {-2.0, 0.0, 2.0};
    up.base = two_level(1.0, FieldModel::FourierLimited, 0.0);
    auto down = up;
    down.grid = {2.0, 0.0, -2.0};
    const auto a = run_scan(up, EnsembleConfig{1, 1, 1}).q2();
    const auto b = run_scan(down, EnsembleConfig{1, 1, 1}).q2();
    CHECK(a[0] == b[2]);
    CHECK(a[1] == b[1]);
    CHECK(a[2] == b[0]);
}

TEST_CASE("noise broadens the averaged resonance") {
    ScanSpec scan;
    scan.grid = linspace(-15.0, 15.0, 31);
    scan.base = two_level(2.0, FieldModel::FourierLimited, 0.0);
    const auto fl = run_scan(scan, EnsembleConfig{1, 1, 1});
    scan.base = two_level(2.0, FieldModel::Chaotic, 10.0);
    const auto st = run_scan(scan, EnsembleConfig{200, 1, 0});
    CHECK(numeric::fwhm(st.x(), st.q2()) > 1.3 * numeric::fwhm(fl.x(), fl.q2()));
}

TEST_CASE("nearly coherent chaotic light averages the Fourier-limited yield over an exponential intensity") {
    // For chi -> 0 the noise is one complex Gaussian amplitude for the whole pulse,
    // so <Q2> -> E_x[Q2_FL(Omega sqrt(x))] with x ~ Exp(1).
    DriveRecipe r;
    r.system.omega_s0 = 2.0;
    r.system.delta_s = 4.0;
    double expected = 0.0;
    const double h = 0.02;
    for (double x = 0.5 * h; x < 25.0; x += h) {
        auto q = r;
        q.system.omega_s0 = 2.0 * std::sqrt(x);
        expected += std::exp(-x) * run_point(q, EnsembleConfig{1, 1, 0}).q2_mean * h;
    }
    auto c = r;
    c.model = FieldModel::Chaotic;
    set_chi(c, 0.1);
    const auto p = run_point(c, EnsembleConfig{2000, 5, 0});
    CHECK(std::abs(p.q2_mean - expected) < 3.0 * p.q2_stderr);
    // ... which is well below the Fourier-limited yield itself once the line saturates.
    CHECK(run_point(r, EnsembleConfig{1, 1, 0}).q2_mean - expected > 0.1);
}

TEST_CASE("scan validation") {
    ScanSpec scan;
    scan.base = two_level(1.0, FieldModel::FourierLimited, 0.0);
    scan.grid = {};
    CHECK_THROWS_AS(run_scan(scan, EnsembleConfig{}), ConfigError);
    scan.grid = {0.0, 1.0, 1.0};
    CHECK_THROWS_AS(run_scan(scan, EnsembleConfig{}), ConfigError);
    scan.grid = {1.0};
    scan.variable = ScanVariable::Chi;
    CHECK_THROWS_AS(run_scan(scan, EnsembleConfig{}), ConfigError);
    CHECK_THROWS_AS((EnsembleConfig{0, 1, 1}.validate()), ConfigError);
}

TEST_CASE("failed realizations are reported with their index") {
    std::vector<int> seen(10, 0);
    try {
        parallel_for(10, 3, [&](std::size_t i) {
            seen[i] = 1;
            if (i == 7 || i == 4) throw IntegrationError("boom", 1.0, 0.5);
        });
        FAIL("expected RealizationError");
    } catch (const RealizationError& e) {
        CHECK(e.realization() == 4);
    }

    try {
        parallel_for(5, 2, [](std::size_t i) {
            if (i >= 2) throw std::runtime_error("bad");
        });
        FAIL("expected RealizationError");
    } catch (const RealizationError& e) {
        CHECK(e.realization() == 2);
    }
}

TEST_CASE("config hash tracks everything but the worker count") {
    ScanSpec scan;
    scan.grid = {0.0, 1.0};
    scan.base = two_level(1.0, FieldModel::FourierLimited, 0.0);
    const auto h = fnv1a(describe(scan, EnsembleConfig{10, 1, 1}));
    CHECK(h == fnv1a(describe(scan, EnsembleConfig{10, 1, 4})));
    CHECK(h != fnv1a(describe(scan, EnsembleConfig{10, 2, 1})));
    scan.base.system.omega_s0 = 1.5;
    CHECK(h != fnv1a(describe(scan, EnsembleConfig{10, 1, 1})));
}
