// Acceptance checks. Prints one "ACn PASS|FAIL ..." line per criterion and
// exits nonzero if any criterion fails. `--only <group>` restricts the run.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "sasefel/analysis.hpp"
#include "sasefel/cli.hpp"
#include "sasefel/dynamics.hpp"
#include "sasefel/ensemble.hpp"
#include "sasefel/noise.hpp"
#include "sasefel/pulse.hpp"

using namespace sasefel;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

std::string num(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

void report(std::string_view id, bool pass, const std::string& detail) {
    if (!pass) ++g_failures;
    std::cout << id << (pass ? " PASS " : " FAIL ") << detail << std::endl;
}

class Timer {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }
    std::string str() const { return "(" + num(seconds(), 3) + " s)"; }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

EnsembleConfig ensemble(std::size_t n, std::uint64_t seed) { return {n, seed, 0}; }

DriveRecipe two_level(double tau_s, double omega_s0) {
    DriveRecipe r;
    r.system.omega_s0 = omega_s0;
    r.probe = EnvelopeSpec::gaussian(tau_s, 16.0, 32.0);
    return r;
}

DriveRecipe three_level(double tau_s, double tau_d, double omega_s0, double omega_d0) {
    DriveRecipe r = two_level(tau_s, omega_s0);
    r.system.levels = 3;
    r.system.gamma3 = 1.0;
    r.system.omega_d0 = omega_d0;
    r.pump = EnvelopeSpec::gaussian(tau_d, 16.0, 32.0);
    return r;
}

DriveRecipe chaotic(DriveRecipe r, double chi, PsdKind kind = PsdKind::Gaussian) {
    r.model = FieldModel::Chaotic;
    r.psd.kind = kind;
    set_chi(r, chi);
    return r;
}

Curve scan(const DriveRecipe& r, ScanVariable var, const std::vector<double>& grid, std::size_t n,
           Observable obs = Observable::Q2, std::uint64_t seed = 1) {
    const auto res = run_scan(ScanSpec{var, grid, r}, ensemble(n, seed));
    if (!res.complete()) throw std::runtime_error("scan incomplete");
    return curve_of(res, obs);
}

std::string features_str(const CurveFeatures& f) {
    if (!f.has_doublet()) return "no doublet (peak at " + num(f.peak_positions.front()) + ")";
    return "separation " + num(*f.separation) + ", fwhm " + num(f.fwhm_per_peak[0]) + "/" + num(f.fwhm_per_peak[1]) +
           ", V " + num(*f.depth);
}

// ---------------------------------------------------------------- statistics

void ac1() {
    Timer t;
    const auto env = EnvelopeSpec::gaussian(10.0, 32.0, 64.0);
    const auto pulses = generate_pulses(env, 1.0, PsdSpec{PsdKind::Gaussian, 0.5}, ensemble(5000, 1));
    const double center = 32.0;
    const auto m = intensity_moment_ratios(pulses, std::span<const double>(&center, 1), 5);
    bool ok = m.rows.size() == 5;
    std::string detail = "ratios at t0:";
    for (const auto& row : m.rows) {
        const int r = row.order;
        const double f = numeric::factorial(r);
        ok = ok && row.ratio >= numeric::factorial(r - 1) && row.ratio < numeric::factorial(r + 1);
        if (r <= 3) ok = ok && std::abs(row.ratio - f) <= 0.10 * f;
        detail += " r" + std::to_string(r) + "=" + num(row.ratio) + "/" + num(f);
    }
    // Delta-method standard errors of the r = 2, 3 ratios for an exponential intensity.
    if (m.rows.size() == 5) {
        const double n = static_cast<double>(pulses.size());
        detail += " (r2 off by " + num((m.rows[1].ratio - 2.0) / std::sqrt(4.0 / n), 3) + " SE, r3 by " +
                  num((m.rows[2].ratio - 6.0) / std::sqrt(360.0 / n), 3) + " SE)";
    }
    ok = ok && t.seconds() <= 60.0;
    report("AC1", ok, detail + " " + t.str());
}

void ac2() {
    Timer t;
    bool ok = true;
    std::string detail;
    for (auto kind : {PsdKind::Lorentzian, PsdKind::Gaussian, PsdKind::Sech}) {
        const PsdSpec psd{kind, 1.0};
        const auto grid = default_grid(psd, 32.0);
        const auto traces = generate_noise(psd, grid, ensemble(2000, 2));
        const double tc = coherence_time(psd), dt = grid.time_step();
        double worst = 0.0, worst_v = 0.0;
        for (int k = 1; k <= 12; ++k) {
            const double steps = std::round(k * tc / 4.0 / dt);
            const double v = steps * dt;
            if (v > 3.0 * tc) break;
            const auto est = empirical_g1_stats(traces, v);
            const double z = std::abs(est.value - theoretical_g1(psd, v)) / est.std_error;
            if (z > worst) {
                worst = z;
                worst_v = v;
            }
        }
        ok = ok && worst <= 3.0;
        detail += std::string(to_string(kind)) + " max " + num(worst, 3) + " SE at v=" + num(worst_v, 3) + "; ";
    }
    ok = ok && t.seconds() <= 60.0;
    report("AC2", ok, detail + t.str());
}

void ac3() {
    Timer t;
    const double tau = 3.0;
    const auto env = EnvelopeSpec::gaussian(tau, 16.0, 32.0);
    bool ok = true;
    std::string detail = "esd fwhm/predicted:";
    for (double chi : {1.67, 2.5, 5.0, 10.0}) {
        const PsdSpec psd{PsdKind::Gaussian, chi / tau};
        const auto es = energy_spectral_density(generate_pulses(env, 1.0, psd, ensemble(2000, 3)));
        const double predicted = bandwidth_formula(tau, psd.sigma_omega).bandwidth;
        ok = ok && std::abs(es.fwhm / predicted - 1.0) <= 0.05;
        detail += " chi=" + num(chi) + ":" + num(es.fwhm / predicted);
    }
    const auto grid = default_grid(PsdSpec{PsdKind::Gaussian, 1.0}, 32.0);
    const std::vector<StochasticPulse> fl{make_pulse(env, 1.0, constant_trace(grid))};
    const double fl_ratio = energy_spectral_density(fl).fwhm / bandwidth_formula(tau, 0.0).fourier_limit;
    ok = ok && std::abs(fl_ratio - 1.0) <= 0.02;
    detail += " fourier-limited:" + num(fl_ratio, 5);
    ok = ok && t.seconds() <= 120.0;
    report("AC3", ok, detail + " " + t.str());
}

// ---------------------------------------------------------------- dynamics

void ac4() {
    Timer t;
    double worst_defect = 0.0, worst_halving = 0.0;
    std::size_t realizations = 0;
    auto run = [&](const DriveRecipe& r, std::size_t n, std::size_t n_halving) {
        for (std::size_t i = 0; i < n; ++i) {
            RngStream rng(4, i);
            const auto noise = r.sample(r.noise_grid(), rng);
            const NoiseTrace* z = noise ? &*noise : nullptr;
            const auto plan = r.step_plan(z);
            auto integrate = [&](const StepPlan& p, const StepObserver& obs) {
                const auto d = r.drive(z, p);
                return r.system.levels == 2 ? integrate_two_level(r.system, d, 32.0, obs)
                                            : integrate_three_level(r.system, d, 32.0, obs);
            };
            const auto a = integrate(plan, [&](std::size_t, std::span<const double> y, std::size_t lanes) {
                const auto s = lane_state(y, lanes, 0, r.system.levels);
                worst_defect = std::max(worst_defect, std::abs(s.conservation_defect()));
            });
            ++realizations;
            if (i >= n_halving) continue;
            const auto b = integrate(StepPlan{plan.step / 2.0, plan.n_steps * 2}, {});
            worst_halving = std::max({worst_halving, std::abs(a.q2 - b.q2), std::abs(a.q3 - b.q3)});
        }
    };
    auto strong = two_level(3.0, 4.0);
    strong.system.delta_s = 1.0;
    run(strong, 1, 1);
    run(chaotic(strong, 10.0), 200, 20);
    run(chaotic(two_level(3.0, 2.0), 5.0, PsdKind::Lorentzian), 200, 20);
    auto dr = chaotic(three_level(4.5, 6.0, 0.1, 10.0), 5.0);
    dr.system.delta_s = 9.0;
    run(dr, 100, 10);
    auto dr2 = chaotic(three_level(6.0, 3.0, 10.0, 0.1), 1.0);
    dr2.system.delta_d = -9.0;
    run(dr2, 100, 10);
    const bool ok = worst_defect < 1e-6 && worst_halving < 1e-6;
    report("AC4", ok,
           "max |sum - 1| " + num(worst_defect, 3) + " over " + std::to_string(realizations) +
               " realizations, max step-halving change " + num(worst_halving, 3) + " " + t.str());
}

void ac5() {
    Timer t;
    const auto grid = linspace(-20.0, 20.0, 401);
    try {
        const auto weak = fit_lorentzian(scan(two_level(3.0, 0.5), ScanVariable::DeltaS, grid, 1));
        const auto strong = fit_lorentzian(scan(two_level(3.0, 4.0), ScanVariable::DeltaS, grid, 1));
        const double ratio = strong.apex_residual / weak.apex_residual;
        const bool ok = weak.residual < 0.02 && ratio >= 5.0;
        report("AC5", ok,
               "weak residual " + num(weak.residual, 3) + " (apex " + num(weak.apex_residual, 3) +
                   "), strong apex residual " + num(strong.apex_residual, 3) + ", ratio " + num(ratio, 3) +
                   " (need >= 5) " + t.str());
    } catch (const std::exception& e) {
        report("AC5", false, std::string("fit failed: ") + e.what());
    }
}

void ac7() {
    Timer t;
    const auto grid = linspace(-16.0, 16.0, 321);
    auto pulsed = three_level(4.5, 6.0, 0.1, 10.0);
    const auto f = extract_doublet(scan(pulsed, ScanVariable::DeltaS, grid, 1));

    auto flat = pulsed;
    flat.probe = EnvelopeSpec::flat(32.0);
    flat.pump = EnvelopeSpec::flat(32.0);
    const auto fs_ = extract_doublet(scan(flat, ScanVariable::DeltaS, grid, 1));
    const double oracle = dressed_eigensystem(10.0, 0.0).splitting;

    bool ok = f.has_doublet() && fs_.has_doublet() && oracle == 20.0;
    if (ok) {
        ok = std::abs(*f.separation / 19.2 - 1.0) <= 0.05 && *f.separation < oracle &&
             std::abs(*fs_.separation / oracle - 1.0) <= 0.01;
    }
    report("AC7", ok,
           "pulsed " + features_str(f) + "; stationary " + features_str(fs_) + "; dressed-state splitting " +
               num(oracle, 17) + " " + t.str());
}

// ---------------------------------------------------------------- broadening

void ac6() {
    Timer t;
    const auto grid = linspace(-15.0, 15.0, 61);
    const auto base = two_level(3.0, 2.0);
    const auto ref = scan(base, ScanVariable::DeltaS, grid, 1);
    std::string detail = "fwhm fourier-limited " + num(numeric::fwhm(ref.x, ref.y)) + ", chi:";
    bool monotone = true, close = true;
    double prev = 0.0;
    for (double chi : {1.67, 2.5, 5.0, 10.0}) {
        const auto c = scan(chaotic(base, chi), ScanVariable::DeltaS, grid, 5000);
        const double w = numeric::fwhm(c.x, c.y);
        monotone = monotone && w > prev;
        prev = w;
        detail += " " + num(chi) + "->" + num(w);
        if (chi == 1.67) {
            double worst = 0.0, at = 0.0;
            for (std::size_t i = 0; i < c.x.size(); ++i) {
                const double z = std::abs(c.y[i] - ref.y[i]) / c.stderr_y[i];
                if (z > worst) {
                    worst = z;
                    at = c.x[i];
                }
            }
            close = worst <= 2.0;
            detail += " (max deviation from fourier-limited " + num(worst, 3) + " SE at delta_s=" + num(at, 3) + ")";
        }
    }
    const bool ok = monotone && close && t.seconds() <= 900.0;
    report("AC6", ok, detail + (monotone ? "; monotone" : "; not monotone") + " " + t.str());
}

// ---------------------------------------------------------------- splitting

void ac8() {
    Timer t;
    const auto grid = linspace(-20.0, 20.0, 129);
    const auto base = three_level(4.5, 6.0, 0.1, 10.0);
    const auto ref = extract_doublet(scan(base, ScanVariable::DeltaS, grid, 1));
    const std::vector<double> chis{1.0, 2.0, 5.0, 10.0, 15.0, 20.0};
    std::vector<CurveFeatures> feats;
    for (double chi : chis) feats.push_back(extract_doublet(scan(chaotic(base, chi), ScanVariable::DeltaS, grid, 2000)));
    if (!ref.has_doublet()) {
        report("AC8", false, "fourier-limited reference has no doublet");
        return;
    }
    const auto pts = splitting_vs_chi(chis, feats, *ref.separation);
    bool splitting_ok = true, monotone = true;
    double prev_depth = ref.depth.value_or(1.0);
    std::string detail = "chi: splitting/V";
    for (const auto& p : pts) {
        if (p.normalized_splitting) splitting_ok = splitting_ok && *p.normalized_splitting >= 0.94;
        const double v = p.depth.value_or(0.0);
        monotone = monotone && v < prev_depth;
        prev_depth = v;
        detail += " " + num(p.chi) + ":" + (p.normalized_splitting ? num(*p.normalized_splitting) : "-") + "/" + num(v);
    }
    const bool collapsed = !feats.back().has_doublet();
    // Beyond the criterion range: where the doublet actually disappears.
    for (double chi : {30.0, 40.0}) {
        const auto f = extract_doublet(scan(chaotic(base, chi), ScanVariable::DeltaS, grid, 2000));
        detail += " [" + num(chi) + ": " + features_str(f) + "]";
    }
    const bool ok = splitting_ok && monotone && collapsed && t.seconds() <= 1800.0;
    report("AC8", ok,
           detail + (collapsed ? "; collapsed by chi=20" : "; doublet still resolved at chi=20") + " " + t.str());
}

void ac9() {
    Timer t;
    const auto grid = linspace(-20.0, 20.0, 129);
    std::vector<double> chis;
    for (double c = 2.0; c <= 20.0; c += 3.0) chis.push_back(c);
    auto trend = [&](PsdKind kind, double tau_s) {
        const auto base = three_level(tau_s, 6.0, 0.1, 10.0);
        std::vector<CurveFeatures> feats;
        for (double chi : chis)
            feats.push_back(extract_doublet(scan(chaotic(base, chi, kind), ScanVariable::DeltaS, grid, 300)));
        return fwhm_vs_chi(chis, feats);
    };
    try {
        const auto g = trend(PsdKind::Gaussian, 4.5);
        const auto l = trend(PsdKind::Lorentzian, 4.5);
        const auto s = trend(PsdKind::Sech, 4.5);
        const auto g3 = trend(PsdKind::Gaussian, 3.0);
        const double gl = l.fit.slope / g.fit.slope;
        const double tau_ratio = g3.fit.slope / g.fit.slope;
        const bool ok = g.fit.r_squared > 0.98 && std::abs(gl - 1.0) <= 0.10 && s.fit.slope < g.fit.slope &&
                        s.fit.slope < l.fit.slope && std::abs(tau_ratio / 1.5 - 1.0) <= 0.15;
        report("AC9", ok,
               "slopes gaussian " + num(g.fit.slope) + " (R2 " + num(g.fit.r_squared) + "), lorentzian " +
                   num(l.fit.slope) + " (ratio " + num(gl) + "), sech " + num(s.fit.slope) + ", gaussian tau_s=3 " +
                   num(g3.fit.slope) + " (ratio " + num(tau_ratio) + ", expect 1.5) " + t.str());
    } catch (const std::exception& e) {
        report("AC9", false, std::string("trend failed: ") + e.what() + " " + t.str());
    }
}

// ---------------------------------------------------------------- arrangement II

void ac10() {
    Timer t;
    const auto grid = linspace(-20.0, 20.0, 129);
    const auto base = three_level(6.0, 3.0, 10.0, 0.1);
    const auto ref = extract_doublet(scan(base, ScanVariable::DeltaD, grid, 1, Observable::Q3));
    const auto f = extract_doublet(scan(chaotic(base, 1.0), ScanVariable::DeltaD, grid, 500, Observable::Q3));
    bool ok = ref.has_doublet() && f.has_doublet();
    if (ok) {
        ok = *f.separation < *ref.separation && f.fwhm_per_peak[0] > ref.fwhm_per_peak[0] &&
             f.fwhm_per_peak[1] > ref.fwhm_per_peak[1] && *f.depth < *ref.depth;
    }
    report("AC10", ok, "fourier-limited " + features_str(ref) + "; chi=1 " + features_str(f) + " " + t.str());
}

// ---------------------------------------------------------------- determinism

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void ac11() {
    Timer t;
    const auto root = fs::temp_directory_path() / "sasefel_acceptance_determinism";
    fs::remove_all(root);
    bool ok = true;
    std::size_t files = 0;
    std::string mismatches;
    for (const auto& [name, text] : presets_data::kPresets) {
        const auto desc = cli::preset_description(text);
        const auto open = desc.rfind('('), close = desc.rfind(')');
        cli::Options o;
        o.command = desc.substr(open + 1, close - open - 1);
        o.config = "preset:" + std::string(name);
        o.realizations = 3;
        std::map<std::size_t, std::pair<int, std::map<std::string, std::string>>> runs;
        for (std::size_t workers : {1, 8}) {
            const auto dir = root / (std::string(name) + "_w" + std::to_string(workers));
            fs::create_directories(dir);
            o.workers = workers;
            o.out = (dir / "out.csv").string();
            std::ostringstream out, err;
            const int rc = cli::run_command(o, out, err);
            auto& [code, contents] = runs[workers];
            code = rc;
            for (const auto& e : fs::directory_iterator(dir)) contents[e.path().filename().string()] = slurp(e.path());
        }
        const bool same = runs[1] == runs[8] && runs[1].first == 0 && !runs[1].second.empty();
        files += runs[1].second.size();
        if (!same) {
            mismatches += " " + std::string(name) + " (exit " + std::to_string(runs[1].first) + "/" +
                          std::to_string(runs[8].first);
            for (const auto& [file, bytes] : runs[1].second)
                if (runs[8].second[file] != bytes) {
                    mismatches += ", first differing file " + file;
                    break;
                }
            mismatches += ")";
        }
        ok = ok && same;
    }
    fs::remove_all(root);
    report("AC11", ok,
           std::to_string(std::size(presets_data::kPresets)) + " presets, " + std::to_string(files) +
               " files compared for workers 1 vs 8" + (mismatches.empty() ? "" : "; differing:" + mismatches) + " " +
               t.str());
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::vector<std::function<void()>>>> groups{
        {"statistics", {ac1, ac2, ac3}},
        {"dynamics", {ac4, ac5, ac7}},
        {"broadening", {ac6}},
        {"splitting", {ac8, ac9}},
        {"arrangement2", {ac10}},
        {"determinism", {ac11}},
    };
    CLI::App app{"acceptance checks"};
    std::string only;
    app.add_option("--only", only, "run one group")
        ->check(CLI::IsMember({"statistics", "dynamics", "broadening", "splitting", "arrangement2", "determinism"}));
    CLI11_PARSE(app, argc, argv);
    for (const auto& [name, checks] : groups) {
        if (!only.empty() && name != only) continue;
        for (const auto& check : checks) {
            try {
                check();
            } catch (const std::exception& e) {
                report(name, false, std::string("error: ") + e.what());
            }
        }
    }
    return g_failures == 0 ? 0 : 1;
}
