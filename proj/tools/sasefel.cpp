#include <iostream>

#include "CLI11.hpp"
#include "sasefel/cli.hpp"

int main(int argc, char** argv) {
    using sasefel::cli::Options;
    CLI::App app{"Monte Carlo Auger yields under chaotic free-electron-laser pulses", "sasefel"};
    app.set_version_flag("--version", std::string(sasefel::cli::kVersion));
    app.require_subcommand(1);

    Options o;
    std::uint64_t seed = 0;
    std::size_t realizations = 0, workers = 0;

    auto common = [&](CLI::App* sub, bool ensemble) {
        sub->add_option("--config", o.config, "config file, or preset:NAME");
        sub->add_option("--out", o.out, "output CSV path (several series: <stem>_s<k>.csv)");
        sub->add_option("--units", o.units, "annotate outputs with physical units")->check(CLI::IsMember({"kr-3d5p"}));
        if (!ensemble) return;
        sub->add_option("--seed", seed, "master seed (overrides the config)");
        sub->add_option("--realizations", realizations, "ensemble size (overrides the config)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--workers", workers,
                        std::string("worker threads, 0 = all cores (fallback: $") + sasefel::cli::kWorkersEnv + ")");
    };

    auto* pulse = app.add_subcommand("pulse-stats", "intensity moments, mean profile, energy and spectrum statistics");
    common(pulse, true);
    auto* single = app.add_subcommand("single-scan", "ensemble-averaged Q2 of a single resonance over a scan");
    common(single, true);
    auto* dr = app.add_subcommand("dr-scan", "ensemble-averaged Q2 and Q3 of the double resonance over a scan");
    common(dr, true);
    auto* analyze = app.add_subcommand("analyze", "doublet features and Lorentzian fit of a scan CSV");
    analyze->add_option("--in", o.in, "scan CSV")->required();
    analyze->add_option("--out", o.out, "features CSV");
    analyze->add_option("--observable", o.observable, "q2 or q3")->check(CLI::IsMember({"q2", "q3"}));
    auto* presets = app.add_subcommand("presets", "list bundled configurations, or print one");
    presets->add_option("name", o.config, "preset to print");

    CLI11_PARSE(app, argc, argv);

    auto* sub = app.get_subcommands().front();
    o.command = sub->get_name();
    auto given = [&](const char* name) {
        const auto* opt = sub->get_option_no_throw(name);
        return opt && opt->count() > 0;
    };
    if (given("--seed")) o.seed = seed;
    if (given("--realizations")) o.realizations = realizations;
    if (given("--workers")) o.workers = workers;
    return sasefel::cli::run_command(o, std::cout, std::cerr);
}
