// afcmem command-line front end: run reproduction scenarios, validate the
// reference-constant registry, and inspect the configuration.
#include "afcmem/config.hpp"
#include "afcmem/harness.hpp"
#include "afcmem/io.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <iostream>
#include <set>

namespace {

int cmd_run(const std::vector<std::string>& scenario_paths, const std::string& out_dir,
            std::uint64_t seed, int jobs) {
    const auto cfg = afcmem::config::load();
    afcmem::harness::RunOptions opts;
    opts.out_dir = out_dir;
    opts.seed_override = seed;
    opts.jobs = jobs;
    std::set<std::string> seen;
    for (const auto& path : scenario_paths) {
        const auto scenario = afcmem::harness::load_scenario(path);
        if (!seen.insert(scenario.id).second) {
            throw std::runtime_error("duplicate scenario id in one invocation: " + scenario.id);
        }
        const auto outcome = afcmem::harness::run_scenario(scenario, cfg, opts);
        std::cout << scenario.id << ": wrote " << outcome.files_written.size() << " file(s)\n";
        for (const auto& f : outcome.files_written) std::cout << "  " << f.string() << "\n";
    }
    return 0;
}

int cmd_validate(bool strict, const std::string& report_path) {
    const auto cfg = afcmem::config::load();
    const auto registry = afcmem::harness::load_constants(afcmem::config::config_root() /
                                                          "paper_constants.json");
    const auto report = afcmem::harness::validate(cfg, registry);
    std::cout << report.human_readable();
    if (!report_path.empty()) {
        afcmem::io::atomic_write(report_path, report.machine_readable().dump(2) + "\n");
        std::cout << "report written to " << report_path << "\n";
    }
    const bool ok = report.all_strict_pass();
    std::cout << (ok ? "validation: all strict checks passed\n"
                     : "validation: strict check failures present\n");
    return (strict && !ok) ? 1 : 0;
}

int cmd_list_presets() {
    const auto cfg = afcmem::config::load();
    auto section = [](const char* name, const auto& m) {
        std::cout << name << ":\n";
        for (const auto& [key, value] : m) {
            (void)value;
            std::cout << "  " << key << "\n";
        }
    };
    section("systems", cfg.systems);
    section("fields", cfg.fields);
    section("combs", cfg.combs);
    section("pulses", cfg.pulse_shapes);
    section("controls", cfg.controls);
    section("lines", cfg.lines);
    section("noises", cfg.noises);
    section("heatings", cfg.heatings);
    section("pumps", cfg.pumps);
    section("interference", cfg.interference);
    section("storages", cfg.storages);
    section("transports", cfg.transports);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spin-wave AFC optical-memory simulation harness"};
    app.require_subcommand(1);

    std::vector<std::string> scenario_paths;
    std::string out_dir = "results";
    std::uint64_t seed = 0;
    int jobs = 1;
    auto* run = app.add_subcommand("run", "run one or more scenario files");
    run->add_option("scenario", scenario_paths, "scenario JSON file(s)")->required();
    run->add_option("--out-dir", out_dir, "output directory");
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--jobs", jobs, "sweep-level worker count");

    bool strict = false;
    std::string report_path;
    auto* val = app.add_subcommand("validate", "recompute the reference-constant registry");
    val->add_flag("--strict", strict, "exit nonzero when a strict check fails");
    val->add_option("--report", report_path, "write the machine-readable report here");

    app.add_subcommand("list-presets", "list configured preset names");
    app.add_subcommand("dump-config", "print the resolved configuration");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_paths, out_dir, seed, jobs);
        if (val->parsed()) return cmd_validate(strict, report_path);
        if (app.get_subcommand("list-presets")->parsed()) return cmd_list_presets();
        if (app.get_subcommand("dump-config")->parsed()) {
            std::cout << afcmem::config::dump_resolved();
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
