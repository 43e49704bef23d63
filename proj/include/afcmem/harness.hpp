// harness.hpp — scenario runner and the reference-constant validation suite.
#pragma once

#include "afcmem/config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace afcmem::harness {

struct Scenario {
    std::string id;
    std::string kind;
    std::uint64_t seed = 1;
    nlohmann::json params;  // kind-specific payload, validated by the runner

    void validate() const;
};

// Parses and schema-checks a scenario file; errors name the offending field.
Scenario load_scenario(const std::filesystem::path& path);

struct RunOptions {
    std::filesystem::path out_dir = "results";
    std::uint64_t seed_override = 0;  // 0 keeps the scenario seed
    int jobs = 1;
};

struct RunOutcome {
    std::vector<std::filesystem::path> files_written;
};

// Executes the scenario and writes its result files atomically. Throws on any
// component error; the CLI maps that to a nonzero exit status.
RunOutcome run_scenario(const Scenario& scenario, const config::Config& cfg,
                        const RunOptions& opts);

// ------------------------------------------------------------- validation --

enum class TolerancePolicy { exact, relative, band, factor, report_only };

struct PaperConstant {
    std::string name;
    double value = 0.0;
    double uncertainty = 0.0;
    std::string anchor;  // where the number is quoted
    TolerancePolicy policy = TolerancePolicy::relative;
    double tolerance = 0.02;  // meaning depends on the policy
};

std::vector<PaperConstant> load_constants(const std::filesystem::path& path);

struct ValidationEntry {
    PaperConstant constant;
    double computed = 0.0;
    bool pass = false;
    bool report_only = false;
    std::string note;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;

    bool all_strict_pass() const;
    std::string human_readable() const;
    nlohmann::json machine_readable() const;
};

// Recomputes every registered constant through the corresponding operation
// and checks it under its tolerance policy. Unknown names become failing
// entries; computation errors are captured per entry, never thrown.
ValidationReport validate(const config::Config& cfg, const std::vector<PaperConstant>& registry);

}  // namespace afcmem::harness
