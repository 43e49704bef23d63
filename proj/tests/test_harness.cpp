#include "afcmem/harness.hpp"

#include "afcmem/io.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>

using namespace afcmem;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
    const fs::path dir = fs::temp_directory_path() / (std::string("afcmem_") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path scenario_path(const char* name) {
    return config::config_root() / "scenarios" / name;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("scenario schema errors carry diagnostics") {
    const auto dir = fresh_dir("schema");
    {
        std::ofstream out(dir / "bad.json");
        out << "{\"kind\": \"transport_comparison\"}";
    }
    CHECK_THROWS_WITH_AS(harness::load_scenario(dir / "bad.json"),
                         doctest::Contains("id"), std::runtime_error);
    {
        std::ofstream out(dir / "noparse.json");
        out << "{not json";
    }
    CHECK_THROWS_AS(harness::load_scenario(dir / "noparse.json"), std::runtime_error);

    harness::Scenario s;
    s.id = "x";
    s.kind = "no_such_kind";
    s.params = nlohmann::json::object();
    const auto cfg = config::load();
    harness::RunOptions opts;
    opts.out_dir = dir;
    CHECK_THROWS_AS(harness::run_scenario(s, cfg, opts), std::invalid_argument);
}

TEST_CASE("missing presets are reported by category and name") {
    const auto cfg = config::load();
    CHECK_THROWS_WITH_AS(config::Config::named(cfg.combs, "nope", "combs"),
                         doctest::Contains("combs/nope"), std::out_of_range);
}

TEST_CASE("every shipped scenario runs and embeds its configuration") {
    const auto cfg = config::load();
    const auto dir = fresh_dir("shipped");
    harness::RunOptions opts;
    opts.out_dir = dir;
    for (const char* name :
         {"eq1_budget.json", "transport_comparison.json", "tableS1_transitions.json",
          "fig4b_interference.json", "fig3a_cpmg_sweep.json", "fig3b_decay_trace.json"}) {
        const auto scenario = harness::load_scenario(scenario_path(name));
        const auto outcome = harness::run_scenario(scenario, cfg, opts);
        REQUIRE_FALSE(outcome.files_written.empty());
        bool has_result = false;
        for (const auto& f : outcome.files_written) {
            CHECK(fs::exists(f));
            if (f.filename() == "result.json") {
                has_result = true;
                const auto doc = nlohmann::json::parse(slurp(f));
                CHECK(doc.contains("resolved_config"));
                CHECK(doc.at("scenario").at("id") == scenario.id);
                CHECK(doc.contains("seed"));
            }
        }
        CHECK(has_result);
    }
    // no stray temporaries anywhere in the output tree
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        CHECK(entry.path().extension() != ".tmp");
    }
}

TEST_CASE("identical seeds produce byte-identical result files") {
    const auto cfg = config::load();
    const auto dir_a = fresh_dir("det_a");
    const auto dir_b = fresh_dir("det_b");
    for (const char* name : {"eq1_budget.json", "fig4b_interference.json"}) {
        const auto scenario = harness::load_scenario(scenario_path(name));
        harness::RunOptions a, b;
        a.out_dir = dir_a;
        b.out_dir = dir_b;
        const auto ra = harness::run_scenario(scenario, cfg, a);
        const auto rb = harness::run_scenario(scenario, cfg, b);
        REQUIRE(ra.files_written.size() == rb.files_written.size());
        for (std::size_t i = 0; i < ra.files_written.size(); ++i) {
            CHECK(slurp(ra.files_written[i]) == slurp(rb.files_written[i]));
        }
        // a different seed changes at least the embedded provenance
        harness::RunOptions c;
        c.out_dir = fresh_dir("det_c");
        c.seed_override = 999;
        const auto rc = harness::run_scenario(scenario, cfg, c);
        CHECK(slurp(rc.files_written.back()) != slurp(ra.files_written.back()));
    }
}

TEST_CASE("sweep-level parallelism does not change the output") {
    const auto cfg = config::load();
    const auto scenario = harness::load_scenario(scenario_path("fig3a_cpmg_sweep.json"));
    harness::RunOptions serial, parallel;
    serial.out_dir = fresh_dir("jobs1");
    parallel.out_dir = fresh_dir("jobs4");
    parallel.jobs = 4;
    const auto ra = harness::run_scenario(scenario, cfg, serial);
    const auto rb = harness::run_scenario(scenario, cfg, parallel);
    REQUIRE(ra.files_written.size() == rb.files_written.size());
    for (std::size_t i = 0; i < ra.files_written.size(); ++i) {
        CHECK(slurp(ra.files_written[i]) == slurp(rb.files_written[i]));
    }
}

TEST_CASE("atomic writes leave no partial file behind") {
    const auto dir = fresh_dir("atomic");
    io::atomic_write(dir / "nested" / "out.csv", "a,b\n1,2\n");
    CHECK(slurp(dir / "nested" / "out.csv") == "a,b\n1,2\n");
    CHECK_FALSE(fs::exists(dir / "nested" / "out.csv.tmp"));

    // a failing write must not materialize the final path
    const fs::path blocked = dir / "blocked";
    fs::create_directories(blocked / "out.csv");  // directory occupies the target name
    CHECK_THROWS(io::atomic_write(blocked / "out.csv", "x"));
    CHECK(fs::is_directory(blocked / "out.csv"));
}

TEST_CASE("constants registry: loading and schema checks") {
    const auto registry =
        harness::load_constants(config::config_root() / "paper_constants.json");
    CHECK(registry.size() >= 40);
    for (const auto& c : registry) {
        CHECK_FALSE(c.anchor.empty());
        CHECK(c.uncertainty >= 0.0);
    }
    const auto dir = fresh_dir("registry");
    {
        std::ofstream out(dir / "bad.json");
        out << R"({"constants": [{"name": "x", "value": 1.0, "anchor": ""}]})";
    }
    CHECK_THROWS_AS(harness::load_constants(dir / "bad.json"), std::runtime_error);
}

TEST_CASE("a corrupted constant fails validation and prints its anchor") {
    const auto cfg = config::load();
    harness::PaperConstant bad;
    bad.name = "comb_delta_khz";
    bad.value = 123.0;  // deliberately wrong
    bad.anchor = "negative control entry";
    bad.policy = harness::TolerancePolicy::exact;
    bad.tolerance = 0.0;
    const auto report = harness::validate(cfg, {bad});
    REQUIRE(report.entries.size() == 1);
    CHECK_FALSE(report.entries[0].pass);
    CHECK_FALSE(report.all_strict_pass());
    const auto text = report.human_readable();
    CHECK(text.find("FAIL") != std::string::npos);
    CHECK(text.find("negative control entry") != std::string::npos);

    harness::PaperConstant unknown;
    unknown.name = "not_a_registered_quantity";
    unknown.value = 1.0;
    unknown.anchor = "nowhere";
    const auto missing = harness::validate(cfg, {unknown});
    CHECK_FALSE(missing.entries[0].pass);
}

TEST_CASE("fast registry subset passes strictly") {
    const auto cfg = config::load();
    const auto registry =
        harness::load_constants(config::config_root() / "paper_constants.json");
    std::vector<harness::PaperConstant> quick;
    for (const auto& c : registry) {
        // skip the storage-scale recomputations here; the acceptance suite
        // and the full `validate` verb cover them
        if (c.name.find("lifetime") != std::string::npos || c.name == "tm_hahn_s" ||
            c.name.rfind("eta_total", 0) == 0 || c.name.rfind("zefoz_field_mag", 0) == 0 ||
            c.name == "zefoz_alignment_cos") {
            continue;
        }
        quick.push_back(c);
    }
    const auto report = harness::validate(cfg, quick);
    for (const auto& e : report.entries) {
        INFO(e.constant.name, " -> ", e.computed, " note: ", e.note);
        CHECK(e.pass);
    }
    const auto json_report = report.machine_readable();
    CHECK(json_report.size() == quick.size());
}

TEST_SUITE_END();
