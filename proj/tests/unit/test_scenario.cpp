#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "misuse/errors.hpp"
#include "misuse/scenario.hpp"

using namespace misuse;
namespace fs = std::filesystem;

namespace {

const fs::path kData = MISUSE_TEST_DATA_DIR;

std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch_dir() {
    const fs::path d = fs::temp_directory_path() / "misuse_scenario_tests";
    fs::create_directories(d);
    return d;
}

std::string error_of(const std::string& text) {
    try {
        const ScenarioFile s = scenario_from_text(text, "case.yaml");
        resolve_scenario(s, kData);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("bundled scenarios load without warnings") {
    for (const char* name : {"default_scenario.yaml", "sessions_scenario.yaml"}) {
        CAPTURE(name);
        std::vector<std::string> warnings{"sentinel"};
        load_scenario(kData / name, &warnings);
        CHECK(warnings.empty());
    }
    const ResolvedScenario r = load_resolved_scenario(kData / "default_scenario.yaml");
    CHECK(r.params.attempts_per_year == 200);
    CHECK(r.whatif.jailbreak_time == 365);
    CHECK(r.threshold.value == 30);
    CHECK(r.file.policy.forecast_horizon_days == 30);
    CHECK(r.digest.size() == 64);
}

TEST_CASE("save then load is the identity, in YAML and JSON") {
    for (const char* name : {"default_scenario.yaml", "sessions_scenario.yaml"}) {
        const ScenarioFile s = load_scenario(kData / name);
        for (const char* ext : {".yaml", ".json"}) {
            const fs::path out = scratch_dir() / (std::string("roundtrip") + ext);
            save_scenario(s, out);
            const ScenarioFile back = scenario_from_text(read(out), out.string());
            CHECK(back == s);
            // Re-saving is a fixed point.
            save_scenario(back, out);
            CHECK(scenario_from_text(read(out), out.string()) == s);
        }
    }
}

TEST_CASE("awkward doubles survive the round trip bit for bit") {
    ScenarioFile s = load_scenario(kData / "default_scenario.yaml");
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    s.threat_model.attempts_per_year = 0.1 + 0.2;
    s.threat_model.damage_units_per_success = 1e-300;
    s.threat_model.requests_per_day = 1.0 / 3.0;
    s.threat_model.p_pre.points.clear();
    double t = 0;
    double p = 0;
    for (int i = 0; i < 20; ++i) {
        s.threat_model.p_pre.points.push_back({t, p});
        t += u(rng) * 30;
        p = std::min(1.0, p + u(rng) * 0.05);
    }
    s.whatif.rng_seed = 0xFFFFFFFFFFFFFFFFULL;
    s.metadata["note"] = "quotes \" and: colons # and hashes";
    const fs::path out = scratch_dir() / "awkward.yaml";
    save_scenario(s, out);
    CHECK(scenario_from_text(read(out), "awkward.yaml") == s);
    CHECK(format_double(0.1 + 0.2) == "0.30000000000000004");
    CHECK(format_double(2.0) == "2");
}

TEST_CASE("p_pre below p_none names the knot") {
    const std::string base = read(kData / "default_scenario.yaml");
    const std::string msg = error_of(replace(base, "{days: 365, probability: 0.05}",
                                             "{days: 365, probability: 0.9}"));
    CHECK(msg.find("threat_model.p_pre") != std::string::npos);
    CHECK(msg.find("t=365") != std::string::npos);
}

TEST_CASE("unsupported schema version names the supported versions") {
    const std::string msg =
        error_of(replace(read(kData / "default_scenario.yaml"), "schema_version: 1", "schema_version: 7"));
    CHECK(msg.find("unsupported schema_version 7") != std::string::npos);
    CHECK(msg.find("supported versions: 1") != std::string::npos);
}

TEST_CASE("diagnostics carry field paths and lines") {
    const std::string base = read(kData / "default_scenario.yaml");

    std::string msg = error_of(replace(base, "requests_per_day: 3", "requests_per_day: three"));
    CHECK(msg.find("threat_model.requests_per_day") != std::string::npos);
    CHECK(msg.find("(line 9)") != std::string::npos);

    msg = error_of(replace(base, "  runs: 200", "  runs: 200\n  rnus: 3"));
    CHECK(msg.find("whatif.rnus") != std::string::npos);
    CHECK(msg.find("unknown field") != std::string::npos);

    msg = error_of(replace(base, "- {days: 30, probability: 0.05}", "- {days: 30, probability: 1.05}"));
    CHECK(msg.find("threat_model.p_pre") != std::string::npos);

    msg = error_of("threat_model: [1, 2\n");
    CHECK(msg.find("case.yaml:") != std::string::npos);

    msg = error_of(replace(base, "  attempts_per_year: 200\n", ""));
    CHECK(msg.find("threat_model.attempts_per_year") != std::string::npos);
    CHECK(msg.find("required") != std::string::npos);
}

TEST_CASE("quoted numbers stay strings and are rejected") {
    const std::string msg =
        error_of(replace(read(kData / "default_scenario.yaml"), "rng_seed: 42", "rng_seed: \"42\""));
    CHECK(msg.find("whatif.rng_seed") != std::string::npos);
}

TEST_CASE("null jailbreak time means never") {
    const std::string text = replace(read(kData / "default_scenario.yaml"), "jailbreak_time_days: 365",
                                     "jailbreak_time_days: null");
    const ResolvedScenario r = resolve_scenario(scenario_from_text(text, "x.yaml"), kData);
    CHECK(r.whatif.jailbreak_time == kNever);
}

TEST_CASE("JSON documents parse to the same scenario") {
    const ScenarioFile s = load_scenario(kData / "default_scenario.yaml");
    CHECK(scenario_from_text(scenario_to_json(s).dump(), "x.json") == s);
}

TEST_CASE("digest ignores metadata and tracks everything else") {
    const ScenarioFile s = load_scenario(kData / "default_scenario.yaml");
    const std::string d = scenario_digest(s, kData);

    ScenarioFile m = s;
    m.metadata["title"] = "renamed";
    m.metadata["extra"] = {1, 2, 3};
    CHECK(scenario_digest(m, kData) == d);

    ScenarioFile c = s;
    c.threat_model.attempts_per_year = 201;
    CHECK(scenario_digest(c, kData) != d);
    c = s;
    c.whatif.rng_seed = 43;
    CHECK(scenario_digest(c, kData) != d);
    c = s;
    c.policy.threshold_label = "high";
    CHECK(scenario_digest(c, kData) != d);
    c = s;
    c.evidence["C1"] = {"memo"};
    CHECK(scenario_digest(c, kData) != d);
}

TEST_CASE("digest covers referenced session logs") {
    const fs::path dir = scratch_dir() / "logs";
    fs::create_directories(dir);
    fs::copy_file(kData / "example_sessions.ndjson", dir / "example_sessions.ndjson",
                  fs::copy_options::overwrite_existing);
    const ScenarioFile s = load_scenario(kData / "sessions_scenario.yaml");
    const std::string before = scenario_digest(s, dir);
    CHECK(before == scenario_digest(s, kData));
    {
        std::ofstream app(dir / "example_sessions.ndjson", std::ios::app);
        app << "# appended comment\n";
    }
    CHECK(scenario_digest(s, dir) != before);
}

TEST_CASE("session scenario resolves actor curves and a single aggregate curve") {
    const ResolvedScenario r = load_resolved_scenario(kData / "sessions_scenario.yaml");
    CHECK(r.actor_curves.size() == 4);
    CHECK(r.evasion.curves.size() == 1);
    CHECK(r.patching.has_value());
    CHECK(r.bans->time_per_ban == 2);
    CHECK(r.evasion.curves[0].curve.tail_slope() == 0.5);
}

TEST_CASE("logistic time-cost inputs are sampled onto knots") {
    const std::string text = replace(read(kData / "default_scenario.yaml"),
                                     "  p_pre:\n    - {days: 0, probability: 0}\n"
                                     "    - {days: 30, probability: 0.05}\n"
                                     "    - {days: 90, probability: 0.3}\n"
                                     "    - {days: 180, probability: 0.6}\n"
                                     "    - {days: 365, probability: 0.8}\n",
                                     "  p_pre:\n    logistic: {midpoint_days: 120, steepness_per_day: 0.03,"
                                     " max_probability: 0.8, until_days: 400, knots: 81}\n");
    const ScenarioFile s = scenario_from_text(text, "x.yaml");
    REQUIRE(s.threat_model.p_pre.logistic.has_value());
    const ResolvedScenario r = resolve_scenario(s, kData);
    CHECK(r.params.p_pre.size() == 81);
    CHECK(r.params.p_pre(120) == doctest::Approx(0.4).epsilon(1e-12));
    const fs::path out = scratch_dir() / "logistic.yaml";
    save_scenario(s, out);
    CHECK(scenario_from_text(read(out), "logistic.yaml") == s);
}
