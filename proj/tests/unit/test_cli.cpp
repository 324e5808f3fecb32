#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "misuse/commands.hpp"
#include "misuse/scenario.hpp"

using namespace misuse;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kData = MISUSE_TEST_DATA_DIR;
const std::string kCli = MISUSE_TEST_CLI;

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome run(const std::string& args) {
    const fs::path dir = fs::temp_directory_path();
    const fs::path out = dir / "misuse_cli_stdout";
    const fs::path err = dir / "misuse_cli_stderr";
    const std::string cmd = "'" + kCli + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = read(out);
    o.err = read(err);
    return o;
}

std::string scenario(const char* name) { return "--scenario '" + (kData / name).string() + "'"; }

}  // namespace

TEST_CASE("evaluate prints the four quantities with units") {
    const Outcome o = run("evaluate " + scenario("default_scenario.yaml"));
    CHECK(o.code == 0);
    CHECK(o.out.rfind("quantity,harm_units_per_year\n", 0) == 0);
    for (const char* q : {"risk_none,", "risk_pre,", "risk_post,", "uplift,"}) {
        CHECK(o.out.find(q) != std::string::npos);
    }
    CHECK(o.err.empty());

    const ResolvedScenario s = load_resolved_scenario(kData / "default_scenario.yaml");
    CHECK(o.out == format_text(run_evaluate(s)));
    const Outcome j = run("evaluate --format json " + scenario("default_scenario.yaml"));
    CHECK(json::parse(j.out) == to_json(run_evaluate(s)));
}

TEST_CASE("simulate is byte-identical across invocations and thread counts") {
    const Outcome a = run("simulate " + scenario("default_scenario.yaml") + " --runs 20 --seed 42");
    const Outcome b = run("simulate " + scenario("default_scenario.yaml") +
                          " --runs 20 --seed 42 --threads 1");
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.rfind("day,mean_harm_units_per_year,p05_harm_units_per_year,"
                      "p50_harm_units_per_year,p95_harm_units_per_year\n", 0) == 0);
    const Outcome c = run("simulate " + scenario("default_scenario.yaml") + " --runs 20 --seed 43");
    CHECK(c.out != a.out);
}

TEST_CASE("--out writes the file instead of standard output") {
    const fs::path out = fs::temp_directory_path() / "misuse_cli_out.csv";
    fs::remove(out);
    const Outcome o = run("evaluate " + scenario("default_scenario.yaml") + " --out '" + out.string() + "'");
    CHECK(o.code == 0);
    CHECK(o.out.empty());
    CHECK(read(out).rfind("quantity,", 0) == 0);
}

TEST_CASE("gate on the bundled scenario deploys and stays ok") {
    const Outcome o = run("gate --format json --runs 40 " + scenario("default_scenario.yaml"));
    REQUIRE(o.code == 0);
    const json j = json::parse(o.out);
    CHECK(j["predeployment"]["verdict"] == "deploy");
    CHECK(j["monitor"]["verdict"] == "ok");
}

TEST_CASE("ingest and report") {
    const Outcome i = run("ingest " + scenario("sessions_scenario.yaml"));
    CHECK(i.code == 0);
    CHECK(i.out.rfind("curve,weight,requests,days\n", 0) == 0);

    const Outcome r = run("report --threads 2 " + scenario("default_scenario.yaml"));
    CHECK(r.code == 0);
    CHECK(r.out.find("[C2.2.4]") != std::string::npos);
    CHECK(r.out.find("TODO") != std::string::npos);
}

TEST_CASE("exit codes: validation 1, usage 2, help 0") {
    const fs::path bad = fs::temp_directory_path() / "misuse_cli_bad.yaml";
    std::string text = read(kData / "default_scenario.yaml");
    text.replace(text.find("requests_per_day: 3"), 19, "requests_per_day: -3");
    std::ofstream(bad) << text;
    const Outcome v = run("evaluate --scenario '" + bad.string() + "'");
    CHECK(v.code == 1);
    CHECK(v.err.find("requests_per_day") != std::string::npos);

    CHECK(run("evaluate").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("evaluate --scenario /nonexistent.yaml").code == 2);
    CHECK(run("simulate " + scenario("default_scenario.yaml") + " --format text").code == 2);
    CHECK(run("ingest " + scenario("default_scenario.yaml")).code == 2);
    CHECK(run("--help").code == 0);
    CHECK(run("--version").out.find(engine_version()) != std::string::npos);
}

TEST_CASE("--record stores a retrievable run record") {
    const Outcome o = run("evaluate --record " + scenario("default_scenario.yaml"));
    CHECK(o.code == 0);
    const auto pos = o.err.find("run ");
    REQUIRE(pos != std::string::npos);
    const std::string digest = o.err.substr(pos + 4, 64);
    const char* dir = std::getenv("MISUSE_RISK_RUN_DIR");
    const fs::path file = fs::path(dir ? dir : "runs") / (digest + ".json");
    REQUIRE(fs::exists(file));
    const json record = json::parse(read(file));
    CHECK(record["command"] == "evaluate");
    CHECK(record["engine_version"] == engine_version());
}
