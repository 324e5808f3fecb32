#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "misuse/commands.hpp"
#include "misuse/scenario.hpp"
#include "misuse/service.hpp"

using namespace misuse;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kData = MISUSE_TEST_DATA_DIR;

std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// In-process service on a free port, stopped on destruction.
class Running {
public:
    explicit Running(ServiceOptions o) : service_(std::move(o)) {
        port_ = service_.bind_any_port();
        REQUIRE(port_ > 0);
        thread_ = std::thread([this] { service_.listen_after_bind(); });
        service_.wait_until_ready();
    }
    ~Running() {
        service_.stop();
        thread_.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(120, 0);
        return c;
    }

private:
    Service service_;
    int port_ = 0;
    std::thread thread_;
};

ServiceOptions options(const std::string& tag) {
    ServiceOptions o;
    o.host = "127.0.0.1";
    o.run_dir = fs::temp_directory_path() / ("misuse_service_" + tag);
    fs::remove_all(o.run_dir);
    o.base_dir = kData;
    o.max_runs = 500;
    o.simulation_threads = 2;
    return o;
}

}  // namespace

TEST_CASE("health") {
    Running svc(options("health"));
    auto res = svc.client().Get("/v1/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    const json j = json::parse(res->body);
    CHECK(j["status"] == "ok");
    CHECK(j["engine_version"] == engine_version());
}

TEST_CASE("evaluate matches the command layer exactly") {
    Running svc(options("evaluate"));
    const std::string body = read(kData / "default_scenario.yaml");
    auto res = svc.client().Post("/v1/evaluate", body, "application/yaml");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const json record = json::parse(res->body);
    const ResolvedScenario s = load_resolved_scenario(kData / "default_scenario.yaml");
    const json direct = to_json(run_evaluate(s));
    CHECK(record["outputs"] == direct);
    CHECK(record["scenario_digest"] == s.digest);
    CHECK(record["run_digest"] == run_digest(s.digest, "evaluate", 0, 0));

    // JSON bodies are the same scenario.
    auto again = svc.client().Post("/v1/evaluate", scenario_to_json(s.file).dump(), "application/json");
    REQUIRE(again);
    CHECK(json::parse(again->body)["outputs"] == direct);
}

TEST_CASE("simulate: cap, cache fidelity, unknown digest") {
    Running svc(options("simulate"));
    auto cli = svc.client();
    const std::string body = read(kData / "default_scenario.yaml");

    auto over = cli.Post("/v1/simulate?runs=501", body, "application/yaml");
    REQUIRE(over);
    CHECK(over->status == 422);
    CHECK(over->body.find("500") != std::string::npos);
    CHECK(over->body.find("max_runs") != std::string::npos);

    auto res = cli.Post("/v1/simulate?seed=5&runs=12", body, "application/yaml");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const json record = json::parse(res->body);
    const std::string digest = record["run_digest"];
    CHECK(record["seed"] == 5);
    CHECK(record["runs"] == 12);

    const ResolvedScenario s = load_resolved_scenario(kData / "default_scenario.yaml");
    MonteCarloOptions mc;
    mc.threads = 1;
    const json direct = to_json(run_simulate(s, SimulationRequest{5, 12}, mc));
    CHECK(record["outputs"]["series"] == direct);

    auto cached = cli.Get("/v1/runs/" + digest);
    REQUIRE(cached);
    CHECK(cached->status == 200);
    CHECK(json::parse(cached->body) == record);

    auto repeat = cli.Post("/v1/simulate?seed=5&runs=12", body, "application/yaml");
    CHECK(json::parse(repeat->body) == record);

    auto missing = cli.Get("/v1/runs/" + std::string(64, '0'));
    REQUIRE(missing);
    CHECK(missing->status == 404);
}

TEST_CASE("records persist across service instances") {
    ServiceOptions o = options("persist");
    const std::string body = read(kData / "default_scenario.yaml");
    std::string digest;
    json first;
    {
        Running svc(o);
        auto res = svc.client().Post("/v1/evaluate", body, "application/yaml");
        REQUIRE(res);
        first = json::parse(res->body);
        digest = first["run_digest"];
    }
    Running svc(o);
    auto res = svc.client().Get("/v1/runs/" + digest);
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body) == first);
}

TEST_CASE("streaming simulate reports progress then the result") {
    Running svc(options("stream"));
    std::string collected;
    auto res = svc.client().Post("/v1/simulate?stream=1&runs=6&seed=1",
                                 read(kData / "default_scenario.yaml"), "application/yaml");
    REQUIRE(res);
    CHECK(res->status == 200);
    collected = res->body;
    std::istringstream lines(collected);
    std::string line;
    std::size_t last = 0;
    bool result = false;
    while (std::getline(lines, line)) {
        const json j = json::parse(line);
        if (j.contains("progress")) {
            CHECK_FALSE(result);
            const std::size_t done = j["progress"]["completed_runs"];
            CHECK(done > last);
            CHECK(j["progress"]["total_runs"] == 6);
            last = done;
        } else {
            REQUIRE(j.contains("result"));
            result = true;
            CHECK(j["result"]["runs"] == 6);
        }
    }
    CHECK(last == 6);
    CHECK(result);
}

TEST_CASE("status codes for bad requests") {
    Running svc(options("errors"));
    auto cli = svc.client();
    const std::string body = read(kData / "default_scenario.yaml");

    auto bad = cli.Post("/v1/evaluate", "schema_version: 1\n", "application/yaml");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    const json err = json::parse(bad->body);
    CHECK(err["field"] == "threat_model");

    auto garbage = cli.Post("/v1/evaluate", "{ not yaml: [", "application/yaml");
    REQUIRE(garbage);
    CHECK(garbage->status == 400);

    auto ingest = cli.Post("/v1/ingest", body, "application/yaml");
    REQUIRE(ingest);
    CHECK(ingest->status == 422);

    auto seed = cli.Post("/v1/simulate?seed=abc", body, "application/yaml");
    REQUIRE(seed);
    CHECK(seed->status == 400);
}

TEST_CASE("ingest over HTTP resolves logs against the base directory") {
    Running svc(options("ingest"));
    auto res = svc.client().Post("/v1/ingest", read(kData / "sessions_scenario.yaml"),
                                 "application/yaml");
    REQUIRE(res);
    CHECK(res->status == 200);
    const ResolvedScenario s = load_resolved_scenario(kData / "sessions_scenario.yaml");
    CHECK(json::parse(res->body)["outputs"] == run_ingest(s));
}

TEST_CASE("a full run queue answers 503") {
    ServiceOptions o = options("queue");
    o.max_concurrent_runs = 1;
    o.simulation_threads = 1;
    Running svc(o);
    const std::string body = read(kData / "default_scenario.yaml");

    std::thread slow([&] {
        auto res = svc.client().Post("/v1/simulate?runs=400&seed=11", body, "application/yaml");
        REQUIRE(res);
        CHECK(res->status == 200);
    });
    int status = 0;
    for (int attempt = 0; attempt < 200 && status != 503; ++attempt) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        auto res = svc.client().Post("/v1/simulate?runs=3&seed=" + std::to_string(1000 + attempt),
                                     body, "application/yaml");
        REQUIRE(res);
        status = res->status;
    }
    slow.join();
    CHECK(status == 503);
}

TEST_CASE("static UI files are served when configured") {
    ServiceOptions o = options("ui");
    const fs::path ui = fs::temp_directory_path() / "misuse_ui_test";
    fs::create_directories(ui);
    std::ofstream(ui / "index.html") << "<html>ui</html>";
    o.ui_dir = ui;
    Running svc(o);
    auto res = svc.client().Get("/index.html");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == "<html>ui</html>");
}
