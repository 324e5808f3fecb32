#include <doctest.h>

#include <sstream>

#include "misuse/errors.hpp"
#include "misuse/session_log.hpp"

using namespace misuse;

namespace {

std::vector<SessionRecord> parse(const std::string& text) {
    std::istringstream in(text);
    return parse_session_log(in, "log.ndjson");
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("parses events, skipping blanks and comments") {
    const auto recs = parse(
        "# header\n"
        "\n"
        R"({"actor_id": "a", "kind": "jailbreak_discovery", "at_time_days": 0.1, "jailbreak_id": "J"})"
        "\n"
        R"({"actor_id": "a", "kind": "fulfillment", "at_time_days": 0.2, "score": 0.5, "jailbreak_id": "J", "actor_pool": "bounty"})"
        "\n"
        R"({"actor_id": "b", "kind": "ban_incident", "at_time_days": 1})"
        "\n");
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].event.kind == EventKind::jailbreak_discovery);
    CHECK(recs[1].event.score == 0.5);
    CHECK(recs[1].pool == ActorPool::bounty);
    CHECK(recs[1].pool_given);
    CHECK_FALSE(recs[2].pool_given);
    CHECK(recs[2].event.at_time == 1.0);
}

TEST_CASE("errors name the source line") {
    CHECK(error_of("\n{\"actor_id\": \"a\", \"kind\": \"nope\", \"at_time_days\": 0}\n")
              .find("log.ndjson:2") != std::string::npos);
    CHECK(error_of("{\"actor_id\": \"a\", \"kind\": \"fulfillment\", \"at_time_days\": 0}\n")
              .find("score") != std::string::npos);
    CHECK(error_of("{\"actor_id\": \"a\", \"kind\": \"ban_incident\", \"at_time_days\": 0, \"score\": 1}\n") != "");
    CHECK(error_of("{\"actor_id\": \"a\", \"kind\": \"ban_incident\", \"at_time_days\": 0, \"extra\": 1}\n")
              .find("extra") != std::string::npos);
    CHECK(error_of("{\"actor_id\": \"a\", \"kind\": \"jailbreak_discovery\", \"at_time_days\": 0}\n") != "");
    CHECK(error_of("not json\n").find("log.ndjson:1") != std::string::npos);
}

TEST_CASE("write then parse is the identity") {
    const auto recs = parse(
        R"({"actor_id": "x", "kind": "fulfillment", "at_time_days": 0.30000000000000004, "score": 0.1, "actor_pool": "contractor"})"
        "\n"
        R"({"actor_id": "y", "kind": "ban_incident", "at_time_days": 2})"
        "\n");
    CHECK(parse(write_session_log(recs)) == recs);
}

TEST_CASE("grouping keeps first-appearance order and validates time order") {
    const auto recs = parse(
        R"({"actor_id": "z", "kind": "fulfillment", "at_time_days": 0.1, "score": 1})"
        "\n"
        R"({"actor_id": "a", "kind": "fulfillment", "at_time_days": 0.5, "score": 1, "actor_pool": "bounty"})"
        "\n"
        R"({"actor_id": "z", "kind": "fulfillment", "at_time_days": 0.2, "score": 1})"
        "\n");
    const auto sessions = group_sessions(recs);
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].actor_id == "z");
    CHECK(sessions[0].events.size() == 2);
    CHECK(sessions[1].pool == ActorPool::bounty);

    const auto bad = parse(
        R"({"actor_id": "z", "kind": "fulfillment", "at_time_days": 0.5, "score": 1})"
        "\n"
        R"({"actor_id": "z", "kind": "fulfillment", "at_time_days": 0.2, "score": 1})"
        "\n");
    CHECK_THROWS_AS(group_sessions(bad), ValidationError);
}

TEST_CASE("bundled example log parses") {
    const auto recs = read_session_log(std::string(MISUSE_TEST_DATA_DIR) + "/example_sessions.ndjson");
    CHECK(group_sessions(recs).size() == 4);
    CHECK_THROWS_AS(read_session_log("/nonexistent/log.ndjson"), ValidationError);
}
