#pragma once

// Red-team session logs: one JSON object per line,
//
//   {"actor_id": "a1", "kind": "fulfillment", "at_time_days": 0.4,
//    "score": 1.0, "jailbreak_id": "J1", "actor_pool": "contractor"}
//
// kind is fulfillment | ban_incident | jailbreak_discovery. score is required
// for fulfillments and rejected otherwise; jailbreak_id is required for
// discoveries. actor_pool (contractor | bounty) is optional. Blank lines and
// lines starting with '#' are ignored, so logs can be appended to freely.

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "misuse/evaluation.hpp"

namespace misuse {

struct SessionRecord {
    std::string actor_id;
    ActorPool pool = ActorPool::contractor;
    bool pool_given = false;
    SessionEvent event;

    friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

const char* to_string(EventKind kind);
const char* to_string(ActorPool pool);

// `where` prefixes error messages (e.g. "sessions.ndjson:12").
SessionRecord session_record_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json to_json(const SessionRecord& record);

std::vector<SessionRecord> parse_session_log(std::istream& in, const std::string& source_name);
std::vector<SessionRecord> read_session_log(const std::filesystem::path& path);
std::string write_session_log(const std::vector<SessionRecord>& records);

// Groups records by actor in order of first appearance; events keep file
// order and must be nondecreasing in time within an actor.
std::vector<RedTeamSession> group_sessions(const std::vector<SessionRecord>& records);

}  // namespace misuse
