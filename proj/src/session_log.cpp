#include "misuse/session_log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "misuse/errors.hpp"

namespace misuse {

using nlohmann::json;

namespace {

EventKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "fulfillment") return EventKind::fulfillment;
    if (s == "ban_incident") return EventKind::ban_incident;
    if (s == "jailbreak_discovery") return EventKind::jailbreak_discovery;
    throw ValidationError("schema",
                          where + ": kind must be fulfillment, ban_incident or jailbreak_discovery",
                          "kind");
}

ActorPool parse_pool(const std::string& s, const std::string& where) {
    if (s == "contractor") return ActorPool::contractor;
    if (s == "bounty") return ActorPool::bounty;
    throw ValidationError("schema", where + ": actor_pool must be contractor or bounty",
                          "actor_pool");
}

}  // namespace

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::fulfillment: return "fulfillment";
        case EventKind::ban_incident: return "ban_incident";
        case EventKind::jailbreak_discovery: return "jailbreak_discovery";
    }
    return "?";
}

const char* to_string(ActorPool pool) {
    return pool == ActorPool::bounty ? "bounty" : "contractor";
}

SessionRecord session_record_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) {
        throw ValidationError("schema", where + ": expected an object", "");
    }
    static const char* const known[] = {"actor_id", "kind",         "at_time_days",
                                        "score",    "jailbreak_id", "actor_pool"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ValidationError("schema", where + ": unknown field '" + key + "'", key);
        }
    }
    auto require = [&](const char* key) -> const json& {
        if (!j.contains(key)) {
            throw ValidationError("schema", where + ": missing field '" + key + "'", key);
        }
        return j.at(key);
    };

    SessionRecord r;
    const json& actor = require("actor_id");
    if (!actor.is_string() || actor.get<std::string>().empty()) {
        throw ValidationError("schema", where + ": actor_id must be a non-empty string",
                              "actor_id");
    }
    r.actor_id = actor.get<std::string>();
    const json& kind = require("kind");
    if (!kind.is_string()) {
        throw ValidationError("schema", where + ": kind must be a string", "kind");
    }
    r.event.kind = parse_kind(kind.get<std::string>(), where);
    const json& at = require("at_time_days");
    if (!at.is_number()) {
        throw ValidationError("schema", where + ": at_time_days must be a number", "at_time_days");
    }
    r.event.at_time = at.get<double>();
    if (j.contains("score") && !j.at("score").is_null()) {
        if (!j.at("score").is_number()) {
            throw ValidationError("schema", where + ": score must be a number", "score");
        }
        r.event.score = j.at("score").get<double>();
    }
    if (j.contains("jailbreak_id") && !j.at("jailbreak_id").is_null()) {
        if (!j.at("jailbreak_id").is_string()) {
            throw ValidationError("schema", where + ": jailbreak_id must be a string",
                                  "jailbreak_id");
        }
        r.event.jailbreak_id = j.at("jailbreak_id").get<std::string>();
    }
    if (j.contains("actor_pool")) {
        if (!j.at("actor_pool").is_string()) {
            throw ValidationError("schema", where + ": actor_pool must be a string", "actor_pool");
        }
        r.pool = parse_pool(j.at("actor_pool").get<std::string>(), where);
        r.pool_given = true;
    }

    if (!(std::isfinite(r.event.at_time) && r.event.at_time >= 0.0)) {
        throw ValidationError("range", where + ": at_time_days must be finite and >= 0",
                              "at_time_days");
    }
    if (r.event.kind == EventKind::fulfillment) {
        if (!r.event.score) {
            throw ValidationError("schema", where + ": fulfillment requires a score", "score");
        }
        if (!(*r.event.score >= 0.0 && *r.event.score <= 1.0)) {
            throw ValidationError("range", where + ": score must lie in [0,1]", "score");
        }
    } else if (r.event.score) {
        throw ValidationError("schema", where + ": only fulfillments carry a score", "score");
    }
    if (r.event.kind == EventKind::jailbreak_discovery && !r.event.jailbreak_id) {
        throw ValidationError("schema", where + ": jailbreak_discovery requires a jailbreak_id",
                              "jailbreak_id");
    }
    return r;
}

json to_json(const SessionRecord& r) {
    json j = json::object();
    j["actor_id"] = r.actor_id;
    j["kind"] = to_string(r.event.kind);
    j["at_time_days"] = r.event.at_time;
    if (r.event.score) j["score"] = *r.event.score;
    if (r.event.jailbreak_id) j["jailbreak_id"] = *r.event.jailbreak_id;
    if (r.pool_given) j["actor_pool"] = to_string(r.pool);
    return j;
}

std::vector<SessionRecord> parse_session_log(std::istream& in, const std::string& source_name) {
    std::vector<SessionRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        const std::string where = source_name + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError("parse", where + ": " + e.what(), "");
        }
        out.push_back(session_record_from_json(j, where));
    }
    return out;
}

std::vector<SessionRecord> read_session_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("io", "cannot read session log " + path.string(), "session_log");
    }
    return parse_session_log(in, path.filename().string());
}

std::string write_session_log(const std::vector<SessionRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

std::vector<RedTeamSession> group_sessions(const std::vector<SessionRecord>& records) {
    std::vector<RedTeamSession> sessions;
    std::map<std::string, std::size_t> index;
    for (const auto& r : records) {
        auto [it, inserted] = index.try_emplace(r.actor_id, sessions.size());
        if (inserted) {
            sessions.push_back({r.actor_id, r.pool, {}, {}});
        }
        RedTeamSession& s = sessions[it->second];
        if (r.pool_given) {
            s.pool = r.pool;
        }
        s.events.push_back(r.event);
    }
    for (const auto& s : sessions) {
        validate_session(s);
    }
    return sessions;
}

}  // namespace misuse
