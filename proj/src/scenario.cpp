#include "misuse/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "misuse/digest.hpp"
#include "misuse/errors.hpp"

namespace misuse {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- text layer

using LineMap = std::map<std::string, int>;

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

ojson plain_scalar(const std::string& s) {
    if (s == "null" || s == "Null" || s == "NULL" || s == "~") return nullptr;
    if (s == "true" || s == "True" || s == "TRUE") return true;
    if (s == "false" || s == "False" || s == "FALSE") return false;
    if (s.empty()) return s;

    std::string_view body = s;
    if (body.front() == '+') body.remove_prefix(1);
    const bool negative = !body.empty() && body.front() == '-';
    const std::string_view digits = negative ? body.substr(1) : body;
    const char* first = body.data();
    const char* last = body.data() + body.size();
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(),
                                       [](char c) { return c >= '0' && c <= '9'; })) {
        if (negative) {
            std::int64_t v = 0;
            if (auto r = std::from_chars(first, last, v); r.ec == std::errc() && r.ptr == last) {
                return v;
            }
        } else {
            std::uint64_t v = 0;
            if (auto r = std::from_chars(first, last, v); r.ec == std::errc() && r.ptr == last) {
                return v;
            }
        }
    }
    const bool numeric_chars =
        !digits.empty() && std::any_of(digits.begin(), digits.end(),
                                       [](char c) { return c >= '0' && c <= '9'; }) &&
        std::all_of(digits.begin(), digits.end(), [](char c) {
            return (c >= '0' && c <= '9') || c == '.' || c == 'e' || c == 'E' || c == '+' ||
                   c == '-';
        });
    if (numeric_chars) {
        double v = 0.0;
        if (auto r = std::from_chars(first, last, v); r.ec == std::errc() && r.ptr == last) {
            return v;
        }
    }
    return s;
}

ojson yaml_to_json(const YAML::Node& node, const std::string& path, LineMap& lines) {
    if (node.Mark().line >= 0) {
        lines[path] = node.Mark().line + 1;
    }
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Scalar:
            if (node.Tag() == "?") return plain_scalar(node.Scalar());
            return node.Scalar();
        case YAML::NodeType::Sequence: {
            ojson arr = ojson::array();
            std::size_t i = 0;
            for (const auto& item : node) {
                arr.push_back(yaml_to_json(item, index(path, i++), lines));
            }
            return arr;
        }
        case YAML::NodeType::Map: {
            ojson obj = ojson::object();
            for (const auto& kv : node) {
                const std::string key = kv.first.Scalar();
                const std::string sub = join(path, key);
                if (obj.contains(key)) {
                    throw ValidationError("parse",
                                          sub + " (line " + std::to_string(kv.first.Mark().line + 1) +
                                              "): duplicate key",
                                          sub);
                }
                obj[key] = yaml_to_json(kv.second, sub, lines);
            }
            return obj;
        }
    }
    return nullptr;
}

bool plain_key(const std::string& k) {
    if (k.empty() || !(std::isalpha(static_cast<unsigned char>(k[0])) || k[0] == '_')) {
        return false;
    }
    return std::all_of(k.begin(), k.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    });
}

std::string emit_key(const std::string& k) {
    return plain_key(k) ? k : json(k).dump();
}

std::string emit_scalar(const ojson& v) {
    switch (v.type()) {
        case ojson::value_t::null: return "null";
        case ojson::value_t::boolean: return v.get<bool>() ? "true" : "false";
        case ojson::value_t::number_integer: return std::to_string(v.get<std::int64_t>());
        case ojson::value_t::number_unsigned: return std::to_string(v.get<std::uint64_t>());
        case ojson::value_t::number_float: return format_double(v.get<double>());
        case ojson::value_t::string: return json(v.get<std::string>()).dump();
        default: break;
    }
    throw InternalError("not a scalar");
}

bool is_scalar(const ojson& v) { return !v.is_object() && !v.is_array(); }

bool is_inline(const ojson& v) {
    if (is_scalar(v) || v.empty()) return true;
    if (v.is_array()) {
        return std::all_of(v.begin(), v.end(), [](const ojson& x) { return is_scalar(x); });
    }
    return v.size() <= 4 && std::all_of(v.begin(), v.end(), [](const ojson& x) {
               return is_scalar(x) && !x.is_string();
           });
}

std::string emit_inline(const ojson& v) {
    if (is_scalar(v)) return emit_scalar(v);
    std::string out;
    if (v.is_array()) {
        out = "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ", ";
            out += emit_scalar(v[i]);
        }
        return out + "]";
    }
    out = "{";
    bool first = true;
    for (const auto& [k, x] : v.items()) {
        if (!first) out += ", ";
        first = false;
        out += emit_key(k) + ": " + emit_scalar(x);
    }
    return out + "}";
}

void emit_block(const ojson& v, int indent, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent), ' ');
    if (v.is_object()) {
        for (const auto& [k, x] : v.items()) {
            out += pad + emit_key(k) + ":";
            if (is_inline(x)) {
                out += " " + emit_inline(x) + "\n";
            } else {
                out += "\n";
                emit_block(x, indent + 2, out);
            }
        }
        return;
    }
    for (const auto& x : v) {
        if (is_inline(x)) {
            out += pad + "- " + emit_inline(x) + "\n";
        } else {
            std::string child;
            emit_block(x, indent + 2, child);
            out += pad + "- " + child.substr(static_cast<std::size_t>(indent) + 2);
        }
    }
}

// ---------------------------------------------------------------- schema layer

struct Ctx {
    const LineMap* lines = nullptr;
};

[[noreturn]] void fail(const Ctx& ctx, const char* kind, const std::string& path,
                       const std::string& msg) {
    std::string where = path.empty() ? std::string("scenario") : path;
    if (ctx.lines) {
        std::string probe = path;
        for (;;) {
            if (auto it = ctx.lines->find(probe); it != ctx.lines->end()) {
                where += " (line " + std::to_string(it->second) + ")";
                break;
            }
            const auto cut = probe.find_last_of(".[");
            if (cut == std::string::npos) break;
            probe.resize(cut);
        }
    }
    throw ValidationError(kind, where + ": " + msg, path);
}

const ojson& object_at(const Ctx& ctx, const ojson& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(ctx, "schema", path, "expected a mapping");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; })) {
            fail(ctx, "schema", join(path, key), "unknown field");
        }
    }
    return j;
}

const ojson* find(const ojson& j, const char* key) {
    auto it = j.find(key);
    return (it == j.end() || it->is_null()) ? nullptr : &*it;
}

const ojson& need(const Ctx& ctx, const ojson& j, const std::string& path, const char* key) {
    const ojson* v = find(j, key);
    if (!v) fail(ctx, "schema", join(path, key), "required field is missing");
    return *v;
}

double as_number(const Ctx& ctx, const ojson& v, const std::string& path) {
    if (!v.is_number()) fail(ctx, "schema", path, "expected a number");
    return v.get<double>();
}

std::int64_t as_integer(const Ctx& ctx, const ojson& v, const std::string& path) {
    if (v.is_number_unsigned()) {
        if (v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
            fail(ctx, "range", path, "integer out of range");
        }
        return static_cast<std::int64_t>(v.get<std::uint64_t>());
    }
    if (!v.is_number_integer()) fail(ctx, "schema", path, "expected an integer");
    return v.get<std::int64_t>();
}

std::string as_string(const Ctx& ctx, const ojson& v, const std::string& path) {
    if (!v.is_string()) fail(ctx, "schema", path, "expected a string");
    return v.get<std::string>();
}

double number(const Ctx& ctx, const ojson& j, const std::string& path, const char* key) {
    return as_number(ctx, need(ctx, j, path, key), join(path, key));
}

std::optional<double> opt_number(const Ctx& ctx, const ojson& j, const std::string& path,
                                 const char* key) {
    const ojson* v = find(j, key);
    if (!v) return std::nullopt;
    return as_number(ctx, *v, join(path, key));
}

double number_or(const Ctx& ctx, const ojson& j, const std::string& path, const char* key,
                 double fallback) {
    return opt_number(ctx, j, path, key).value_or(fallback);
}

const ojson& array_at(const Ctx& ctx, const ojson& v, const std::string& path) {
    if (!v.is_array()) fail(ctx, "schema", path, "expected a list");
    return v;
}

std::vector<CurvePoint> read_points(const Ctx& ctx, const ojson& v, const std::string& path,
                                    const char* x_key, const char* y_key) {
    std::vector<CurvePoint> pts;
    const ojson& arr = array_at(ctx, v, path);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = index(path, i);
        const ojson& o = object_at(ctx, arr[i], p, {x_key, y_key});
        pts.push_back({number(ctx, o, p, x_key), number(ctx, o, p, y_key)});
    }
    return pts;
}

ojson write_points(const std::vector<CurvePoint>& pts, const char* x_key, const char* y_key) {
    ojson arr = ojson::array();
    for (const auto& p : pts) {
        ojson o = ojson::object();
        o[x_key] = p.x;
        o[y_key] = p.y;
        arr.push_back(std::move(o));
    }
    return arr;
}

TimeCostSpec read_time_cost(const Ctx& ctx, const ojson& v, const std::string& path) {
    TimeCostSpec spec;
    if (v.is_array()) {
        spec.points = read_points(ctx, v, path, "days", "probability");
        return spec;
    }
    const ojson& o = object_at(ctx, v, path, {"logistic"});
    const std::string lp = join(path, "logistic");
    const ojson& l = object_at(ctx, need(ctx, o, path, "logistic"), lp,
                               {"midpoint_days", "steepness_per_day", "max_probability",
                                "until_days", "knots"});
    LogisticSpec ls;
    ls.midpoint_days = number(ctx, l, lp, "midpoint_days");
    ls.steepness_per_day = number(ctx, l, lp, "steepness_per_day");
    ls.max_probability = number(ctx, l, lp, "max_probability");
    ls.until_days = number(ctx, l, lp, "until_days");
    ls.knots = as_integer(ctx, need(ctx, l, lp, "knots"), join(lp, "knots"));
    spec.logistic = ls;
    return spec;
}

ojson write_time_cost(const TimeCostSpec& spec) {
    if (!spec.logistic) return write_points(spec.points, "days", "probability");
    const LogisticSpec& l = *spec.logistic;
    ojson o = ojson::object();
    o["midpoint_days"] = l.midpoint_days;
    o["steepness_per_day"] = l.steepness_per_day;
    o["max_probability"] = l.max_probability;
    o["until_days"] = l.until_days;
    o["knots"] = l.knots;
    return ojson{{"logistic", o}};
}

json to_plain(const ojson& o) { return json::parse(o.dump()); }
ojson to_ordered(const json& j) { return ojson::parse(j.dump()); }

std::vector<SessionRecord> read_records(const Ctx& ctx, const ojson& v, const std::string& path) {
    std::vector<SessionRecord> out;
    const ojson& arr = array_at(ctx, v, path);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = index(path, i);
        try {
            out.push_back(session_record_from_json(to_plain(arr[i]), p));
        } catch (const ValidationError& e) {
            fail(ctx, e.kind().c_str(), join(p, e.field()),
                 std::string(e.what()).substr(p.size() + 2));
        }
    }
    return out;
}

ojson write_records(const std::vector<SessionRecord>& records) {
    ojson arr = ojson::array();
    for (const auto& r : records) arr.push_back(to_ordered(to_json(r)));
    return arr;
}

EffortSpec read_effort(const Ctx& ctx, const ojson& v, const std::string& path) {
    const ojson& o = object_at(ctx, v, path,
                               {"distribution", "mean_days", "log_mean_ln_days", "log_sd",
                                "samples"});
    EffortSpec e;
    const std::string kind = as_string(ctx, need(ctx, o, path, "distribution"),
                                       join(path, "distribution"));
    auto forbid = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys) {
            if (find(o, k)) fail(ctx, "schema", join(path, k), "not used by " + kind);
        }
    };
    if (kind == "exponential") {
        e.kind = EffortDistribution::Kind::exponential;
        e.mean_days = number(ctx, o, path, "mean_days");
        forbid({"log_mean_ln_days", "log_sd", "samples"});
    } else if (kind == "lognormal") {
        e.kind = EffortDistribution::Kind::lognormal;
        e.log_mean_ln_days = number(ctx, o, path, "log_mean_ln_days");
        e.log_sd = number(ctx, o, path, "log_sd");
        forbid({"mean_days", "samples"});
    } else if (kind == "empirical") {
        e.kind = EffortDistribution::Kind::empirical;
        const std::string sp = join(path, "samples");
        const ojson& arr = array_at(ctx, need(ctx, o, path, "samples"), sp);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string p = index(sp, i);
            const ojson& s = object_at(ctx, arr[i], p, {"days", "weight"});
            e.samples.push_back({number(ctx, s, p, "days"), number_or(ctx, s, p, "weight", 1.0)});
        }
        forbid({"mean_days", "log_mean_ln_days", "log_sd"});
    } else {
        fail(ctx, "schema", join(path, "distribution"),
             "expected exponential, lognormal or empirical");
    }
    return e;
}

ojson write_effort(const EffortSpec& e) {
    ojson o = ojson::object();
    switch (e.kind) {
        case EffortDistribution::Kind::exponential:
            o["distribution"] = "exponential";
            o["mean_days"] = e.mean_days;
            break;
        case EffortDistribution::Kind::lognormal:
            o["distribution"] = "lognormal";
            o["log_mean_ln_days"] = e.log_mean_ln_days;
            o["log_sd"] = e.log_sd;
            break;
        case EffortDistribution::Kind::empirical: {
            o["distribution"] = "empirical";
            ojson arr = ojson::array();
            for (const auto& s : e.samples) arr.push_back({{"days", s.days}, {"weight", s.weight}});
            o["samples"] = std::move(arr);
            break;
        }
    }
    return o;
}

ThreatModelSpec read_threat(const Ctx& ctx, const ojson& v, const std::string& path) {
    const ojson& o = object_at(ctx, v, path,
                               {"attempts_per_year", "damage_units_per_success",
                                "requests_per_day", "resilience_damage_multiplier",
                                "resilience_success_multiplier", "effort", "p_none", "p_pre"});
    ThreatModelSpec t;
    t.attempts_per_year = number(ctx, o, path, "attempts_per_year");
    t.damage_units_per_success = number(ctx, o, path, "damage_units_per_success");
    t.requests_per_day = number(ctx, o, path, "requests_per_day");
    t.resilience_damage_multiplier = number_or(ctx, o, path, "resilience_damage_multiplier", 1.0);
    t.resilience_success_multiplier =
        number_or(ctx, o, path, "resilience_success_multiplier", 1.0);
    t.effort = read_effort(ctx, need(ctx, o, path, "effort"), join(path, "effort"));
    t.p_none = read_time_cost(ctx, need(ctx, o, path, "p_none"), join(path, "p_none"));
    t.p_pre = read_time_cost(ctx, need(ctx, o, path, "p_pre"), join(path, "p_pre"));
    return t;
}

ojson write_threat(const ThreatModelSpec& t) {
    ojson o = ojson::object();
    o["attempts_per_year"] = t.attempts_per_year;
    o["damage_units_per_success"] = t.damage_units_per_success;
    o["requests_per_day"] = t.requests_per_day;
    o["resilience_damage_multiplier"] = t.resilience_damage_multiplier;
    o["resilience_success_multiplier"] = t.resilience_success_multiplier;
    o["effort"] = write_effort(t.effort);
    o["p_none"] = write_time_cost(t.p_none);
    o["p_pre"] = write_time_cost(t.p_pre);
    return o;
}

AggregationMethod read_aggregation(const Ctx& ctx, const ojson& v, const std::string& path) {
    const ojson& o = object_at(ctx, v, path, {"method", "q"});
    const std::string m = as_string(ctx, need(ctx, o, path, "method"), join(path, "method"));
    if (m == "weighted_mean") {
        if (find(o, "q")) fail(ctx, "schema", join(path, "q"), "not used by weighted_mean");
        return AggregationMethod::weighted_mean();
    }
    if (m == "lower_quantile") {
        return AggregationMethod::lower_quantile(number_or(ctx, o, path, "q", 0.25));
    }
    fail(ctx, "schema", join(path, "method"), "expected weighted_mean or lower_quantile");
}

SessionSourceSpec read_sessions(const Ctx& ctx, const ojson& v, const std::string& path) {
    const ojson& o = object_at(ctx, v, path,
                               {"log", "events", "variant_log", "variant_events",
                                "variants_per_discovery", "ban_cost", "patch_policy", "combine",
                                "aggregation", "tail_slope_days_per_request"});
    SessionSourceSpec s;
    if (const ojson* x = find(o, "log")) s.log = as_string(ctx, *x, join(path, "log"));
    if (const ojson* x = find(o, "events")) s.events = read_records(ctx, *x, join(path, "events"));
    if (const ojson* x = find(o, "variant_log")) {
        s.variant_log = as_string(ctx, *x, join(path, "variant_log"));
    }
    if (const ojson* x = find(o, "variant_events")) {
        s.variant_events = read_records(ctx, *x, join(path, "variant_events"));
    }
    if (const ojson* x = find(o, "variants_per_discovery")) {
        s.variants_per_discovery = as_integer(ctx, *x, join(path, "variants_per_discovery"));
    }
    {
        const std::string bp = join(path, "ban_cost");
        const ojson& b = object_at(ctx, need(ctx, o, path, "ban_cost"), bp,
                                   {"days_per_ban", "source_note"});
        s.ban_cost.time_per_ban = number(ctx, b, bp, "days_per_ban");
        if (const ojson* x = find(b, "source_note")) {
            s.ban_cost.source_note = as_string(ctx, *x, join(bp, "source_note"));
        }
    }
    if (const ojson* x = find(o, "patch_policy")) {
        const std::string pp = join(path, "patch_policy");
        const ojson& p = object_at(ctx, *x, pp, {"cadence_days", "fulfillment_trigger"});
        PatchPolicy policy;
        policy.wall_clock_cadence = number(ctx, p, pp, "cadence_days");
        const std::int64_t trig =
            as_integer(ctx, need(ctx, p, pp, "fulfillment_trigger"), join(pp, "fulfillment_trigger"));
        if (trig <= 0 || trig > 1'000'000'000) {
            fail(ctx, "range", join(pp, "fulfillment_trigger"), "must be a positive count");
        }
        policy.fulfillment_trigger = static_cast<int>(trig);
        s.patch_policy = policy;
    }
    if (const ojson* x = find(o, "combine")) {
        const std::string c = as_string(ctx, *x, join(path, "combine"));
        if (c == "aggregate") {
            s.combine = SessionSourceSpec::Combine::aggregate;
        } else if (c == "ensemble") {
            s.combine = SessionSourceSpec::Combine::ensemble;
        } else {
            fail(ctx, "schema", join(path, "combine"), "expected aggregate or ensemble");
        }
    }
    if (const ojson* x = find(o, "aggregation")) {
        s.aggregation = read_aggregation(ctx, *x, join(path, "aggregation"));
    }
    s.tail_slope_days_per_request = opt_number(ctx, o, path, "tail_slope_days_per_request");
    return s;
}

ojson write_sessions(const SessionSourceSpec& s) {
    ojson o = ojson::object();
    if (s.log) o["log"] = *s.log;
    if (!s.events.empty()) o["events"] = write_records(s.events);
    if (s.variant_log) o["variant_log"] = *s.variant_log;
    if (!s.variant_events.empty()) o["variant_events"] = write_records(s.variant_events);
    o["variants_per_discovery"] = s.variants_per_discovery;
    o["ban_cost"] = {{"days_per_ban", s.ban_cost.time_per_ban},
                     {"source_note", s.ban_cost.source_note}};
    if (s.patch_policy) {
        o["patch_policy"] = {{"cadence_days", s.patch_policy->wall_clock_cadence},
                             {"fulfillment_trigger", s.patch_policy->fulfillment_trigger}};
    }
    o["combine"] = s.combine == SessionSourceSpec::Combine::aggregate ? "aggregate" : "ensemble";
    if (s.aggregation.kind == AggregationMethod::Kind::weighted_mean) {
        o["aggregation"] = {{"method", "weighted_mean"}};
    } else {
        o["aggregation"] = {{"method", "lower_quantile"}, {"q", s.aggregation.q}};
    }
    if (s.tail_slope_days_per_request) {
        o["tail_slope_days_per_request"] = *s.tail_slope_days_per_request;
    }
    return o;
}

EvasionSpec read_evasion(const Ctx& ctx, const ojson& v, const std::string& path) {
    const ojson& o = object_at(ctx, v, path, {"source", "mode", "curves", "sessions"});
    EvasionSpec e;
    const std::string src = as_string(ctx, need(ctx, o, path, "source"), join(path, "source"));
    if (src == "curves") {
        e.source = EvasionSpec::Source::curves;
        if (find(o, "sessions")) fail(ctx, "schema", join(path, "sessions"), "not used by curves");
        const std::string mode = as_string(ctx, need(ctx, o, path, "mode"), join(path, "mode"));
        if (mode == "single_curve") {
            e.mode = EvasionModel::Mode::single_curve;
        } else if (mode == "ensemble") {
            e.mode = EvasionModel::Mode::ensemble;
        } else {
            fail(ctx, "schema", join(path, "mode"), "expected single_curve or ensemble");
        }
        const std::string cp = join(path, "curves");
        const ojson& arr = array_at(ctx, need(ctx, o, path, "curves"), cp);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string p = index(cp, i);
            const ojson& c = object_at(ctx, arr[i], p,
                                       {"weight", "points", "tail_slope_days_per_request"});
            EvasionCurveSpec spec;
            spec.weight = number_or(ctx, c, p, "weight", 1.0);
            spec.points = read_points(ctx, need(ctx, c, p, "points"), join(p, "points"),
                                      "requests", "days");
            spec.tail_slope_days_per_request = opt_number(ctx, c, p, "tail_slope_days_per_request");
            e.curves.push_back(std::move(spec));
        }
    } else if (src == "sessions") {
        e.source = EvasionSpec::Source::sessions;
        for (const char* k : {"mode", "curves"}) {
            if (find(o, k)) fail(ctx, "schema", join(path, k), "not used by sessions");
        }
        e.sessions = read_sessions(ctx, need(ctx, o, path, "sessions"), join(path, "sessions"));
    } else {
        fail(ctx, "schema", join(path, "source"), "expected curves or sessions");
    }
    return e;
}

ojson write_evasion(const EvasionSpec& e) {
    ojson o = ojson::object();
    if (e.source == EvasionSpec::Source::sessions) {
        o["source"] = "sessions";
        o["sessions"] = write_sessions(e.sessions.value_or(SessionSourceSpec{}));
        return o;
    }
    o["source"] = "curves";
    o["mode"] = e.mode == EvasionModel::Mode::single_curve ? "single_curve" : "ensemble";
    ojson arr = ojson::array();
    for (const auto& c : e.curves) {
        ojson x = ojson::object();
        x["weight"] = c.weight;
        if (c.tail_slope_days_per_request) {
            x["tail_slope_days_per_request"] = *c.tail_slope_days_per_request;
        }
        x["points"] = write_points(c.points, "requests", "days");
        arr.push_back(std::move(x));
    }
    o["curves"] = std::move(arr);
    return o;
}

WhatIfSpec read_whatif(const Ctx& ctx, const ojson& v, const std::string& path) {
    const ojson& o = object_at(ctx, v, path,
                               {"simulation_end_days", "jailbreak_time_days", "rng_seed", "runs",
                                "p_post_override"});
    WhatIfSpec w;
    w.simulation_end_days = number(ctx, o, path, "simulation_end_days");
    w.jailbreak_time_days = opt_number(ctx, o, path, "jailbreak_time_days");
    if (const ojson* x = find(o, "rng_seed")) {
        if (!x->is_number_unsigned() && !(x->is_number_integer() && x->get<std::int64_t>() >= 0)) {
            fail(ctx, "schema", join(path, "rng_seed"), "expected a non-negative integer");
        }
        w.rng_seed = x->get<std::uint64_t>();
    }
    if (const ojson* x = find(o, "runs")) w.runs = as_integer(ctx, *x, join(path, "runs"));
    if (const ojson* x = find(o, "p_post_override")) {
        w.p_post_override = read_time_cost(ctx, *x, join(path, "p_post_override"));
    }
    return w;
}

ojson write_whatif(const WhatIfSpec& w) {
    ojson o = ojson::object();
    o["simulation_end_days"] = w.simulation_end_days;
    o["jailbreak_time_days"] = w.jailbreak_time_days ? ojson(*w.jailbreak_time_days) : ojson();
    o["rng_seed"] = w.rng_seed;
    o["runs"] = w.runs;
    if (w.p_post_override) o["p_post_override"] = write_time_cost(*w.p_post_override);
    return o;
}

PolicySpec read_policy(const Ctx& ctx, const ojson& v, const std::string& path) {
    const ojson& o = object_at(ctx, v, path,
                               {"threshold_units_per_year", "threshold_label", "grace_period_days",
                                "forecast_horizon_days", "forecast_window_days",
                                "forecast_warmup_days"});
    PolicySpec p;
    p.threshold_units_per_year = number(ctx, o, path, "threshold_units_per_year");
    if (const ojson* x = find(o, "threshold_label")) {
        p.threshold_label = as_string(ctx, *x, join(path, "threshold_label"));
    }
    p.grace_period_days = number_or(ctx, o, path, "grace_period_days", 30.0);
    p.forecast_horizon_days = number_or(ctx, o, path, "forecast_horizon_days", p.grace_period_days);
    p.forecast_window_days = number_or(ctx, o, path, "forecast_window_days", 365.0);
    p.forecast_warmup_days = opt_number(ctx, o, path, "forecast_warmup_days");
    return p;
}

ojson write_policy(const PolicySpec& p) {
    ojson o = ojson::object();
    o["threshold_units_per_year"] = p.threshold_units_per_year;
    o["threshold_label"] = p.threshold_label;
    o["grace_period_days"] = p.grace_period_days;
    o["forecast_horizon_days"] = p.forecast_horizon_days;
    o["forecast_window_days"] = p.forecast_window_days;
    if (p.forecast_warmup_days) o["forecast_warmup_days"] = *p.forecast_warmup_days;
    return o;
}

EngineSpec read_engine(const Ctx& ctx, const ojson& v, const std::string& path) {
    const ojson& o = object_at(ctx, v, path,
                               {"post_curve_grid_points", "quadrature_relative_tolerance",
                                "effort_tail_mass"});
    EngineSpec e;
    if (const ojson* x = find(o, "post_curve_grid_points")) {
        e.post_curve_grid_points = as_integer(ctx, *x, join(path, "post_curve_grid_points"));
    }
    e.quadrature_relative_tolerance =
        number_or(ctx, o, path, "quadrature_relative_tolerance", e.quadrature_relative_tolerance);
    e.effort_tail_mass = number_or(ctx, o, path, "effort_tail_mass", e.effort_tail_mass);
    return e;
}

ojson write_engine(const EngineSpec& e) {
    return {{"post_curve_grid_points", e.post_curve_grid_points},
            {"quadrature_relative_tolerance", e.quadrature_relative_tolerance},
            {"effort_tail_mass", e.effort_tail_mass}};
}

ScenarioFile read_scenario(const Ctx& ctx, const ojson& doc) {
    const ojson& o = object_at(ctx, doc, "",
                               {"schema_version", "threat_model", "evasion", "whatif", "policy",
                                "engine", "evidence", "metadata"});
    ScenarioFile s;
    s.schema_version = as_integer(ctx, need(ctx, o, "", "schema_version"), "schema_version");
    if (s.schema_version != kScenarioSchemaVersion) {
        fail(ctx, "schema", "schema_version",
             "unsupported schema_version " + std::to_string(s.schema_version) +
                 "; supported versions: " + std::to_string(kScenarioSchemaVersion));
    }
    s.threat_model = read_threat(ctx, need(ctx, o, "", "threat_model"), "threat_model");
    s.evasion = read_evasion(ctx, need(ctx, o, "", "evasion"), "evasion");
    s.whatif = read_whatif(ctx, need(ctx, o, "", "whatif"), "whatif");
    s.policy = read_policy(ctx, need(ctx, o, "", "policy"), "policy");
    if (const ojson* x = find(o, "engine")) s.engine = read_engine(ctx, *x, "engine");
    if (const ojson* x = find(o, "evidence")) {
        if (!x->is_object()) fail(ctx, "schema", "evidence", "expected a mapping");
        for (const auto& [claim, items] : x->items()) {
            const std::string p = join("evidence", claim);
            auto& slot = s.evidence[claim];
            if (items.is_string()) {
                slot.push_back(items.get<std::string>());
                continue;
            }
            const ojson& arr = array_at(ctx, items, p);
            for (std::size_t i = 0; i < arr.size(); ++i) {
                slot.push_back(as_string(ctx, arr[i], index(p, i)));
            }
        }
    }
    if (const ojson* x = find(o, "metadata")) s.metadata = *x;
    return s;
}

// ---------------------------------------------------------------- resolution

template <class Fn>
auto with_field(const std::string& field, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(e.kind(), field + ": " + e.what(), field);
    }
}

TimeCostCurve build_curve(const TimeCostSpec& spec, const std::string& field) {
    return with_field(field, [&] {
        if (!spec.logistic) {
            if (spec.points.empty()) {
                throw ValidationError("range", "curve needs at least one knot");
            }
            return TimeCostCurve(spec.points);
        }
        const LogisticSpec& l = *spec.logistic;
        if (!(l.knots >= 2 && l.knots <= 100000)) {
            throw ValidationError("range", "logistic knots must lie in [2, 100000]");
        }
        if (!(std::isfinite(l.until_days) && l.until_days > 0.0)) {
            throw ValidationError("range", "logistic until_days must be positive");
        }
        if (!(l.max_probability >= 0.0 && l.max_probability <= 1.0)) {
            throw ValidationError("range", "logistic max_probability must lie in [0,1]");
        }
        if (!(std::isfinite(l.steepness_per_day) && l.steepness_per_day >= 0.0) ||
            !std::isfinite(l.midpoint_days)) {
            throw ValidationError("range", "logistic steepness must be finite and >= 0");
        }
        return sample_time_cost_curve(
            [&](double t) {
                return l.max_probability /
                       (1.0 + std::exp(-l.steepness_per_day * (t - l.midpoint_days)));
            },
            l.until_days, static_cast<std::size_t>(l.knots));
    });
}

EffortDistribution build_effort(const EffortSpec& e) {
    return with_field("threat_model.effort", [&] {
        switch (e.kind) {
            case EffortDistribution::Kind::exponential:
                return EffortDistribution::exponential(e.mean_days);
            case EffortDistribution::Kind::lognormal:
                return EffortDistribution::lognormal(e.log_mean_ln_days, e.log_sd);
            case EffortDistribution::Kind::empirical:
                return EffortDistribution::empirical(e.samples);
        }
        throw InternalError("unknown effort kind");
    });
}

std::vector<SessionRecord> gather_records(const std::optional<std::string>& log,
                                          const std::vector<SessionRecord>& inline_events,
                                          const std::filesystem::path& base_dir) {
    std::vector<SessionRecord> out;
    if (log) {
        out = read_session_log(base_dir / *log);
    }
    out.insert(out.end(), inline_events.begin(), inline_events.end());
    return out;
}

std::vector<RedTeamSession> with_fulfillments(std::vector<RedTeamSession> sessions,
                                              const char* label,
                                              std::vector<std::string>& warnings) {
    std::vector<RedTeamSession> kept;
    for (auto& s : sessions) {
        const bool any = std::any_of(s.events.begin(), s.events.end(), [](const SessionEvent& e) {
            return e.kind == EventKind::fulfillment;
        });
        if (any) {
            kept.push_back(std::move(s));
        } else {
            warnings.push_back(std::string(label) + " '" + s.actor_id +
                               "' has no fulfillment events and was skipped");
        }
    }
    return kept;
}

void resolve_sessions(const SessionSourceSpec& spec, const std::filesystem::path& base_dir,
                      ResolvedScenario& out) {
    const std::string field = "evasion.sessions";
    with_field(field + ".ban_cost", [&] { validate(spec.ban_cost); });
    if (spec.patch_policy) {
        with_field(field + ".patch_policy", [&] { validate(*spec.patch_policy); });
    }
    if (spec.variants_per_discovery < 1) {
        throw ValidationError("range", field + ".variants_per_discovery: must be >= 1",
                              field + ".variants_per_discovery");
    }
    if (spec.aggregation.kind == AggregationMethod::Kind::lower_quantile &&
        !(spec.aggregation.q > 0.0 && spec.aggregation.q <= 1.0)) {
        throw ValidationError("range", field + ".aggregation.q: must lie in (0,1]",
                              field + ".aggregation.q");
    }
    if (spec.tail_slope_days_per_request && !(*spec.tail_slope_days_per_request >= 0.0 &&
                                              std::isfinite(*spec.tail_slope_days_per_request))) {
        throw ValidationError("range", field + ".tail_slope_days_per_request: must be >= 0",
                              field + ".tail_slope_days_per_request");
    }

    auto base = with_field(field, [&] {
        return group_sessions(gather_records(spec.log, spec.events, base_dir));
    });
    auto variants = with_field(field, [&] {
        return group_sessions(gather_records(spec.variant_log, spec.variant_events, base_dir));
    });
    base = with_fulfillments(std::move(base), "actor", out.warnings);
    variants = with_fulfillments(std::move(variants), "variant actor", out.warnings);
    if (base.empty()) {
        throw ValidationError("range", field + ": no actor has any fulfillment event", field);
    }

    const auto weighted = expand_variants(std::move(base), std::move(variants),
                                          1.0 / static_cast<double>(spec.variants_per_discovery));
    out.actor_curves = build_actor_curves(weighted, spec.ban_cost, spec.patch_policy);
    out.bans = spec.ban_cost;
    out.patching = spec.patch_policy;

    auto with_tail = [&](const EvasionCostCurve& c) {
        if (!spec.tail_slope_days_per_request) return c;
        const auto pts = c.points();
        return EvasionCostCurve(pts, spec.tail_slope_days_per_request);
    };
    std::vector<WeightedCurve> members;
    for (const auto& a : out.actor_curves) members.push_back({a.curve, a.weight});
    if (spec.combine == SessionSourceSpec::Combine::aggregate) {
        out.evasion = EvasionModel::single(with_tail(aggregate_curves(members, spec.aggregation)));
    } else {
        out.evasion.mode = EvasionModel::Mode::ensemble;
        for (const auto& m : members) out.evasion.curves.push_back({with_tail(m.curve), m.weight});
    }
}

void resolve_curves(const EvasionSpec& spec, ResolvedScenario& out) {
    if (spec.curves.empty()) {
        throw ValidationError("range", "evasion.curves: at least one curve is required",
                              "evasion.curves");
    }
    if (spec.mode == EvasionModel::Mode::single_curve && spec.curves.size() != 1) {
        throw ValidationError("range", "evasion.curves: single_curve mode takes exactly one curve",
                              "evasion.curves");
    }
    out.evasion.mode = spec.mode;
    for (std::size_t i = 0; i < spec.curves.size(); ++i) {
        const auto& c = spec.curves[i];
        const std::string field = index("evasion.curves", i);
        if (!(std::isfinite(c.weight) && c.weight > 0.0)) {
            throw ValidationError("range", field + ".weight: must be positive", field + ".weight");
        }
        out.evasion.curves.push_back(
            {with_field(field, [&] { return EvasionCostCurve(c.points, c.tail_slope_days_per_request); }),
             c.weight});
    }
}

void check(bool ok, const std::string& field, const std::string& msg) {
    if (!ok) throw ValidationError("range", field + ": " + msg, field);
}

std::string read_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("io", std::string("cannot read ") + what + " " + path.string(), "");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

ScenarioFile scenario_from_json(const ojson& doc) {
    return read_scenario(Ctx{}, doc);
}

ScenarioFile scenario_from_text(std::string_view text, const std::string& source_name) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw ValidationError("parse",
                              source_name + ":" + std::to_string(e.mark.line + 1) + ":" +
                                  std::to_string(e.mark.column + 1) + ": " + e.msg,
                              "");
    }
    LineMap lines;
    const ojson doc = yaml_to_json(root, "", lines);
    return read_scenario(Ctx{&lines}, doc);
}

ojson scenario_to_json(const ScenarioFile& s) {
    ojson o = ojson::object();
    o["schema_version"] = s.schema_version;
    o["threat_model"] = write_threat(s.threat_model);
    o["evasion"] = write_evasion(s.evasion);
    o["whatif"] = write_whatif(s.whatif);
    o["policy"] = write_policy(s.policy);
    o["engine"] = write_engine(s.engine);
    ojson ev = ojson::object();
    for (const auto& [claim, items] : s.evidence) ev[claim] = items;
    o["evidence"] = std::move(ev);
    o["metadata"] = s.metadata;
    return o;
}

std::string scenario_to_yaml(const ScenarioFile& s) {
    std::string out;
    emit_block(scenario_to_json(s), 0, out);
    return out;
}

ResolvedScenario resolve_scenario(const ScenarioFile& s, const std::filesystem::path& base_dir) {
    if (s.schema_version != kScenarioSchemaVersion) {
        throw ValidationError("schema",
                              "unsupported schema_version " + std::to_string(s.schema_version) +
                                  "; supported versions: " +
                                  std::to_string(kScenarioSchemaVersion),
                              "schema_version");
    }
    ResolvedScenario out;
    out.file = s;
    out.base_dir = base_dir;

    const ThreatModelSpec& t = s.threat_model;
    ThreatModelParams& p = out.params;
    p.attempts_per_year = t.attempts_per_year;
    p.damage_per_success = t.damage_units_per_success;
    p.requests_per_day = t.requests_per_day;
    p.resilience_damage_multiplier = t.resilience_damage_multiplier;
    p.resilience_success_multiplier = t.resilience_success_multiplier;
    p.effort = build_effort(t.effort);
    p.p_none = build_curve(t.p_none, "threat_model.p_none");
    p.p_pre = build_curve(t.p_pre, "threat_model.p_pre");
    try {
        validate(p);
    } catch (const ValidationError& e) {
        const std::string field = "threat_model." + e.field();
        throw ValidationError(e.kind(), field + ": " + e.what(), field);
    }

    if (s.evasion.source == EvasionSpec::Source::curves) {
        resolve_curves(s.evasion, out);
    } else {
        if (!s.evasion.sessions) {
            throw ValidationError("schema", "evasion.sessions: required field is missing",
                                  "evasion.sessions");
        }
        resolve_sessions(*s.evasion.sessions, base_dir, out);
    }

    const EngineSpec& eng = s.engine;
    check(eng.post_curve_grid_points >= 2 && eng.post_curve_grid_points <= 1'000'000,
          "engine.post_curve_grid_points", "must lie in [2, 1000000]");
    check(eng.quadrature_relative_tolerance > 0.0 && eng.quadrature_relative_tolerance <= 1e-3,
          "engine.quadrature_relative_tolerance", "must lie in (0, 1e-3]");
    check(eng.effort_tail_mass > 0.0 && eng.effort_tail_mass <= 1e-3, "engine.effort_tail_mass",
          "must lie in (0, 1e-3]");
    out.risk_options.post_grid_points = static_cast<std::size_t>(eng.post_curve_grid_points);
    out.risk_options.relative_tolerance = eng.quadrature_relative_tolerance;
    out.risk_options.tail_mass = eng.effort_tail_mass;

    const WhatIfSpec& w = s.whatif;
    check(w.runs >= 1, "whatif.runs", "must be at least 1");
    check(std::isfinite(w.simulation_end_days) && w.simulation_end_days > 0.0 &&
              w.simulation_end_days <= 100000.0,
          "whatif.simulation_end_days", "must lie in (0, 100000]");
    if (w.jailbreak_time_days) {
        check(std::isfinite(*w.jailbreak_time_days) && *w.jailbreak_time_days >= 0.0,
              "whatif.jailbreak_time_days", "must be finite and >= 0 (omit or null for never)");
    }
    WhatIfConfig tmpl;
    tmpl.simulation_end = w.simulation_end_days;
    tmpl.jailbreak_time = w.jailbreak_time_days.value_or(kNever);
    tmpl.rng_seed = w.rng_seed;
    tmpl.runs = static_cast<std::size_t>(w.runs);
    std::optional<TimeCostCurve> override_curve;
    if (w.p_post_override) {
        override_curve = build_curve(*w.p_post_override, "whatif.p_post_override");
    }
    out.whatif = deployment_config(p, out.evasion, tmpl, override_curve,
                                   out.risk_options.post_grid_points);
    with_field("whatif", [&] { validate(out.whatif); });

    const PolicySpec& pol = s.policy;
    out.threshold = {pol.threshold_units_per_year, pol.threshold_label};
    out.grace = {pol.grace_period_days};
    with_field("policy", [&] {
        validate(out.threshold);
        validate(out.grace);
    });
    check(std::isfinite(pol.forecast_horizon_days) && pol.forecast_horizon_days >= 0.0 &&
              pol.forecast_horizon_days <= 10000.0,
          "policy.forecast_horizon_days", "must lie in [0, 10000]");
    check(std::isfinite(pol.forecast_window_days) && pol.forecast_window_days > 0.0 &&
              pol.forecast_window_days <= 10000.0,
          "policy.forecast_window_days", "must lie in (0, 10000]");
    if (pol.forecast_warmup_days) {
        check(std::isfinite(*pol.forecast_warmup_days) && *pol.forecast_warmup_days >= 0.0 &&
                  *pol.forecast_warmup_days <= 10000.0,
              "policy.forecast_warmup_days", "must lie in [0, 10000]");
    }
    out.forecast.warmup_days = pol.forecast_warmup_days;
    out.forecast.window_days = pol.forecast_window_days;

    for (auto& warning : effort_warnings(p.effort)) out.warnings.push_back(std::move(warning));
    for (auto& warning : simulation_warnings(out.whatif)) out.warnings.push_back(std::move(warning));
    out.digest = scenario_digest(s, base_dir);
    return out;
}

ScenarioFile load_scenario(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    ScenarioFile s = scenario_from_text(read_file(path, "scenario"), path.filename().string());
    ResolvedScenario r = resolve_scenario(s, path.parent_path());
    if (warnings) *warnings = std::move(r.warnings);
    return s;
}

ResolvedScenario load_resolved_scenario(const std::filesystem::path& path) {
    return resolve_scenario(
        scenario_from_text(read_file(path, "scenario"), path.filename().string()),
        path.parent_path());
}

void save_scenario(const ScenarioFile& s, const std::filesystem::path& path) {
    const std::string text =
        path.extension() == ".json" ? scenario_to_json(s).dump(2) + "\n" : scenario_to_yaml(s);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) {
        throw ValidationError("io", "cannot write scenario " + path.string(), "");
    }
}

std::string scenario_digest(const ScenarioFile& s, const std::filesystem::path& base_dir) {
    json canonical = to_plain(scenario_to_json(s));
    canonical.erase("metadata");
    if (s.evasion.sessions) {
        json files = json::object();
        for (const auto& log : {s.evasion.sessions->log, s.evasion.sessions->variant_log}) {
            if (log) files[*log] = sha256_hex(read_file(base_dir / *log, "session log"));
        }
        canonical["referenced_files"] = std::move(files);
    }
    return sha256_hex(canonical.dump());
}

}  // namespace misuse
