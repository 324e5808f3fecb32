#include "misuse/safety_case.hpp"

#include <sstream>

#include "misuse/errors.hpp"

namespace misuse {

using nlohmann::json;

namespace {

struct ClaimText {
    const char* id;
    const char* statement;
};

constexpr ClaimText kClaims[] = {
    {"C0", "Misuse risk from the assistant in the assessed harm pathway stays below the risk threshold."},
    {"C1", "The assistant cannot exceed the threshold in this pathway by means other than the modeled misuse attempts."},
    {"C2", "With safeguards maintained and response policies followed, risk from modeled attempts stays below the threshold."},
    {"C2.1", "If forecast risk reaches the threshold, the developer responds before the grace period runs out."},
    {"C2.2", "Safeguard evaluations yield a conservative forecast of risk over the grace period."},
    {"C2.2.1", "The primary safeguard evaluation overstates how easily safeguards are evaded."},
    {"C2.2.1.2", "Evaluation requests are representative of requests real actors need answered."},
    {"C2.2.1.3", "The evaluated safeguards are no stronger than deployed safeguards, account bans aside."},
    {"C2.2.1.4", "Red-team actors are at least as capable as the novice actors in the threat model."},
    {"C2.2.1.5", "The model behaves the same under evaluation as in deployment."},
    {"C2.2.2", "The time lost to account bans is estimated conservatively and added to evasion cost."},
    {"C2.2.3", "The uplift model turns evaluation results into a conservative estimate of current risk."},
    {"C2.2.4", "Simulating complete safeguard failure bounds risk over the forecast horizon."},
    {"C2.3", "The worst-case forecast over the horizon lies below the threshold."},
    {"C3", "Safeguards are kept in place or strengthened for as long as the model is deployed."},
};

const char* statement_for(const std::string& id) {
    for (const auto& c : kClaims) {
        if (id == c.id) return c.statement;
    }
    throw InternalError("unknown claim id " + id);
}

ClaimNode node(const std::string& id, const SafetyCaseInputs& in) {
    ClaimNode n;
    n.id = id;
    n.statement = statement_for(id);
    if (auto it = in.evidence.find(id); it != in.evidence.end()) {
        n.evidence = it->second;
    }
    return n;
}

ClaimNode quantitative(const std::string& id, const SafetyCaseInputs& in) {
    ClaimNode n = node(id, in);
    n.quantitative = true;
    return n;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void check_inputs(const SafetyCaseInputs& in) {
    std::vector<std::string> missing;
    if (!in.risk_none || !in.risk_pre || !in.risk_post) {
        missing.push_back("[C2.2.3] risk estimates for none, pre and post");
    }
    if (!in.forecast_risk || !in.forecast_horizon_days) {
        missing.push_back("[C2.2.4] worst-case forecast");
    }
    if (!in.monitor) {
        missing.push_back("[C2.3] monitoring decision");
    }
    if (missing.empty()) return;
    std::string msg = "safety case is missing computed inputs:";
    for (const auto& m : missing) msg += " " + m + ";";
    msg.pop_back();
    throw UsageError(msg);
}

json node_to_json(const ClaimNode& n) {
    json j = json::object();
    j["id"] = n.id;
    j["statement"] = n.statement;
    j["kind"] = n.quantitative ? "quantitative" : "qualitative";
    json values = json::array();
    for (const auto& [name, v] : n.values) values.push_back({{"name", name}, {"value", v}});
    j["values"] = std::move(values);
    if (n.verdict) j["verdict"] = *n.verdict;
    j["evidence"] = n.evidence;
    if (!n.quantitative) j["evidence_status"] = n.evidence.empty() ? "todo" : "supplied";
    json children = json::array();
    for (const auto& c : n.children) children.push_back(node_to_json(c));
    j["children"] = std::move(children);
    return j;
}

ClaimNode node_from_json(const json& j) {
    ClaimNode n;
    n.id = j.at("id").get<std::string>();
    n.statement = j.at("statement").get<std::string>();
    n.quantitative = j.at("kind").get<std::string>() == "quantitative";
    for (const auto& v : j.at("values")) {
        n.values.emplace_back(v.at("name").get<std::string>(), v.at("value").get<double>());
    }
    if (j.contains("verdict")) n.verdict = j.at("verdict").get<std::string>();
    n.evidence = j.at("evidence").get<std::vector<std::string>>();
    for (const auto& c : j.at("children")) n.children.push_back(node_from_json(c));
    return n;
}

void render_node(const ClaimNode& n, int depth, std::string& out) {
    const std::string pad(static_cast<std::size_t>(2 * depth), ' ');
    out += pad + "[" + n.id + "] " + n.statement + "\n";
    for (const auto& [name, v] : n.values) {
        out += pad + "    " + name + " = " + num(v) + "\n";
    }
    if (n.verdict) out += pad + "    verdict: " + *n.verdict + "\n";
    if (!n.quantitative) {
        if (n.evidence.empty()) {
            out += pad + "    evidence: " + kEvidenceTodo + "\n";
        }
        for (const auto& e : n.evidence) out += pad + "    evidence: " + e + "\n";
    }
    for (const auto& c : n.children) render_node(c, depth + 1, out);
}

}  // namespace

const std::vector<std::string>& claim_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (const auto& c : kClaims) v.emplace_back(c.id);
        return v;
    }();
    return ids;
}

SafetyCaseReport render_safety_case(const SafetyCaseInputs& in) {
    check_inputs(in);
    validate(in.threshold);
    validate(in.grace);

    ClaimNode c2_1 = node("C2.1", in);
    c2_1.values.emplace_back("grace_period_days", in.grace.days);
    c2_1.verdict = std::string("monitoring decision: ") + to_string(in.monitor->verdict);

    ClaimNode c2_2_1 = node("C2.2.1", in);
    if (in.patching) {
        c2_2_1.values.emplace_back("patch_cadence_days", in.patching->wall_clock_cadence);
        c2_2_1.values.emplace_back("patch_fulfillment_trigger",
                                   static_cast<double>(in.patching->fulfillment_trigger));
    }
    for (const char* id : {"C2.2.1.2", "C2.2.1.3", "C2.2.1.4", "C2.2.1.5"}) {
        c2_2_1.children.push_back(node(id, in));
    }

    ClaimNode c2_2_2 = in.bans ? quantitative("C2.2.2", in) : node("C2.2.2", in);
    if (in.bans) {
        c2_2_2.values.emplace_back("days_per_ban", in.bans->time_per_ban);
        if (!in.bans->source_note.empty()) c2_2_2.evidence.push_back(in.bans->source_note);
    }

    ClaimNode c2_2_3 = quantitative("C2.2.3", in);
    c2_2_3.values = {
        {"risk_none_units_per_year", in.risk_none->annualized_risk},
        {"risk_pre_units_per_year", in.risk_pre->annualized_risk},
        {"risk_post_units_per_year", in.risk_post->annualized_risk},
        {"uplift_units_per_year", in.risk_post->annualized_risk - in.risk_none->annualized_risk},
    };
    if (in.predeployment) {
        c2_2_3.verdict = std::string("pre-deployment gate: ") + to_string(in.predeployment->verdict);
    }

    ClaimNode c2_2_4 = quantitative("C2.2.4", in);
    c2_2_4.values = {
        {"forecast_risk_units_per_year", *in.forecast_risk},
        {"forecast_horizon_days", *in.forecast_horizon_days},
    };
    if (in.crossing_latency_days) {
        c2_2_4.values.emplace_back("crossing_latency_days", *in.crossing_latency_days);
    } else {
        c2_2_4.verdict = "threshold not crossed within the simulated window";
    }

    ClaimNode c2_3 = quantitative("C2.3", in);
    c2_3.values = {
        {"forecast_risk_units_per_year", *in.forecast_risk},
        {"threshold_units_per_year", in.threshold.value},
        {"margin_units_per_year", in.threshold.value - *in.forecast_risk},
    };
    c2_3.verdict = *in.forecast_risk < in.threshold.value
                       ? std::string("holds (monitoring decision: ok)")
                       : std::string("does not hold (monitoring decision: ") +
                             to_string(in.monitor->verdict) + ")";

    ClaimNode c2_2 = node("C2.2", in);
    c2_2.children = {std::move(c2_2_1), std::move(c2_2_2), std::move(c2_2_3), std::move(c2_2_4)};
    ClaimNode c2 = node("C2", in);
    c2.children = {std::move(c2_1), std::move(c2_2), std::move(c2_3)};
    ClaimNode c0 = node("C0", in);
    c0.children = {node("C1", in), std::move(c2), node("C3", in)};

    SafetyCaseReport report;
    report.threshold = in.threshold;
    report.decision_rule =
        "ok while the worst-case forecast is below the threshold; otherwise restrict access when "
        "the forecast crosses the threshold within the " + num(in.grace.days) +
        "-day grace period of safeguard failure, and harden safeguards when it crosses later or "
        "not at all";
    report.provenance = in.provenance;
    report.root = std::move(c0);
    return report;
}

json to_json(const SafetyCaseReport& r) {
    return {{"threshold", {{"value_units_per_year", r.threshold.value}, {"label", r.threshold.label}}},
            {"decision_rule", r.decision_rule},
            {"provenance", r.provenance},
            {"root", node_to_json(r.root)}};
}

SafetyCaseReport safety_case_from_json(const json& j) {
    SafetyCaseReport r;
    r.threshold.value = j.at("threshold").at("value_units_per_year").get<double>();
    r.threshold.label = j.at("threshold").at("label").get<std::string>();
    r.decision_rule = j.at("decision_rule").get<std::string>();
    r.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    r.root = node_from_json(j.at("root"));
    return r;
}

std::string render_text(const SafetyCaseReport& r) {
    std::string out = "Safety case against threshold " + num(r.threshold.value) +
                      " harm units/year";
    if (!r.threshold.label.empty()) out += " (" + r.threshold.label + ")";
    out += "\nDecision rule: " + r.decision_rule + "\n\n";
    render_node(r.root, 0, out);
    if (!r.provenance.empty()) {
        out += "\nParameter provenance\n";
        for (const auto& [name, text] : r.provenance) out += "  " + name + ": " + text + "\n";
    }
    return out;
}

}  // namespace misuse
